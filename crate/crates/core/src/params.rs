//! Model parameters.
//!
//! [`EpiParams`] describes the disease and is shared by every country;
//! [`BehaviorParams`] describes how a population reacts to restrictions and
//! is fitted per country.

use serde::{Deserialize, Serialize};

use crate::error::{EpiError, Result};

/// Disease-level transition probabilities (all per day unless noted).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpiParams {
    /// E -> I (inverse latency).
    pub p_i: f64,
    /// Probability that an infection is symptomatic.
    pub p_sy: f64,
    /// Sy -> H.
    pub p_syh: f64,
    /// Sy/Asy -> R.
    pub p_r: f64,
    /// H -> R.
    pub p_hr: f64,
    /// H -> D.
    pub p_hd: f64,
    /// Quarantine exit, Q_S -> S and Q_E -> E.
    pub p_s: f64,
    /// Vaccine protection against exposure.
    pub v_eff1: f64,
    /// Vaccine protection against symptoms.
    pub v_eff2: f64,
}

impl Default for EpiParams {
    fn default() -> Self {
        Self {
            p_i: 0.08,
            p_sy: 0.5,
            p_syh: 0.006,
            p_r: 1.0 / 29.0,
            p_hr: 1.0 / 11.0,
            p_hd: 0.03,
            p_s: 1.0 / 14.0,
            v_eff1: 0.95,
            v_eff2: 0.7,
        }
    }
}

fn check_unit(field: &'static str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(EpiError::param(field, format!("{v} is outside [0, 1]")));
    }
    Ok(())
}

impl EpiParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p_i", self.p_i),
            ("p_sy", self.p_sy),
            ("p_syh", self.p_syh),
            ("p_r", self.p_r),
            ("p_hr", self.p_hr),
            ("p_hd", self.p_hd),
            ("p_s", self.p_s),
            ("v_eff1", self.v_eff1),
            ("v_eff2", self.v_eff2),
        ] {
            check_unit(name, v)?;
        }
        if self.p_syh + self.p_r > 1.0 {
            return Err(EpiError::param("p_syh", "p_syh + p_r exceeds 1"));
        }
        if self.p_hr + self.p_hd > 1.0 {
            return Err(EpiError::param("p_hd", "p_hr + p_hd exceeds 1"));
        }
        if self.p_s + self.p_i > 1.0 {
            return Err(EpiError::param("p_s", "p_s + p_i exceeds 1"));
        }
        Ok(())
    }
}

/// Country-specific behavioural parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorParams {
    pub p_e_min: f64,
    pub p_e_max: f64,
    /// Months needed for the exposure probability to recover after a lockdown.
    pub t_ramp: f64,
    pub p_ct_2: f64,
    pub p_ct_3: f64,
    /// Rewiring probability of the small-world layers.
    pub p_l: f64,
    /// Expected degree added by each random overlay.
    pub p_rxs: f64,
    pub p_rs: f64,
    pub p_rm: f64,
    pub p_rl: f64,
    /// Inter-region mixing weight.
    pub r_mix: f64,
}

impl BehaviorParams {
    pub fn gbr() -> Self {
        Self {
            p_e_min: 0.075,
            p_e_max: 0.33,
            t_ramp: 11.0,
            p_ct_2: 0.65,
            p_ct_3: 0.8,
            p_l: 0.006,
            p_rxs: 1.5,
            p_rs: 0.8,
            p_rm: 1.5,
            p_rl: 0.8,
            r_mix: 0.065,
        }
    }

    pub fn isr() -> Self {
        Self {
            p_e_min: 0.085,
            p_e_max: 0.45,
            t_ramp: 8.0,
            p_ct_2: 0.65,
            p_ct_3: 0.8,
            p_l: 0.004,
            p_rxs: 0.9,
            p_rs: 1.5,
            p_rm: 1.0,
            p_rl: 0.8,
            r_mix: 0.065,
        }
    }

    /// Overlay degrees in suite order (R_xs, R_s, R_m, R_l).
    pub fn overlay_degrees(&self) -> [f64; 4] {
        [self.p_rxs, self.p_rs, self.p_rm, self.p_rl]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_e_min > 0.0 && self.p_e_min < self.p_e_max && self.p_e_max <= 1.0) {
            return Err(EpiError::param(
                "p_e_min",
                format!(
                    "need 0 < p_e_min < p_e_max <= 1, got ({}, {})",
                    self.p_e_min, self.p_e_max
                ),
            ));
        }
        if !(self.p_ct_2 > 0.0 && self.p_ct_2 < self.p_ct_3 && self.p_ct_3 <= 1.0) {
            return Err(EpiError::param(
                "p_ct_2",
                format!(
                    "need 0 < p_ct_2 < p_ct_3 <= 1, got ({}, {})",
                    self.p_ct_2, self.p_ct_3
                ),
            ));
        }
        if !(self.t_ramp > 0.0 && self.t_ramp.is_finite()) {
            return Err(EpiError::param("t_ramp", "must be positive"));
        }
        check_unit("p_l", self.p_l)?;
        check_unit("r_mix", self.r_mix)?;
        for (name, v) in [
            ("p_rxs", self.p_rxs),
            ("p_rs", self.p_rs),
            ("p_rm", self.p_rm),
            ("p_rl", self.p_rl),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(EpiError::param(name, format!("{v} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// Static description of a country used to lay out the simulated world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryProfile {
    pub name: String,
    pub population: u64,
    pub child_fraction: f64,
    pub vaccination_start_day: usize,
    /// Persons represented by one node.
    #[serde(default = "default_scale_factor")]
    pub scale_factor: f64,
}

pub fn default_scale_factor() -> f64 {
    100.0
}

impl CountryProfile {
    pub fn gbr() -> Self {
        Self {
            name: "GBR".into(),
            population: 67_081_000,
            child_fraction: 0.18,
            vaccination_start_day: 354,
            scale_factor: 100.0,
        }
    }

    pub fn isr() -> Self {
        Self {
            name: "ISR".into(),
            population: 9_200_000,
            child_fraction: 0.27,
            vaccination_start_day: 333,
            scale_factor: 100.0,
        }
    }

    /// Same country with the scale factor chosen so that the simulated
    /// population is close to `target_nodes`.
    pub fn at_node_budget(mut self, target_nodes: u64) -> Self {
        self.scale_factor = self.population as f64 / target_nodes as f64;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.population == 0 {
            return Err(EpiError::param("population", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.child_fraction) {
            return Err(EpiError::param("child_fraction", "must be in [0, 1)"));
        }
        if !(self.scale_factor > 0.0 && self.scale_factor.is_finite()) {
            return Err(EpiError::param("scale_factor", "must be positive"));
        }
        Ok(())
    }
}
