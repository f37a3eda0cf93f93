use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::epidemic::RegionGraph;
use crate::error::{EpiError, Result};
use crate::interventions::apportion;
use crate::network::build_suite;
use crate::params::{BehaviorParams, CountryProfile};
use crate::rng::{substream, Purpose};
use crate::state::{NodeFlags, NodeState};

/// Which region's infected drive the cross-region exposure term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixingOrder {
    /// Infected of the other regions expose this region's susceptibles.
    #[default]
    Corrected,
    /// This region's infected, times the other regions' susceptibles.
    AsWritten,
}

/// Layout and coupling settings of the decomposed population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub min_region_size: usize,
    pub max_region_size: usize,
    pub mean_region_size: usize,
    /// Daily probability of an imported case per region.
    pub p_int: f64,
    pub mixing_order: MixingOrder,
    /// Day on which one exposed node is placed in every region.
    pub seed_day: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            min_region_size: 2500,
            max_region_size: 3500,
            mean_region_size: 3000,
            p_int: 0.01,
            mixing_order: MixingOrder::Corrected,
            seed_day: 30,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_region_size < 5 || self.min_region_size > self.max_region_size {
            return Err(EpiError::param(
                "min_region_size",
                format!(
                    "need 5 <= min <= max, got [{}, {}]",
                    self.min_region_size, self.max_region_size
                ),
            ));
        }
        if !(self.min_region_size..=self.max_region_size).contains(&self.mean_region_size) {
            return Err(EpiError::param("mean_region_size", "must lie within the size bounds"));
        }
        if !(0.0..=1.0).contains(&self.p_int) {
            return Err(EpiError::param("p_int", "must be in [0, 1]"));
        }
        Ok(())
    }
}

/// The whole simulated population: disjoint regions coupled by mixing.
#[derive(Debug, Clone)]
pub struct World {
    pub regions: Vec<RegionGraph>,
    pub n_total: usize,
    pub r_mix: f64,
    pub p_int: f64,
    pub scale_factor: f64,
    pub mixing_order: MixingOrder,
}

/// Number of nodes standing for `country`.
pub fn target_nodes(country: &CountryProfile) -> usize {
    (country.population as f64 / country.scale_factor).round() as usize
}

/// Region sizes: uniform draws in the size bounds, rescaled towards the
/// target total and clamped back into the bounds.
pub fn region_sizes<R: Rng + ?Sized>(target: usize, cfg: &WorldConfig, rng: &mut R) -> Result<Vec<usize>> {
    if target < cfg.min_region_size {
        return Err(EpiError::InvalidInput(format!(
            "population of {target} nodes is too small for one region of at least {}",
            cfg.min_region_size
        )));
    }
    let m = ((target as f64 / cfg.mean_region_size as f64).round() as usize).max(1);
    let raw: Vec<usize> = (0..m)
        .map(|_| rng.gen_range(cfg.min_region_size..=cfg.max_region_size))
        .collect();
    Ok(apportion(target as u64, &raw)
        .into_iter()
        .map(|s| (s as usize).clamp(cfg.min_region_size, cfg.max_region_size))
        .collect())
}

impl World {
    /// Lays out regions, child flags and contact suites for one run. All
    /// nodes start susceptible.
    pub fn build(
        country: &CountryProfile,
        behavior: &BehaviorParams,
        cfg: &WorldConfig,
        seed: u64,
    ) -> Result<World> {
        country.validate()?;
        behavior.validate()?;
        cfg.validate()?;
        let mut layout = substream(seed, Purpose::WorldLayout, 0);
        let sizes = region_sizes(target_nodes(country), cfg, &mut layout)?;
        let regions = sizes
            .iter()
            .enumerate()
            .map(|(id, &n)| {
                let mut graph_rng = substream(seed, Purpose::Graph, id as u64);
                let suite = build_suite(n, behavior, &mut graph_rng)?;
                let children = (country.child_fraction * n as f64).round() as usize;
                let mut flags = vec![NodeFlags::default(); n];
                for i in index::sample(&mut graph_rng, n, children.min(n)) {
                    flags[i].child = true;
                }
                RegionGraph::new(id, suite, flags, substream(seed, Purpose::Dynamics, id as u64))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(World {
            n_total: sizes.iter().sum(),
            regions,
            r_mix: behavior.r_mix,
            p_int: cfg.p_int,
            scale_factor: country.scale_factor,
            mixing_order: cfg.mixing_order,
        })
    }

    pub fn region_sizes(&self) -> Vec<usize> {
        self.regions.iter().map(|r| r.len()).collect()
    }

    /// Moves one uniformly chosen susceptible node per region to E.
    pub fn seed_infection(&mut self) {
        for region in &mut self.regions {
            expose_one(region);
        }
    }

    /// Expected extra exposures per region from cross-region contact.
    pub fn mixing_expectations(&self, p_e: f64) -> Vec<f64> {
        let infected: Vec<f64> = self
            .regions
            .iter()
            .map(|r| r.states.iter().filter(|s| s.is_infectious()).count() as f64)
            .collect();
        let susceptible: Vec<f64> = self
            .regions
            .iter()
            .map(|r| r.states.iter().filter(|&&s| s == NodeState::S).count() as f64)
            .collect();
        mixing_expectations(
            &infected,
            &susceptible,
            self.r_mix,
            p_e,
            self.n_total as f64,
            self.mixing_order,
        )
    }

    /// Applies cross-region exposures for the day. Returns the realised
    /// exposures per region.
    pub fn mix_regions(&mut self, p_e: f64, internal_travel_open: bool, v_eff1: f64) -> Vec<u32> {
        if !internal_travel_open {
            return vec![0; self.regions.len()];
        }
        let expected = self.mixing_expectations(p_e);
        use rayon::prelude::*;
        self.regions
            .par_iter_mut()
            .zip(expected.par_iter())
            .map(|(region, &e)| apply_mixing(region, e, v_eff1))
            .collect()
    }

    /// Each region independently receives one imported exposed case with
    /// probability `p_int` when international travel is open.
    pub fn import_cases(&mut self, international_open: bool) -> usize {
        if !international_open {
            return 0;
        }
        let p_int = self.p_int;
        self.regions
            .iter_mut()
            .map(|r| import_case(r, p_int) as usize)
            .sum()
    }
}

/// Cross-region exposure expectations.
///
/// With the corrected order, region `i` gets
/// `sum_{j != i} r_mix * p_e / n_total * infected_j * susceptible_i`.
pub fn mixing_expectations(
    infected: &[f64],
    susceptible: &[f64],
    r_mix: f64,
    p_e: f64,
    n_total: f64,
    order: MixingOrder,
) -> Vec<f64> {
    let rate = r_mix * p_e / n_total;
    let infected_total: f64 = infected.iter().sum();
    let susceptible_total: f64 = susceptible.iter().sum();
    infected
        .iter()
        .zip(susceptible)
        .map(|(&inf, &sus)| match order {
            MixingOrder::Corrected => rate * (infected_total - inf) * sus,
            MixingOrder::AsWritten => rate * inf * (susceptible_total - sus),
        })
        .collect()
}

/// Floor plus a Bernoulli draw on the fractional part.
pub fn stochastic_round<R: Rng + ?Sized>(x: f64, rng: &mut R) -> u64 {
    let base = x.floor();
    let frac = x - base;
    base as u64 + (rng.gen::<f64>() < frac) as u64
}

pub(crate) fn apply_mixing(region: &mut RegionGraph, expected: f64, v_eff1: f64) -> u32 {
    if expected <= 0.0 {
        return 0;
    }
    let draws = stochastic_round(expected, &mut region.rng) as usize;
    if draws == 0 {
        return 0;
    }
    let pool: Vec<usize> = (0..region.len())
        .filter(|&i| region.states[i] == NodeState::S)
        .collect();
    let picks: Vec<usize> = if draws >= pool.len() {
        pool
    } else {
        let mut p: Vec<usize> = index::sample(&mut region.rng, pool.len(), draws)
            .into_iter()
            .map(|k| pool[k])
            .collect();
        p.sort_unstable();
        p
    };
    let mut exposed = 0;
    for i in picks {
        if region.flags[i].vaccinated && region.rng.gen::<f64>() < v_eff1 {
            continue;
        }
        region.expose(i);
        exposed += 1;
    }
    exposed
}

fn expose_one(region: &mut RegionGraph) -> bool {
    let pool: Vec<usize> = (0..region.len())
        .filter(|&i| region.states[i] == NodeState::S)
        .collect();
    if pool.is_empty() {
        return false;
    }
    let i = pool[region.rng.gen_range(0..pool.len())];
    region.expose(i);
    true
}

pub(crate) fn import_case(region: &mut RegionGraph, p_int: f64) -> bool {
    if region.rng.gen::<f64>() >= p_int {
        return false;
    }
    expose_one(region)
}
