//! Counterfactual scenarios built from a baseline policy timeline.
//!
//! | kind | change |
//! |------|--------|
//! | 1 | no measures at all: no restrictions, tests, tracing or vaccines |
//! | 2 | no restrictions, other measures as recorded |
//! | 3 | no testing and no tracing |
//! | 4 | no stay-home orders |
//! | 5 | schools and workplaces fully closed exactly on stay-home days |
//! | 6 | vaccine efficacy scaled by `k` |
//! | 7 | daily vaccines scaled by `k` |
//! | 8 | daily tests scaled by `k` |
//! | 9 | testing starts on day `t0` with a constant daily volume |
//! | 10 | lockdown driven by hospital occupancy |

use serde::{Deserialize, Serialize};

use crate::error::{EpiError, Result};
use crate::metapop::{run_simulation, RunOptions, SimulationConfig, SimulationResult};
use crate::params::EpiParams;
use crate::policy::PolicyDay;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_lock: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_lock: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
}

impl ScenarioSpec {
    pub fn kind(kind: u8) -> Self {
        Self {
            kind,
            k: None,
            t0: None,
            h_lock: None,
            t_lock: None,
            runs: None,
        }
    }

    pub fn with_k(kind: u8, k: f64) -> Self {
        Self {
            k: Some(k),
            ..Self::kind(kind)
        }
    }

    pub fn testing_start(t0: usize) -> Self {
        Self {
            t0: Some(t0),
            ..Self::kind(9)
        }
    }

    pub fn lockdown_rule(h_lock: f64, t_lock: u32) -> Self {
        Self {
            h_lock: Some(h_lock),
            t_lock: Some(t_lock),
            ..Self::kind(10)
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            1..=5 => Ok(()),
            6..=8 => match self.k {
                Some(k) if k >= 0.0 && k.is_finite() => Ok(()),
                Some(k) => Err(EpiError::InvalidInput(format!("scenario factor k = {k} must be >= 0"))),
                None => Err(EpiError::InvalidInput(format!("scenario {} needs a factor k", self.kind))),
            },
            9 => match self.t0 {
                Some(t0) if (30..=180).contains(&t0) => Ok(()),
                Some(t0) => Err(EpiError::InvalidInput(format!("t0 = {t0} outside [30, 180]"))),
                None => Err(EpiError::InvalidInput("scenario 9 needs t0".into())),
            },
            10 => match (self.h_lock, self.t_lock) {
                (Some(h), Some(t)) if h > 0.0 && t >= 1 => Ok(()),
                (Some(_), Some(_)) => Err(EpiError::InvalidInput("need h_lock > 0 and t_lock >= 1".into())),
                _ => Err(EpiError::InvalidInput("scenario 10 needs h_lock and t_lock".into())),
            },
            k => Err(EpiError::InvalidInput(format!("unknown scenario kind {k}"))),
        }
    }
}

/// Occupancy-triggered lockdown parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LockdownRule {
    /// Hospitalised share of the population that triggers a lockdown.
    pub h_lock: f64,
    /// Consecutive below-threshold days needed to lift it.
    pub t_lock: u32,
}

/// Hysteresis state machine for [`LockdownRule`].
///
/// The lockdown switches on as soon as occupancy reaches the threshold and
/// is lifted only after `t_lock` consecutive days below it.
#[derive(Debug, Clone)]
pub struct LockdownController {
    rule: LockdownRule,
    on: bool,
    below: u32,
}

impl LockdownController {
    pub fn new(rule: LockdownRule) -> Self {
        Self {
            rule,
            on: false,
            below: 0,
        }
    }

    pub fn is_on(&self) -> bool {
        self.on
    }

    /// Feeds one day's hospital occupancy and returns the lockdown flag for
    /// the next day.
    pub fn update(&mut self, hospitalized: f64, population: f64) -> bool {
        if hospitalized / population >= self.rule.h_lock {
            self.on = true;
            self.below = 0;
        } else if self.on {
            self.below += 1;
            if self.below >= self.rule.t_lock {
                self.on = false;
                self.below = 0;
            }
        }
        self.on
    }
}

/// Everything a scenario changes relative to the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPlan {
    pub timeline: Vec<PolicyDay>,
    pub epi: EpiParams,
    pub controller: Option<LockdownRule>,
    /// Vaccine scenarios resume from the baseline state at the start of the
    /// vaccination campaign.
    pub resume_at_vaccination_start: bool,
}

fn set_lockdown(day: &mut PolicyDay, stay_home: u8) {
    day.stay_home = stay_home;
    day.internal_travel_open = stay_home == 0;
}

/// Applies a scenario to a baseline timeline and parameter set.
pub fn apply_scenario(baseline: &[PolicyDay], epi: &EpiParams, spec: &ScenarioSpec) -> Result<ScenarioPlan> {
    spec.validate()?;
    if baseline.is_empty() {
        return Err(EpiError::InvalidInput("baseline timeline is empty".into()));
    }
    let mut timeline = baseline.to_vec();
    let mut epi = *epi;
    let mut controller = None;
    let k = spec.k.unwrap_or(1.0);
    match spec.kind {
        1 => {
            for d in &mut timeline {
                set_lockdown(d, 0);
                d.school_closing = 0;
                d.workplace_closing = 0;
                d.testing_policy = 0;
                d.daily_tests = 0.0;
                d.contact_tracing = 1;
                d.daily_vaccines = 0.0;
                d.international_open = true;
            }
        }
        2 => {
            for d in &mut timeline {
                set_lockdown(d, 0);
                d.school_closing = 0;
                d.workplace_closing = 0;
            }
        }
        3 => {
            for d in &mut timeline {
                d.testing_policy = 0;
                d.daily_tests = 0.0;
                d.contact_tracing = 1;
            }
        }
        4 => {
            for d in &mut timeline {
                set_lockdown(d, 0);
            }
        }
        5 => {
            for d in &mut timeline {
                let level = if d.lockdown() { 3 } else { 0 };
                d.school_closing = level;
                d.workplace_closing = level;
            }
        }
        6 => {
            epi.v_eff1 = (epi.v_eff1 * k).clamp(0.0, 1.0);
            epi.v_eff2 = (epi.v_eff2 * k).clamp(0.0, 1.0);
        }
        7 => {
            for d in &mut timeline {
                d.daily_vaccines *= k;
            }
        }
        8 => {
            for d in &mut timeline {
                d.daily_tests *= k;
            }
        }
        9 => {
            let t0 = spec.t0.expect("validated");
            let average = timeline.iter().map(|d| d.daily_tests).sum::<f64>() / timeline.len() as f64;
            for (day, d) in timeline.iter_mut().enumerate() {
                d.daily_tests = if day < t0 { 0.0 } else { average };
            }
        }
        10 => {
            controller = Some(LockdownRule {
                h_lock: spec.h_lock.expect("validated"),
                t_lock: spec.t_lock.expect("validated"),
            });
        }
        _ => unreachable!("validated"),
    }
    Ok(ScenarioPlan {
        timeline,
        epi,
        controller,
        resume_at_vaccination_start: matches!(spec.kind, 6 | 7),
    })
}

/// Restriction flags imposed while the occupancy controller holds a
/// lockdown (the strictest combination) or not (none).
pub fn apply_controller_flags(day: &mut PolicyDay, lockdown: bool) {
    let level = if lockdown { 3 } else { 0 };
    set_lockdown(day, lockdown as u8);
    day.school_closing = level;
    day.workplace_closing = level;
}

/// Output of [`run_scenario`].
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub plan: ScenarioPlan,
    pub result: SimulationResult,
    /// The unmodified timeline under the same configuration, when it was
    /// needed (vaccine scenarios) or requested.
    pub baseline: Option<SimulationResult>,
}

/// Runs a scenario. Vaccine scenarios first run the baseline and restart
/// from its mean state at the end of the day before the campaign starts.
pub fn run_scenario(
    cfg: &SimulationConfig,
    baseline: &[PolicyDay],
    spec: &ScenarioSpec,
    with_baseline: bool,
) -> Result<ScenarioOutcome> {
    let plan = apply_scenario(baseline, &cfg.epi, spec)?;
    let mut scenario_cfg = cfg.clone();
    scenario_cfg.epi = plan.epi;
    if let Some(runs) = spec.runs {
        scenario_cfg.n_runs = runs;
    }
    let base = if with_baseline || plan.resume_at_vaccination_start {
        let mut base_cfg = cfg.clone();
        base_cfg.n_runs = scenario_cfg.n_runs;
        Some(run_simulation(&base_cfg, baseline, &RunOptions::default())?)
    } else {
        None
    };
    let mut opts = RunOptions {
        controller: plan.controller,
        ..RunOptions::default()
    };
    if plan.resume_at_vaccination_start {
        let start = cfg.country.vaccination_start_day;
        let snapshot = start
            .checked_sub(1)
            .and_then(|d| base.as_ref().and_then(|b| b.snapshot(d)))
            .ok_or_else(|| {
                EpiError::InvalidInput(format!(
                    "vaccination start day {start} is outside the {}-day timeline",
                    baseline.len()
                ))
            })?;
        opts.snapshot = Some(snapshot);
    }
    let result = run_simulation(&scenario_cfg, &plan.timeline, &opts)?;
    Ok(ScenarioOutcome {
        plan,
        result,
        baseline: base,
    })
}

/// Mean number of lockdown days per run.
pub fn count_lockdown_days(result: &SimulationResult) -> f64 {
    result.mean_lockdown_days()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::SuiteLevel;
    use chrono::NaiveDate;

    fn baseline() -> Vec<PolicyDay> {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        (0..200)
            .map(|i| {
                let lock = (60..90).contains(&i) as u8;
                PolicyDay {
                    stay_home: lock,
                    school_closing: if i >= 55 { 2 } else { 0 },
                    workplace_closing: if i >= 58 { 1 + lock } else { 0 },
                    testing_policy: if i >= 40 { 1 } else { 0 },
                    contact_tracing: if i >= 70 { 2 } else { 1 },
                    daily_tests: i as f64 * 10.0,
                    daily_vaccines: if i >= 150 { 500.0 } else { 0.0 },
                    international_open: i < 50,
                    internal_travel_open: lock == 0,
                    ..PolicyDay::unrestricted(start + chrono::Duration::days(i))
                }
            })
            .collect()
    }

    #[test]
    fn no_action_uses_densest_network() {
        let plan = apply_scenario(&baseline(), &EpiParams::default(), &ScenarioSpec::kind(1)).unwrap();
        for d in &plan.timeline {
            assert_eq!(d.network_level().unwrap(), SuiteLevel::Rl);
            assert_eq!(d.daily_tests, 0.0);
            assert_eq!(d.daily_vaccines, 0.0);
            assert_eq!(d.contact_tracing, 1);
        }
    }

    #[test]
    fn restriction_kinds_are_idempotent() {
        let epi = EpiParams::default();
        for kind in 1..=5 {
            let once = apply_scenario(&baseline(), &epi, &ScenarioSpec::kind(kind)).unwrap();
            let twice = apply_scenario(&once.timeline, &epi, &ScenarioSpec::kind(kind)).unwrap();
            assert_eq!(once.timeline, twice.timeline, "kind {kind}");
        }
    }

    #[test]
    fn kind_semantics() {
        let base = baseline();
        let epi = EpiParams::default();
        let k2 = apply_scenario(&base, &epi, &ScenarioSpec::kind(2)).unwrap();
        assert_eq!(k2.timeline[100].daily_tests, base[100].daily_tests);
        assert_eq!(k2.timeline[75].stay_home, 0);
        let k3 = apply_scenario(&base, &epi, &ScenarioSpec::kind(3)).unwrap();
        assert_eq!(k3.timeline[75].stay_home, 1);
        assert_eq!(k3.timeline[100].daily_tests, 0.0);
        assert_eq!(k3.timeline[160].daily_vaccines, 500.0);
        let k4 = apply_scenario(&base, &epi, &ScenarioSpec::kind(4)).unwrap();
        assert_eq!(k4.timeline[75].stay_home, 0);
        assert_eq!(k4.timeline[75].school_closing, 2);
        let k5 = apply_scenario(&base, &epi, &ScenarioSpec::kind(5)).unwrap();
        assert_eq!(k5.timeline[75].school_closing, 3);
        assert_eq!(k5.timeline[75].workplace_closing, 3);
        assert_eq!(k5.timeline[100].school_closing, 0);
        assert_eq!(k5.timeline[100].workplace_closing, 0);
    }

    #[test]
    fn factor_kinds() {
        let base = baseline();
        let epi = EpiParams::default();
        let none = apply_scenario(&base, &epi, &ScenarioSpec::with_k(6, 0.0)).unwrap();
        assert_eq!(none.epi.v_eff1, 0.0);
        assert_eq!(none.epi.v_eff2, 0.0);
        assert!(none.resume_at_vaccination_start);
        let strong = apply_scenario(&base, &epi, &ScenarioSpec::with_k(6, 1.5)).unwrap();
        assert_eq!(strong.epi.v_eff1, 1.0);
        assert_eq!(strong.epi.v_eff2, 1.0);
        for kind in [6, 7] {
            let same = apply_scenario(&base, &epi, &ScenarioSpec::with_k(kind, 1.0)).unwrap();
            assert_eq!(same.timeline, base);
            assert_eq!(same.epi, epi);
        }
        let tests = apply_scenario(&base, &epi, &ScenarioSpec::with_k(8, 2.0)).unwrap();
        for (a, b) in tests.timeline.iter().zip(&base) {
            assert_eq!(a.daily_tests, 2.0 * b.daily_tests);
        }
    }

    #[test]
    fn late_testing_start() {
        let base = baseline();
        let avg = base.iter().map(|d| d.daily_tests).sum::<f64>() / base.len() as f64;
        let plan = apply_scenario(&base, &EpiParams::default(), &ScenarioSpec::testing_start(60)).unwrap();
        assert!(plan.timeline[..60].iter().all(|d| d.daily_tests == 0.0));
        assert!(plan.timeline[60..].iter().all(|d| d.daily_tests == avg));
    }

    #[test]
    fn invalid_specs() {
        let base = baseline();
        let epi = EpiParams::default();
        for spec in [
            ScenarioSpec::kind(0),
            ScenarioSpec::kind(11),
            ScenarioSpec::kind(6),
            ScenarioSpec::with_k(7, -1.0),
            ScenarioSpec::testing_start(10),
            ScenarioSpec::lockdown_rule(0.0, 7),
            ScenarioSpec::lockdown_rule(1e-5, 0),
        ] {
            assert!(apply_scenario(&base, &epi, &spec).is_err(), "{spec:?}");
        }
    }

    #[test]
    fn controller_never_triggers_without_patients() {
        let mut c = LockdownController::new(LockdownRule {
            h_lock: 5e-6,
            t_lock: 7,
        });
        assert!((0..100).all(|_| !c.update(0.0, 90_000.0)));
    }

    #[test]
    fn controller_hysteresis_trace() {
        // Above threshold on days 1..=3, below afterwards.
        let mut c = LockdownController::new(LockdownRule { h_lock: 0.01, t_lock: 7 });
        let flags: Vec<bool> = (1..=15)
            .map(|day| c.update(if day <= 3 { 2.0 } else { 0.0 }, 100.0))
            .collect();
        let on: Vec<usize> = (1..=15).filter(|d| flags[d - 1]).collect();
        assert_eq!(on, (1..=9).collect::<Vec<_>>());
        assert!(!flags[9]);
    }

    #[test]
    fn controller_flags() {
        let mut d = PolicyDay::unrestricted(NaiveDate::from_ymd_opt(2020, 1, 1).unwrap());
        apply_controller_flags(&mut d, true);
        assert_eq!(d.network_level().unwrap(), SuiteLevel::L0);
        assert!(!d.internal_travel_open);
        apply_controller_flags(&mut d, false);
        assert_eq!(d.network_level().unwrap(), SuiteLevel::Rl);
    }
}
