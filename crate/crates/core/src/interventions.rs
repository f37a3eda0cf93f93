//! Vaccination, testing, contact tracing and the exposure-probability
//! schedule.

use rand::seq::index;
use rand::Rng;

use crate::epidemic::RegionGraph;
use crate::error::{EpiError, Result};
use crate::network::SuiteLevel;
use crate::policy::PolicyDay;
use crate::state::NodeState;

pub const DAYS_PER_MONTH: f64 = 30.0;

/// Online form of the exposure-probability schedule.
///
/// `p_e` sits at its maximum until the first lockdown, drops to the minimum
/// on every lockdown day, and after a lockdown lifts climbs linearly back to
/// the maximum over the ramp period. `d` days after the last lockdown day the
/// value is `p_min + (p_max - p_min) * d / ramp_days`.
#[derive(Debug, Clone)]
pub struct ExposureSchedule {
    p_min: f64,
    p_max: f64,
    ramp_days: f64,
    days_since_lockdown: Option<u32>,
}

impl ExposureSchedule {
    pub fn new(p_min: f64, p_max: f64, t_ramp_months: f64) -> Result<Self> {
        if !(p_min < p_max) {
            return Err(EpiError::InvalidInput(format!(
                "p_e_min ({p_min}) must be below p_e_max ({p_max})"
            )));
        }
        if !(t_ramp_months > 0.0) {
            return Err(EpiError::InvalidInput("ramp length must be positive".into()));
        }
        Ok(Self {
            p_min,
            p_max,
            ramp_days: t_ramp_months * DAYS_PER_MONTH,
            days_since_lockdown: None,
        })
    }

    /// Exposure probability for a day with the given lockdown flag.
    pub fn advance(&mut self, lockdown: bool) -> f64 {
        if lockdown {
            self.days_since_lockdown = Some(0);
            return self.p_min;
        }
        match self.days_since_lockdown.as_mut() {
            None => self.p_max,
            Some(d) => {
                *d = d.saturating_add(1);
                let frac = (*d as f64 / self.ramp_days).min(1.0);
                self.p_min + (self.p_max - self.p_min) * frac
            }
        }
    }
}

/// Exposure probability for every day of `timeline`.
pub fn compute_pe_schedule(
    timeline: &[PolicyDay],
    p_e_min: f64,
    p_e_max: f64,
    t_ramp_months: f64,
) -> Result<Vec<f64>> {
    if timeline.is_empty() {
        return Err(EpiError::InvalidInput("policy timeline is empty".into()));
    }
    let mut schedule = ExposureSchedule::new(p_e_min, p_e_max, t_ramp_months)?;
    Ok(timeline.iter().map(|d| schedule.advance(d.lockdown())).collect())
}

fn vaccine_eligible(state: NodeState) -> bool {
    !matches!(
        state,
        NodeState::D | NodeState::H | NodeState::Sy | NodeState::QSy
    ) && !state.is_quarantined()
}

/// Vaccinates `doses` distinct eligible nodes chosen uniformly, or the whole
/// eligible pool when it is smaller. Returns the number vaccinated.
pub fn vaccinate(region: &mut RegionGraph, doses: u32) -> usize {
    if doses == 0 {
        return 0;
    }
    let pool: Vec<usize> = (0..region.len())
        .filter(|&i| {
            let f = region.flags[i];
            !f.vaccinated && !f.child && vaccine_eligible(region.states[i])
        })
        .collect();
    let chosen: Vec<usize> = if doses as usize >= pool.len() {
        pool
    } else {
        index::sample(&mut region.rng, pool.len(), doses as usize)
            .into_iter()
            .map(|k| pool[k])
            .collect()
    };
    for &i in &chosen {
        region.flags[i].vaccinated = true;
    }
    chosen.len()
}

fn random_test_eligible(state: NodeState) -> bool {
    !state.is_quarantined() && !matches!(state, NodeState::D | NodeState::H | NodeState::R)
}

/// Runs today's tests and quarantines every positive. Returns the positives.
///
/// Policies 1 and 2 test symptomatic nodes only; policy 3 tests nodes drawn
/// uniformly from everyone not quarantined, hospitalised, recovered or dead.
/// Only `Asy` and `Sy` test positive.
pub fn run_testing(region: &mut RegionGraph, tests_today: u32, testing_policy: u8) -> Vec<usize> {
    if tests_today == 0 || testing_policy == 0 {
        return Vec::new();
    }
    let pool: Vec<usize> = if testing_policy >= 3 {
        (0..region.len())
            .filter(|&i| random_test_eligible(region.states[i]))
            .collect()
    } else {
        (0..region.len())
            .filter(|&i| region.states[i] == NodeState::Sy)
            .collect()
    };
    let tested: Vec<usize> = if tests_today as usize >= pool.len() {
        pool
    } else {
        let mut picks: Vec<usize> = index::sample(&mut region.rng, pool.len(), tests_today as usize)
            .into_iter()
            .map(|k| pool[k])
            .collect();
        picks.sort_unstable();
        picks
    };
    let mut positives = Vec::new();
    for i in tested {
        let s = region.states[i];
        if s.is_infectious() {
            region.states[i] = s.quarantined().expect("infectious states have a quarantine twin");
            positives.push(i);
        }
    }
    positives
}

/// Tracing probability for a contact-tracing level, `None` for level 1.
pub fn tracing_probability(tracing_level: u8, p_ct_2: f64, p_ct_3: f64) -> Option<f64> {
    match tracing_level {
        2 => Some(p_ct_2),
        3 => Some(p_ct_3),
        _ => None,
    }
}

/// Quarantines each active-network neighbour of each positive independently
/// with the tracing probability of `tracing_level`. Returns the nodes moved.
pub fn trace_contacts(
    region: &mut RegionGraph,
    positives: &[usize],
    level: SuiteLevel,
    tracing_level: u8,
    p_ct_2: f64,
    p_ct_3: f64,
) -> Vec<usize> {
    let Some(p_ct) = tracing_probability(tracing_level, p_ct_2, p_ct_3) else {
        return Vec::new();
    };
    let mut moved = Vec::new();
    for &i in positives {
        let deg = region.suite.degree(level, i);
        for slot in 0..deg {
            let j = region.suite.neighbors(level, i)[slot] as usize;
            let Some(q) = region.states[j].quarantined() else {
                continue;
            };
            if region.rng.gen::<f64>() < p_ct {
                region.states[j] = q;
                moved.push(j);
            }
        }
    }
    moved
}

/// Splits `total` across bins proportionally to `weights` with the
/// largest-remainder method. Ties go to the lower index.
pub fn apportion(total: u64, weights: &[usize]) -> Vec<u64> {
    let sum: u64 = weights.iter().map(|&w| w as u64).sum();
    if sum == 0 || total == 0 {
        return vec![0; weights.len()];
    }
    let mut out = Vec::with_capacity(weights.len());
    let mut rems = Vec::with_capacity(weights.len());
    let mut given = 0u64;
    for (k, &w) in weights.iter().enumerate() {
        let num = total as u128 * w as u128;
        let q = (num / sum as u128) as u64;
        out.push(q);
        given += q;
        rems.push(((num % sum as u128) as u64, k));
    }
    rems.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, k) in rems.iter().take((total - given) as usize) {
        out[k] += 1;
    }
    out
}

/// Converts a country-scale daily series into whole node-scale counts.
///
/// The running total is rounded rather than each day, so fractional doses
/// accumulate instead of being lost.
#[derive(Debug, Clone, Default)]
pub struct ScaledCounter {
    cumulative: f64,
    issued: u64,
}

impl ScaledCounter {
    pub fn next(&mut self, country_count: f64, scale_factor: f64) -> u64 {
        self.cumulative += country_count.max(0.0) / scale_factor;
        let target = (self.cumulative + 1e-9).floor() as u64;
        let today = target.saturating_sub(self.issued);
        self.issued = target.max(self.issued);
        today
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Network, NetworkSuite};
    use crate::rng::{substream, Purpose};
    use crate::state::NodeFlags;
    use chrono::NaiveDate;

    fn day(offset: i64, stay_home: u8) -> PolicyDay {
        let base = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        PolicyDay {
            stay_home,
            ..PolicyDay::unrestricted(base + chrono::Duration::days(offset))
        }
    }

    fn region(network: Network, child_every: usize) -> RegionGraph {
        let n = network.node_count();
        let flags = (0..n)
            .map(|i| NodeFlags {
                vaccinated: false,
                child: child_every > 0 && i % child_every == 0,
            })
            .collect();
        RegionGraph::new(0, NetworkSuite::uniform(network), flags, substream(5, Purpose::Dynamics, 0)).unwrap()
    }

    #[test]
    fn pe_schedule_values() {
        let mut timeline: Vec<PolicyDay> = (0..400).map(|d| day(d, 0)).collect();
        timeline[10].stay_home = 1;
        let pe = compute_pe_schedule(&timeline, 0.075, 0.33, 11.0).unwrap();
        assert_eq!(pe[9], 0.33);
        assert_eq!(pe[10], 0.075);
        assert!((pe[10 + 165] - 0.2025).abs() < 1e-12);
        assert_eq!(pe[10 + 330], 0.33);
        assert_eq!(pe[399], 0.33);
    }

    #[test]
    fn pe_resets_on_new_lockdown() {
        let mut timeline: Vec<PolicyDay> = (0..100).map(|d| day(d, 0)).collect();
        timeline[5].stay_home = 1;
        timeline[40].stay_home = 1;
        let pe = compute_pe_schedule(&timeline, 0.1, 0.4, 3.0).unwrap();
        assert!((pe[39] - (0.1 + 0.3 * 34.0 / 90.0)).abs() < 1e-12);
        assert_eq!(pe[40], 0.1);
        assert!((pe[41] - (0.1 + 0.3 / 90.0)).abs() < 1e-12);
    }

    #[test]
    fn pe_schedule_errors() {
        assert!(compute_pe_schedule(&[], 0.1, 0.2, 3.0).is_err());
        assert!(compute_pe_schedule(&[day(0, 0)], 0.3, 0.2, 3.0).is_err());
    }

    #[test]
    fn vaccination_pool() {
        let mut r = region(Network::empty(3000), 0);
        for i in 0..3000 {
            r.flags[i].child = i < 810;
        }
        assert_eq!(vaccinate(&mut r, 0), 0);
        assert_eq!(vaccinate(&mut r, 100), 100);
        assert_eq!(vaccinate(&mut r, 10_000), 2090);
        assert!(r.flags[..810].iter().all(|f| !f.vaccinated));
        assert!(r.flags[810..].iter().all(|f| f.vaccinated));
        assert_eq!(vaccinate(&mut r, 5), 0);
    }

    #[test]
    fn vaccination_skips_ineligible_states() {
        let mut r = region(Network::empty(10), 0);
        let blocked = [
            NodeState::D,
            NodeState::H,
            NodeState::Sy,
            NodeState::QS,
            NodeState::QE,
            NodeState::QAsy,
            NodeState::QSy,
        ];
        for (i, s) in blocked.iter().enumerate() {
            r.states[i] = *s;
        }
        r.states[7] = NodeState::R;
        r.states[8] = NodeState::Asy;
        assert_eq!(vaccinate(&mut r, 100), 3);
        assert!(r.flags[..7].iter().all(|f| !f.vaccinated));
    }

    #[test]
    fn testing_rules() {
        let mut r = region(Network::empty(100), 0);
        assert!(run_testing(&mut r, 50, 3).is_empty());
        for i in 0..10 {
            r.states[i] = NodeState::Sy;
        }
        for i in 10..20 {
            r.states[i] = NodeState::Asy;
        }
        r.states[20] = NodeState::E;
        assert!(run_testing(&mut r, 0, 3).is_empty());
        assert!(run_testing(&mut r, 100, 0).is_empty());
        let pos = run_testing(&mut r, 4, 1);
        assert_eq!(pos.len(), 4);
        assert!(pos.iter().all(|&i| r.states[i] == NodeState::QSy));
        let pos = run_testing(&mut r, 1000, 3);
        assert_eq!(pos.len(), 16);
        assert_eq!(r.states[20], NodeState::E);
        assert_eq!(r.counts()[NodeState::QAsy], 10);
        assert_eq!(r.counts()[NodeState::QSy], 10);
    }

    #[test]
    fn tracing_levels() {
        // Star: node 0 linked to 1..=10.
        let star = Network::from_edges(11, (1..=10).map(|j| (0, j))).unwrap();
        let mut r = region(star.clone(), 0);
        r.states[0] = NodeState::QSy;
        assert!(trace_contacts(&mut r, &[0], SuiteLevel::L0, 1, 0.65, 0.8).is_empty());
        let mut r = region(star, 0);
        r.states[0] = NodeState::QSy;
        r.states[1] = NodeState::R;
        r.states[2] = NodeState::H;
        r.states[3] = NodeState::E;
        r.states[4] = NodeState::Asy;
        let moved = trace_contacts(&mut r, &[0], SuiteLevel::L0, 3, 0.65, 1.0 - 1e-300);
        assert_eq!(moved.len(), 8);
        assert_eq!(r.states[1], NodeState::R);
        assert_eq!(r.states[2], NodeState::H);
        assert_eq!(r.states[3], NodeState::QE);
        assert_eq!(r.states[4], NodeState::QAsy);
        assert_eq!(r.states[5], NodeState::QS);
    }

    #[test]
    fn tracing_expectation() {
        let star = Network::from_edges(11, (1..=10).map(|j| (0, j))).unwrap();
        let mut r = region(star, 0);
        let trials = 4000;
        let mut total = 0usize;
        for _ in 0..trials {
            r.states.iter_mut().for_each(|s| *s = NodeState::S);
            r.states[0] = NodeState::QSy;
            total += trace_contacts(&mut r, &[0], SuiteLevel::L0, 3, 0.65, 0.8).len();
        }
        let mean = total as f64 / trials as f64;
        let sd = (10.0 * 0.8 * 0.2 / trials as f64).sqrt();
        assert!((mean - 8.0).abs() < 4.0 * sd, "mean {mean}");
    }

    #[test]
    fn largest_remainder() {
        assert_eq!(apportion(10, &[1, 1, 1]), vec![4, 3, 3]);
        assert_eq!(apportion(7, &[2500, 3500]), vec![3, 4]);
        assert_eq!(apportion(0, &[5, 5]), vec![0, 0]);
        let v = apportion(1001, &[2513, 2999, 3488, 3000]);
        assert_eq!(v.iter().sum::<u64>(), 1001);
    }

    #[test]
    fn scaled_counter_carries_fractions() {
        let mut c = ScaledCounter::default();
        let days: Vec<u64> = (0..10).map(|_| c.next(40.0, 100.0)).collect();
        assert_eq!(days.iter().sum::<u64>(), 4);
        assert_eq!(days[0], 0);
        assert_eq!(days[2], 1);
    }
}
