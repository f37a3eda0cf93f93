use serde::{Deserialize, Serialize};

use crate::state::{Compartments, NodeState};

/// End-of-day record for one region.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionDay {
    pub counts: Compartments,
    pub cum_exposed: u32,
    pub cum_symptomatic: u32,
}

impl RegionDay {
    pub fn add(&mut self, other: &RegionDay) {
        self.counts.add(&other.counts);
        self.cum_exposed += other.cum_exposed;
        self.cum_symptomatic += other.cum_symptomatic;
    }
}

/// One row of the lockdown-controller log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllerEntry {
    pub day: usize,
    /// Country-wide hospitalised nodes at the end of the day.
    pub hospitalized: u32,
    /// Lockdown in force during the day.
    pub lockdown: bool,
}

/// Trajectory of a single run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub run: usize,
    pub region_sizes: Vec<usize>,
    /// Row-major `[day - start_day][region]`.
    pub days: Vec<RegionDay>,
    pub controller_log: Vec<ControllerEntry>,
}

impl RunTrace {
    pub fn n_regions(&self) -> usize {
        self.region_sizes.len()
    }

    pub fn n_total(&self) -> usize {
        self.region_sizes.iter().sum()
    }

    pub fn n_days(&self) -> usize {
        if self.region_sizes.is_empty() {
            0
        } else {
            self.days.len() / self.region_sizes.len()
        }
    }

    /// Per-region records of recorded day index `k` (0 = start day).
    pub fn day(&self, k: usize) -> &[RegionDay] {
        let m = self.n_regions();
        &self.days[k * m..(k + 1) * m]
    }

    /// Country-wide totals for every recorded day.
    pub fn totals(&self) -> Vec<RegionDay> {
        (0..self.n_days())
            .map(|k| {
                let mut t = RegionDay::default();
                for r in self.day(k) {
                    t.add(r);
                }
                t
            })
            .collect()
    }

    /// Days on which the controller held the lockdown.
    pub fn lockdown_days(&self) -> usize {
        self.controller_log.iter().filter(|e| e.lockdown).count()
    }
}

/// Output of a multi-run simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    /// First simulated day (0 unless started from a snapshot).
    pub start_day: usize,
    pub scale_factor: f64,
    pub runs: Vec<RunTrace>,
}

/// Quantities tracked in aggregates, in column order.
pub const AGGREGATE_FIELDS: [&str; 13] = [
    "S",
    "E",
    "Asy",
    "Sy",
    "H",
    "R",
    "D",
    "Q_S",
    "Q_E",
    "Q_Asy",
    "Q_Sy",
    "cum_exposed",
    "cum_symptomatic",
];

fn field_values(d: &RegionDay) -> [f64; 13] {
    let mut v = [0.0; 13];
    for s in NodeState::ALL {
        v[s.index()] = d.counts[s] as f64;
    }
    v[11] = d.cum_exposed as f64;
    v[12] = d.cum_symptomatic as f64;
    v
}

/// Per-day mean and sample standard deviation of country totals.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateDay {
    pub day: usize,
    pub mean: [f64; 13],
    pub std: [f64; 13],
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

impl SimulationResult {
    pub fn n_days(&self) -> usize {
        self.runs.first().map_or(0, |r| r.n_days())
    }

    /// Absolute day numbers covered by the result.
    pub fn days(&self) -> std::ops::Range<usize> {
        self.start_day..self.start_day + self.n_days()
    }

    pub fn aggregate(&self) -> Vec<AggregateDay> {
        let totals: Vec<Vec<RegionDay>> = self.runs.iter().map(|r| r.totals()).collect();
        (0..self.n_days())
            .map(|k| {
                let per_run: Vec<[f64; 13]> = totals.iter().map(|t| field_values(&t[k])).collect();
                let mut mean = [0.0; 13];
                let mut std = [0.0; 13];
                for f in 0..13 {
                    let col: Vec<f64> = per_run.iter().map(|v| v[f]).collect();
                    (mean[f], std[f]) = mean_std(&col);
                }
                AggregateDay {
                    day: self.start_day + k,
                    mean,
                    std,
                }
            })
            .collect()
    }

    /// Country-wide series of `f` for every run.
    pub fn series<F: Fn(&RegionDay) -> f64>(&self, f: F) -> Vec<Vec<f64>> {
        self.runs
            .iter()
            .map(|r| r.totals().iter().map(&f).collect())
            .collect()
    }

    /// Across-run mean of a country-wide series.
    pub fn mean_series<F: Fn(&RegionDay) -> f64>(&self, f: F) -> Vec<f64> {
        let all = self.series(f);
        let n = self.n_days();
        (0..n)
            .map(|k| all.iter().map(|s| s[k]).sum::<f64>() / all.len().max(1) as f64)
            .collect()
    }

    /// Mean number of lockdown days over runs.
    pub fn mean_lockdown_days(&self) -> f64 {
        if self.runs.is_empty() {
            return 0.0;
        }
        self.runs.iter().map(|r| r.lockdown_days() as f64).sum::<f64>() / self.runs.len() as f64
    }

    /// Mean compartment shares at the end of absolute day `day`, used to start
    /// a counterfactual from the same point.
    pub fn snapshot(&self, day: usize) -> Option<Snapshot> {
        let k = day.checked_sub(self.start_day)?;
        if k >= self.n_days() || self.runs.is_empty() {
            return None;
        }
        let mut shares = [0.0; NodeState::COUNT];
        let mut exposed = 0.0;
        let mut symptomatic = 0.0;
        for run in &self.runs {
            let t = run.totals()[k];
            let n = run.n_total() as f64;
            for s in NodeState::ALL {
                shares[s.index()] += t.counts[s] as f64 / n;
            }
            exposed += t.cum_exposed as f64 / n;
            symptomatic += t.cum_symptomatic as f64 / n;
        }
        let runs = self.runs.len() as f64;
        shares.iter_mut().for_each(|v| *v /= runs);
        Some(Snapshot {
            resume_day: day + 1,
            shares,
            cum_exposed_share: exposed / runs,
            cum_symptomatic_share: symptomatic / runs,
        })
    }
}

/// Population state used to resume a simulation mid-timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    /// First day simulated after the snapshot is applied.
    pub resume_day: usize,
    /// Share of nodes in each compartment, in [`NodeState::ALL`] order.
    pub shares: [f64; NodeState::COUNT],
    pub cum_exposed_share: f64,
    pub cum_symptomatic_share: f64,
}

/// Largest-remainder rounding of real-valued quotas summing to `total`.
pub fn round_quotas(quotas: &[f64], total: usize) -> Vec<usize> {
    let mut out: Vec<usize> = quotas.iter().map(|q| q.max(0.0).floor() as usize).collect();
    let given: usize = out.iter().sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    if given <= total {
        for &k in order.iter().cycle().take(total - given) {
            out[k] += 1;
        }
    } else {
        let mut excess = given - total;
        for &k in order.iter().rev() {
            if excess > 0 && out[k] > 0 {
                out[k] -= 1;
                excess -= 1;
            }
        }
    }
    out
}
