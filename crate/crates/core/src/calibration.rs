//! Goodness of fit and the two-stage parameter search.
//!
//! Stage 1 draws random parameter combinations and shrinks every range to the
//! hull of the best tenth; stage 2 sweeps the parameters one at a time over a
//! five-point grid, keeping any improvement.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::Mutex;

use log::{debug, info};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{daily_from_cumulative, smooth, GroundTruth};
use crate::error::{EpiError, Result};
use crate::metapop::{run_simulation, RunOptions, SimulationConfig, SimulationResult};
use crate::params::{BehaviorParams, EpiParams};
use crate::policy::PolicyDay;
use crate::rng::{substream, Purpose};
use crate::state::NodeState;

pub const SMOOTHING_WINDOW: usize = 7;
pub const GRID_POINTS: usize = 5;

/// Symmetric mean absolute percentage error, in percent.
pub fn smape(forecast: &[f64], actual: &[f64]) -> Result<f64> {
    if forecast.len() != actual.len() || forecast.is_empty() {
        return Err(EpiError::InvalidInput(format!(
            "smape needs equal non-empty series, got {} and {}",
            forecast.len(),
            actual.len()
        )));
    }
    let sum: f64 = forecast
        .iter()
        .zip(actual)
        .map(|(&f, &a)| {
            let denom = (a.abs() + f.abs()) / 2.0;
            if denom == 0.0 {
                0.0
            } else {
                (f - a).abs() / denom
            }
        })
        .sum();
    Ok(100.0 * sum / forecast.len() as f64)
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(EpiError::InvalidInput(format!(
            "pearson needs equal series of length >= 2, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EpiError::UndefinedCorrelation(
            "one of the series is constant".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Exclusion thresholds applied to every run of a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Largest admissible cumulative exposed share of the nodes.
    pub max_exposed_frac: f64,
    /// Smallest admissible ratio of simulated cumulative symptomatic cases to
    /// (scaled) confirmed cases at the end of the scored window.
    pub min_sym_vs_confirmed: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            max_exposed_frac: 0.6,
            min_sym_vs_confirmed: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitScore {
    pub smape_hosp: f64,
    pub smape_dead: f64,
    pub pearson_hosp: f64,
    pub pearson_dead: f64,
    pub excluded: bool,
    /// `f64::INFINITY` when excluded.
    pub combined: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl FitScore {
    pub fn excluded(reason: impl Into<String>) -> Self {
        FitScore {
            smape_hosp: f64::NAN,
            smape_dead: f64::NAN,
            pearson_hosp: f64::NAN,
            pearson_dead: f64::NAN,
            excluded: true,
            combined: f64::INFINITY,
            reason: Some(reason.into()),
        }
    }

    /// Combines per-attribute metrics with equal weights.
    pub fn from_metrics(smape_hosp: f64, smape_dead: f64, pearson_hosp: f64, pearson_dead: f64) -> Self {
        let part = |s: f64, p: f64| (s / 100.0 + (1.0 - p)) / 2.0;
        FitScore {
            smape_hosp,
            smape_dead,
            pearson_hosp,
            pearson_dead,
            excluded: false,
            combined: (part(smape_hosp, pearson_hosp) + part(smape_dead, pearson_dead)) / 2.0,
            reason: None,
        }
    }
}

/// Simulated hospital occupancy and daily deaths against ground truth, both
/// smoothed. `gt` must already be in node units.
///
/// Scoring starts on the first day with reported hospital occupancy.
pub fn score_run(result: &SimulationResult, gt: &GroundTruth, thresholds: &Thresholds) -> FitScore {
    match try_score(result, gt, thresholds) {
        Ok(s) => s,
        Err(e) => FitScore::excluded(e.to_string()),
    }
}

fn try_score(result: &SimulationResult, gt: &GroundTruth, th: &Thresholds) -> Result<FitScore> {
    let days = result.days();
    let end = days.end.min(gt.len());
    let first = (days.start..end)
        .find(|&d| gt.hospitalized_current[d] > 0.0)
        .ok_or_else(|| EpiError::InvalidInput("no overlapping day with reported hospitalisations".into()))?;
    let (lo, hi) = (first - days.start, end - days.start);
    let last_day = end - 1;

    for run in &result.runs {
        let n = run.n_total() as f64;
        let totals = run.totals();
        let peak_exposed = totals.iter().map(|t| t.cum_exposed).max().unwrap_or(0) as f64;
        if peak_exposed / n > th.max_exposed_frac {
            return Ok(FitScore::excluded(format!(
                "run {}: cumulative exposed share {:.3} above {}",
                run.run,
                peak_exposed / n,
                th.max_exposed_frac
            )));
        }
        let sym = totals[hi - 1].cum_symptomatic as f64;
        let needed = th.min_sym_vs_confirmed * gt.confirmed_cumulative[last_day];
        if sym < needed {
            return Ok(FitScore::excluded(format!(
                "run {}: {sym} cumulative symptomatic below {needed:.1}",
                run.run
            )));
        }
    }

    let hosp = result.mean_series(|d| d.counts[NodeState::H] as f64);
    let dead = daily_from_cumulative(&result.mean_series(|d| d.counts[NodeState::D] as f64));
    let sim_h = smooth(&hosp[lo..hi], SMOOTHING_WINDOW)?;
    let sim_d = smooth(&dead[lo..hi], SMOOTHING_WINDOW)?;
    let gt_h = smooth(&gt.hospitalized_current[first..end], SMOOTHING_WINDOW)?;
    let gt_d = smooth(&gt.daily_deaths()[first..end], SMOOTHING_WINDOW)?;
    Ok(FitScore::from_metrics(
        smape(&sim_h, &gt_h)?,
        smape(&sim_d, &gt_d)?,
        pearson(&sim_h, &gt_h)?,
        pearson(&sim_d, &gt_d)?,
    ))
}

/// Country-scale ground truth generated from the across-run mean of a
/// simulation: occupancy from `H`, deaths from `D`, confirmed cases from
/// cumulative symptomatic infections. Days before the result starts are zero.
pub fn ground_truth_from_result(result: &SimulationResult, dates: &[chrono::NaiveDate]) -> GroundTruth {
    let scale = result.scale_factor;
    let pad = |v: Vec<f64>| -> Vec<f64> {
        let mut out = vec![0.0; result.start_day];
        out.extend(v.into_iter().map(|x| x * scale));
        out.truncate(dates.len());
        out.resize(dates.len(), 0.0);
        out
    };
    GroundTruth {
        dates: dates.to_vec(),
        confirmed_cumulative: pad(result.mean_series(|d| d.cum_symptomatic as f64)),
        deaths_cumulative: pad(result.mean_series(|d| d.counts[NodeState::D] as f64)),
        hospitalized_current: pad(result.mean_series(|d| d.counts[NodeState::H] as f64)),
    }
}

/// Names of the searchable parameters.
pub const PARAM_NAMES: [&str; 19] = [
    "v_eff1", "v_eff2", "p_i", "p_sy", "p_r", "p_syh", "p_hd", "p_hr", "p_e_min", "p_e_max", "t_ramp", "p_ct_2",
    "p_ct_3", "p_l", "p_rxs", "p_rs", "p_rm", "p_rl", "r_mix",
];

fn set_param(epi: &mut EpiParams, beh: &mut BehaviorParams, name: &str, v: f64) -> Result<()> {
    let slot = match name {
        "v_eff1" => &mut epi.v_eff1,
        "v_eff2" => &mut epi.v_eff2,
        "p_i" => &mut epi.p_i,
        "p_sy" => &mut epi.p_sy,
        "p_r" => &mut epi.p_r,
        "p_syh" => &mut epi.p_syh,
        "p_hd" => &mut epi.p_hd,
        "p_hr" => &mut epi.p_hr,
        "p_s" => &mut epi.p_s,
        "p_e_min" => &mut beh.p_e_min,
        "p_e_max" => &mut beh.p_e_max,
        "t_ramp" => &mut beh.t_ramp,
        "p_ct_2" => &mut beh.p_ct_2,
        "p_ct_3" => &mut beh.p_ct_3,
        "p_l" => &mut beh.p_l,
        "p_rxs" => &mut beh.p_rxs,
        "p_rs" => &mut beh.p_rs,
        "p_rm" => &mut beh.p_rm,
        "p_rl" => &mut beh.p_rl,
        "r_mix" => &mut beh.r_mix,
        other => return Err(EpiError::InvalidInput(format!("unknown parameter `{other}`"))),
    };
    *slot = v;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

impl ParamRange {
    fn new(name: &str, lo: f64, hi: f64) -> Self {
        ParamRange {
            name: name.into(),
            lo,
            hi,
        }
    }

    pub fn mid(&self) -> f64 {
        (self.lo + self.hi) / 2.0
    }

    /// `GRID_POINTS` evenly spaced values from `lo` to `hi`.
    pub fn grid(&self) -> Vec<f64> {
        (0..GRID_POINTS)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (GRID_POINTS - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub ranges: Vec<ParamRange>,
}

impl ParamSpace {
    /// Literature ranges for the disease parameters, widened where the
    /// published estimate lies outside them, and the initial behavioural
    /// ranges.
    pub fn standard() -> Self {
        let r = ParamRange::new;
        ParamSpace {
            ranges: vec![
                r("v_eff1", 0.8, 0.95),
                r("v_eff2", 0.7, 0.95),
                r("p_i", 1.0 / 20.0, 1.0 / 3.0),
                r("p_sy", 0.13, 0.65),
                r("p_r", 1.0 / 30.0, 1.0 / 3.0),
                r("p_syh", 0.006, 0.15),
                r("p_hd", 1e-5, 0.1),
                r("p_hr", 1.0 / 30.0, 1.0 / 3.0),
                r("p_e_min", 0.01, 0.2),
                r("p_e_max", 0.2, 0.5),
                r("t_ramp", 3.0, 18.0),
                r("p_ct_2", 0.3, 0.7),
                r("p_ct_3", 0.7, 1.0),
                r("p_l", 0.004, 0.008),
                r("p_rxs", 0.5, 4.5),
                r("p_rs", 0.5, 4.5),
                r("p_rm", 0.5, 4.5),
                r("p_rl", 0.5, 4.5),
                r("r_mix", 0.05, 0.15),
            ],
        }
    }

    /// Keeps only the named parameters.
    pub fn restricted(mut self, names: &[&str]) -> Self {
        self.ranges.retain(|r| names.contains(&r.name.as_str()));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.ranges.is_empty() {
            return Err(EpiError::InvalidInput("empty parameter space".into()));
        }
        let (mut e, mut b) = (EpiParams::default(), BehaviorParams::gbr());
        for r in &self.ranges {
            if !(r.lo.is_finite() && r.hi.is_finite() && r.lo <= r.hi) {
                return Err(EpiError::InvalidInput(format!(
                    "range of `{}` is [{}, {}]",
                    r.name, r.lo, r.hi
                )));
            }
            set_param(&mut e, &mut b, &r.name, r.lo)?;
        }
        Ok(())
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.ranges.iter().map(ParamRange::mid).collect()
    }

    pub fn names(&self) -> Vec<&str> {
        self.ranges.iter().map(|r| r.name.as_str()).collect()
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.ranges
            .iter()
            .map(|r| if r.lo < r.hi { rng.gen_range(r.lo..r.hi) } else { r.lo })
            .collect()
    }

    /// Writes `values` into copies of the base parameters.
    pub fn apply(&self, values: &[f64], epi: &EpiParams, beh: &BehaviorParams) -> Result<(EpiParams, BehaviorParams)> {
        let (mut e, mut b) = (*epi, *beh);
        for (r, &v) in self.ranges.iter().zip(values) {
            set_param(&mut e, &mut b, &r.name, v)?;
        }
        Ok((e, b))
    }
}

/// Anything that can score a parameter set; lower is better.
pub trait Objective: Sync {
    fn evaluate(&self, epi: &EpiParams, behavior: &BehaviorParams) -> FitScore;
}

/// Scores candidates by simulating the recorded timeline.
///
/// Every candidate uses the same seed, so differences between candidates are
/// not masked by sampling noise.
pub struct SimulationObjective<'a> {
    pub config: SimulationConfig,
    pub timeline: &'a [PolicyDay],
    /// Country scale; divided by the scale factor internally.
    pub ground_truth: &'a GroundTruth,
    pub thresholds: Thresholds,
}

impl Objective for SimulationObjective<'_> {
    fn evaluate(&self, epi: &EpiParams, behavior: &BehaviorParams) -> FitScore {
        let mut cfg = self.config.clone();
        cfg.epi = *epi;
        cfg.behavior = *behavior;
        match run_simulation(&cfg, self.timeline, &RunOptions::default()) {
            Ok(res) => score_run(
                &res,
                &self.ground_truth.scaled(cfg.country.scale_factor),
                &self.thresholds,
            ),
            Err(e) => FitScore::excluded(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub values: Vec<f64>,
    pub score: FitScore,
}

fn key(values: &[f64]) -> Vec<u64> {
    values.iter().map(|v| v.to_bits()).collect()
}

/// All evaluated candidates, best first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Leaderboard {
    pub names: Vec<String>,
    pub entries: Vec<Entry>,
}

impl Leaderboard {
    pub fn new(names: Vec<String>) -> Self {
        Leaderboard {
            names,
            entries: Vec::new(),
        }
    }

    fn insert(&mut self, entry: Entry) {
        // Stable position: after every entry that is at least as good.
        let pos = self
            .entries
            .partition_point(|e| e.score.combined.total_cmp(&entry.score.combined).is_le());
        self.entries.insert(pos, entry);
    }

    pub fn best(&self) -> Option<&Entry> {
        self.entries.iter().find(|e| !e.score.excluded)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = ["rank", "combined", "smape_h", "smape_d", "pearson_h", "pearson_d", "excluded"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(self.names.iter().cloned());
        out.write_record(&header)?;
        for (rank, e) in self.entries.iter().enumerate() {
            let s = &e.score;
            let mut row = vec![
                (rank + 1).to_string(),
                s.combined.to_string(),
                s.smape_hosp.to_string(),
                s.smape_dead.to_string(),
                s.pearson_hosp.to_string(),
                s.pearson_dead.to_string(),
                s.excluded.to_string(),
            ];
            row.extend(e.values.iter().map(f64::to_string));
            out.write_record(&row)?;
        }
        out.flush().map_err(|e| EpiError::io("<leaderboard>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.len() < 7 || header[1] != "combined" || header[6] != "excluded" {
            return Err(EpiError::InvalidInput("not a leaderboard file".into()));
        }
        let mut board = Leaderboard::new(header[7..].to_vec());
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let num = |i: usize| -> Result<f64> {
                record.get(i).unwrap_or("").parse::<f64>().map_err(|_| EpiError::Row {
                    line,
                    reason: format!("column `{}` is not a number", header[i]),
                })
            };
            let excluded = record.get(6) == Some("true");
            let score = FitScore {
                combined: num(1)?,
                smape_hosp: num(2)?,
                smape_dead: num(3)?,
                pearson_hosp: num(4)?,
                pearson_dead: num(5)?,
                excluded,
                reason: excluded.then(|| "excluded in a previous session".to_string()),
            };
            let values = (7..header.len()).map(num).collect::<Result<Vec<_>>>()?;
            board.entries.push(Entry { values, score });
        }
        Ok(board)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub n_random: usize,
    pub n_sweeps: usize,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: Entry,
    pub epi: EpiParams,
    pub behavior: BehaviorParams,
    pub leaderboard: Leaderboard,
    /// Ranges after the stage-1 shrink.
    pub reduced: ParamSpace,
    /// Best combined score after stage 1 and after each sweep.
    pub history: Vec<f64>,
}

/// Fitted parameters as written to and read from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestParams {
    pub epi: EpiParams,
    pub behavior: BehaviorParams,
    pub combined: f64,
}

struct Evaluator<'a> {
    space: &'a ParamSpace,
    base_epi: &'a EpiParams,
    base_beh: &'a BehaviorParams,
    objective: &'a dyn Objective,
    cache: HashMap<Vec<u64>, FitScore>,
    board: Mutex<Leaderboard>,
}

impl Evaluator<'_> {
    fn score_one(&self, values: &[f64]) -> FitScore {
        if let Some(s) = self.cache.get(&key(values)) {
            return s.clone();
        }
        match self.space.apply(values, self.base_epi, self.base_beh) {
            Ok((e, b)) => match e.validate().and_then(|_| b.validate()) {
                Ok(()) => self.objective.evaluate(&e, &b),
                Err(err) => FitScore::excluded(err.to_string()),
            },
            Err(err) => FitScore::excluded(err.to_string()),
        }
    }

    /// Scores a batch concurrently; entries are recorded in batch order.
    fn evaluate(&self, batch: Vec<Vec<f64>>) -> Vec<Entry> {
        let scores: Vec<FitScore> = batch.par_iter().map(|v| self.score_one(v)).collect();
        let entries: Vec<Entry> = batch
            .into_iter()
            .zip(scores)
            .map(|(values, score)| Entry { values, score })
            .collect();
        let mut board = self.board.lock().expect("leaderboard lock poisoned");
        for e in &entries {
            debug!("candidate scored {}", e.score.combined);
            board.insert(e.clone());
        }
        entries
    }
}

fn better(a: &Entry, b: &Entry) -> bool {
    a.score.combined < b.score.combined
}

/// Two-stage search. Previously scored candidates found in `resume` are not
/// simulated again.
pub fn search(
    space: &ParamSpace,
    budget: Budget,
    objective: &dyn Objective,
    base_epi: &EpiParams,
    base_behavior: &BehaviorParams,
    seed: u64,
    resume: Option<&Leaderboard>,
) -> Result<SearchOutcome> {
    space.validate()?;
    let names: Vec<String> = space.names().iter().map(|s| s.to_string()).collect();
    let mut cache = HashMap::new();
    if let Some(prev) = resume {
        if prev.names != names {
            return Err(EpiError::InvalidInput(
                "resumed leaderboard has different parameter columns".into(),
            ));
        }
        for e in &prev.entries {
            cache.insert(key(&e.values), e.score.clone());
        }
        info!("resuming with {} cached candidates", cache.len());
    }
    let ev = Evaluator {
        space,
        base_epi,
        base_beh: base_behavior,
        objective,
        cache,
        board: Mutex::new(Leaderboard::new(names)),
    };

    let mut rng = substream(seed, Purpose::Calibration, 0);
    let mut batch = vec![space.midpoint()];
    batch.extend((0..budget.n_random).map(|_| space.sample(&mut rng)));
    let stage1 = ev.evaluate(batch);
    let mut best = stage1[0].clone();
    for e in &stage1[1..] {
        if better(e, &best) {
            best = e.clone();
        }
    }

    let mut accepted: Vec<&Entry> = stage1[1..].iter().filter(|e| !e.score.excluded).collect();
    accepted.sort_by(|a, b| a.score.combined.total_cmp(&b.score.combined));
    let mut reduced = space.clone();
    if !accepted.is_empty() {
        let top = &accepted[..accepted.len().div_ceil(10)];
        for (i, r) in reduced.ranges.iter_mut().enumerate() {
            r.lo = top.iter().map(|e| e.values[i]).fold(f64::INFINITY, f64::min);
            r.hi = top.iter().map(|e| e.values[i]).fold(f64::NEG_INFINITY, f64::max);
        }
    }
    info!("stage 1 done, best combined {}", best.score.combined);
    let mut history = vec![best.score.combined];

    for sweep in 0..budget.n_sweeps {
        for (i, range) in reduced.ranges.iter().enumerate() {
            let batch: Vec<Vec<f64>> = range
                .grid()
                .into_iter()
                .map(|v| {
                    let mut c = best.values.clone();
                    c[i] = v;
                    c
                })
                .collect();
            for e in ev.evaluate(batch) {
                if better(&e, &best) {
                    best = e;
                }
            }
        }
        info!("sweep {} done, best combined {}", sweep + 1, best.score.combined);
        history.push(best.score.combined);
    }

    let leaderboard = ev.board.into_inner().expect("leaderboard lock poisoned");
    if best.score.excluded {
        let mut reasons: Vec<String> = leaderboard
            .entries
            .iter()
            .filter_map(|e| e.score.reason.clone())
            .collect();
        reasons.sort();
        reasons.dedup();
        reasons.truncate(10);
        return Err(EpiError::SearchFailure(format!(
            "all {} candidates were excluded: {}",
            leaderboard.entries.len(),
            reasons.join("; ")
        )));
    }
    let (epi, behavior) = space.apply(&best.values, base_epi, base_behavior)?;
    Ok(SearchOutcome {
        best,
        epi,
        behavior,
        leaderboard,
        reduced,
        history,
    })
}
