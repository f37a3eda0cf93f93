use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::result::{round_quotas, ControllerEntry, RegionDay, RunTrace, SimulationResult, Snapshot};
use super::world::{World, WorldConfig};
use crate::epidemic::{step_region, DayContext, RegionGraph};
use crate::error::{EpiError, Result};
use crate::interventions::{apportion, run_testing, trace_contacts, vaccinate, ExposureSchedule, ScaledCounter};
use crate::params::{BehaviorParams, CountryProfile, EpiParams};
use crate::policy::{validate_timeline, PolicyDay};
use crate::rng::{run_seed, substream, Purpose};
use crate::scenario::{apply_controller_flags, LockdownController, LockdownRule};
use crate::state::{NodeState, Compartments};

/// Everything needed to reproduce a multi-run simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub country: CountryProfile,
    #[serde(default)]
    pub world: WorldConfig,
    pub epi: EpiParams,
    pub behavior: BehaviorParams,
    pub n_runs: usize,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        self.country.validate()?;
        self.world.validate()?;
        self.epi.validate()?;
        self.behavior.validate()?;
        if self.n_runs == 0 {
            return Err(EpiError::param("n_runs", "need at least one run"));
        }
        Ok(())
    }
}

/// Optional modifiers of a simulation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Start from this population state instead of day 0.
    pub snapshot: Option<Snapshot>,
    /// Replace recorded restrictions with the occupancy-driven controller.
    pub controller: Option<LockdownRule>,
}

/// Runs `cfg.n_runs` independent simulations over `timeline`.
///
/// Runs and regions are processed in parallel; every region draws from its
/// own stream, so the result does not depend on the thread count.
pub fn run_simulation(cfg: &SimulationConfig, timeline: &[PolicyDay], opts: &RunOptions) -> Result<SimulationResult> {
    cfg.validate()?;
    validate_timeline(timeline)?;
    let start_day = opts.snapshot.as_ref().map_or(0, |s| s.resume_day);
    if start_day >= timeline.len() {
        return Err(EpiError::InvalidInput(format!(
            "start day {start_day} is past the end of a {}-day timeline",
            timeline.len()
        )));
    }
    let runs = (0..cfg.n_runs)
        .into_par_iter()
        .map(|run| simulate_run(cfg, timeline, opts, run))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulationResult {
        start_day,
        scale_factor: cfg.country.scale_factor,
        runs,
    })
}

fn apply_snapshot(region: &mut RegionGraph, snapshot: &Snapshot, seed: u64) {
    let n = region.len();
    let quotas: Vec<f64> = snapshot.shares.iter().map(|s| s * n as f64).collect();
    let counts = round_quotas(&quotas, n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = substream(seed, Purpose::Snapshot, region.id as u64);
    order.shuffle(&mut rng);
    let mut it = order.into_iter();
    for s in NodeState::ALL {
        for i in it.by_ref().take(counts[s.index()]) {
            region.states[i] = s;
        }
    }
    region.cum_exposed = (snapshot.cum_exposed_share * n as f64).round() as u32;
    region.cum_symptomatic = (snapshot.cum_symptomatic_share * n as f64).round() as u32;
}

fn record(region: &RegionGraph) -> RegionDay {
    RegionDay {
        counts: Compartments::from_states(&region.states),
        cum_exposed: region.cum_exposed,
        cum_symptomatic: region.cum_symptomatic,
    }
}

/// Regional share of today's tests and doses.
struct Allocation {
    tests: u32,
    doses: u32,
}

fn region_day(
    region: &mut RegionGraph,
    policy: &PolicyDay,
    ctx: DayContext,
    alloc: &Allocation,
    epi: &EpiParams,
    behavior: &BehaviorParams,
) -> Result<()> {
    step_region(region, ctx, epi)?;
    vaccinate(region, alloc.doses);
    let positives = run_testing(region, alloc.tests, policy.testing_policy);
    trace_contacts(
        region,
        &positives,
        ctx.level,
        policy.contact_tracing,
        behavior.p_ct_2,
        behavior.p_ct_3,
    );
    Ok(())
}

/// Simulates run number `run` of the job described by `cfg`.
pub fn simulate_run(cfg: &SimulationConfig, timeline: &[PolicyDay], opts: &RunOptions, run: usize) -> Result<RunTrace> {
    let seed = run_seed(cfg.seed, run as u64);
    let mut world = World::build(&cfg.country, &cfg.behavior, &cfg.world, seed)?;
    let sizes = world.region_sizes();
    let scale = world.scale_factor;
    let start_day = opts.snapshot.as_ref().map_or(0, |s| s.resume_day);
    if let Some(snapshot) = &opts.snapshot {
        for region in &mut world.regions {
            apply_snapshot(region, snapshot, seed);
        }
    }

    let mut schedule = ExposureSchedule::new(cfg.behavior.p_e_min, cfg.behavior.p_e_max, cfg.behavior.t_ramp)?;
    let mut tests = ScaledCounter::default();
    let mut doses = ScaledCounter::default();
    for day in &timeline[..start_day] {
        schedule.advance(day.lockdown());
        tests.next(day.daily_tests, scale);
        doses.next(day.daily_vaccines, scale);
    }
    let mut controller = opts.controller.map(LockdownController::new);
    let mut lockdown_today = false;

    let m = world.regions.len();
    let mut days = Vec::with_capacity((timeline.len() - start_day) * m);
    let mut controller_log = Vec::new();
    for (day, recorded) in timeline.iter().enumerate().skip(start_day) {
        let mut policy = recorded.clone();
        if controller.is_some() {
            apply_controller_flags(&mut policy, lockdown_today);
        }
        if day == cfg.world.seed_day {
            world.seed_infection();
        }
        let level = policy.network_level()?;
        let ctx = DayContext {
            level,
            p_e: schedule.advance(policy.lockdown()),
        };
        let tests_today = apportion(tests.next(policy.daily_tests, scale), &sizes);
        let doses_today = apportion(doses.next(policy.daily_vaccines, scale), &sizes);
        let allocations: Vec<Allocation> = tests_today
            .iter()
            .zip(&doses_today)
            .map(|(&t, &d)| Allocation {
                tests: t as u32,
                doses: d as u32,
            })
            .collect();
        world
            .regions
            .par_iter_mut()
            .zip(allocations.par_iter())
            .try_for_each(|(region, alloc)| region_day(region, &policy, ctx, alloc, &cfg.epi, &cfg.behavior))?;

        world.mix_regions(ctx.p_e, policy.internal_travel_open, cfg.epi.v_eff1);
        if day >= cfg.world.seed_day {
            world.import_cases(policy.international_open);
        }

        let start = days.len();
        days.extend(world.regions.iter().map(record));
        if let Some(c) = controller.as_mut() {
            let hospitalized: u32 = days[start..].iter().map(|r| r.counts[NodeState::H]).sum();
            controller_log.push(ControllerEntry {
                day,
                hospitalized,
                lockdown: lockdown_today,
            });
            lockdown_today = c.update(hospitalized as f64, world.n_total as f64);
        }
    }
    Ok(RunTrace {
        run,
        region_sizes: sizes,
        days,
        controller_log,
    })
}
