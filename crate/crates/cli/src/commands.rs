use std::io::Write;
use std::path::Path;

use epinet_core::calibration::{
    ground_truth_from_result, search, BestParams, Leaderboard, SimulationObjective,
};
use epinet_core::data::{load_country, GroundTruth};
use epinet_core::metapop::{run_simulation, RunOptions, SimulationResult, AGGREGATE_FIELDS};
use epinet_core::output::{create_file, write_result_dir, Manifest, MANIFEST_FILE};
use epinet_core::scenario::{run_scenario, ScenarioSpec};
use epinet_core::{EpiError, PolicyDay};
use log::info;

use crate::config::RunConfig;
use crate::{CliError, Common};

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Usage(format!("{}: {e}", path.display()))
}

/// Reads the config and applies command-line overrides.
fn resolve(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(r) = common.runs {
        cfg.runs = r;
    }
    if let Some(s) = common.seed {
        cfg.seed = Some(s);
    }
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    if let Some(p) = &common.params {
        let text = std::fs::read_to_string(p).map_err(io_err(p))?;
        let best: BestParams =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
        cfg.epi = best.epi;
        cfg.behavior = best.behavior;
    }
    if let Some(t) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {t} worker threads: {e}")))?;
    }
    Ok(cfg)
}

fn load(cfg: &RunConfig) -> Result<(Vec<PolicyDay>, GroundTruth), CliError> {
    Ok(load_country(&cfg.data, cfg.country.population)?)
}

fn manifest(cfg: &RunConfig, command: &str, extra: serde_json::Value) -> Result<Manifest, CliError> {
    let mut config = serde_json::to_value(cfg).map_err(EpiError::from)?;
    if let (Some(obj), serde_json::Value::Object(more)) = (config.as_object_mut(), extra) {
        obj.extend(more);
    }
    let mut m = Manifest::new(command, cfg.seed()?, cfg.profile().scale_factor, config);
    m.add_data_file(&cfg.data)?;
    Ok(m)
}

fn finish(dir: &Path, mut m: Manifest, files: Vec<std::path::PathBuf>) -> Result<(), CliError> {
    m.outputs = files
        .iter()
        .filter_map(|f| f.strip_prefix(dir).ok())
        .map(|f| f.display().to_string())
        .collect();
    m.write(&dir.join(MANIFEST_FILE))?;
    Ok(())
}

pub fn simulate(common: &Common) -> Result<(), CliError> {
    let cfg = resolve(common)?;
    let out = cfg.out_dir()?;
    let (timeline, _) = load(&cfg)?;
    let sim = cfg.simulation()?;
    let result = run_simulation(&sim, &timeline, &RunOptions::default())?;
    let files = write_result_dir(&result, &out)?;
    finish(&out, manifest(&cfg, "simulate", serde_json::json!({}))?, files)?;
    println!(
        "simulated {} runs x {} days on {} nodes -> {}",
        result.runs.len(),
        result.n_days(),
        result.runs[0].n_total(),
        out.display()
    );
    Ok(())
}

pub fn calibrate(common: &Common, stage1_only: bool, resume: Option<&Path>, self_test: bool) -> Result<(), CliError> {
    let cfg = resolve(common)?;
    let out = cfg.out_dir()?;
    let cal = cfg
        .calibration
        .clone()
        .ok_or_else(|| CliError::Usage("config has no `calibration` section".into()))?;
    let mut budget = cal.budget();
    if stage1_only {
        budget.n_sweeps = 0;
    }
    let space = cal.space();
    let (timeline, mut gt) = load(&cfg)?;
    let sim = cfg.simulation()?;
    if self_test {
        let reference = run_simulation(&sim, &timeline, &RunOptions::default())?;
        let dates: Vec<_> = timeline.iter().map(|d| d.date).collect();
        gt = ground_truth_from_result(&reference, &dates);
    }
    let previous = match resume {
        Some(p) => Some(Leaderboard::read_csv(std::fs::File::open(p).map_err(io_err(p))?)?),
        None => None,
    };
    let objective = SimulationObjective {
        config: sim.clone(),
        timeline: &timeline,
        ground_truth: &gt,
        thresholds: cal.thresholds,
    };
    let outcome = search(
        &space,
        budget,
        &objective,
        &cfg.epi,
        &cfg.behavior,
        sim.seed,
        previous.as_ref(),
    )?;

    let board_path = out.join("leaderboard.csv");
    let mut f = create_file(&board_path)?;
    outcome.leaderboard.write_csv(&mut f)?;
    f.flush().map_err(io_err(&board_path))?;
    let best_path = out.join("best_params.json");
    let best = BestParams {
        epi: outcome.epi,
        behavior: outcome.behavior,
        combined: outcome.best.score.combined,
    };
    let mut f = create_file(&best_path)?;
    serde_json::to_writer_pretty(&mut f, &best).map_err(EpiError::from)?;
    f.write_all(b"\n").map_err(io_err(&best_path))?;
    f.flush().map_err(io_err(&best_path))?;
    let extra = serde_json::json!({
        "stage1_only": stage1_only,
        "self_test": self_test,
        "resume": resume.map(|p| p.display().to_string()),
    });
    finish(&out, manifest(&cfg, "calibrate", extra)?, vec![board_path, best_path])?;

    println!(
        "evaluated {} candidates, best combined score {:.6}",
        outcome.leaderboard.entries.len(),
        outcome.best.score.combined
    );
    if self_test {
        let midpoint = space.midpoint();
        let mid = outcome
            .leaderboard
            .entries
            .iter()
            .find(|e| e.values == midpoint)
            .map(|e| e.score.combined)
            .unwrap_or(f64::INFINITY);
        let pass = outcome.best.score.combined <= mid;
        println!(
            "self-test: best {:.6} vs midpoint {:.6}: {}",
            outcome.best.score.combined,
            mid,
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            return Err(CliError::Check("search did not improve on the range midpoints".into()));
        }
    }
    Ok(())
}

fn write_joined(baseline: &SimulationResult, scenario: &SimulationResult, path: &Path) -> Result<(), CliError> {
    let base = baseline.aggregate();
    let scen = scenario.aggregate();
    let mut f = create_file(path)?;
    let mut header = vec!["day".to_string()];
    for group in ["baseline", "scenario"] {
        for field in AGGREGATE_FIELDS {
            header.push(format!("{group}_{field}_mean"));
            header.push(format!("{group}_{field}_std"));
        }
    }
    writeln!(f, "{}", header.join(",")).map_err(io_err(path))?;
    for s in &scen {
        let Some(b) = base.iter().find(|b| b.day == s.day) else {
            continue;
        };
        let mut row = vec![s.day.to_string()];
        for agg in [b, s] {
            for i in 0..AGGREGATE_FIELDS.len() {
                row.push(agg.mean[i].to_string());
                row.push(agg.std[i].to_string());
            }
        }
        writeln!(f, "{}", row.join(",")).map_err(io_err(path))?;
    }
    f.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn scenario(common: &Common, spec_path: Option<&Path>, compare: bool, t0s: &[usize]) -> Result<(), CliError> {
    let cfg = resolve(common)?;
    let out = cfg.out_dir()?;
    let spec: ScenarioSpec = match spec_path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(io_err(p))?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
        None => cfg
            .scenario
            .clone()
            .ok_or_else(|| CliError::Usage("no scenario: pass --scenario or add `scenario` to the config".into()))?,
    };
    let specs: Vec<(std::path::PathBuf, ScenarioSpec)> = if t0s.is_empty() {
        vec![(out.clone(), spec)]
    } else {
        if spec.kind != 9 {
            return Err(CliError::Usage(format!("--t0 applies to scenario 9, not {}", spec.kind)));
        }
        t0s.iter()
            .map(|&t0| (out.join(format!("t0_{t0}")), ScenarioSpec { t0: Some(t0), ..spec.clone() }))
            .collect()
    };
    for (_, s) in &specs {
        s.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    }

    let (timeline, _) = load(&cfg)?;
    let mut sim = cfg.simulation()?;
    for (dir, mut spec) in specs {
        // Flags win over the scenario file.
        if let Some(r) = common.runs {
            spec.runs = Some(r);
        }
        sim.n_runs = spec.runs.unwrap_or(cfg.runs);
        info!("scenario {} -> {}", spec.kind, dir.display());
        let outcome = run_scenario(&sim, &timeline, &spec, compare)?;
        let mut files = write_result_dir(&outcome.result, &dir)?;
        if compare {
            let base = outcome.baseline.as_ref().expect("baseline requested");
            let base_dir = dir.join("baseline");
            for f in write_result_dir(base, &base_dir)? {
                files.push(f);
            }
            let joined = dir.join("joined.csv");
            write_joined(base, &outcome.result, &joined)?;
            files.push(joined);
        }
        let mut run_cfg = cfg.clone();
        run_cfg.runs = sim.n_runs;
        run_cfg.scenario = Some(spec.clone());
        let extra = serde_json::json!({ "compare_baseline": compare });
        finish(&dir, manifest(&run_cfg, "scenario", extra)?, files)?;
        let mean = |r: &SimulationResult| {
            r.runs
                .iter()
                .map(|t| t.totals().last().map_or(0.0, |d| d.cum_exposed as f64))
                .sum::<f64>()
                / r.runs.len() as f64
        };
        print!(
            "scenario {}: {} runs, mean cumulative exposed {:.1} nodes",
            spec.kind,
            outcome.result.runs.len(),
            mean(&outcome.result)
        );
        if outcome.plan.controller.is_some() {
            print!(", mean lockdown days {:.1}", outcome.result.mean_lockdown_days());
        }
        println!(" -> {}", dir.display());
    }
    Ok(())
}
