//! Result files: per-run trajectories, aggregates, controller logs and the
//! run manifest.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{EpiError, Result};
use crate::metapop::{ControllerEntry, RegionDay, RunTrace, SimulationResult, AGGREGATE_FIELDS};
use crate::state::{Compartments, NodeState};

pub const RUNS_FILE: &str = "runs.csv";
pub const AGGREGATE_NODES_FILE: &str = "aggregate_nodes.csv";
pub const AGGREGATE_PERSONS_FILE: &str = "aggregate_persons.csv";
pub const CONTROLLER_FILE: &str = "controller_log.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

fn runs_header() -> Vec<&'static str> {
    let mut h = vec!["run", "day", "region"];
    h.extend(NodeState::ALL.iter().map(|s| s.label()));
    h.extend(["cum_exposed", "cum_symptomatic"]);
    h
}

/// Opens `path` for writing, creating parent directories.
pub fn create_file(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| EpiError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| EpiError::io(path, e))
}

/// One row per run, day and region.
pub fn write_runs_csv<W: Write>(result: &SimulationResult, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(runs_header())?;
    for run in &result.runs {
        for k in 0..run.n_days() {
            let day = (result.start_day + k).to_string();
            for (region, rec) in run.day(k).iter().enumerate() {
                let mut row = vec![run.run.to_string(), day.clone(), region.to_string()];
                row.extend(rec.counts.0.iter().map(u32::to_string));
                row.push(rec.cum_exposed.to_string());
                row.push(rec.cum_symptomatic.to_string());
                out.write_record(&row)?;
            }
        }
    }
    out.flush().map_err(|e| EpiError::io("<csv>", e))?;
    Ok(())
}

/// Reads a file written by [`write_runs_csv`]. Region sizes are recovered
/// from the first recorded day; controller logs are not part of this file.
pub fn read_runs_csv<R: Read>(r: R, scale_factor: f64) -> Result<SimulationResult> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    for col in runs_header() {
        if !header.iter().any(|h| h == col) {
            return Err(EpiError::MissingColumn(col.to_string()));
        }
    }
    let mut runs: Vec<RunTrace> = Vec::new();
    let mut start_day = None;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<u64> {
            record.get(i).unwrap_or("").trim().parse::<u64>().map_err(|_| EpiError::Row {
                line,
                reason: format!("column `{}` is not a non-negative integer", header[i]),
            })
        };
        let (run, day, region) = (field(0)? as usize, field(1)? as usize, field(2)? as usize);
        let start = *start_day.get_or_insert(day);
        let mut counts = Compartments::default();
        for (s, c) in counts.0.iter_mut().enumerate() {
            *c = field(3 + s)? as u32;
        }
        let rec = RegionDay {
            counts,
            cum_exposed: field(14)? as u32,
            cum_symptomatic: field(15)? as u32,
        };
        if runs.last().map_or(true, |r| r.run != run) {
            runs.push(RunTrace {
                run,
                region_sizes: Vec::new(),
                days: Vec::new(),
                controller_log: Vec::new(),
            });
        }
        let trace = runs.last_mut().unwrap();
        if day == start {
            if region != trace.region_sizes.len() {
                return Err(EpiError::Row {
                    line,
                    reason: "regions out of order".into(),
                });
            }
            trace.region_sizes.push(counts.total() as usize);
        }
        let m = trace.region_sizes.len();
        if day < start || region >= m || trace.days.len() != (day - start) * m + region {
            return Err(EpiError::Row {
                line,
                reason: "rows are not in run/day/region order".into(),
            });
        }
        trace.days.push(rec);
    }
    Ok(SimulationResult {
        start_day: start_day.unwrap_or(0),
        scale_factor,
        runs,
    })
}

/// Per-day mean and sample std of country totals, multiplied by `unit`
/// (1 for nodes, the scale factor for persons).
pub fn write_aggregate_csv<W: Write>(result: &SimulationResult, unit: f64, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["day".to_string()];
    for f in AGGREGATE_FIELDS {
        header.push(format!("{f}_mean"));
        header.push(format!("{f}_std"));
    }
    out.write_record(&header)?;
    for day in result.aggregate() {
        let mut row = vec![day.day.to_string()];
        for f in 0..AGGREGATE_FIELDS.len() {
            row.push((day.mean[f] * unit).to_string());
            row.push((day.std[f] * unit).to_string());
        }
        out.write_record(&row)?;
    }
    out.flush().map_err(|e| EpiError::io("<csv>", e))?;
    Ok(())
}

pub fn write_controller_csv<W: Write>(result: &SimulationResult, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["run", "day", "hospitalized", "flag"])?;
    for run in &result.runs {
        for e in &run.controller_log {
            out.write_record([
                run.run.to_string(),
                e.day.to_string(),
                e.hospitalized.to_string(),
                u8::from(e.lockdown).to_string(),
            ])?;
        }
    }
    out.flush().map_err(|e| EpiError::io("<csv>", e))?;
    Ok(())
}

/// Reads a controller log and attaches it to the matching runs.
pub fn read_controller_csv<R: Read>(r: R, result: &mut SimulationResult) -> Result<()> {
    #[derive(Deserialize)]
    struct Row {
        run: usize,
        day: usize,
        hospitalized: u32,
        flag: u8,
    }
    let mut rdr = csv::Reader::from_reader(r);
    for row in rdr.deserialize() {
        let row: Row = row?;
        let trace = result
            .runs
            .iter_mut()
            .find(|t| t.run == row.run)
            .ok_or_else(|| EpiError::InvalidInput(format!("controller log refers to unknown run {}", row.run)))?;
        trace.controller_log.push(ControllerEntry {
            day: row.day,
            hospitalized: row.hospitalized,
            lockdown: row.flag != 0,
        });
    }
    Ok(())
}

/// Writes the run, aggregate and (when present) controller files into `dir`.
pub fn write_result_dir(result: &SimulationResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut put = |name: &str, f: &dyn Fn(&mut BufWriter<File>) -> Result<()>| -> Result<()> {
        let path = dir.join(name);
        let mut file = create_file(&path)?;
        f(&mut file)?;
        file.flush().map_err(|e| EpiError::io(&path, e))?;
        written.push(path);
        Ok(())
    };
    put(RUNS_FILE, &|w| write_runs_csv(result, w))?;
    put(AGGREGATE_NODES_FILE, &|w| write_aggregate_csv(result, 1.0, w))?;
    put(AGGREGATE_PERSONS_FILE, &|w| {
        write_aggregate_csv(result, result.scale_factor, w)
    })?;
    if result.runs.iter().any(|r| !r.controller_log.is_empty()) {
        put(CONTROLLER_FILE, &|w| write_controller_csv(result, w))?;
    }
    Ok(written)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| EpiError::io(path, e))?;
    let mut hasher = Sha256::new();
    std::io::copy(&mut file, &mut hasher).map_err(|e| EpiError::io(path, e))?;
    Ok(format!("{:x}", hasher.finalize()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataChecksum {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to re-run a job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub scale_factor: f64,
    /// The fully resolved job configuration.
    pub config: serde_json::Value,
    pub data: Vec<DataChecksum>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, scale_factor: f64, config: serde_json::Value) -> Self {
        Manifest {
            tool: "epinet".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            scale_factor,
            config,
            data: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn add_data_file(&mut self, path: &Path) -> Result<()> {
        self.data.push(DataChecksum {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut file = create_file(path)?;
        serde_json::to_writer_pretty(&mut file, self)?;
        file.write_all(b"\n").map_err(|e| EpiError::io(path, e))?;
        file.flush().map_err(|e| EpiError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| EpiError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
