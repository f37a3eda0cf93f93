use std::path::{Path, PathBuf};

use epinet_core::calibration::{Budget, ParamSpace, Thresholds};
use epinet_core::metapop::WorldConfig;
use epinet_core::scenario::ScenarioSpec;
use epinet_core::{BehaviorParams, CountryProfile, EpiParams, SimulationConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

fn default_runs() -> usize {
    10
}

/// Job description read from `--config`; command-line flags override it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Country CSV. Relative `data` and `out` paths are resolved against the
    /// config file's directory.
    pub data: PathBuf,
    pub country: CountryProfile,
    /// Chooses the scale factor so that about this many nodes are simulated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_nodes: Option<u64>,
    #[serde(default)]
    pub world: WorldConfig,
    #[serde(default)]
    pub epi: EpiParams,
    pub behavior: BehaviorParams,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    pub n_random: usize,
    pub n_sweeps: usize,
    #[serde(default)]
    pub thresholds: Thresholds,
    /// Full search space; defaults to the standard ranges.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<ParamSpace>,
    /// Restricts the search to these parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameters: Option<Vec<String>>,
}

impl CalibrationConfig {
    pub fn budget(&self) -> Budget {
        Budget {
            n_random: self.n_random,
            n_sweeps: self.n_sweeps,
        }
    }

    pub fn space(&self) -> ParamSpace {
        let space = self.space.clone().unwrap_or_else(ParamSpace::standard);
        match &self.parameters {
            Some(names) => {
                let names: Vec<&str> = names.iter().map(String::as_str).collect();
                space.restricted(&names)
            }
            None => space,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            if cfg.data.is_relative() {
                cfg.data = dir.join(&cfg.data);
            }
            if let Some(out) = cfg.out.as_mut().filter(|o| o.is_relative()) {
                *out = dir.join(&*out);
            }
        }
        Ok(cfg)
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Usage("a seed is required: set `seed` in the config or pass --seed".into()))
    }

    pub fn out_dir(&self) -> Result<PathBuf, CliError> {
        self.out
            .clone()
            .ok_or_else(|| CliError::Usage("no output directory: set `out` or pass --out".into()))
    }

    pub fn profile(&self) -> CountryProfile {
        match self.target_nodes {
            Some(n) => self.country.clone().at_node_budget(n),
            None => self.country.clone(),
        }
    }

    pub fn simulation(&self) -> Result<SimulationConfig, CliError> {
        Ok(SimulationConfig {
            country: self.profile(),
            world: self.world.clone(),
            epi: self.epi,
            behavior: self.behavior,
            n_runs: self.runs,
            seed: self.seed()?,
        })
    }
}
