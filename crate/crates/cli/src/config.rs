use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use srlrtr::{Dims, NoiseSpec, SolveReport, SolverParams};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Simulated,
    Real,
    Custom,
}

impl Preset {
    pub fn params(self) -> Option<SolverParams> {
        match self {
            Preset::Simulated => Some(SolverParams::simulated()),
            Preset::Real => Some(SolverParams::real()),
            Preset::Custom => None,
        }
    }
}

/// Fully resolved settings of one run; echoed into every report so the run
/// can be repeated with `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub preset: Preset,
    #[serde(flatten)]
    pub params: SolverParams,
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
}

impl RunConfig {
    pub fn from_preset(preset: Preset) -> Self {
        Self {
            preset,
            params: preset.params().unwrap_or_default(),
            input: None,
            output: None,
            seed: None,
            noise: None,
        }
    }

    /// Relabels the preset as custom once any value departs from it.
    pub fn settle_preset(&mut self) {
        if let Some(p) = self.preset.params() {
            if p != self.params {
                self.preset = Preset::Custom;
            }
        }
    }
}

/// JSON written by `denoise --report`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenoiseReport {
    pub config: RunConfig,
    pub dims: Dims,
    pub solve: SolveReport,
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Accepts either a bare run config or a report that embeds one.
pub fn load_run_config(path: &Path) -> CliResult<RunConfig> {
    let value: Value = read_json(path)?;
    let inner = match value.get("config") {
        Some(c) => c.clone(),
        None => value,
    };
    serde_json::from_value(inner).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}
