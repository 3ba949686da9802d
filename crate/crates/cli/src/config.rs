//! TOML configuration file. Every key is optional; flags override file values
//! and file values override the built-in defaults.
//!
//! ```toml
//! seed = 7
//! output = "results"
//! format = "csv"
//!
//! [experiment]
//! mc_runs = 100
//! [experiment.linreg]
//! n = 40
//! eps_tilde = 0.4
//!
//! [sweep]
//! mc_runs = 100
//! eps_grid = [0.0, 0.1, 0.2, 0.3, 0.4]
//! [sweep.linreg]
//! nu = 2.5
//!
//! [fit]
//! eps_tilde = 0.3
//! max_outer_iterations = 500
//! objective_rel_tolerance = 1e-8
//!
//! [real_data]
//! train_fraction = 0.6
//! flips = 40
//! eps_tilde = 0.15
//!
//! [inner_solve]
//! eps_tilde = 0.25
//! ```

use std::path::{Path, PathBuf};

use rrm_core::experiments::{ExperimentKind, ExperimentOverrides};
use rrm_core::RrmError;
use serde::Deserialize;

use crate::Format;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub real_data: RealDataSection,
    #[serde(default)]
    pub inner_solve: InnerSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub mc_runs: Option<usize>,
    pub linreg: Option<ExperimentOverrides>,
    pub logreg: Option<ExperimentOverrides>,
    pub pca: Option<ExperimentOverrides>,
    pub covariance: Option<ExperimentOverrides>,
}

impl ExperimentSection {
    pub fn overrides(&self, kind: ExperimentKind) -> ExperimentOverrides {
        let section = match kind {
            ExperimentKind::Linreg => &self.linreg,
            ExperimentKind::Logreg => &self.logreg,
            ExperimentKind::Pca => &self.pca,
            ExperimentKind::Covariance => &self.covariance,
        };
        section.clone().unwrap_or_default()
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub mc_runs: Option<usize>,
    pub eps_grid: Option<Vec<f64>>,
    pub linreg: Option<ExperimentOverrides>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub eps_tilde: Option<f64>,
    pub max_outer_iterations: Option<usize>,
    pub objective_rel_tolerance: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealDataSection {
    pub train_fraction: Option<f64>,
    pub flips: Option<usize>,
    pub eps_tilde: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnerSection {
    pub eps_tilde: Option<f64>,
}

pub fn load(path: Option<&Path>) -> Result<ConfigFile, RrmError> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(path).map_err(|source| RrmError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| {
        RrmError::Config(format!(
            "{}: {}",
            path.display(),
            e.message().replace('\n', " ")
        ))
    })
}
