//! Experiment runner behind the `rwre` binary: JSON configs in, CSV data and
//! a JSON summary out.

pub mod config;
pub mod error;
pub mod experiments;
pub mod fit;

use std::path::{Path, PathBuf};

pub use config::ExperimentSpec;
pub use error::{CliError, Result};
pub use experiments::{run, Outcome};

/// Paths written by [`write_outputs`].
#[derive(Debug, Clone)]
pub struct Written {
    pub csv: PathBuf,
    pub summary: PathBuf,
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

/// Writes `<dir>/<name>.csv` and `<dir>/<name>.summary.json`.
pub fn write_outputs(spec: &ExperimentSpec, outcome: &Outcome, dir: &Path) -> Result<Written> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.display().to_string(), source })?;
    let csv = dir.join(format!("{}.csv", spec.name));
    let summary = dir.join(format!("{}.summary.json", spec.name));
    write(&csv, &outcome.to_csv()?)?;
    write(&summary, &(serde_json::to_string_pretty(&outcome.summary(spec))? + "\n"))?;
    Ok(Written { csv, summary })
}
