//! Config-driven orchestration behind the `ioncomm` command line.
//!
//! Each command resolves a [`Settings`] value, computes its tables and writes
//! them as CSV next to a JSON manifest. Output is a pure function of the
//! settings, independent of the thread count.

pub mod config;
pub mod figures;
pub mod output;
mod run;

use std::path::{Path, PathBuf};

pub use config::{Command, ElectronicSpec, Overrides, RunMode, Settings};
pub use run::read_records;

use crate::error::Error;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Model(#[from] Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Input { path: PathBuf, message: String },
}

impl PipelineError {
    /// 2 for configuration and input errors, 3 for numerical failures, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Input { .. } => 2,
            PipelineError::Model(e) if e.is_numerical() => 3,
            PipelineError::Model(_) => 2,
            PipelineError::Io { .. } => 4,
        }
    }
}

/// Runs the command of `settings` and writes its files into `out_dir`.
pub fn execute(settings: &Settings, out_dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let (tables, extra) = match settings.command {
        Command::Run => run::outputs(settings)?,
        _ => (figures::tables_for(settings)?, Vec::new()),
    };
    output::write_all(out_dir, settings, &tables, &extra)
}
