//! Experiment runner, bound-verification suite and plotting for the
//! `diging` crate, driven by TOML configuration files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod config;
pub mod experiment;
pub mod plot;

use std::path::PathBuf;

pub use bounds::{run_bound_suite, BoundSuiteReport};
pub use config::{BoundsConfig, ExperimentConfig};
pub use experiment::{run_experiment, ExperimentOutcome, SummaryRow};
pub use plot::{emit_plot, plot_csv_files, PlotSeries};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("config error: {message}")]
    Config { message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] diging::Error),
    #[error("plot: {0}")]
    Plot(String),
    #[error("{0}")]
    Analysis(String),
}

impl BenchError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BenchError::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn write_file(path: &std::path::Path, contents: &str) -> Result<(), BenchError> {
    std::fs::write(path, contents).map_err(|e| BenchError::io(path, e))
}

pub(crate) fn ensure_dir(path: &std::path::Path) -> Result<(), BenchError> {
    std::fs::create_dir_all(path).map_err(|e| BenchError::Config {
        message: format!("output directory {} is not writable: {e}", path.display()),
    })
}
