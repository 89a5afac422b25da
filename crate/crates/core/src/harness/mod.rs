//! Experiment configuration, seeded parallel execution and file output.

mod config;
mod output;
mod run;

use thiserror::Error;

pub use config::{parse_config, ConfigError, ExperimentConfig};
pub use output::{
    emit_plot_data, format_number, read_csv, write_csv, PlotKind, CSV_COLUMNS,
};
pub use run::{
    realization_outcomes, realization_rng, run_experiment, run_experiment_with_workers, run_point,
    run_realization,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Protocol(#[from] crate::protocols::ProtocolError),
    #[error(transparent)]
    Traffic(#[from] crate::traffic::TrafficError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("no reports to write")]
    EmptyReports,
    #[error("unknown plot kind `{0}` (expected throughput, plr, delay or acr)")]
    UnknownPlotKind(String),
    #[error("malformed CSV at line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("cannot build worker pool: {0}")]
    Pool(String),
}
