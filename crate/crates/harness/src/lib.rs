//! Experiment sweeps over the semi-synthetic benchmark: configuration,
//! execution over a worker pool, CSV results, SVG trend plots and the
//! `catebench` command line.

pub mod cli;
pub mod config;
pub mod plot;
pub mod report;
pub mod run;

pub use config::{CovariateSource, ExperimentConfig, Knob, LearnerSpec};
pub use plot::emit_plot_svg;
pub use report::{aggregate, emit_csv, read_csv, AggregateRow, Metric, Summary};
pub use run::{fit_learner, run_cell, run_experiment, Experiment, ResultRecord};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// Bad configuration, flags or inputs; exit code 1.
    #[error("{0}")]
    Config(String),
    /// Failure while running; exit code 2.
    #[error("{0}")]
    Runtime(String),
    #[error(transparent)]
    Core(#[from] catebench_core::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Core(catebench_core::Error::InvalidConfig(_)) => 1,
            Self::Runtime(_) | Self::Core(_) => 2,
        }
    }
}
