//! Experiment orchestration for relaxlab: training runs with manifests,
//! attack reports, hyperparameter sweeps, loss-distribution analysis and
//! decision-boundary grids. The `relaxlab` binary is a thin CLI over this.

pub mod analyze;
pub mod attack;
pub mod boundary;
pub mod config;
pub mod run;
pub mod sweep;

pub use config::ExperimentConfig;

use relaxlab::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Process exit status for an error: 1 for bad input, 2 for failures while running.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Usage(_) | Error::Parse { .. } | Error::Dimension(_) => EXIT_CONFIG,
        Error::Numeric(_) | Error::Training(_) | Error::UndefinedMetric(_) | Error::Io(_) | Error::Json(_) => {
            EXIT_RUNTIME
        }
    }
}
