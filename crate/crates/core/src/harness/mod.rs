//! Experiment orchestration: optimum precomputation, single runs, eta tuning
//! sweeps and CSV/JSON output.
//!
//! Suboptimality is always measured against a precomputed `F*` on the full
//! objective (for logistic regression: the whole training set, regularizer
//! included). FedAc variants are evaluated at `avg(w_ag)`, FedAvg and
//! minibatch SGD at `avg(w)`, accelerated minibatch SGD at its `w_ag`.

mod config;
mod output;
mod problem;
mod sweep;

pub use config::{
    load_config, parse_config, resolve_out_dir, Algorithm, ExperimentConfig, ObjectiveSpec,
    DEFAULT_ETA_GRID, DEFAULT_OUT_DIR, OUT_DIR_ENV,
};
pub use output::{
    read_json, read_records_csv, read_rows_csv, write_json, write_records_csv, write_rows_csv,
};
pub use problem::{
    build_objective, compute_optimum, initial_point, prepare_problem, Optimum, Problem,
    OPTIMUM_CACHE_FILE,
};
pub use sweep::{
    median, run_experiment, tune_and_sweep, CellRun, EvalRecord, SweepOutput, SweepRow,
};

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::algorithms::AlgoError;
use crate::dataio::DataError;
use crate::objectives::ObjectiveError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Algo(#[from] AlgoError),
    #[error("optimum not reached after {iterations} iterations (gradient norm {grad_norm:e})")]
    OptimumNotReached { iterations: usize, grad_norm: f64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}
