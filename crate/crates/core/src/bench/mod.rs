//! Benchmark harness: config files, the training loop, CSV output,
//! convergence-slope fitting, the self-check suite and multi-run comparison.

mod compare;
mod config;
mod runner;
mod slope;
mod verify;

pub use compare::{compare, CompareRow, Comparison};
pub use config::{ConfigError, MatrixOptimizer, OptimizerSpec, RunConfig};
pub use runner::{execute, format_real, run, summary_text, write_csv, RunOutput, RunRecord, RunResult, CSV_HEADER};
pub use slope::{fit_points, fit_slope, read_column, SlopeError, DEFAULT_BURN_IN, MIN_FIT_ROWS};
pub use verify::{finite_difference_error, verify, Bound, Check, VerifyOptions};

use std::path::PathBuf;

use thiserror::Error;

/// Canned theory-mode config shipped with the crate.
pub const THEORY_CONFIG: &str = include_str!("../../configs/theory.ini");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("problem: {0}")]
    Problem(String),
    #[error("optimizer: {0}")]
    Optimizer(String),
    #[error("numerical failure at step {step}: {what}")]
    Numerical { step: u64, what: String },
    #[error("i/o on {path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error(transparent)]
    Slope(#[from] SlopeError),
    #[error("{0}")]
    Usage(String),
    #[error("{failed} verification check(s) failed")]
    VerificationFailed { failed: usize },
    #[error("run `{name}` seed {seed}: {source}")]
    Run {
        name: String,
        seed: u64,
        source: Box<BenchError>,
    },
}

impl BenchError {
    /// Process exit code: 1 verification failure, 2 config or input error,
    /// 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::VerificationFailed { .. } => 1,
            BenchError::Numerical { .. } => 3,
            BenchError::Run { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}
