//! Matrix-based variance-reduced optimizers and a seeded benchmark harness.
//!
//! - [`matlin`]: dense matrices and a one-sided Jacobi SVD.
//! - [`polar`]: Newton–Schulz and exact polar factors.
//! - [`optim`]: Muon, Moonlight, MARS-M (exact and approximate), AdamW,
//!   clipping and schedules.
//! - [`problems`]: seeded stochastic problems with re-evaluable gradient
//!   oracles.
//! - [`bench`]: run configs, the training loop, CSV output, slope fitting,
//!   the verification suite and multi-run comparisons.

pub mod bench;
pub mod matlin;
pub mod optim;
pub mod polar;
pub mod problems;

pub use matlin::{fro_norm, jacobi_svd, LinalgError, Mat, SvdResult};
pub use polar::{exact_polar, newton_schulz, NsScheme, NsVariant, PolarMethod};

/// Version string embedded in run summaries.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
