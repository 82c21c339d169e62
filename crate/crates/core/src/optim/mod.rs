//! Optimizer update rules.
//!
//! Matrix parameters go through [`muon_step`], [`moonlight_step`],
//! [`mars_m_step`] or the clipped-EMA baseline [`clipped_ema_step`];
//! vector-like parameters go through [`adamw_step`]. None of the optimizers
//! evaluate gradients: callers pass them in, and exact MARS-M additionally
//! needs the previous iterate's gradient under the current sample.
//!
//! [`adjusted_recurrence_step`] and [`CorrectionRecurrence`] are the two
//! algebraic forms of the momentum recurrences used by the equivalence
//! checks.

mod adamw;
mod adjusted;
mod clip;
mod ema;
mod mars_m;
mod moonlight;
mod muon;
mod schedule;

pub use adamw::{adamw_step, AdamWConfig, AdamWState};
pub use adjusted::{
    adjusted_recurrence_step, AdjustedConfig, AdjustedState, CorrectionConfig, CorrectionRecurrence,
};
pub use clip::clip_fro;
pub use ema::{clipped_ema_step, ClippedEmaConfig, ClippedEmaState};
pub use mars_m::{corrected_gradient, mars_m_step, MarsMConfig, MarsMState, MarsMode};
pub use moonlight::{moonlight_step, MoonlightConfig, MoonlightState};
pub use muon::{muon_step, MuonConfig, MuonState};
pub use schedule::{theory_beta, verify_schedule_lemma, LemmaCheck, Schedule, ScheduleValue};

use thiserror::Error;

use crate::matlin::{LinalgError, Mat};

/// Default scale constant matching the update RMS of AdamW.
pub const DEFAULT_RMS_SCALE: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("mode mismatch: {0}")]
    ModeMismatch(&'static str),
    #[error("schedule: {0}")]
    Schedule(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, OptimError>;

/// Result of one optimizer step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// Parameters after the step.
    pub params: Mat,
    /// Update before learning-rate scaling: `params = x − eta·direction`.
    pub direction: Mat,
    pub eta: f64,
}

/// Multiplier applied to the orthogonal factor before weight decay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpdateScale {
    /// `rms_scale·√max(m, n)`; pins the update RMS near `rms_scale`.
    Rms(f64),
    /// No shape scaling; the factor is folded into the learning rate.
    Unit,
}

impl Default for UpdateScale {
    fn default() -> Self {
        UpdateScale::Rms(DEFAULT_RMS_SCALE)
    }
}

impl UpdateScale {
    pub fn factor(&self, rows: usize, cols: usize) -> f64 {
        match self {
            UpdateScale::Rms(s) => s * (rows.max(cols) as f64).sqrt(),
            UpdateScale::Unit => 1.0,
        }
    }
}

pub(crate) fn check_shape(op: &'static str, a: &Mat, b: &Mat) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(LinalgError::ShapeMismatch {
            op,
            left: a.shape(),
            right: b.shape(),
        }
        .into());
    }
    Ok(())
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&beta) {
        return Err(OptimError::InvalidConfig(format!("beta must lie in [0, 1), got {beta}")));
    }
    Ok(())
}

/// `x − eta·(scale·O + λ·x)`, returning the pre-lr direction too.
pub(crate) fn orthogonal_update(
    x: &Mat,
    ortho: &Mat,
    scale: UpdateScale,
    lambda: f64,
    eta: f64,
) -> Result<StepOutput> {
    let factor = scale.factor(x.rows(), x.cols());
    let direction = ortho.lin_comb(factor, x, lambda)?;
    let params = x.lin_comb(1.0, &direction, -eta)?;
    Ok(StepOutput {
        params,
        direction,
        eta,
    })
}
