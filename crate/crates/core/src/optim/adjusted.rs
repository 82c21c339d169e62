//! Two algebraic forms of the corrected-momentum recurrence.
//!
//! The correction form keeps `M` and the previous gradient:
//!
//! ```text
//! C_t = w·g_t + γ·(β/(1−β))·(g_t − g_{t−1})
//! M_t = β·M_{t−1} + (1−β)·C_t
//! ```
//!
//! The adjusted-momentum form keeps a heavy-ball buffer instead:
//!
//! ```text
//! U_t = β·U_{t−1} + (w − γ)·(1−β)/β · g_t
//! M_t = β·U_t + γ·g_t
//! ```
//!
//! Both start from zero state with `g_0 = 0` and produce identical `M_t`.
//! With `w = 1` they are approximate MARS-M without clipping; with
//! `w = 1/(1−β)` and `γ = 1` they are Moonlight's momentum.

use super::{check_shape, OptimError, Result};
use crate::matlin::Mat;

fn check_open_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(OptimError::InvalidConfig(format!("beta must lie in (0, 1), got {beta}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjustedConfig {
    pub beta: f64,
    pub gamma: f64,
    /// Gradient weight `w`; 1 for MARS-M.
    pub grad_weight: f64,
}

impl AdjustedConfig {
    pub fn new(beta: f64, gamma: f64) -> Self {
        Self {
            beta,
            gamma,
            grad_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjustedState {
    pub buffer: Mat,
    pub momentum: Mat,
    pub t: u64,
}

impl AdjustedState {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            buffer: Mat::zeros(rows, cols),
            momentum: Mat::zeros(rows, cols),
            t: 1,
        }
    }

    /// State equivalent to a correction-form state holding `momentum` and
    /// previous gradient `prev_grad`: `U = (M − γ·g_prev)/β`.
    pub fn from_correction_state(momentum: &Mat, prev_grad: &Mat, cfg: &AdjustedConfig) -> Result<Self> {
        check_open_beta(cfg.beta)?;
        let buffer = momentum.lin_comb(1.0 / cfg.beta, prev_grad, -cfg.gamma / cfg.beta)?;
        Ok(Self {
            buffer,
            momentum: momentum.clone(),
            t: 1,
        })
    }
}

/// Advances the adjusted-momentum recurrence and returns `M_t`.
pub fn adjusted_recurrence_step(state: &mut AdjustedState, g: &Mat, cfg: &AdjustedConfig) -> Result<Mat> {
    check_shape("adjusted_recurrence_step", g, &state.buffer)?;
    check_open_beta(cfg.beta)?;
    let AdjustedConfig {
        beta,
        gamma,
        grad_weight,
    } = *cfg;
    let buffer = state
        .buffer
        .lin_comb(beta, g, (grad_weight - gamma) * (1.0 - beta) / beta)?;
    let momentum = buffer.lin_comb(beta, g, gamma)?;
    state.buffer = buffer;
    state.momentum = momentum.clone();
    state.t += 1;
    Ok(momentum)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionConfig {
    pub beta: f64,
    pub gamma: f64,
    pub grad_weight: f64,
}

/// Correction-form recurrence with `g_0 = 0` and no clipping.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionRecurrence {
    pub momentum: Mat,
    pub prev_grad: Mat,
}

impl CorrectionRecurrence {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            momentum: Mat::zeros(rows, cols),
            prev_grad: Mat::zeros(rows, cols),
        }
    }

    pub fn step(&mut self, g: &Mat, cfg: &CorrectionConfig) -> Result<&Mat> {
        check_shape("correction_step", g, &self.momentum)?;
        check_open_beta(cfg.beta)?;
        let coef = cfg.gamma * cfg.beta / (1.0 - cfg.beta);
        let c = g.lin_comb(cfg.grad_weight + coef, &self.prev_grad, -coef)?;
        self.momentum = self.momentum.lin_comb(cfg.beta, &c, 1.0 - cfg.beta)?;
        self.prev_grad = g.clone();
        Ok(&self.momentum)
    }
}
