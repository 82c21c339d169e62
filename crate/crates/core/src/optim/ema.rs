use super::{check_beta, check_shape, clip_fro, orthogonal_update, Result, Schedule, StepOutput, UpdateScale};
use crate::matlin::Mat;
use crate::polar::PolarMethod;

/// Moonlight-style optimizer with an exponential moving average of clipped
/// gradients and no gradient correction.
#[derive(Debug, Clone, PartialEq)]
pub struct ClippedEmaConfig {
    pub beta: f64,
    pub lambda: f64,
    pub lr: Schedule,
    pub polar: PolarMethod,
    pub scale: UpdateScale,
    pub clip: Option<f64>,
}

impl Default for ClippedEmaConfig {
    fn default() -> Self {
        Self {
            beta: 0.95,
            lambda: 0.1,
            lr: Schedule::Constant { lr: 0.01 },
            polar: PolarMethod::default(),
            scale: UpdateScale::default(),
            clip: Some(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClippedEmaState {
    pub momentum: Mat,
    pub t: u64,
}

impl ClippedEmaState {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            momentum: Mat::zeros(rows, cols),
            t: 1,
        }
    }
}

/// `M ← β·M + (1 − β)·clip(g)`, then the Moonlight parameter update.
pub fn clipped_ema_step(
    state: &mut ClippedEmaState,
    x: &Mat,
    g: &Mat,
    cfg: &ClippedEmaConfig,
) -> Result<StepOutput> {
    check_shape("clipped_ema_step", x, g)?;
    check_shape("clipped_ema_step", x, &state.momentum)?;
    check_beta(cfg.beta)?;
    let eta = cfg.lr.eval(state.t)?.eta;
    let fed = match cfg.clip {
        Some(tau) => clip_fro(g, tau),
        None => g.clone(),
    };
    let momentum = state.momentum.lin_comb(cfg.beta, &fed, 1.0 - cfg.beta)?;
    let ortho = cfg.polar.apply(&momentum)?;
    let out = orthogonal_update(x, &ortho, cfg.scale, cfg.lambda, eta)?;
    state.momentum = momentum;
    state.t += 1;
    Ok(out)
}
