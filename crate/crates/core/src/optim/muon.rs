use super::{check_beta, check_shape, Result, Schedule, StepOutput};
use crate::matlin::Mat;
use crate::polar::PolarMethod;

#[derive(Debug, Clone, PartialEq)]
pub struct MuonConfig {
    pub beta: f64,
    pub lr: Schedule,
    pub polar: PolarMethod,
    /// Orthogonalize `β·M + g` instead of `M`.
    pub nesterov_feed: bool,
    /// Feed `(1 − β)·g` in place of `g`, both into the buffer and the
    /// nesterov feed.
    pub dampened: bool,
}

impl Default for MuonConfig {
    fn default() -> Self {
        Self {
            beta: 0.95,
            lr: Schedule::Constant { lr: 0.02 },
            polar: PolarMethod::default(),
            nesterov_feed: true,
            dampened: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuonState {
    pub momentum: Mat,
    /// Index of the next step, starting at 1.
    pub t: u64,
}

impl MuonState {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            momentum: Mat::zeros(rows, cols),
            t: 1,
        }
    }
}

/// `M ← β·M + g`, `O = polar(M)` (or of `β·M + g`), `X ← X − η·O`.
pub fn muon_step(state: &mut MuonState, x: &Mat, g: &Mat, cfg: &MuonConfig) -> Result<StepOutput> {
    check_shape("muon_step", x, g)?;
    check_shape("muon_step", x, &state.momentum)?;
    check_beta(cfg.beta)?;
    let eta = cfg.lr.eval(state.t)?.eta;
    let feed = if cfg.dampened { 1.0 - cfg.beta } else { 1.0 };

    let momentum = state.momentum.lin_comb(cfg.beta, g, feed)?;
    let target = if cfg.nesterov_feed {
        momentum.lin_comb(cfg.beta, g, feed)?
    } else {
        momentum.clone()
    };
    let direction = cfg.polar.apply(&target)?;
    let params = x.lin_comb(1.0, &direction, -eta)?;

    state.momentum = momentum;
    state.t += 1;
    Ok(StepOutput {
        params,
        direction,
        eta,
    })
}
