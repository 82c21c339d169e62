use super::{check_beta, check_shape, OptimError, Result, Schedule, StepOutput};
use crate::matlin::Mat;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lambda: f64,
    pub lr: Schedule,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.95,
            eps: 1e-8,
            lambda: 0.1,
            lr: Schedule::Constant { lr: 1e-3 },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamWState {
    pub m: Mat,
    pub v: Mat,
    pub t: u64,
}

impl AdamWState {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            m: Mat::zeros(rows, cols),
            v: Mat::zeros(rows, cols),
            t: 1,
        }
    }
}

/// Bias-corrected Adam step with decoupled weight decay:
/// `x ← x − η·(m̂/(√v̂ + eps) + λ·x)`.
pub fn adamw_step(state: &mut AdamWState, x: &Mat, g: &Mat, cfg: &AdamWConfig) -> Result<StepOutput> {
    check_shape("adamw_step", x, g)?;
    check_shape("adamw_step", x, &state.m)?;
    check_beta(cfg.beta1)?;
    check_beta(cfg.beta2)?;
    if !(cfg.eps > 0.0) {
        return Err(OptimError::InvalidConfig(format!("eps must be positive, got {}", cfg.eps)));
    }
    let t = state.t;
    let eta = cfg.lr.eval(t)?.eta;
    let m = state.m.lin_comb(cfg.beta1, g, 1.0 - cfg.beta1)?;
    let g2 = g.map(|v| v * v);
    let v = state.v.lin_comb(cfg.beta2, &g2, 1.0 - cfg.beta2)?;
    let bc1 = 1.0 - cfg.beta1.powf(t as f64);
    let bc2 = 1.0 - cfg.beta2.powf(t as f64);
    let (rows, cols) = x.shape();
    let direction = Mat::from_fn(rows, cols, |r, c| {
        let mh = m[(r, c)] / bc1;
        let vh = v[(r, c)] / bc2;
        mh / (vh.sqrt() + cfg.eps) + cfg.lambda * x[(r, c)]
    })?;
    let params = x.lin_comb(1.0, &direction, -eta)?;
    state.m = m;
    state.v = v;
    state.t += 1;
    Ok(StepOutput {
        params,
        direction,
        eta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: f64) -> Mat {
        Mat::scalar(v).unwrap()
    }

    fn cfg(lambda: f64) -> AdamWConfig {
        AdamWConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lambda,
            lr: Schedule::Constant { lr: 0.1 },
        }
    }

    #[test]
    fn first_step_with_bias_correction() {
        let mut st = AdamWState::new(1, 1);
        let out = adamw_step(&mut st, &s(0.0), &s(1.0), &cfg(0.0)).unwrap();
        assert!((out.params[(0, 0)] + 0.1 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_no_decay() {
        let mut st = AdamWState::new(1, 3);
        let x = Mat::from_rows(&[&[1.0, -2.0, 3.0]]).unwrap();
        let out = adamw_step(&mut st, &x, &Mat::zeros(1, 3), &cfg(0.0)).unwrap();
        assert_eq!(out.params, x);
    }

    #[test]
    fn decay_only() {
        let mut st = AdamWState::new(1, 1);
        let out = adamw_step(&mut st, &s(1.0), &s(0.0), &cfg(0.1)).unwrap();
        assert!((out.params[(0, 0)] - 0.99).abs() < 1e-15);
    }

    #[test]
    fn update_rms_near_one_before_lr() {
        let mut st = AdamWState::new(4, 1);
        let g = Mat::from_rows(&[&[0.3], &[-2.0], &[5.0], &[-0.01]]).unwrap();
        let out = adamw_step(&mut st, &Mat::zeros(4, 1), &g, &cfg(0.0)).unwrap();
        assert!((out.direction.rms() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn shape_mismatch() {
        let mut st = AdamWState::new(2, 1);
        assert!(adamw_step(&mut st, &Mat::zeros(2, 1), &Mat::zeros(1, 2), &cfg(0.0)).is_err());
    }
}
