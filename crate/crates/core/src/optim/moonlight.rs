use super::{check_beta, check_shape, orthogonal_update, Result, Schedule, StepOutput, UpdateScale};
use crate::matlin::Mat;
use crate::polar::PolarMethod;

#[derive(Debug, Clone, PartialEq)]
pub struct MoonlightConfig {
    pub beta: f64,
    pub lambda: f64,
    pub lr: Schedule,
    pub polar: PolarMethod,
    pub scale: UpdateScale,
}

impl Default for MoonlightConfig {
    fn default() -> Self {
        Self {
            beta: 0.95,
            lambda: 0.1,
            lr: Schedule::Constant { lr: 0.01 },
            polar: PolarMethod::default(),
            scale: UpdateScale::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoonlightState {
    /// Heavy-ball buffer `U_t`.
    pub buffer: Mat,
    pub t: u64,
}

impl MoonlightState {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            buffer: Mat::zeros(rows, cols),
            t: 1,
        }
    }
}

/// `U ← β·U + g`, `M = β·U + g`, `O = polar(M)`,
/// `X ← X − η·(0.2·√max(m,n)·O + λ·X)`.
pub fn moonlight_step(
    state: &mut MoonlightState,
    x: &Mat,
    g: &Mat,
    cfg: &MoonlightConfig,
) -> Result<StepOutput> {
    check_shape("moonlight_step", x, g)?;
    check_shape("moonlight_step", x, &state.buffer)?;
    check_beta(cfg.beta)?;
    let eta = cfg.lr.eval(state.t)?.eta;
    let buffer = state.buffer.lin_comb(cfg.beta, g, 1.0)?;
    let momentum = buffer.lin_comb(cfg.beta, g, 1.0)?;
    let ortho = cfg.polar.apply(&momentum)?;
    let out = orthogonal_update(x, &ortho, cfg.scale, cfg.lambda, eta)?;
    state.buffer = buffer;
    state.t += 1;
    Ok(out)
}

/// Momentum `β·U + g` the next step would orthogonalize.
#[cfg(test)]
pub(crate) fn moonlight_momentum(state: &MoonlightState, g: &Mat, beta: f64) -> Result<Mat> {
    Ok(state.buffer.lin_comb(beta, g, 1.0)?.lin_comb(beta, g, 1.0)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polar::NsScheme;

    fn s(v: f64) -> Mat {
        Mat::scalar(v).unwrap()
    }

    fn cfg(lambda: f64) -> MoonlightConfig {
        MoonlightConfig {
            beta: 0.5,
            lambda,
            lr: Schedule::Constant { lr: 0.1 },
            polar: PolarMethod::NewtonSchulz(NsScheme::cubic(30)),
            scale: UpdateScale::Rms(0.2),
        }
    }

    #[test]
    fn scalar_step_without_decay() {
        let mut st = MoonlightState::new(1, 1);
        assert_eq!(moonlight_momentum(&st, &s(1.0), 0.5).unwrap(), s(1.5));
        let out = moonlight_step(&mut st, &s(0.0), &s(1.0), &cfg(0.0)).unwrap();
        assert_eq!(st.buffer, s(1.0));
        assert!((out.params[(0, 0)] + 0.02).abs() < 1e-15);
    }

    #[test]
    fn scalar_step_with_decay() {
        let mut st = MoonlightState::new(1, 1);
        let out = moonlight_step(&mut st, &s(1.0), &s(1.0), &cfg(0.1)).unwrap();
        assert!((out.params[(0, 0)] - 0.97).abs() < 1e-14);
    }

    #[test]
    fn zero_gradient_no_decay_is_noop() {
        let mut st = MoonlightState::new(3, 2);
        let x = Mat::from_fn(3, 2, |r, c| r as f64 - c as f64).unwrap();
        let out = moonlight_step(&mut st, &x, &Mat::zeros(3, 2), &cfg(0.0)).unwrap();
        assert_eq!(out.params, x);
    }

    #[test]
    fn update_rms_is_point_two_with_exact_polar() {
        let mut c = cfg(0.0);
        c.polar = PolarMethod::Svd;
        let mut st = MoonlightState::new(8, 4);
        let g = Mat::from_fn(8, 4, |r, k| ((r * 7 + k * 3) % 5) as f64 - 2.0 + if r == k { 3.0 } else { 0.0 }).unwrap();
        let out = moonlight_step(&mut st, &Mat::zeros(8, 4), &g, &c).unwrap();
        assert!((out.direction.rms() - 0.2).abs() < 1e-12);
    }
}
