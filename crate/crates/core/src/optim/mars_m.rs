use std::fmt;
use std::str::FromStr;

use super::{
    check_beta, check_shape, clip_fro, orthogonal_update, theory_beta, OptimError, Result, Schedule,
    StepOutput, UpdateScale,
};
use crate::matlin::Mat;
use crate::polar::PolarMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarsMode {
    /// Correction uses `∇f(X_{t−1}, ξ_t)`: two gradient evaluations per step.
    Exact,
    /// Correction reuses the stored `∇f(X_{t−1}, ξ_{t−1})`.
    Approximate,
}

impl fmt::Display for MarsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MarsMode::Exact => "exact",
            MarsMode::Approximate => "approximate",
        })
    }
}

impl FromStr for MarsMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "exact" => Ok(MarsMode::Exact),
            "approximate" | "approx" => Ok(MarsMode::Approximate),
            other => Err(format!("unknown mars-m mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MarsMConfig {
    /// Ignored under [`Schedule::Theory`], which supplies its own momentum.
    pub beta: f64,
    pub gamma: f64,
    /// Overrides `gamma` with a per-step value when set.
    pub gamma_schedule: Option<fn(u64) -> f64>,
    pub lambda: f64,
    pub lr: Schedule,
    pub polar: PolarMethod,
    pub scale: UpdateScale,
    /// Frobenius clip threshold on the corrected gradient; `None` disables.
    pub clip: Option<f64>,
    pub mode: MarsMode,
}

impl Default for MarsMConfig {
    fn default() -> Self {
        Self {
            beta: 0.95,
            gamma: 0.025,
            gamma_schedule: None,
            lambda: 0.1,
            lr: Schedule::Constant { lr: 0.01 },
            polar: PolarMethod::default(),
            scale: UpdateScale::default(),
            clip: Some(1.0),
            mode: MarsMode::Approximate,
        }
    }
}

impl MarsMConfig {
    pub fn gamma_at(&self, t: u64) -> f64 {
        self.gamma_schedule.map_or(self.gamma, |f| f(t))
    }

    pub fn beta_at(&self, t: u64) -> f64 {
        match self.lr {
            Schedule::Theory { s } => theory_beta(s, t),
            _ => self.beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_beta(self.beta)?;
        if !(self.gamma >= 0.0 && self.lambda >= 0.0) {
            return Err(OptimError::InvalidConfig("gamma and lambda must be non-negative".into()));
        }
        if let Some(tau) = self.clip {
            if !(tau > 0.0) {
                return Err(OptimError::InvalidConfig(format!("clip threshold must be positive, got {tau}")));
            }
        }
        if let UpdateScale::Rms(s) = self.scale {
            if !(s > 0.0) {
                return Err(OptimError::InvalidConfig(format!("rms_scale must be positive, got {s}")));
            }
        }
        self.lr.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarsMState {
    pub momentum: Mat,
    /// Approximate mode: `∇f(X_{t−1}, ξ_{t−1})`.
    pub prev_grad: Option<Mat>,
    /// Exact mode: `X_{t−1}`.
    pub prev_x: Option<Mat>,
    pub t: u64,
    mode: MarsMode,
}

impl MarsMState {
    pub fn new(rows: usize, cols: usize, mode: MarsMode) -> Self {
        Self {
            momentum: Mat::zeros(rows, cols),
            prev_grad: None,
            prev_x: None,
            t: 1,
            mode,
        }
    }

    pub fn mode(&self) -> MarsMode {
        self.mode
    }

    /// Where an exact-mode caller must evaluate the reference gradient under
    /// the current sample. On the first step this is `x` itself.
    pub fn prev_point<'a>(&'a self, x: &'a Mat) -> &'a Mat {
        self.prev_x.as_ref().unwrap_or(x)
    }
}

/// `C = g + γ·(β/(1−β))·(g − g_ref)`.
pub fn corrected_gradient(g: &Mat, g_ref: &Mat, beta: f64, gamma: f64) -> Result<Mat> {
    check_shape("corrected_gradient", g, g_ref)?;
    let coef = gamma * beta / (1.0 - beta);
    Ok(g.lin_comb(1.0 + coef, g_ref, -coef)?)
}

/// One MARS-M step.
///
/// `C = g + γ·(β/(1−β))·(g − g_ref)`, `M ← β·M + (1−β)·clip(C)`,
/// `O = polar(M)`, `X ← X − η·(0.2·√max(m,n)·O + λ·X)`.
///
/// Exact mode takes `g_ref = g_prev_same_sample`, which the caller evaluates
/// at [`MarsMState::prev_point`]. Approximate mode must not be given one and
/// uses the stored previous gradient; on its first step the correction is
/// zero.
pub fn mars_m_step(
    state: &mut MarsMState,
    x: &Mat,
    g_cur: &Mat,
    g_prev_same_sample: Option<&Mat>,
    cfg: &MarsMConfig,
) -> Result<StepOutput> {
    if state.mode != cfg.mode {
        return Err(OptimError::ModeMismatch("state and config disagree on mode"));
    }
    check_shape("mars_m_step", x, g_cur)?;
    check_shape("mars_m_step", x, &state.momentum)?;
    cfg.validate()?;
    let g_ref = match (cfg.mode, g_prev_same_sample) {
        (MarsMode::Exact, Some(g)) => g,
        (MarsMode::Exact, None) => {
            return Err(OptimError::ModeMismatch("exact mode requires g_prev_same_sample"))
        }
        (MarsMode::Approximate, Some(_)) => {
            return Err(OptimError::ModeMismatch("approximate mode takes no g_prev_same_sample"))
        }
        (MarsMode::Approximate, None) => state.prev_grad.as_ref().unwrap_or(g_cur),
    };
    check_shape("mars_m_step", x, g_ref)?;

    let t = state.t;
    let eta = cfg.lr.eval(t)?.eta;
    let beta = cfg.beta_at(t);
    let c = corrected_gradient(g_cur, g_ref, beta, cfg.gamma_at(t))?;
    let c = match cfg.clip {
        Some(tau) => clip_fro(&c, tau),
        None => c,
    };
    let momentum = state.momentum.lin_comb(beta, &c, 1.0 - beta)?;
    let ortho = cfg.polar.apply(&momentum)?;
    let out = orthogonal_update(x, &ortho, cfg.scale, cfg.lambda, eta)?;

    state.momentum = momentum;
    match cfg.mode {
        MarsMode::Exact => state.prev_x = Some(x.clone()),
        MarsMode::Approximate => state.prev_grad = Some(g_cur.clone()),
    }
    state.t += 1;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matlin::fro_norm;
    use crate::optim::{clipped_ema_step, ClippedEmaConfig, ClippedEmaState};
    use crate::polar::NsScheme;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn s(v: f64) -> Mat {
        Mat::scalar(v).unwrap()
    }

    fn scalar_cfg(mode: MarsMode) -> MarsMConfig {
        MarsMConfig {
            beta: 0.95,
            gamma: 0.025,
            lambda: 0.0,
            lr: Schedule::Constant { lr: 0.1 },
            polar: PolarMethod::NewtonSchulz(NsScheme::cubic(30)),
            mode,
            ..MarsMConfig::default()
        }
    }

    #[test]
    fn worked_scalar_step() {
        // C = 1 + 0.475·0.2 = 1.095, clipped to 1; M = 0.05; O = 1.
        let c = corrected_gradient(&s(1.0), &s(0.8), 0.95, 0.025).unwrap();
        assert!((c[(0, 0)] - 1.095).abs() < 1e-12);
        let cfg = scalar_cfg(MarsMode::Exact);
        let mut st = MarsMState::new(1, 1, MarsMode::Exact);
        let out = mars_m_step(&mut st, &s(0.0), &s(1.0), Some(&s(0.8)), &cfg).unwrap();
        assert!((st.momentum[(0, 0)] - 0.05).abs() < 1e-15);
        assert!((out.direction[(0, 0)] - 0.2).abs() < 1e-14);
        assert!((out.params[(0, 0)] + 0.02).abs() < 1e-15);
        assert_eq!(st.prev_x, Some(s(0.0)));
    }

    #[test]
    fn first_step_has_no_correction() {
        for gamma in [0.0, 0.025, 0.7] {
            let mut cfg = scalar_cfg(MarsMode::Exact);
            cfg.gamma = gamma;
            cfg.clip = None;
            let x = s(0.3);
            let g = s(0.4);
            let mut st = MarsMState::new(1, 1, MarsMode::Exact);
            assert_eq!(st.prev_point(&x), &x);
            mars_m_step(&mut st, &x, &g, Some(&g), &cfg).unwrap();
            assert!((st.momentum[(0, 0)] - 0.05 * 0.4).abs() < 1e-15);

            cfg.mode = MarsMode::Approximate;
            let mut st = MarsMState::new(1, 1, MarsMode::Approximate);
            mars_m_step(&mut st, &x, &g, None, &cfg).unwrap();
            assert!((st.momentum[(0, 0)] - 0.05 * 0.4).abs() < 1e-15);
            assert_eq!(st.prev_grad, Some(g.clone()));
        }
    }

    #[test]
    fn mode_argument_mismatch() {
        let mut st = MarsMState::new(1, 1, MarsMode::Exact);
        let cfg = scalar_cfg(MarsMode::Exact);
        assert!(matches!(
            mars_m_step(&mut st, &s(0.0), &s(1.0), None, &cfg),
            Err(OptimError::ModeMismatch(_))
        ));
        let mut st = MarsMState::new(1, 1, MarsMode::Approximate);
        let cfg = scalar_cfg(MarsMode::Approximate);
        assert!(matches!(
            mars_m_step(&mut st, &s(0.0), &s(1.0), Some(&s(1.0)), &cfg),
            Err(OptimError::ModeMismatch(_))
        ));
        let cfg = scalar_cfg(MarsMode::Exact);
        assert!(mars_m_step(&mut st, &s(0.0), &s(1.0), Some(&s(1.0)), &cfg).is_err());
        assert_eq!(st.t, 1);
    }

    #[test]
    fn shape_mismatch() {
        let mut st = MarsMState::new(2, 2, MarsMode::Exact);
        let cfg = MarsMConfig {
            mode: MarsMode::Exact,
            ..MarsMConfig::default()
        };
        let err = mars_m_step(&mut st, &Mat::zeros(2, 2), &Mat::zeros(2, 2), Some(&Mat::zeros(1, 2)), &cfg);
        assert!(matches!(err, Err(OptimError::Linalg(_))));
    }

    #[test]
    fn gamma_zero_collapses_to_clipped_ema() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let cfg = MarsMConfig {
            gamma: 0.0,
            ..MarsMConfig::default()
        };
        let ema_cfg = ClippedEmaConfig {
            beta: cfg.beta,
            lambda: cfg.lambda,
            lr: cfg.lr,
            polar: cfg.polar,
            scale: cfg.scale,
            clip: cfg.clip,
        };
        let mut st = MarsMState::new(5, 3, MarsMode::Approximate);
        let mut est = ClippedEmaState::new(5, 3);
        let mut x = Mat::zeros(5, 3);
        let mut y = Mat::zeros(5, 3);
        for _ in 0..100 {
            let g = Mat::from_fn(5, 3, |_, _| { let z: f64 = StandardNormal.sample(&mut rng); 2.0 * z }).unwrap();
            x = mars_m_step(&mut st, &x, &g, None, &cfg).unwrap().params;
            y = clipped_ema_step(&mut est, &y, &g, &ema_cfg).unwrap().params;
            assert!(fro_norm(&x.sub(&y).unwrap()) <= 1e-12);
        }
    }

    #[test]
    fn theory_schedule_drives_beta() {
        let cfg = MarsMConfig {
            lr: Schedule::Theory { s: 4.0 },
            ..MarsMConfig::default()
        };
        assert!((cfg.beta_at(1) - (1.0 - 2.0 * 4f64.powf(-2.0 / 3.0))).abs() < 1e-15);
        assert!((cfg.beta_at(3) - (1.0 - 2.0 * 6f64.powf(-2.0 / 3.0))).abs() < 1e-15);
        let flat = MarsMConfig::default();
        assert_eq!(flat.beta_at(7), 0.95);
    }

    #[test]
    fn gamma_schedule_hook() {
        fn ramp(t: u64) -> f64 {
            0.01 * t as f64
        }
        let cfg = MarsMConfig {
            gamma_schedule: Some(ramp),
            ..MarsMConfig::default()
        };
        assert_eq!(cfg.gamma_at(3), 0.03);
        assert_eq!(MarsMConfig::default().gamma_at(3), 0.025);
    }

    #[test]
    fn direction_invariant_to_momentum_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = Mat::from_fn(6, 4, |_, _| StandardNormal.sample(&mut rng)).unwrap();
        let polar = PolarMethod::default();
        let base = polar.apply(&m).unwrap();
        for c in [1e-3, 0.5, 1e3] {
            let o = polar.apply(&m.scale(c)).unwrap();
            assert!(fro_norm(&o.sub(&base).unwrap()) <= 1e-9);
        }
    }
}
