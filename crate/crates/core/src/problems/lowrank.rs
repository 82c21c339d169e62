use super::sample::data_rng;
use super::{gaussian_mat, Evaluation, ParamSet, Problem, ProblemError, ProblemMeta, Result, Sample};
use crate::matlin::{fro_norm, Mat};

pub const LEFT: &str = "P";
pub const RIGHT: &str = "Q";

/// `f = ½‖P·Q − T‖_F² + ⟨Ξ_P, P⟩ + ⟨Ξ_Q, Q⟩`; nonconvex with two matrix
/// parameters.
#[derive(Debug, Clone)]
pub struct LowRankFactorization {
    target: Mat,
    rank: usize,
    sigma: f64,
    init_scale: f64,
}

impl LowRankFactorization {
    pub fn new(target: Mat, rank: usize, sigma: f64, init_scale: f64) -> Result<Self> {
        if rank == 0 {
            return Err(ProblemError::Invalid("rank must be positive".into()));
        }
        if !(sigma >= 0.0) {
            return Err(ProblemError::Invalid(format!("sigma must be non-negative, got {sigma}")));
        }
        Ok(Self {
            target,
            rank,
            sigma,
            init_scale,
        })
    }

    /// Target is an exact rank-`rank` product of Gaussian factors.
    pub fn generated(m: usize, n: usize, rank: usize, sigma: f64, init_scale: f64, data_seed: u64) -> Result<Self> {
        if m == 0 || n == 0 || rank == 0 {
            return Err(ProblemError::Invalid("low-rank dimensions must be positive".into()));
        }
        let mut rng = data_rng(data_seed, "lowrank");
        let scale = 1.0 / (rank as f64).sqrt().sqrt();
        let a = gaussian_mat(m, rank, scale, &mut rng);
        let b = gaussian_mat(rank, n, scale, &mut rng);
        Self::new(a.matmul(&b)?, rank, sigma, init_scale)
    }

    fn shapes(&self) -> ((usize, usize), (usize, usize)) {
        let (m, n) = self.target.shape();
        ((m, self.rank), (self.rank, n))
    }

    fn noise(&self, sample: Sample) -> (Mat, Mat) {
        let ((m, r), (_, n)) = self.shapes();
        let std = self.sigma / ((m * r + r * n) as f64).sqrt();
        (
            gaussian_mat(m, r, std, &mut sample.rng(LEFT, "noise")),
            gaussian_mat(r, n, std, &mut sample.rng(RIGHT, "noise")),
        )
    }
}

impl Problem for LowRankFactorization {
    fn name(&self) -> &str {
        "lowrank"
    }

    fn meta(&self) -> ProblemMeta {
        ProblemMeta {
            l_smooth: None,
            sigma: Some(self.sigma),
            f_min: Some(0.0),
        }
    }

    fn init(&self, seed: u64) -> ParamSet {
        let ((m, r), (_, n)) = self.shapes();
        let mut rng = Sample::new(seed, 0).rng("init", "lowrank");
        ParamSet::new()
            .with(LEFT, gaussian_mat(m, r, self.init_scale, &mut rng))
            .and_then(|p| p.with(RIGHT, gaussian_mat(r, n, self.init_scale, &mut rng)))
            .expect("fresh set")
    }

    fn evaluate(&self, x: &ParamSet, sample: Sample) -> Result<Evaluation> {
        let (ps, qs) = self.shapes();
        let p = x.expect(LEFT, ps)?;
        let q = x.expect(RIGHT, qs)?;
        let resid = p.matmul(q)?.sub(&self.target)?;
        let (xi_p, xi_q) = self.noise(sample);
        let loss = 0.5 * fro_norm(&resid).powi(2) + xi_p.dot(p)? + xi_q.dot(q)?;
        let gp = resid.matmul(&q.transpose())?.add(&xi_p)?;
        let gq = p.t_matmul(&resid)?.add(&xi_q)?;
        Ok(Evaluation {
            loss,
            grad: ParamSet::new().with(LEFT, gp)?.with(RIGHT, gq)?,
        })
    }

    fn true_grad(&self, x: &ParamSet) -> Option<Result<ParamSet>> {
        let noiseless = Self {
            sigma: 0.0,
            ..self.clone()
        };
        Some(noiseless.evaluate(x, Sample::new(0, 0)).map(|e| e.grad))
    }

    fn full_loss(&self, x: &ParamSet) -> Option<Result<f64>> {
        Some((|| {
            let (ps, qs) = self.shapes();
            let resid = x.expect(LEFT, ps)?.matmul(x.expect(RIGHT, qs)?)?.sub(&self.target)?;
            Ok(0.5 * fro_norm(&resid).powi(2))
        })())
    }
}
