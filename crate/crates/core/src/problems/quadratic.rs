use super::sample::data_rng;
use super::{gaussian_mat, Evaluation, ParamSet, Problem, ProblemError, ProblemMeta, Result, Sample};
use crate::matlin::{fro_norm, jacobi_svd, Mat, SVD_DEFAULT_TOL};

pub const PARAM: &str = "X";

/// `f(X, ξ) = ½‖A(X − X*)‖_F² + ⟨Ξ(ξ), X⟩` with Gaussian `Ξ` of total
/// variance `σ²`.
#[derive(Debug, Clone)]
pub struct NoisyQuadratic {
    a: Mat,
    ata: Mat,
    x_star: Mat,
    sigma: f64,
    l_smooth: f64,
}

impl NoisyQuadratic {
    pub fn new(a: Mat, x_star: Mat, sigma: f64) -> Result<Self> {
        if a.rows() != a.cols() || a.cols() != x_star.rows() {
            return Err(ProblemError::Invalid(format!(
                "A must be square with side {}, got {:?}",
                x_star.rows(),
                a.shape()
            )));
        }
        if !(sigma >= 0.0) {
            return Err(ProblemError::Invalid(format!("sigma must be non-negative, got {sigma}")));
        }
        let ata = a.t_matmul(&a)?;
        let l_smooth = jacobi_svd(&a, SVD_DEFAULT_TOL)?.spectral_norm().powi(2);
        Ok(Self {
            a,
            ata,
            x_star,
            sigma,
            l_smooth,
        })
    }

    /// `A = I + coupling·G/√m` and `X* = target_scale·G'`, both from `data_seed`.
    pub fn generated(m: usize, n: usize, sigma: f64, coupling: f64, target_scale: f64, data_seed: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(ProblemError::Invalid("quadratic dimensions must be positive".into()));
        }
        let mut rng = data_rng(data_seed, "quadratic");
        let g = gaussian_mat(m, m, coupling / (m as f64).sqrt(), &mut rng);
        let a = Mat::identity(m).add(&g)?;
        let x_star = gaussian_mat(m, n, target_scale, &mut rng);
        Self::new(a, x_star, sigma)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.x_star.shape()
    }

    pub fn x_star(&self) -> &Mat {
        &self.x_star
    }

    /// Noise matrix `Ξ(ξ)`; entries are i.i.d. `N(0, σ²/(m·n))`.
    pub fn noise(&self, sample: Sample) -> Mat {
        let (m, n) = self.shape();
        let std = self.sigma / ((m * n) as f64).sqrt();
        gaussian_mat(m, n, std, &mut sample.rng(PARAM, "noise"))
    }

    fn residual(&self, x: &ParamSet) -> Result<(Mat, Mat)> {
        let x = x.expect(PARAM, self.shape())?;
        Ok((x.clone(), x.sub(&self.x_star)?))
    }
}

impl Problem for NoisyQuadratic {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn meta(&self) -> ProblemMeta {
        ProblemMeta {
            l_smooth: Some(self.l_smooth),
            sigma: Some(self.sigma),
            f_min: Some(0.0),
        }
    }

    fn init(&self, _seed: u64) -> ParamSet {
        let (m, n) = self.shape();
        ParamSet::new().with(PARAM, Mat::zeros(m, n)).expect("fresh set")
    }

    fn evaluate(&self, x: &ParamSet, sample: Sample) -> Result<Evaluation> {
        let (x, r) = self.residual(x)?;
        let xi = self.noise(sample);
        let loss = 0.5 * fro_norm(&self.a.matmul(&r)?).powi(2) + xi.dot(&x)?;
        let grad = self.ata.matmul(&r)?.add(&xi)?;
        Ok(Evaluation {
            loss,
            grad: ParamSet::new().with(PARAM, grad)?,
        })
    }

    fn true_grad(&self, x: &ParamSet) -> Option<Result<ParamSet>> {
        Some((|| {
            let (_, r) = self.residual(x)?;
            ParamSet::new().with(PARAM, self.ata.matmul(&r)?)
        })())
    }

    fn full_loss(&self, x: &ParamSet) -> Option<Result<f64>> {
        Some((|| {
            let (_, r) = self.residual(x)?;
            Ok(0.5 * fro_norm(&self.a.matmul(&r)?).powi(2))
        })())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(m: Mat) -> ParamSet {
        ParamSet::new().with(PARAM, m).unwrap()
    }

    #[test]
    fn noiseless_minimum_has_zero_gradient() {
        let x_star = Mat::from_fn(2, 2, |r, c| (r * 2 + c) as f64).unwrap();
        let q = NoisyQuadratic::new(Mat::identity(2), x_star.clone(), 0.0).unwrap();
        let e = q.evaluate(&point(x_star.clone()), Sample::new(1, 1)).unwrap();
        assert!(e.grad.get(PARAM).unwrap().is_zero());
        assert_eq!(e.loss, 0.0);
    }

    #[test]
    fn identity_quadratic_gradient_is_residual() {
        let q = NoisyQuadratic::new(Mat::identity(2), Mat::zeros(2, 2), 0.0).unwrap();
        let x = Mat::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]).unwrap();
        let e = q.evaluate(&point(x.clone()), Sample::new(1, 1)).unwrap();
        assert_eq!(e.grad.get(PARAM).unwrap(), &x);
        assert_eq!(q.meta().l_smooth, Some(1.0));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(NoisyQuadratic::new(Mat::identity(3), Mat::zeros(2, 2), 0.0).is_err());
        let q = NoisyQuadratic::new(Mat::identity(2), Mat::zeros(2, 2), 0.0).unwrap();
        assert!(q.evaluate(&point(Mat::zeros(2, 3)), Sample::new(0, 0)).is_err());
    }

    #[test]
    fn noise_is_replayable() {
        let q = NoisyQuadratic::generated(4, 3, 1.0, 0.5, 1.0, 3).unwrap();
        let s = Sample::new(5, 9);
        let x1 = point(Mat::zeros(4, 3));
        let x2 = point(Mat::from_fn(4, 3, |r, c| (r + c) as f64).unwrap());
        let g1 = q.evaluate(&x1, s).unwrap().grad;
        let g2 = q.evaluate(&x2, s).unwrap().grad;
        let t1 = q.true_grad(&x1).unwrap().unwrap();
        let t2 = q.true_grad(&x2).unwrap().unwrap();
        // same sample: identical noise at both points
        let n1 = g1.lin_comb(1.0, &t1, -1.0).unwrap();
        let n2 = g2.lin_comb(1.0, &t2, -1.0).unwrap();
        assert!(n1.lin_comb(1.0, &n2, -1.0).unwrap().fro_norm() < 1e-12);
        let direct = n1.get(PARAM).unwrap().sub(&q.noise(s)).unwrap();
        assert!(fro_norm(&direct) < 1e-12);
    }
}
