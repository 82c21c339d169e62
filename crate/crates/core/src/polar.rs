//! Orthogonal polar factor `U·Vᵀ` of a matrix.
//!
//! [`newton_schulz`] approximates it with a matrix-polynomial iteration;
//! [`exact_polar`] computes it from the Jacobi SVD and serves as the oracle.

use std::fmt;
use std::str::FromStr;

use crate::matlin::{fro_norm, jacobi_svd, LinalgError, Mat, Result, SVD_DEFAULT_TOL};

/// Quintic Newton–Schulz coefficients `(a, b, c)` used by deployed Muon.
pub const QUINTIC_COEFFS: (f64, f64, f64) = (3.4445, -4.7750, 2.0315);

pub const DEFAULT_NS_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsVariant {
    /// `p(Y) = 1.5·Y − 0.5·Y·(YᵀY)`; converges to singular values of exactly 1.
    Cubic,
    /// `p(Y) = a·Y + b·Y·(YᵀY) + c·Y·(YᵀY)²` with [`QUINTIC_COEFFS`].
    Quintic,
}

impl fmt::Display for NsVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NsVariant::Cubic => "cubic",
            NsVariant::Quintic => "quintic",
        })
    }
}

impl FromStr for NsVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "cubic" => Ok(NsVariant::Cubic),
            "quintic" => Ok(NsVariant::Quintic),
            other => Err(format!("unknown newton-schulz variant `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NsScheme {
    pub variant: NsVariant,
    pub steps: usize,
    pub eps: f64,
}

impl NsScheme {
    pub fn cubic(steps: usize) -> Self {
        Self {
            variant: NsVariant::Cubic,
            steps,
            eps: DEFAULT_NS_EPS,
        }
    }

    pub fn quintic(steps: usize) -> Self {
        Self {
            variant: NsVariant::Quintic,
            steps,
            eps: DEFAULT_NS_EPS,
        }
    }
}

impl Default for NsScheme {
    /// Quintic, 5 steps.
    fn default() -> Self {
        Self::quintic(5)
    }
}

/// How an optimizer turns its momentum into an orthogonal direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolarMethod {
    NewtonSchulz(NsScheme),
    /// Exact `U·Vᵀ` from the SVD; zero input maps to zero.
    Svd,
}

impl Default for PolarMethod {
    fn default() -> Self {
        PolarMethod::NewtonSchulz(NsScheme::default())
    }
}

impl PolarMethod {
    pub fn apply(&self, m: &Mat) -> Result<Mat> {
        match self {
            PolarMethod::NewtonSchulz(scheme) => Ok(newton_schulz(m, scheme)),
            PolarMethod::Svd if m.is_zero() => Ok(Mat::zeros(m.rows(), m.cols())),
            PolarMethod::Svd => exact_polar(m),
        }
    }
}

/// Newton–Schulz approximation of the polar factor of `m`.
///
/// Zero input returns zero. Otherwise the iteration starts from
/// `Y₀ = M / ((1 + eps)·‖M‖_F)`, which places every singular value in
/// `(0, 1)`. Wide inputs are processed transposed so the Gram matrix is the
/// smaller square.
pub fn newton_schulz(m: &Mat, scheme: &NsScheme) -> Mat {
    if m.is_zero() {
        return Mat::zeros(m.rows(), m.cols());
    }
    let wide = m.rows() < m.cols();
    let work = if wide { m.transpose() } else { m.clone() };
    let norm = fro_norm(&work);
    let mut y = work.scale(1.0 / ((1.0 + scheme.eps) * norm));
    for _ in 0..scheme.steps {
        let gram = y.t_matmul(&y).expect("gram of a single matrix");
        let poly = match scheme.variant {
            NsVariant::Cubic => gram.scale(-0.5),
            NsVariant::Quintic => {
                let (_, b, c) = QUINTIC_COEFFS;
                let gram2 = gram.matmul(&gram).expect("square");
                gram.lin_comb(b, &gram2, c).expect("same shape")
            }
        };
        let a = match scheme.variant {
            NsVariant::Cubic => 1.5,
            NsVariant::Quintic => QUINTIC_COEFFS.0,
        };
        let yp = y.matmul(&poly).expect("inner dims agree");
        y = y.lin_comb(a, &yp, 1.0).expect("same shape");
    }
    if wide {
        y.transpose()
    } else {
        y
    }
}

/// Exact polar factor `U·Vᵀ` of the reduced SVD.
///
/// Directions with numerically zero singular values keep whatever basis
/// vectors the SVD produced for them.
pub fn exact_polar(m: &Mat) -> Result<Mat> {
    if m.is_zero() {
        return Err(LinalgError::Degenerate("polar factor of the zero matrix"));
    }
    let svd = jacobi_svd(m, SVD_DEFAULT_TOL)?;
    svd.u.matmul(&svd.v.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
        Mat::from_fn(rows, cols, |_, _| StandardNormal.sample(rng)).unwrap()
    }

    fn dist(a: &Mat, b: &Mat) -> f64 {
        fro_norm(&a.sub(b).unwrap())
    }

    #[test]
    fn cubic_on_identity_converges_to_identity() {
        let o = newton_schulz(&Mat::identity(4), &NsScheme::cubic(10));
        assert!(dist(&o, &Mat::identity(4)) <= 1e-6);
        assert!(dist(&o, &exact_polar(&Mat::identity(4)).unwrap()) <= 1e-6);
    }

    #[test]
    fn zero_maps_to_zero() {
        let z = Mat::zeros(3, 2);
        assert_eq!(newton_schulz(&z, &NsScheme::default()), z);
        assert_eq!(newton_schulz(&z, &NsScheme::cubic(30)), z);
        assert_eq!(PolarMethod::Svd.apply(&z).unwrap(), z);
    }

    #[test]
    fn cubic_matches_exact_polar_on_random_tall() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let mut checked = 0;
        while checked < 5 {
            let m = gaussian(16, 8, &mut rng);
            if jacobi_svd(&m, 1e-14).unwrap().condition_number() > 100.0 {
                continue;
            }
            let o = newton_schulz(&m, &NsScheme::cubic(30));
            assert!(dist(&o, &exact_polar(&m).unwrap()) <= 1e-6);
            checked += 1;
        }
    }

    #[test]
    fn exact_polar_of_rotation_is_itself() {
        let (s, c) = 0.7f64.sin_cos();
        let q = Mat::from_rows(&[&[c, -s], &[s, c]]).unwrap();
        assert!(dist(&exact_polar(&q).unwrap(), &q) <= 1e-12);
    }

    #[test]
    fn exact_polar_of_positive_diagonal_is_identity() {
        let o = exact_polar(&Mat::diag(&[3.0, 0.5]).unwrap()).unwrap();
        assert!(dist(&o, &Mat::identity(2)) <= 1e-12);
    }

    #[test]
    fn exact_polar_of_scaled_rotation() {
        let m = Mat::from_rows(&[&[0.0, -2.0], &[2.0, 0.0]]).unwrap();
        let o = exact_polar(&m).unwrap();
        let want = Mat::from_rows(&[&[0.0, -1.0], &[1.0, 0.0]]).unwrap();
        assert!(dist(&o, &want) <= 1e-12);
        let oo_t = o.matmul(&o.transpose()).unwrap();
        assert!(dist(&oo_t, &Mat::identity(2)) <= 1e-12);
        assert!((m.dot(&o).unwrap() - 4.0).abs() <= 1e-12);
    }

    #[test]
    fn exact_polar_rejects_zero() {
        assert!(matches!(exact_polar(&Mat::zeros(2, 2)), Err(LinalgError::Degenerate(_))));
    }

    #[test]
    fn transpose_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = gaussian(5, 9, &mut rng);
        for scheme in [NsScheme::quintic(5), NsScheme::cubic(30)] {
            let a = newton_schulz(&m, &scheme);
            let b = newton_schulz(&m.transpose(), &scheme).transpose();
            assert!(dist(&a, &b) <= 1e-14);
        }
        let a = exact_polar(&m).unwrap();
        let b = exact_polar(&m.transpose()).unwrap().transpose();
        assert!(dist(&a, &b) <= 1e-12);
    }

    #[test]
    fn cubic_columns_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut checked = 0;
        while checked < 10 {
            let m = gaussian(12, 6, &mut rng);
            let svd = jacobi_svd(&m, 1e-14).unwrap();
            if svd.s[5] < 1e-3 * svd.s[0] {
                continue;
            }
            let c = newton_schulz(&m, &NsScheme::cubic(30));
            assert!(dist(&c.t_matmul(&c).unwrap(), &Mat::identity(6)) <= 1e-6);
            checked += 1;
        }
    }

    // Five quintic steps leave singular values scattered in roughly
    // [0.68, 1.2]; the output shares singular vectors with the input, so the
    // band also bounds the alignment from below by half the nuclear norm.
    #[test]
    fn quintic_singular_values_stay_in_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        while checked < 20 {
            let m = gaussian(10, 6, &mut rng);
            let svd = jacobi_svd(&m, 1e-14).unwrap();
            if svd.condition_number() > 100.0 {
                continue;
            }
            let o = newton_schulz(&m, &NsScheme::quintic(5));
            let so = jacobi_svd(&o, 1e-14).unwrap().s;
            assert!(so.iter().all(|&v| (0.5..=1.5).contains(&v)), "{so:?}");
            assert!(m.dot(&o).unwrap() >= 0.5 * svd.nuclear_norm());
            checked += 1;
        }
    }

    #[test]
    fn one_quintic_step_is_far_from_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = gaussian(32, 16, &mut rng);
        let so = jacobi_svd(&newton_schulz(&m, &NsScheme::quintic(1)), 1e-14).unwrap().s;
        assert!(so[so.len() - 1] < 0.5);
    }

    #[test]
    fn exact_polar_beats_sampled_semi_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let m = gaussian(6, 4, &mut rng);
        let best = m.dot(&exact_polar(&m).unwrap()).unwrap();
        for _ in 0..100 {
            let q = exact_polar(&gaussian(6, 4, &mut rng)).unwrap();
            assert!(best >= m.dot(&q).unwrap() - 1e-12);
        }
    }

    #[test]
    fn scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = gaussian(7, 5, &mut rng);
        for scheme in [NsScheme::quintic(5), NsScheme::cubic(30)] {
            let base = newton_schulz(&m, &scheme);
            for c in [1e-3, 1.0, 1e3] {
                assert!(dist(&newton_schulz(&m.scale(c), &scheme), &base) <= 1e-9);
            }
        }
    }

    #[test]
    fn scalar_input_is_sign() {
        let o = newton_schulz(&Mat::scalar(-2.0).unwrap(), &NsScheme::cubic(30));
        assert!((o[(0, 0)] + 1.0).abs() < 1e-14);
    }
}
