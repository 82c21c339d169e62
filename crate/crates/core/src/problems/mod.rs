//! Seeded stochastic optimization problems.
//!
//! Every problem is an immutable oracle: gradients are pure functions of the
//! parameters and a [`Sample`], so the same sample can be replayed at another
//! point. Exact MARS-M relies on this to evaluate `∇f(X_{t−1}, ξ_t)`.

mod lowrank;
mod mlp;
mod params;
mod quadratic;
mod sample;

pub use lowrank::LowRankFactorization;
pub use mlp::{MlpDims, SyntheticMlp};
pub use params::{Param, ParamKind, ParamSet};
pub use quadratic::NoisyQuadratic;
pub use sample::Sample;

use thiserror::Error;

use crate::matlin::LinalgError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("missing parameter `{0}`")]
    MissingParam(String),
    #[error("duplicate parameter `{0}`")]
    DuplicateParam(String),
    #[error("parameter `{name}` has shape {got:?}, expected {want:?}")]
    ParamShape {
        name: String,
        got: (usize, usize),
        want: (usize, usize),
    },
    #[error("batch size {batch} exceeds dataset size {size}")]
    BatchTooLarge { batch: usize, size: usize },
    #[error("invalid problem: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, ProblemError>;

/// Analytic constants, where known.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProblemMeta {
    /// Smoothness constant `L` of every `f(·, ξ)`.
    pub l_smooth: Option<f64>,
    /// `√E‖∇f(X, ξ) − ∇F(X)‖_F²`.
    pub sigma: Option<f64>,
    /// `min F`.
    pub f_min: Option<f64>,
}

/// Loss and gradient of `f(X, ξ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub grad: ParamSet,
}

pub trait Problem: Send + Sync {
    fn name(&self) -> &str;

    fn meta(&self) -> ProblemMeta;

    /// Starting point for a run with the given seed.
    fn init(&self, seed: u64) -> ParamSet;

    fn evaluate(&self, x: &ParamSet, sample: Sample) -> Result<Evaluation>;

    /// `∇F(X)`, when available in closed form.
    fn true_grad(&self, _x: &ParamSet) -> Option<Result<ParamSet>> {
        None
    }

    /// `F(X)` (or the full-dataset loss), when computable.
    fn full_loss(&self, _x: &ParamSet) -> Option<Result<f64>> {
        None
    }
}

/// Declarative description of a problem, as read from a run config.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Quadratic {
        m: usize,
        n: usize,
        sigma: f64,
        /// Off-identity strength of the generated `A`.
        coupling: f64,
        /// Entry scale of the generated minimizer `X*`.
        target_scale: f64,
        data_seed: u64,
    },
    LowRank {
        m: usize,
        n: usize,
        rank: usize,
        sigma: f64,
        init_scale: f64,
        data_seed: u64,
    },
    Mlp {
        dims: MlpDims,
        batch: usize,
        dataset_size: usize,
        init_scale: f64,
        data_seed: u64,
    },
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Box<dyn Problem>> {
        Ok(match *self {
            ProblemSpec::Quadratic {
                m,
                n,
                sigma,
                coupling,
                target_scale,
                data_seed,
            } => Box::new(NoisyQuadratic::generated(m, n, sigma, coupling, target_scale, data_seed)?),
            ProblemSpec::LowRank {
                m,
                n,
                rank,
                sigma,
                init_scale,
                data_seed,
            } => Box::new(LowRankFactorization::generated(m, n, rank, sigma, init_scale, data_seed)?),
            ProblemSpec::Mlp {
                dims,
                batch,
                dataset_size,
                init_scale,
                data_seed,
            } => Box::new(SyntheticMlp::generated(dims, batch, dataset_size, init_scale, data_seed)?),
        })
    }
}

/// Gaussian matrix with i.i.d. `N(0, std²)` entries drawn from `rng`.
pub(crate) fn gaussian_mat(
    rows: usize,
    cols: usize,
    std: f64,
    rng: &mut impl rand::Rng,
) -> crate::matlin::Mat {
    use rand_distr::{Distribution, StandardNormal};
    crate::matlin::Mat::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        std * z
    })
    .expect("gaussian entries are finite")
}
