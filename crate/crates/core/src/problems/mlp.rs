use rand::Rng;

use super::sample::data_rng;
use super::{gaussian_mat, Evaluation, ParamSet, Problem, ProblemError, ProblemMeta, Result, Sample};
use crate::matlin::Mat;

pub const W1: &str = "W1";
pub const B1: &str = "b1";
pub const W2: &str = "W2";
pub const B2: &str = "b2";

const CLUSTERS_PER_CLASS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpDims {
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Default for MlpDims {
    fn default() -> Self {
        Self {
            input: 32,
            hidden: 32,
            classes: 4,
        }
    }
}

/// Two-layer `tanh` network with softmax cross-entropy on a synthetic
/// Gaussian-mixture dataset (two clusters per class).
#[derive(Debug, Clone)]
pub struct SyntheticMlp {
    dims: MlpDims,
    batch: usize,
    features: Mat,
    labels: Vec<usize>,
    init_scale: f64,
}

impl SyntheticMlp {
    pub fn new(dims: MlpDims, batch: usize, features: Mat, labels: Vec<usize>, init_scale: f64) -> Result<Self> {
        if dims.input == 0 || dims.hidden == 0 || dims.classes < 2 {
            return Err(ProblemError::Invalid("mlp needs positive dims and at least two classes".into()));
        }
        if features.cols() != dims.input || features.rows() != labels.len() {
            return Err(ProblemError::Invalid("features and labels disagree with dims".into()));
        }
        if labels.iter().any(|&y| y >= dims.classes) {
            return Err(ProblemError::Invalid("label out of range".into()));
        }
        if batch == 0 || batch > labels.len() {
            return Err(ProblemError::BatchTooLarge {
                batch,
                size: labels.len(),
            });
        }
        Ok(Self {
            dims,
            batch,
            features,
            labels,
            init_scale,
        })
    }

    /// Point `i` belongs to class `i mod c` and to one of that class's two
    /// cluster centers; centers and offsets are unit Gaussians.
    pub fn generated(dims: MlpDims, batch: usize, dataset_size: usize, init_scale: f64, data_seed: u64) -> Result<Self> {
        if dataset_size == 0 || dims.input == 0 || dims.classes == 0 {
            return Err(ProblemError::Invalid("dataset must be non-empty".into()));
        }
        let mut rng = data_rng(data_seed, "mlp");
        let centers = gaussian_mat(dims.classes * CLUSTERS_PER_CLASS, dims.input, 1.0, &mut rng);
        let noise = gaussian_mat(dataset_size, dims.input, 1.0, &mut rng);
        let labels: Vec<usize> = (0..dataset_size).map(|i| i % dims.classes).collect();
        let features = Mat::from_fn(dataset_size, dims.input, |i, j| {
            let cluster = labels[i] * CLUSTERS_PER_CLASS + (i / dims.classes) % CLUSTERS_PER_CLASS;
            centers[(cluster, j)] + noise[(i, j)]
        })?;
        Self::new(dims, batch, features, labels, init_scale)
    }

    pub fn dims(&self) -> MlpDims {
        self.dims
    }

    pub fn dataset_size(&self) -> usize {
        self.labels.len()
    }

    /// Minibatch indices for a sample, drawn with replacement.
    pub fn batch_indices(&self, sample: Sample) -> Vec<usize> {
        let mut rng = sample.rng("batch", "minibatch");
        (0..self.batch).map(|_| rng.random_range(0..self.labels.len())).collect()
    }

    /// Mean cross-entropy and gradients over the given examples.
    pub fn loss_and_grad(&self, x: &ParamSet, indices: &[usize]) -> Result<Evaluation> {
        let MlpDims { input, hidden, classes } = self.dims;
        let w1 = x.expect(W1, (hidden, input))?;
        let b1 = x.expect(B1, (hidden, 1))?;
        let w2 = x.expect(W2, (classes, hidden))?;
        let b2 = x.expect(B2, (classes, 1))?;
        let bsz = indices.len();
        if bsz == 0 {
            return Err(ProblemError::Invalid("empty batch".into()));
        }

        let xb = Mat::from_fn(bsz, input, |r, c| self.features[(indices[r], c)])?;
        let z1 = xb.matmul(&w1.transpose())?;
        let act = Mat::from_fn(bsz, hidden, |r, c| (z1[(r, c)] + b1[(c, 0)]).tanh())?;
        let z2 = act.matmul(&w2.transpose())?;

        let mut loss = 0.0;
        let mut d2 = Mat::zeros(bsz, classes);
        for r in 0..bsz {
            let logits: Vec<f64> = (0..classes).map(|k| z2[(r, k)] + b2[(k, 0)]).collect();
            let peak = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let denom: f64 = logits.iter().map(|z| (z - peak).exp()).sum();
            let lse = peak + denom.ln();
            let y = self.labels[indices[r]];
            loss += lse - logits[y];
            for k in 0..classes {
                let p = (logits[k] - lse).exp();
                d2[(r, k)] = (p - if k == y { 1.0 } else { 0.0 }) / bsz as f64;
            }
        }
        loss /= bsz as f64;

        let gw2 = d2.t_matmul(&act)?;
        let gb2 = column_sums(&d2);
        let da = d2.matmul(w2)?;
        let d1 = Mat::from_fn(bsz, hidden, |r, c| {
            let a = act[(r, c)];
            da[(r, c)] * (1.0 - a * a)
        })?;
        let gw1 = d1.t_matmul(&xb)?;
        let gb1 = column_sums(&d1);

        let grad = ParamSet::new().with(W1, gw1)?.with(B1, gb1)?.with(W2, gw2)?.with(B2, gb2)?;
        Ok(Evaluation { loss, grad })
    }
}

fn column_sums(m: &Mat) -> Mat {
    let mut out = Mat::zeros(m.cols(), 1);
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            out[(c, 0)] += m[(r, c)];
        }
    }
    out
}

impl Problem for SyntheticMlp {
    fn name(&self) -> &str {
        "mlp"
    }

    fn meta(&self) -> ProblemMeta {
        ProblemMeta::default()
    }

    fn init(&self, seed: u64) -> ParamSet {
        let MlpDims { input, hidden, classes } = self.dims;
        let mut rng = Sample::new(seed, 0).rng("init", "mlp");
        let w1 = gaussian_mat(hidden, input, self.init_scale / (input as f64).sqrt(), &mut rng);
        let w2 = gaussian_mat(classes, hidden, self.init_scale / (hidden as f64).sqrt(), &mut rng);
        ParamSet::new()
            .with(W1, w1)
            .and_then(|p| p.with(B1, Mat::zeros(hidden, 1)))
            .and_then(|p| p.with(W2, w2))
            .and_then(|p| p.with(B2, Mat::zeros(classes, 1)))
            .expect("fresh set")
    }

    fn evaluate(&self, x: &ParamSet, sample: Sample) -> Result<Evaluation> {
        self.loss_and_grad(x, &self.batch_indices(sample))
    }

    fn full_loss(&self, x: &ParamSet) -> Option<Result<f64>> {
        let all: Vec<usize> = (0..self.labels.len()).collect();
        Some(self.loss_and_grad(x, &all).map(|e| e.loss))
    }
}
