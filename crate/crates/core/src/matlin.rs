//! Minimal dense linear algebra.
//!
//! [`Mat`] is a row-major `f64` matrix carrying parameters, gradients and
//! momenta. [`jacobi_svd`] is a one-sided Jacobi SVD that the rest of the
//! crate treats as the exact-decomposition oracle: it is slow but accurate,
//! deterministic, and easy to audit.

use std::fmt;

use thiserror::Error;

/// Default convergence threshold for [`jacobi_svd`] on the relative
/// off-diagonal mass `|<a_p, a_q>| / (|a_p| |a_q|)`.
pub const SVD_DEFAULT_TOL: f64 = 1e-14;

/// Sweep cap for [`jacobi_svd`].
pub const SVD_MAX_SWEEPS: usize = 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("invalid dimensions {rows}x{cols} for {len} entries")]
    InvalidDimensions { rows: usize, cols: usize, len: usize },
    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },
    #[error("jacobi svd did not converge after {sweeps} sweeps (off-diagonal mass {off:e})")]
    NoConvergence { sweeps: usize, off: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Dense real matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            if r > 0 {
                write!(f, "; ")?;
            }
            for c in 0..self.cols {
                if c > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self[(r, c)])?;
            }
        }
        write!(f, "]")
    }
}

impl Mat {
    /// Builds a matrix from row-major data, validating shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(LinalgError::InvalidDimensions {
                rows,
                cols,
                len: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite { index });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(LinalgError::InvalidDimensions {
                rows: rows.len(),
                cols,
                len: rows.iter().map(|r| r.len()).sum(),
            });
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Result<Self> {
        let n = values.len();
        let mut data = vec![0.0; n * n];
        for (i, v) in values.iter().enumerate() {
            data[i * n + i] = *v;
        }
        Self::new(n, n, data)
    }

    pub fn scalar(v: f64) -> Result<Self> {
        Self::new(1, 1, vec![v])
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::new(rows, cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Errors with the first non-finite index, if any.
    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(LinalgError::NonFinite { index }),
            None => Ok(()),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == 0.0)
    }

    fn same_shape(&self, other: &Mat, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(LinalgError::ShapeMismatch {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Mat) -> Result<Mat> {
        if self.cols != rhs.rows {
            return Err(LinalgError::ShapeMismatch {
                op: "matmul",
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        let (m, k, n) = (self.rows, self.cols, rhs.cols);
        let mut out = Mat::zeros(m, n);
        for i in 0..m {
            let row = &mut out.data[i * n..(i + 1) * n];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[p * n..(p + 1) * n];
                for (o, b) in row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · rhs` without materializing the transpose.
    pub fn t_matmul(&self, rhs: &Mat) -> Result<Mat> {
        if self.rows != rhs.rows {
            return Err(LinalgError::ShapeMismatch {
                op: "t_matmul",
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        let (k, m, n) = (self.rows, self.cols, rhs.cols);
        let mut out = Mat::zeros(m, n);
        for p in 0..k {
            let lhs_row = &self.data[p * m..(p + 1) * m];
            let rhs_row = &rhs.data[p * n..(p + 1) * n];
            for (i, a) in lhs_row.iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                let row = &mut out.data[i * n..(i + 1) * n];
                for (o, b) in row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, rhs: &Mat) -> Result<Mat> {
        self.lin_comb(1.0, rhs, 1.0)
    }

    pub fn sub(&self, rhs: &Mat) -> Result<Mat> {
        self.lin_comb(1.0, rhs, -1.0)
    }

    /// `a·self + b·rhs`.
    pub fn lin_comb(&self, a: f64, rhs: &Mat, b: f64) -> Result<Mat> {
        self.same_shape(rhs, "lin_comb")?;
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// In place `self ← self + a·rhs`.
    pub fn axpy(&mut self, a: f64, rhs: &Mat) -> Result<()> {
        self.same_shape(rhs, "axpy")?;
        for (x, y) in self.data.iter_mut().zip(&rhs.data) {
            *x += a * y;
        }
        Ok(())
    }

    pub fn scale(&self, a: f64) -> Mat {
        self.map(|v| a * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| f(*v)).collect(),
        }
    }

    /// Frobenius inner product `⟨self, rhs⟩ = Σ self_ij·rhs_ij`.
    pub fn dot(&self, rhs: &Mat) -> Result<f64> {
        self.same_shape(rhs, "dot")?;
        Ok(self.data.iter().zip(&rhs.data).map(|(x, y)| x * y).sum())
    }

    /// Root-mean-square entry value.
    pub fn rms(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() / self.data.len() as f64).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.data[r * self.cols + c]).collect()
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        assert!(r < self.rows && c < self.cols, "index ({r}, {c}) out of bounds");
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        assert!(r < self.rows && c < self.cols, "index ({r}, {c}) out of bounds");
        &mut self.data[r * self.cols + c]
    }
}

/// `√(Σ_ij A_ij²)`.
pub fn fro_norm(a: &Mat) -> f64 {
    // Scaled accumulation keeps huge or tiny entries from overflowing.
    let scale = a.max_abs();
    if scale == 0.0 {
        return 0.0;
    }
    let sum: f64 = a.data.iter().map(|v| (v / scale).powi(2)).sum();
    scale * sum.sqrt()
}

/// Reduced SVD `A = U·diag(S)·Vᵀ` with `r = min(m, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    pub u: Mat,
    pub s: Vec<f64>,
    pub v: Mat,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Mat {
        let scaled = Mat::from_fn(self.u.rows(), self.u.cols(), |r, c| self.u[(r, c)] * self.s[c])
            .expect("finite by construction");
        scaled
            .matmul(&self.v.transpose())
            .expect("factor shapes agree by construction")
    }

    pub fn spectral_norm(&self) -> f64 {
        self.s.first().copied().unwrap_or(0.0)
    }

    pub fn nuclear_norm(&self) -> f64 {
        self.s.iter().sum()
    }

    /// `S[0] / S[r-1]`; infinite for rank-deficient input.
    pub fn condition_number(&self) -> f64 {
        let last = self.s.last().copied().unwrap_or(0.0);
        if last == 0.0 {
            f64::INFINITY
        } else {
            self.spectral_norm() / last
        }
    }
}

/// One-sided Jacobi SVD.
///
/// Rotations orthogonalize the columns of a working copy of `A` (or `Aᵀ` when
/// `A` is wide) while accumulating `V`. A sweep visits every column pair once;
/// iteration stops when no pair has relative off-diagonal mass above `tol`.
/// Each column of `U` is signed so that its largest-magnitude entry is
/// positive.
pub fn jacobi_svd(a: &Mat, tol: f64) -> Result<SvdResult> {
    jacobi_svd_with_cap(a, tol, SVD_MAX_SWEEPS)
}

pub fn jacobi_svd_with_cap(a: &Mat, tol: f64, max_sweeps: usize) -> Result<SvdResult> {
    if !(tol > 0.0) {
        return Err(LinalgError::InvalidArgument("svd tolerance must be positive"));
    }
    a.check_finite()?;
    if a.rows() < a.cols() {
        let t = jacobi_svd_tall(&a.transpose(), tol, max_sweeps)?;
        // A = (Aᵀ)ᵀ = V·S·Uᵀ; re-sign so the convention holds on the new U.
        let mut out = SvdResult {
            u: t.v,
            s: t.s,
            v: t.u,
        };
        apply_sign_convention(&mut out);
        return Ok(out);
    }
    jacobi_svd_tall(a, tol, max_sweeps)
}

fn jacobi_svd_tall(a: &Mat, tol: f64, max_sweeps: usize) -> Result<SvdResult> {
    let (m, n) = a.shape();
    // Column-major working copies make the rotations contiguous.
    let mut w: Vec<Vec<f64>> = (0..n).map(|c| a.column(c)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|c| (0..n).map(|r| if r == c { 1.0 } else { 0.0 }).collect())
        .collect();

    let mut converged = n < 2;
    let mut last_off = 0.0;
    for _ in 0..max_sweeps {
        if converged {
            break;
        }
        let mut off = 0.0_f64;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let alpha: f64 = w[p].iter().map(|x| x * x).sum();
                let beta: f64 = w[q].iter().map(|x| x * x).sum();
                let gamma: f64 = w[p].iter().zip(&w[q]).map(|(x, y)| x * y).sum();
                if alpha == 0.0 || beta == 0.0 || gamma == 0.0 {
                    continue;
                }
                let rel = gamma.abs() / (alpha.sqrt() * beta.sqrt());
                off = off.max(rel);
                if rel <= tol {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        last_off = off;
        converged = off <= tol;
    }
    if !converged {
        return Err(LinalgError::NoConvergence {
            sweeps: max_sweeps,
            off: last_off,
        });
    }

    let sigma: Vec<f64> = w.iter().map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort on descending sigma keeps ties in column order.
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));
    let smax = order.first().map_or(0.0, |&i| sigma[i]);
    let negligible = smax * (m.max(n) as f64) * f64::EPSILON;

    let mut u_cols: Vec<Option<Vec<f64>>> = Vec::with_capacity(n);
    let mut s_sorted = Vec::with_capacity(n);
    let mut v_cols = Vec::with_capacity(n);
    for &i in &order {
        let s = sigma[i];
        if s > negligible && s > 0.0 {
            u_cols.push(Some(w[i].iter().map(|x| x / s).collect()));
            s_sorted.push(s);
        } else {
            u_cols.push(None);
            s_sorted.push(0.0);
        }
        v_cols.push(std::mem::take(&mut v[i]));
    }
    let u_cols = complete_orthonormal(m, u_cols);

    let u = Mat::from_fn(m, n, |r, c| u_cols[c][r])?;
    let vm = Mat::from_fn(n, n, |r, c| v_cols[c][r])?;
    let mut out = SvdResult {
        u,
        s: s_sorted,
        v: vm,
    };
    apply_sign_convention(&mut out);
    Ok(out)
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let xq = *y;
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Fills missing columns with unit vectors orthogonal to all others, drawn
/// from the standard basis by two passes of modified Gram-Schmidt.
fn complete_orthonormal(m: usize, cols: Vec<Option<Vec<f64>>>) -> Vec<Vec<f64>> {
    let mut done: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
    let filled: Vec<Option<Vec<f64>>> = cols;
    let known: Vec<Vec<f64>> = filled.iter().flatten().cloned().collect();
    let mut extra: Vec<Vec<f64>> = Vec::new();
    let mut next_basis = 0;
    let mut fresh = || -> Vec<f64> {
        loop {
            assert!(next_basis < m, "ran out of basis vectors while completing U");
            let mut cand = vec![0.0; m];
            cand[next_basis] = 1.0;
            next_basis += 1;
            for _ in 0..2 {
                for b in known.iter().chain(extra.iter()) {
                    let proj: f64 = b.iter().zip(&cand).map(|(x, y)| x * y).sum();
                    for (c, x) in cand.iter_mut().zip(b) {
                        *c -= proj * x;
                    }
                }
            }
            let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                cand.iter_mut().for_each(|x| *x /= norm);
                extra.push(cand.clone());
                return cand;
            }
        }
    };
    for col in filled {
        match col {
            Some(c) => done.push(c),
            None => done.push(fresh()),
        }
    }
    done
}

fn apply_sign_convention(svd: &mut SvdResult) {
    let (m, r) = svd.u.shape();
    let n = svd.v.rows();
    for c in 0..r {
        let mut best = 0.0_f64;
        let mut best_abs = -1.0_f64;
        for row in 0..m {
            let x = svd.u[(row, c)];
            if x.abs() > best_abs {
                best_abs = x.abs();
                best = x;
            }
        }
        if best < 0.0 {
            for row in 0..m {
                svd.u[(row, c)] = -svd.u[(row, c)];
            }
            for row in 0..n {
                svd.v[(row, c)] = -svd.v[(row, c)];
            }
        }
    }
}

/// Largest singular value.
pub fn spectral_norm(a: &Mat) -> Result<f64> {
    Ok(jacobi_svd(a, SVD_DEFAULT_TOL)?.spectral_norm())
}

/// Sum of singular values.
pub fn nuclear_norm(a: &Mat) -> Result<f64> {
    Ok(jacobi_svd(a, SVD_DEFAULT_TOL)?.nuclear_norm())
}
