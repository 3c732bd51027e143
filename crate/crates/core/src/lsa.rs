//! Latent semantic analysis: randomized truncated SVD of the document-term
//! TF-IDF matrix and projection onto the leading right singular vectors.
//!
//! The range finder samples a seeded Gaussian test matrix of width
//! `k + OVERSAMPLING`, runs `POWER_ITERATIONS` subspace iterations with a QR
//! re-orthonormalization after every product, and finishes with an exact SVD
//! of the small projected matrix.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, CsrMatrix, Matrix};
use crate::math;
use crate::tfidf::SparseVector;

pub const OVERSAMPLING: usize = 10;
pub const POWER_ITERATIONS: usize = 2;
pub const DEFAULT_K: usize = 128;
/// Components below this fraction of the leading singular value are dropped.
pub const RELATIVE_CUTOFF: f64 = 1e-12;
const ORTHONORMAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LsaError {
    #[error("k = {k} outside 1..={max} for a {rows}x{cols} matrix")]
    KOutOfRange { k: usize, max: usize, rows: usize, cols: usize },
    #[error("matrix has no nonzero entry")]
    ZeroMatrix,
    #[error("vector dimension {got} does not match model dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("fitted components are not orthonormal (max deviation {0:e})")]
    NotOrthonormal(f64),
    #[error("component matrix shape does not match k and dimension")]
    BadShape,
}

/// Default component count for a training matrix: `DEFAULT_K` clamped to
/// `min(n, V) - 1` (and at least 1).
pub fn default_k(rows: usize, cols: usize) -> usize {
    DEFAULT_K.min(rows.min(cols).saturating_sub(1)).max(1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LsaModel {
    /// `k x V`, orthonormal rows.
    components: Matrix,
    singular_values: Vec<f64>,
    requested_k: usize,
    seed: u64,
}

impl LsaModel {
    /// Rebuilds a model from stored parts, checking shapes only.
    pub fn from_parts(components: Matrix, singular_values: Vec<f64>, requested_k: usize, seed: u64) -> Result<Self, LsaError> {
        if components.rows() != singular_values.len() || components.rows() == 0 {
            return Err(LsaError::BadShape);
        }
        Ok(LsaModel {
            components,
            singular_values,
            requested_k,
            seed,
        })
    }

    pub fn k(&self) -> usize {
        self.components.rows()
    }

    /// The k asked for; larger than [`LsaModel::k`] when tiny components were dropped.
    pub fn requested_k(&self) -> usize {
        self.requested_k
    }

    pub fn dim(&self) -> usize {
        self.components.cols()
    }

    pub fn components(&self) -> &Matrix {
        &self.components
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `components * v`, unscaled by the singular values.
    pub fn project(&self, v: &SparseVector) -> Result<Vec<f64>, LsaError> {
        if v.dim() != self.dim() {
            return Err(LsaError::DimensionMismatch {
                expected: self.dim(),
                got: v.dim(),
            });
        }
        Ok(self
            .components
            .row_iter()
            .map(|row| v.entries().iter().map(|&(j, x)| row[j] * x).sum())
            .collect())
    }

    pub fn project_dense(&self, v: &[f64]) -> Result<Vec<f64>, LsaError> {
        if v.len() != self.dim() {
            return Err(LsaError::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(self.components.row_iter().map(|row| math::dot(row, v)).collect())
    }

    /// Projects every row into an `n x k` matrix.
    pub fn project_all(&self, rows: &[SparseVector]) -> Result<Matrix, LsaError> {
        let mut out = Matrix::zeros(rows.len(), self.k());
        for (i, r) in rows.iter().enumerate() {
            let p = self.project(r)?;
            out.row_mut(i).copy_from_slice(&p);
        }
        Ok(out)
    }

    /// Largest `|C C^T - I|` entry.
    pub fn orthonormality_error(&self) -> f64 {
        let c = &self.components;
        let mut worst: f64 = 0.0;
        for i in 0..c.rows() {
            for j in i..c.rows() {
                let d = math::dot(c.row(i), c.row(j)) - if i == j { 1.0 } else { 0.0 };
                worst = worst.max(d.abs());
            }
        }
        worst
    }
}

/// Fits an LSA model on an `n x V` sparse matrix.
pub fn fit_lsa(matrix: &CsrMatrix, k: usize, seed: u64) -> Result<LsaModel, LsaError> {
    let (n, v) = (matrix.rows(), matrix.cols());
    let max = n.min(v);
    if k == 0 || k > max {
        return Err(LsaError::KOutOfRange { k, max, rows: n, cols: v });
    }
    if matrix.nnz() == 0 {
        return Err(LsaError::ZeroMatrix);
    }
    let width = (k + OVERSAMPLING).min(max);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = Matrix::from_fn(v, width, |_, _| StandardNormal.sample(&mut rng));

    let mut q = linalg::thin_q(&matrix.mul_dense(&omega));
    for _ in 0..POWER_ITERATIONS {
        let z = linalg::thin_q(&matrix.tmul_dense(&q));
        q = linalg::thin_q(&matrix.mul_dense(&z));
    }
    // B = Q^T A is width x V; its transpose is what we decompose.
    let bt = matrix.tmul_dense(&q);
    let small = linalg::svd(&bt);

    let sigma_max = small.singular_values.first().copied().unwrap_or(0.0);
    let keep = small
        .singular_values
        .iter()
        .take(k)
        .take_while(|&&s| s > 0.0 && s >= RELATIVE_CUTOFF * sigma_max)
        .count();
    if keep == 0 {
        return Err(LsaError::ZeroMatrix);
    }
    // Right singular vectors of A are the left singular vectors of B^T.
    let mut components = Matrix::zeros(keep, v);
    for c in 0..keep {
        let row = components.row_mut(c);
        for (j, r) in row.iter_mut().enumerate() {
            *r = small.u.get(j, c);
        }
        flip_sign(row);
    }
    let model = LsaModel {
        components,
        singular_values: small.singular_values[..keep].to_vec(),
        requested_k: k,
        seed,
    };
    let err = model.orthonormality_error();
    if err > ORTHONORMAL_TOL {
        return Err(LsaError::NotOrthonormal(err));
    }
    Ok(model)
}

/// Makes the largest-magnitude entry positive (first one wins on ties).
fn flip_sign(row: &mut [f64]) {
    let mut best = 0;
    for (i, x) in row.iter().enumerate() {
        if x.abs() > row[best].abs() {
            best = i;
        }
    }
    if row.get(best).is_some_and(|&x| x < 0.0) {
        for x in row.iter_mut() {
            *x = -*x;
        }
    }
}
