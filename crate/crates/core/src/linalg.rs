//! Small dense and sparse linear algebra kernels: row-major matrices, CSR
//! products, Householder QR and one-sided Jacobi SVD.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::tfidf::SparseVector;

/// Dense row-major `f64` matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Matrix { rows, cols, data }
    }

    /// Panics on ragged input. An empty list gives a `0 x cols` matrix.
    pub fn from_rows(cols: usize, rows: &[Vec<f64>]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on a zero chunk size.
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Panics on an inner-dimension mismatch.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in orow.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        math::norm2(&self.data)
    }

    /// Column-major copy, one `Vec` per column.
    pub(crate) fn to_columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub(crate) fn from_columns(rows: usize, cols: &[Vec<f64>]) -> Matrix {
        Matrix::from_fn(rows, cols.len(), |i, j| cols[j][i])
    }
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Panics if a row's dimension differs from `n_cols`.
    pub fn from_sparse_rows(n_cols: usize, rows: &[SparseVector]) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for r in rows {
            assert_eq!(r.dim(), n_cols, "sparse row dimension");
            for &(j, v) in r.entries() {
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            n_rows: rows.len(),
            n_cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(m: &Matrix) -> Self {
        let rows: Vec<SparseVector> = m
            .row_iter()
            .map(|r| SparseVector::from_pairs(m.cols(), r.iter().copied().enumerate().collect()))
            .collect();
        CsrMatrix::from_sparse_rows(m.cols(), &rows)
    }

    pub fn rows(&self) -> usize {
        self.n_rows
    }

    pub fn cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn to_dense(&self) -> Matrix {
        let mut out = Matrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for p in self.indptr[i]..self.indptr[i + 1] {
                out.set(i, self.indices[p], self.values[p]);
            }
        }
        out
    }

    /// `self * b` for dense `b`.
    pub fn mul_dense(&self, b: &Matrix) -> Matrix {
        assert_eq!(self.n_cols, b.rows(), "csr matmul shape");
        let mut out = Matrix::zeros(self.n_rows, b.cols());
        for i in 0..self.n_rows {
            let orow = out.row_mut(i);
            for p in self.indptr[i]..self.indptr[i + 1] {
                let a = self.values[p];
                for (o, &x) in orow.iter_mut().zip(b.row(self.indices[p])) {
                    *o += a * x;
                }
            }
        }
        out
    }

    /// `self^T * b` for dense `b`.
    pub fn tmul_dense(&self, b: &Matrix) -> Matrix {
        assert_eq!(self.n_rows, b.rows(), "csr transposed matmul shape");
        let mut out = Matrix::zeros(self.n_cols, b.cols());
        for i in 0..self.n_rows {
            let brow = b.row(i);
            for p in self.indptr[i]..self.indptr[i + 1] {
                let a = self.values[p];
                for (o, &x) in out.row_mut(self.indices[p]).iter_mut().zip(brow) {
                    *o += a * x;
                }
            }
        }
        out
    }
}

/// Orthonormal basis of the column space of a tall matrix (`rows >= cols`)
/// via Householder reflections. Returns the thin `Q` (`rows x cols`).
pub fn thin_q(m: &Matrix) -> Matrix {
    let cols = householder_q(m.rows(), m.to_columns());
    Matrix::from_columns(m.rows(), &cols)
}

/// Householder QR on column-major data; returns the thin Q as columns and
/// leaves `R` in the upper triangle of `a`.
fn householder_qr(m: usize, a: &mut [Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    assert!(m >= n, "thin QR needs rows >= cols");
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let x = &a[j][j..];
        let norm = math::norm2(x);
        if norm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vnorm = math::norm2(&v);
        if vnorm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        for e in &mut v {
            *e /= vnorm;
        }
        for col in a.iter_mut().skip(j) {
            let tail = &mut col[j..];
            let s = 2.0 * math::dot(&v, tail);
            for (t, &vi) in tail.iter_mut().zip(&v) {
                *t -= s * vi;
            }
        }
        reflectors.push(v);
    }
    let mut q: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            e
        })
        .collect();
    for (j, v) in reflectors.iter().enumerate().rev() {
        if v.is_empty() {
            continue;
        }
        for col in &mut q {
            let tail = &mut col[j..];
            let s = 2.0 * math::dot(v, tail);
            for (t, &vi) in tail.iter_mut().zip(v) {
                *t -= s * vi;
            }
        }
    }
    q
}

fn householder_q(m: usize, mut a: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    householder_qr(m, &mut a)
}

/// Thin singular value decomposition `A = U diag(s) V^T`, values descending.
#[derive(Clone, Debug)]
pub struct Svd {
    pub singular_values: Vec<f64>,
    /// `rows x r`
    pub u: Matrix,
    /// `cols x r`
    pub v: Matrix,
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided Jacobi on the columns of a square matrix. Returns the rotated
/// columns (mutually orthogonal) and the accumulated rotation `W` as columns.
fn one_sided_jacobi(mut cols: Vec<Vec<f64>>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = cols.len();
    let mut w: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = math::dot(&cols[p], &cols[p]);
                let beta = math::dot(&cols[q], &cols[q]);
                let gamma = math::dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * math::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + math::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut w, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    (cols, w)
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let (cp, cq) = (&mut left[p], &mut right[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Dense SVD: Householder QR to a square triangle, then one-sided Jacobi.
/// Wide inputs are handled through the transpose.
pub fn svd(a: &Matrix) -> Svd {
    if a.rows() < a.cols() {
        let t = svd(&a.transpose());
        return Svd {
            singular_values: t.singular_values,
            u: t.v,
            v: t.u,
        };
    }
    let (m, n) = a.shape();
    let mut cols = a.to_columns();
    let q = householder_qr(m, &mut cols);
    // R as columns: upper triangle of the reduced columns.
    let r: Vec<Vec<f64>> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| (0..n).map(|i| if i <= j { c[i] } else { 0.0 }).collect())
        .collect();
    let (rot, w) = one_sided_jacobi(r);
    let mut order: Vec<(usize, f64)> = rot.iter().map(|c| math::norm2(c)).enumerate().collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut singular_values = Vec::with_capacity(n);
    let mut u_cols = Vec::with_capacity(n);
    let mut v_cols = Vec::with_capacity(n);
    for (j, sigma) in order {
        singular_values.push(sigma);
        // U = Q * (rotated column / sigma)
        let mut u = vec![0.0; m];
        if sigma > 0.0 {
            for (k, &coef) in rot[j].iter().enumerate() {
                if coef == 0.0 {
                    continue;
                }
                let scale = coef / sigma;
                for (ui, &qi) in u.iter_mut().zip(&q[k]) {
                    *ui += scale * qi;
                }
            }
        }
        u_cols.push(u);
        v_cols.push(w[j].clone());
    }
    Svd {
        singular_values,
        u: Matrix::from_columns(m, &u_cols),
        v: Matrix::from_columns(n, &v_cols),
    }
}
