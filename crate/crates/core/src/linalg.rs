//! Dense row-major matrices and a cyclic Jacobi eigensolver for symmetric
//! matrices.
//!
//! Vectors are plain `&[f64]` / `Vec<f64>` throughout the crate; only
//! two-dimensional data gets its own type.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch in {op}: left is {left:?}, right is {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (max |s_ij - s_ji| = {max_asymmetry:e})")]
    NotSymmetric { max_asymmetry: f64 },
    #[error("data length {got} does not match {rows}x{cols}")]
    InvalidData { rows: usize, cols: usize, got: usize },
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NotConverged { sweeps: usize, off_norm: f64 },
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Dense matrix, `data[r * cols + c]` holds entry `(r, c)`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows.min(8) {
            let row = &self.row(r)[..self.cols.min(8)];
            writeln!(f, "  {row:?}")?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(LinalgError::InvalidData {
                rows,
                cols,
                got: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite {
                row: i / cols.max(1),
                col: i % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
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

    /// Builds a matrix from equally sized rows.
    ///
    /// # Panics
    /// Panics if the rows are ragged.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "row {i} has {} entries, expected {cols}", r.len());
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
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

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
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

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.data[r * self.cols + c]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    /// Keeps the first `k` columns.
    pub fn leading_columns(&self, k: usize) -> Self {
        assert!(k <= self.cols);
        Self::from_fn(self.rows, k, |r, c| self[(r, c)])
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        matmul(self, other)
    }

    /// `self · x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(LinalgError::DimensionMismatch {
                op: "matvec",
                left: self.shape(),
                right: (x.len(), 1),
            });
        }
        Ok((0..self.rows).map(|r| dot(self.row(r), x)).collect())
    }

    /// `selfᵀ · x`, without materializing the transpose.
    pub fn t_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(LinalgError::DimensionMismatch {
                op: "t_matvec",
                left: (self.cols, self.rows),
                right: (x.len(), 1),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (r, &xr) in x.iter().enumerate() {
            axpy(xr, self.row(r), &mut out);
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest `|s_ij - s_ji|`; `None` for non-square input.
    pub fn max_asymmetry(&self) -> Option<f64> {
        if !self.is_square() {
            return None;
        }
        let n = self.rows;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        Some(worst)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(LinalgError::DimensionMismatch {
                op: "sub",
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha · x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Matrix product. Rows of the result are independent, so the parallel
/// build produces bitwise the same output as the serial one.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(LinalgError::DimensionMismatch {
            op: "matmul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    if b.cols == 0 {
        return Ok(out);
    }
    let fill_row = |(r, out_row): (usize, &mut [f64])| {
        for (k, &aik) in a.row(r).iter().enumerate() {
            if aik != 0.0 {
                axpy(aik, b.row(k), out_row);
            }
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if a.rows * a.cols * b.cols >= 1 << 18 {
            out.data.par_chunks_mut(b.cols).enumerate().for_each(fill_row);
            return Ok(out);
        }
    }
    out.data.chunks_mut(b.cols).enumerate().for_each(fill_row);
    Ok(out)
}

/// Mean of squared differences over all entries.
pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(LinalgError::DimensionMismatch {
            op: "mse",
            left: (a.len(), 1),
            right: (b.len(), 1),
        });
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.len() as f64)
}

/// [`mse`] for matrices; shapes must agree, not just entry counts.
pub fn mse_matrix(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(LinalgError::DimensionMismatch {
            op: "mse",
            left: a.shape(),
            right: b.shape(),
        });
    }
    mse(a.as_slice(), b.as_slice())
}

/// Eigendecomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEig {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: Matrix,
}

/// Inputs whose largest asymmetry exceeds this are rejected.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;
const JACOBI_RELATIVE_TOLERANCE: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric
/// matrix by cyclic Jacobi rotations.
///
/// Iteration stops once the off-diagonal Frobenius norm falls below
/// `1e-12 · ‖S‖_F`. Eigenvalue ties keep the order in which Jacobi left
/// them; eigenvector signs are arbitrary.
pub fn sym_eig(s: &Matrix) -> Result<SymEig> {
    if !s.is_square() {
        return Err(LinalgError::NotSquare {
            rows: s.rows,
            cols: s.cols,
        });
    }
    if let Some(i) = s.data.iter().position(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite {
            row: i / s.cols,
            col: i % s.cols,
        });
    }
    let asym = s.max_asymmetry().unwrap_or(0.0);
    if asym > SYMMETRY_TOLERANCE {
        return Err(LinalgError::NotSymmetric {
            max_asymmetry: asym,
        });
    }

    let n = s.rows;
    // Symmetrize exactly so row p can stand in for column p below.
    let mut a = Matrix::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    // Rows of `vt` are the eigenvectors; rotations then touch contiguous memory.
    let mut vt = Matrix::identity(n);

    let target = JACOBI_RELATIVE_TOLERANCE * a.frobenius_norm();
    // Any entry below this cannot keep the off-diagonal norm above `target`.
    let skip = if n > 1 { target / n as f64 } else { 0.0 };

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a);
        if off <= target {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(LinalgError::NotConverged {
                sweeps,
                off_norm: off,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.data[p * n + q];
                if apq.abs() <= skip {
                    continue;
                }
                rotate(&mut a, &mut vt, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| vt[(order[c], r)]);
    Ok(SymEig { values, vectors })
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows;
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a.data[i * n + j] * a.data[i * n + j];
            }
        }
    }
    sum.sqrt()
}

/// Applies the rotation that zeroes `a[p][q]`: `a ← Jᵀ a J`, `vt ← Jᵀ vt`.
fn rotate(a: &mut Matrix, vt: &mut Matrix, p: usize, q: usize) {
    let n = a.rows;
    let apq = a.data[p * n + q];
    let app = a.data[p * n + p];
    let aqq = a.data[q * n + q];

    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta.is_infinite() { 0.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let arp = a.data[p * n + r];
        let arq = a.data[q * n + r];
        let new_p = c * arp - s * arq;
        let new_q = s * arp + c * arq;
        a.data[p * n + r] = new_p;
        a.data[r * n + p] = new_p;
        a.data[q * n + r] = new_q;
        a.data[r * n + q] = new_q;
    }
    a.data[p * n + p] = app - t * apq;
    a.data[q * n + q] = aqq + t * apq;
    a.data[p * n + q] = 0.0;
    a.data[q * n + p] = 0.0;

    let (head, tail) = vt.data.split_at_mut(q * n);
    let vp = &mut head[p * n..(p + 1) * n];
    let vq = &mut tail[..n];
    for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}
