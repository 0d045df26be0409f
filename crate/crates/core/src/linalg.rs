//! Small dense linear algebra on row-major `f64` storage.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::config_err;
use crate::math::sqrt;
use crate::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(config_err!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(config_err!("ragged rows: {} vs {cols}", r.len()));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
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
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * c).collect() }
    }

    /// `out = A x`.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (i, o) in out.iter_mut().enumerate().take(self.rows) {
            *o = dot(self.row(i), x);
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.mul_vec_into(x, &mut out);
        out
    }

    /// `out = Aᵀ v`, accumulated row by row in ascending row order.
    pub fn tmul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.rows);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &vi) in v.iter().enumerate() {
            axpy(vi, self.row(i), out);
        }
    }

    pub fn tmul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        self.tmul_vec_into(v, &mut out);
        out
    }

    /// `A diag(w) Aᵀ` (rows × rows).
    pub fn weighted_gram(&self, w: &[f64]) -> Self {
        let n = self.rows;
        let mut g = Self::zeros(n, n);
        let mut tmp = vec![0.0; self.cols];
        for i in 0..n {
            for (t, (a, wj)) in tmp.iter_mut().zip(self.row(i).iter().zip(w)) {
                *t = a * wj;
            }
            for k in 0..=i {
                let v = dot(&tmp, self.row(k));
                g[(i, k)] = v;
                g[(k, i)] = v;
            }
        }
        g
    }

    /// `A Aᵀ` (rows × rows).
    pub fn gram(&self) -> Self {
        self.weighted_gram(&vec![1.0; self.cols])
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Dot product with four interleaved partial sums (fixed summation order).
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// `y += a x`.
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    sqrt(dot(x, x))
}

pub fn norm1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 1e-14 * scale) || !d.is_finite() {
            return Err(Error::Solver(alloc::format!(
                "matrix not positive definite at pivot {j} (pivot {d:e})"
            )));
        }
        let djj = sqrt(d);
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b` given the Cholesky factor.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut z = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            z[i] -= l[(i, k)] * z[k];
        }
        z[i] /= l[(i, i)];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            z[i] -= l[(k, i)] * z[k];
        }
        z[i] /= l[(i, i)];
    }
    z
}

/// Solves the square system `A x = b` by Gaussian elimination with partial pivoting.
pub fn lu_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return Err(config_err!("lu_solve needs a square system"));
    }
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = m.as_slice().iter().fold(0.0f64, |s, v| s.max(v.abs()));
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| m[(i, c)].abs().total_cmp(&m[(j, c)].abs()))
            .unwrap_or(c);
        if m[(p, c)].abs() <= 1e-14 * scale {
            return Err(Error::Solver(alloc::format!("singular system at column {c}")));
        }
        if p != c {
            for j in 0..n {
                let t = m[(c, j)];
                m[(c, j)] = m[(p, j)];
                m[(p, j)] = t;
            }
            x.swap(c, p);
        }
        for i in c + 1..n {
            let f = m[(i, c)] / m[(c, c)];
            if f != 0.0 {
                for j in c..n {
                    m[(i, j)] -= f * m[(c, j)];
                }
                x[i] -= f * x[c];
            }
        }
    }
    for i in (0..n).rev() {
        for j in i + 1..n {
            x[i] -= m[(i, j)] * x[j];
        }
        x[i] /= m[(i, i)];
    }
    Ok(x)
}

/// Orthonormal basis of the column space of `a` (stored as rows of the
/// result), by Householder QR with column pivoting. Columns whose pivot falls
/// below `rel_tol · |R₀₀|` are treated as dependent.
pub fn column_space_basis(a: &Matrix, rel_tol: f64) -> Vec<Vec<f64>> {
    let (m, n) = (a.rows(), a.cols());
    // Work on columns as separate vectors.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a[(i, j)]).collect()).collect();
    let mut reflectors: Vec<Vec<f64>> = Vec::new();
    let mut r00 = 0.0;
    let kmax = m.min(n);
    for k in 0..kmax {
        // pivot: largest remaining norm in rows k..m
        let (p, pn) = (k..n)
            .map(|j| (j, norm2(&cols[j][k..])))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((k, 0.0));
        if k == 0 {
            r00 = pn;
        }
        if pn <= rel_tol * r00 || pn == 0.0 {
            break;
        }
        cols.swap(k, p);
        let x = &cols[k][k..];
        let alpha = if x[0] >= 0.0 { -pn } else { pn };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vn = norm2(&v);
        if vn > 0.0 {
            v.iter_mut().for_each(|t| *t /= vn);
        }
        for c in cols.iter_mut().skip(k) {
            let s = 2.0 * dot(&v, &c[k..]);
            axpy(-s, &v, &mut c[k..]);
        }
        reflectors.push(v);
    }
    // Q e_k for each accepted k.
    let rank = reflectors.len();
    let mut basis = Vec::with_capacity(rank);
    for k in 0..rank {
        let mut q = vec![0.0; m];
        q[k] = 1.0;
        for (j, v) in reflectors.iter().enumerate().rev() {
            let s = 2.0 * dot(v, &q[j..]);
            axpy(-s, v, &mut q[j..]);
        }
        basis.push(q);
    }
    basis
}

/// Orthonormal basis of the row space of a matrix, i.e. of `span(Xᵀ)`.
#[derive(Debug, Clone)]
pub struct RowSpace {
    basis: Vec<Vec<f64>>,
    dim: usize,
}

impl RowSpace {
    /// Singular directions below `1e-10 · σ_max` are dropped.
    pub fn new(x: &Matrix) -> Self {
        Self::with_tolerance(x, 1e-10)
    }

    pub fn with_tolerance(x: &Matrix, rel_tol: f64) -> Self {
        Self { basis: column_space_basis(&x.transpose(), rel_tol), dim: x.cols() }
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    /// Component of `g` orthogonal to the row space.
    pub fn orthogonal_part(&self, g: &[f64]) -> Vec<f64> {
        let mut r = g.to_vec();
        // two passes of projection for numerical orthogonality
        for _ in 0..2 {
            for q in &self.basis {
                let c = dot(q, &r);
                axpy(-c, q, &mut r);
            }
        }
        r
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration on the Rayleigh quotient, to relative tolerance `tol`.
pub fn power_iteration(a: &Matrix, tol: f64, max_iter: usize) -> f64 {
    let n = a.rows();
    if n == 0 {
        return 0.0;
    }
    // deterministic start with all-nonzero overlap in generic cases
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * sqrt(i as f64 + 1.0)).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|t| *t /= nv);
    let mut lambda = 0.0;
    let mut w = vec![0.0; n];
    for _ in 0..max_iter {
        a.mul_vec_into(&v, &mut w);
        let new_lambda = dot(&v, &w);
        let nw = norm2(&w);
        if nw == 0.0 {
            return 0.0;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
        if (new_lambda - lambda).abs() <= tol * new_lambda.abs() {
            // one more Rayleigh quotient with the refreshed vector
            a.mul_vec_into(&v, &mut w);
            return dot(&v, &w);
        }
        lambda = new_lambda;
    }
    lambda
}
