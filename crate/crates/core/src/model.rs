//! Regression problem, losses and the diagonal-network parametrization.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::config_err;
use crate::linalg::{dot, Matrix};
use crate::math::ipow;
use crate::rng::{self, Sampler};
use crate::{Error, Result};

/// Design matrix, labels and optional planted sparse model.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub beta_l0: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<f64>, beta_l0: Option<Vec<f64>>) -> Result<Self> {
        if x.rows() == 0 || x.cols() == 0 {
            return Err(config_err!("empty design matrix"));
        }
        if y.len() != x.rows() {
            return Err(config_err!("y has {} entries, X has {} rows", y.len(), x.rows()));
        }
        if let Some(b) = &beta_l0 {
            if b.len() != x.cols() {
                return Err(config_err!("beta_l0 has {} entries, X has {} columns", b.len(), x.cols()));
            }
        }
        Ok(Self { x, y, beta_l0 })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.x.cols()
    }

    /// `Xβ − y`.
    pub fn residual(&self, beta: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.n()];
        self.residual_into(beta, &mut r);
        r
    }

    #[inline]
    pub(crate) fn residual_into(&self, beta: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.x.row(i), beta) - self.y[i];
        }
    }

    /// `diag(XᵀX / n)`.
    pub fn h_tilde_diag(&self) -> Vec<f64> {
        let n = self.n() as f64;
        let mut h = vec![0.0; self.d()];
        for i in 0..self.n() {
            for (hj, xij) in h.iter_mut().zip(self.x.row(i)) {
                *hj += xij * xij;
            }
        }
        h.iter_mut().for_each(|v| *v /= n);
        h
    }

    fn check_dim(&self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.d() {
            return Err(config_err!("beta has {} entries, expected {}", beta.len(), self.d()));
        }
        Ok(())
    }
}

/// Positive weights of a depth-`p` diagonal network, `β = w₊^p − w₋^p`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WeightState {
    pub w_plus: Vec<f64>,
    pub w_minus: Vec<f64>,
    pub depth: u32,
}

impl WeightState {
    /// `w₊ = w₋ = α`, so that `β = 0`.
    pub fn init(alpha: &[f64], depth: u32) -> Result<Self> {
        if depth < 2 {
            return Err(config_err!("depth must be at least 2, got {depth}"));
        }
        if alpha.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(config_err!("initialization scale must be positive and finite"));
        }
        Ok(Self { w_plus: alpha.to_vec(), w_minus: alpha.to_vec(), depth })
    }

    /// Depth-2 weights factorizing a given `β`: `w± = √(max(±β, 0) + c²)`-style
    /// split with `w₊² − w₋² = β`.
    pub fn factorize(beta: &[f64], floor: f64) -> Self {
        let w_plus = beta.iter().map(|b| crate::math::sqrt(b.max(0.0) + floor * floor)).collect();
        let w_minus = beta.iter().map(|b| crate::math::sqrt((-b).max(0.0) + floor * floor)).collect();
        Self { w_plus, w_minus, depth: 2 }
    }

    pub fn d(&self) -> usize {
        self.w_plus.len()
    }

    pub fn beta(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.d()];
        self.beta_into(&mut b);
        b
    }

    #[inline]
    pub fn beta_into(&self, out: &mut [f64]) {
        let p = self.depth;
        for ((o, wp), wm) in out.iter_mut().zip(&self.w_plus).zip(&self.w_minus) {
            *o = ipow(*wp, p) - ipow(*wm, p);
        }
    }
}

/// Reference interpolators of a dataset.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InterpolatorSet {
    pub beta_l1: Vec<f64>,
    pub beta_l2: Vec<f64>,
}

/// Gaussian design with an `s`-sparse planted model.
///
/// Draw order on the `"data"` stream of `seed`: the entries of `X` row-major,
/// then a partial Fisher–Yates over `0..d` selecting the support, then the `s`
/// support values in selection order.
pub fn generate_sparse_regression(n: usize, d: usize, s: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(config_err!("n and d must be positive (n={n}, d={d})"));
    }
    if s == 0 || s > d {
        return Err(config_err!("sparsity must satisfy 1 <= s <= d (s={s}, d={d})"));
    }
    let mut rng = rng::stream(seed, rng::DATA);
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n * d {
        data.push(rng.normal());
    }
    let x = Matrix::from_row_major(n, d, data)?;
    let beta = sparse_vector(&mut rng, d, s);
    let y = x.mul_vec(&beta);
    Dataset::new(x, y, Some(beta))
}

fn sparse_vector(rng: &mut Sampler, d: usize, s: usize) -> Vec<f64> {
    let mut perm: Vec<usize> = (0..d).collect();
    rng.partial_shuffle(&mut perm, s);
    let mut beta = vec![0.0; d];
    for &j in &perm[..s] {
        beta[j] = rng.normal();
    }
    beta
}

/// `L(β) = ‖Xβ − y‖² / (4n)`.
pub fn loss(beta: &[f64], data: &Dataset) -> Result<f64> {
    data.check_dim(beta)?;
    Ok(loss_from_residual(&data.residual(beta)))
}

#[inline]
pub(crate) fn loss_from_residual(r: &[f64]) -> f64 {
    dot(r, r) / (4.0 * r.len() as f64)
}

/// `L_i(β) = (⟨x_i, β⟩ − y_i)² / 4`.
pub fn per_sample_loss(beta: &[f64], data: &Dataset, i: usize) -> Result<f64> {
    data.check_dim(beta)?;
    if i >= data.n() {
        return Err(config_err!("sample index {i} out of range for n={}", data.n()));
    }
    let r = dot(data.x.row(i), beta) - data.y[i];
    Ok(r * r / 4.0)
}

/// `∇_β L = Xᵀ(Xβ − y) / (2n)`.
pub fn grad_beta_loss(beta: &[f64], data: &Dataset) -> Result<Vec<f64>> {
    data.check_dim(beta)?;
    let r = data.residual(beta);
    let mut g = data.x.tmul_vec(&r);
    let c = 1.0 / (2.0 * data.n() as f64);
    g.iter_mut().for_each(|v| *v *= c);
    Ok(g)
}

/// Gradients with respect to `w₊` and `w₋`: `±(p/2) h ⊙ w±^{p−1}` with
/// `h = Xᵀ(Xβ − y)/n`.
pub fn grad_w_loss(state: &WeightState, data: &Dataset) -> Result<(Vec<f64>, Vec<f64>)> {
    data.check_dim(&state.w_plus)?;
    data.check_dim(&state.w_minus)?;
    let beta = state.beta();
    let r = data.residual(&beta);
    let h = data.x.tmul_vec(&r);
    let c = state.depth as f64 / 2.0 / data.n() as f64;
    let k = state.depth - 1;
    let gp = h.iter().zip(&state.w_plus).map(|(hj, w)| c * hj * ipow(*w, k)).collect();
    let gm = h.iter().zip(&state.w_minus).map(|(hj, w)| -c * hj * ipow(*w, k)).collect();
    Ok((gp, gm))
}

/// `‖β − β*_ℓ0‖²`.
pub fn validation_loss(beta: &[f64], data: &Dataset) -> Result<f64> {
    data.check_dim(beta)?;
    let truth = data
        .beta_l0
        .as_ref()
        .ok_or_else(|| Error::Diagnostic("validation loss needs a planted model".into()))?;
    Ok(beta.iter().zip(truth).map(|(b, t)| (b - t) * (b - t)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Dataset {
        Dataset::new(Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(), vec![1.0, 1.0], None).unwrap()
    }

    #[test]
    fn planted_model_interpolates() {
        let d = generate_sparse_regression(40, 100, 5, 1).unwrap();
        let b = d.beta_l0.as_ref().unwrap();
        assert_eq!(b.iter().filter(|v| **v != 0.0).count(), 5);
        assert_eq!(loss(b, &d).unwrap(), 0.0);
    }

    #[test]
    fn scalar_instance() {
        let d = generate_sparse_regression(1, 1, 1, 7).unwrap();
        assert_eq!(d.y[0], d.x[(0, 0)] * d.beta_l0.as_ref().unwrap()[0]);
    }

    #[test]
    fn residual_of_planted_model_is_zero() {
        let d = generate_sparse_regression(3, 6, 2, 42).unwrap();
        let r = d.residual(d.beta_l0.as_ref().unwrap());
        assert!(r.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn generation_rejects_bad_dims() {
        assert!(generate_sparse_regression(0, 3, 1, 0).is_err());
        assert!(generate_sparse_regression(3, 3, 4, 0).is_err());
        assert!(generate_sparse_regression(3, 3, 0, 0).is_err());
    }

    #[test]
    fn loss_direct_value() {
        assert_eq!(loss(&[0.0, 0.0], &small()).unwrap(), 0.25);
    }

    #[test]
    fn loss_scales_quadratically() {
        let d = generate_sparse_regression(5, 8, 2, 3).unwrap();
        let beta: Vec<f64> = (0..8).map(|j| 0.1 * j as f64).collect();
        let scaled = Dataset::new(d.x.scaled(3.0), d.y.iter().map(|v| 3.0 * v).collect(), None).unwrap();
        let l = loss(&beta, &d).unwrap();
        let ls = loss(&beta, &scaled).unwrap();
        assert!((ls - 9.0 * l).abs() <= 1e-12 * ls);
    }

    #[test]
    fn per_sample_direct_value() {
        let d = Dataset::new(Matrix::from_rows(&[vec![2.0]]).unwrap(), vec![2.0], None).unwrap();
        assert_eq!(per_sample_loss(&[0.0], &d, 0).unwrap(), 1.0);
        assert!(per_sample_loss(&[0.0], &d, 1).is_err());
    }

    #[test]
    fn grad_direct_value() {
        let d = Dataset::new(Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap(), vec![1.0], None).unwrap();
        assert_eq!(grad_beta_loss(&[0.0, 0.0], &d).unwrap(), vec![-0.5, 0.0]);
    }

    #[test]
    fn equal_weights_give_zero_beta_and_mirrored_gradients() {
        let d = generate_sparse_regression(4, 6, 2, 8).unwrap();
        for p in 2..5 {
            let s = WeightState::init(&[0.3; 6], p).unwrap();
            assert!(s.beta().iter().all(|b| *b == 0.0));
            let (gp, gm) = grad_w_loss(&s, &d).unwrap();
            for (a, b) in gp.iter().zip(&gm) {
                assert_eq!(*a, -*b);
            }
        }
    }

    #[test]
    fn validation_needs_truth() {
        assert!(validation_loss(&[0.0, 0.0], &small()).is_err());
        let d = generate_sparse_regression(3, 4, 2, 2).unwrap();
        let t = d.beta_l0.clone().unwrap();
        assert_eq!(validation_loss(&t, &d).unwrap(), 0.0);
        let nt: f64 = t.iter().map(|v| v * v).sum();
        assert_eq!(validation_loss(&[0.0; 4], &d).unwrap(), nt);
    }

    #[test]
    fn factorize_reproduces_beta() {
        let b = [1.5, -0.25, 0.0];
        let s = WeightState::factorize(&b, 0.1);
        for (x, y) in s.beta().iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }
}
