//! Minimizer of `φ_α` over the interpolation set.
//!
//! Stationarity `∇φ_α(β) ∈ span(Xᵀ)` means `β = 2α² ⊙ sinh(Xᵀν)` for some
//! `ν ∈ Rⁿ`, and feasibility `Xβ(ν) = y` is the gradient of the convex dual
//! `G(ν) = Σ_i 2α_i² cosh((Xᵀν)_i) − ⟨y, ν⟩`. Damped Newton on `G` solves an
//! `n`-dimensional problem with the positive definite Hessian
//! `X diag(2α² cosh(Xᵀν)) Xᵀ`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{lp, EntropyParams};
use crate::error::config_err;
use crate::linalg::{cholesky, cholesky_solve, column_space_basis, dot, norm2, Matrix};
use crate::math::{cosh, sinh, sqrt};
use crate::model::{Dataset, InterpolatorSet};
use crate::{Error, Result};

/// Which algorithm produced an implicit-bias solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SolverPath {
    Newton,
    MirrorDescent,
}

#[derive(Debug, Clone)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Target for `‖Xβ − y‖ / ‖y‖`.
    pub rel_tol: f64,
    /// Starting dual point; zero when absent.
    pub nu0: Option<Vec<f64>>,
    /// Iteration cap of the mirror-descent fallback.
    pub fallback_max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { max_iter: 500, rel_tol: 1e-13, nu0: None, fallback_max_iter: 2_000_000 }
    }
}

#[derive(Debug, Clone)]
pub struct ImplicitBiasSolution {
    pub beta: Vec<f64>,
    /// Dual variable with `β = 2α² sinh(Xᵀν)` (Newton path only).
    pub nu: Option<Vec<f64>>,
    pub path: SolverPath,
    pub iterations: usize,
    /// `‖Xβ − y‖ / max(‖y‖, 1e-300)`.
    pub feasibility: f64,
}

/// `argmin_{Xβ = y} φ_α(β)` with default options.
pub fn solve_implicit_bias(data: &Dataset, params: &EntropyParams) -> Result<Vec<f64>> {
    solve_implicit_bias_with(data, params, &NewtonOptions::default()).map(|s| s.beta)
}

/// As [`solve_implicit_bias`], with options and solver diagnostics. Falls
/// back to a discretized mirror-descent flow when Newton fails.
pub fn solve_implicit_bias_with(
    data: &Dataset,
    params: &EntropyParams,
    opts: &NewtonOptions,
) -> Result<ImplicitBiasSolution> {
    if params.d() != data.d() {
        return Err(config_err!("alpha has {} entries, data has d={}", params.d(), data.d()));
    }
    let newton_err = match newton(data, params, opts) {
        Ok(sol) => return Ok(sol),
        Err(e) => e,
    };
    mirror_descent(data, params, opts).map_err(|md| {
        Error::Solver(format!("Newton failed ({newton_err}); mirror-descent fallback failed ({md})"))
    })
}

fn rel_residual(data: &Dataset, beta: &[f64], y_norm: f64) -> f64 {
    norm2(&data.residual(beta)) / y_norm.max(1e-300)
}

fn newton(data: &Dataset, params: &EntropyParams, opts: &NewtonOptions) -> Result<ImplicitBiasSolution> {
    let n = data.n();
    let c: Vec<f64> = params.alpha().iter().map(|a| 2.0 * a * a).collect();
    let y_norm = norm2(&data.y);
    let mut nu = match &opts.nu0 {
        Some(v) if v.len() == n => v.clone(),
        Some(v) => return Err(config_err!("nu0 has {} entries, expected {n}", v.len())),
        None => vec![0.0; n],
    };

    let eval = |nu: &[f64]| -> (Vec<f64>, Vec<f64>, f64) {
        let z = data.x.tmul_vec(nu);
        let beta: Vec<f64> = z.iter().zip(&c).map(|(zi, ci)| ci * sinh(*zi)).collect();
        let g = z.iter().zip(&c).map(|(zi, ci)| ci * cosh(*zi)).sum::<f64>() - dot(&data.y, nu);
        (z, beta, g)
    };

    let (mut z, mut beta, mut g) = eval(&nu);
    let mut f = data.residual(&beta);
    let mut fnorm = norm2(&f);
    for it in 0..opts.max_iter {
        if y_norm == 0.0 && fnorm == 0.0 || fnorm <= opts.rel_tol * y_norm {
            return Ok(ImplicitBiasSolution { beta, nu: Some(nu), path: SolverPath::Newton, iterations: it, feasibility: fnorm / y_norm.max(1e-300) });
        }
        let w: Vec<f64> = z.iter().zip(&c).map(|(zi, ci)| ci * cosh(*zi)).collect();
        let jac = data.x.weighted_gram(&w);
        let l = cholesky(&jac)?;
        let step: Vec<f64> = cholesky_solve(&l, &f).iter().map(|v| -v).collect();
        let slope = dot(&f, &step);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-30 {
            let trial: Vec<f64> = nu.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            let (tz, tb, tg) = eval(&trial);
            if tg.is_finite() && tb.iter().all(|v| v.is_finite()) {
                let tf = data.residual(&tb);
                let tn = norm2(&tf);
                if tg <= g + 1e-4 * t * slope || tn < (1.0 - 1e-4 * t) * fnorm {
                    nu = trial;
                    z = tz;
                    beta = tb;
                    g = tg;
                    f = tf;
                    fnorm = tn;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            // Stagnation at round-off level still counts as converged.
            let rel = fnorm / y_norm.max(1e-300);
            if rel <= 1e-10 {
                return Ok(ImplicitBiasSolution { beta, nu: Some(nu), path: SolverPath::Newton, iterations: it, feasibility: rel });
            }
            return Err(Error::Solver(format!("line search stalled at relative residual {rel:e}")));
        }
    }
    let rel = fnorm / y_norm.max(1e-300);
    if rel <= 1e-10 {
        return Ok(ImplicitBiasSolution { beta, nu: Some(nu), path: SolverPath::Newton, iterations: opts.max_iter, feasibility: rel });
    }
    Err(Error::Solver(format!("Newton did not converge in {} iterations (relative residual {rel:e})", opts.max_iter)))
}

/// Mirror descent on `L` with potential `φ_α`, started at `β = 0`: the dual
/// iterate `θ = ∇φ_α(β)` stays in `span(Xᵀ)`, and the step is halved
/// whenever the loss would increase.
fn mirror_descent(data: &Dataset, params: &EntropyParams, opts: &NewtonOptions) -> Result<ImplicitBiasSolution> {
    let c: Vec<f64> = params.alpha().iter().map(|a| 2.0 * a * a).collect();
    let y_norm = norm2(&data.y);
    let n = data.n() as f64;
    let mut theta = vec![0.0; data.d()];
    let to_beta = |theta: &[f64]| -> Vec<f64> { theta.iter().zip(&c).map(|(t, ci)| ci * sinh(4.0 * t)).collect() };
    let mut beta = to_beta(&theta);
    let mut r = data.residual(&beta);
    let mut loss = dot(&r, &r);
    let mut eta = 1.0;
    for it in 0..opts.fallback_max_iter {
        let rel = sqrt(loss) / y_norm.max(1e-300);
        if rel <= 1e-11 || y_norm == 0.0 {
            return Ok(ImplicitBiasSolution { beta, nu: None, path: SolverPath::MirrorDescent, iterations: it, feasibility: rel });
        }
        let grad = data.x.tmul_vec(&r);
        loop {
            let trial: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t - eta * g / (2.0 * n)).collect();
            let tb = to_beta(&trial);
            let tr = data.residual(&tb);
            let tl = dot(&tr, &tr);
            if tl.is_finite() && tl < loss {
                theta = trial;
                beta = tb;
                r = tr;
                loss = tl;
                eta *= 1.2;
                break;
            }
            eta *= 0.5;
            if eta < 1e-300 {
                return Err(Error::Solver(format!("step size underflow at relative residual {rel:e}")));
            }
        }
    }
    let rel = rel_residual(data, &beta, y_norm);
    Err(Error::Solver(format!("no convergence in {} iterations (relative residual {rel:e})", opts.fallback_max_iter)))
}

/// Minimum-`ℓ2` interpolator `Xᵀ(XXᵀ)⁻¹y`, via an orthonormal basis of `span(Xᵀ)`.
pub fn min_l2_interpolator(data: &Dataset) -> Result<Vec<f64>> {
    let n = data.n();
    // Orthonormal basis Q (n vectors in R^d) of span(Xᵀ); X = R Qᵀ with R = X Q.
    let q = column_space_basis(&data.x.transpose(), 1e-10);
    if q.len() < n {
        return Err(Error::Solver(format!("X has rank {} < n = {n}", q.len())));
    }
    // Solve (X Q) c = y, then β = Q c.
    let mut xq = Matrix::zeros(n, n);
    for i in 0..n {
        for (k, qk) in q.iter().enumerate() {
            xq[(i, k)] = dot(data.x.row(i), qk);
        }
    }
    let coef = crate::linalg::lu_solve(&xq, &data.y)?;
    let mut beta = vec![0.0; data.d()];
    for (qk, ck) in q.iter().zip(&coef) {
        crate::linalg::axpy(*ck, qk, &mut beta);
    }
    Ok(beta)
}

/// Both reference interpolators.
pub fn reference_interpolators(data: &Dataset) -> Result<InterpolatorSet> {
    Ok(InterpolatorSet { beta_l1: lp::min_l1_interpolator(data)?, beta_l2: min_l2_interpolator(data)? })
}

/// `¼ asinh(β / 2α²)`.
#[cfg(test)]
fn mirror_map(beta: &[f64], alpha: &[f64]) -> Vec<f64> {
    beta.iter().zip(alpha).map(|(b, a)| 0.25 * crate::math::asinh(b / (2.0 * a * a))).collect()
}
