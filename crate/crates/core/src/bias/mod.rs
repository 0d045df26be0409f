//! The hyperbolic entropy family and the interpolators it selects.
//!
//! `φ_α(β) = ¼ Σ_i [β_i asinh(β_i / 2α_i²) − √(β_i² + 4α_i⁴)]` interpolates
//! between `ℓ1` (small α) and `ℓ2` (large α) at the level of its minimizer
//! over `{Xβ = y}`.

mod depth_p;
mod implicit;
mod lp;

pub use depth_p::{depth_p_h, depth_p_h_inverse, depth_p_kkt_residual, depth_p_potential, DepthPPotential};
pub use implicit::{
    min_l2_interpolator, reference_interpolators, solve_implicit_bias, solve_implicit_bias_with, ImplicitBiasSolution,
    NewtonOptions, SolverPath,
};
pub use lp::{min_l1_interpolator, solve_min_l1, LpSolution};

use alloc::vec::Vec;

use crate::error::config_err;
use crate::math::{asinh, sqrt};
use crate::Result;

/// Per-coordinate initialization scale `α`, all entries positive and finite.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct EntropyParams {
    alpha: Vec<f64>,
}

impl EntropyParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(config_err!("alpha must be non-empty"));
        }
        if let Some(a) = alpha.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(config_err!("alpha entries must be positive and finite, got {a}"));
        }
        Ok(Self { alpha })
    }

    pub fn uniform(alpha: f64, d: usize) -> Result<Self> {
        Self::new(alloc::vec![alpha; d])
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.alpha
    }

    pub fn d(&self) -> usize {
        self.alpha.len()
    }

    /// `min_i α_i²`.
    pub fn min_sq(&self) -> f64 {
        self.alpha.iter().map(|a| a * a).fold(f64::INFINITY, f64::min)
    }

    /// `‖α‖₂²`.
    pub fn norm_sq(&self) -> f64 {
        self.alpha.iter().map(|a| a * a).sum()
    }

    /// Geometric mean of the entries.
    pub fn geo_mean(&self) -> f64 {
        let s: f64 = self.alpha.iter().map(|a| crate::math::ln(*a)).sum();
        crate::math::exp(s / self.alpha.len() as f64)
    }
}

#[inline]
fn c_of(a: f64) -> f64 {
    2.0 * a * a
}

/// `φ_α(β)`.
pub fn hyperbolic_entropy(beta: &[f64], params: &EntropyParams) -> f64 {
    let s: f64 = beta
        .iter()
        .zip(params.alpha())
        .map(|(b, a)| {
            let c = c_of(*a);
            b * asinh(b / c) - sqrt(b * b + c * c)
        })
        .sum();
    0.25 * s
}

/// `∇φ_α(β) = ¼ asinh(β / 2α²)`.
pub fn grad_hyperbolic_entropy(beta: &[f64], params: &EntropyParams) -> Vec<f64> {
    beta.iter().zip(params.alpha()).map(|(b, a)| 0.25 * asinh(b / c_of(*a))).collect()
}

/// Per-coordinate `φ(b) − φ(b₀)` without cancellation in the square roots.
#[inline]
fn entropy_diff(b: f64, b0: f64, c: f64) -> f64 {
    let sb = sqrt(b * b + c * c);
    let sb0 = sqrt(b0 * b0 + c * c);
    let root_diff = (b - b0) * (b + b0) / (sb + sb0);
    0.25 * (b * asinh(b / c) - b0 * asinh(b0 / c) - root_diff)
}

/// `φ_α(β) − φ_α(0)`, computed stably.
pub fn entropy_gap(beta: &[f64], params: &EntropyParams) -> f64 {
    beta.iter().zip(params.alpha()).map(|(b, a)| entropy_diff(*b, 0.0, c_of(*a))).sum()
}

/// `D_φ(β, β₀) = φ(β) − φ(β₀) − ⟨∇φ(β₀), β − β₀⟩ ≥ 0`.
pub fn bregman_divergence(beta: &[f64], ref_beta: &[f64], params: &EntropyParams) -> f64 {
    let s: f64 = beta
        .iter()
        .zip(ref_beta)
        .zip(params.alpha())
        .map(|((b, b0), a)| {
            if b == b0 {
                return 0.0;
            }
            let c = c_of(*a);
            entropy_diff(*b, *b0, c) - 0.25 * asinh(b0 / c) * (b - b0)
        })
        .sum();
    s.max(0.0)
}
