use alloc::vec::Vec;

use crate::bias::{min_l1_interpolator, EntropyParams};
use crate::error::config_err;
use crate::linalg::{norm1, power_iteration, RowSpace};
use crate::math::{ln, sqrt};
use crate::model::Dataset;
use crate::Result;

/// Dataset-level constants shared by the bounds.
#[derive(Debug, Clone)]
pub struct TheoryContext {
    pub data: Dataset,
    /// `diag(XᵀX/n)`.
    pub h_tilde_diag: Vec<f64>,
    /// Largest eigenvalue of `XᵀX/n`.
    pub lambda_max: f64,
    pub beta_l1: Vec<f64>,
    pub alpha: EntropyParams,
    /// Failure probability `p ∈ (0, ½]`.
    pub p_fail: f64,
    /// `max{‖β*‖₁ ln(√2‖β*‖₁/min α²), ‖α‖²}`.
    pub a: f64,
    /// `½ ln(4/p) / a`.
    pub b: f64,
    pub row_space: RowSpace,
}

impl TheoryContext {
    /// Computes `λ_max` by power iteration (relative tolerance 1e-12) and
    /// `β*_ℓ1` by the simplex solver.
    pub fn new(data: &Dataset, alpha: EntropyParams, p_fail: f64) -> Result<Self> {
        let gram = data.x.gram().scaled(1.0 / data.n() as f64);
        let lambda_max = power_iteration(&gram, 1e-12, 1_000_000);
        let beta_l1 = min_l1_interpolator(data)?;
        Self::from_parts(data.clone(), data.h_tilde_diag(), lambda_max, beta_l1, alpha, p_fail)
    }

    /// Context from precomputed constants.
    pub fn from_parts(
        data: Dataset,
        h_tilde_diag: Vec<f64>,
        lambda_max: f64,
        beta_l1: Vec<f64>,
        alpha: EntropyParams,
        p_fail: f64,
    ) -> Result<Self> {
        if !(p_fail > 0.0 && p_fail <= 0.5) {
            return Err(config_err!("p_fail must lie in (0, 1/2], got {p_fail}"));
        }
        if alpha.d() != data.d() || h_tilde_diag.len() != data.d() || beta_l1.len() != data.d() {
            return Err(config_err!("context vectors must have length d={}", data.d()));
        }
        let a = event_a_scale(norm1(&beta_l1), alpha.min_sq(), alpha.norm_sq());
        let b = 0.5 * ln(4.0 / p_fail) / a;
        let row_space = RowSpace::new(&data.x);
        Ok(Self { data, h_tilde_diag, lambda_max, beta_l1, alpha, p_fail, a, b, row_space })
    }

    pub fn beta_l1_norm(&self) -> f64 {
        norm1(&self.beta_l1)
    }

    /// `ln(4/p)`.
    pub fn log_term(&self) -> f64 {
        ln(4.0 / self.p_fail)
    }
}

/// `a = max{s ln(√2 s / min α²), ‖α‖²}` with `s = ‖β*_ℓ1‖₁`.
pub(crate) fn event_a_scale(l1: f64, min_alpha_sq: f64, alpha_norm_sq: f64) -> f64 {
    let first = if l1 > 0.0 { l1 * ln(sqrt(2.0) * l1 / min_alpha_sq) } else { 0.0 };
    first.max(alpha_norm_sq)
}

/// Admissible step size `(400 ln(4/p) λ_max a)⁻¹`.
pub fn step_size_bound(ctx: &TheoryContext) -> f64 {
    1.0 / (400.0 * ctx.log_term() * ctx.lambda_max * ctx.a)
}

/// The conjectured scale `1/(λ_max ‖β*_ℓ1‖₁)` without the logarithmic factor
/// (reported alongside the strict bound, never used to validate runs).
pub fn heuristic_step_size_bound(ctx: &TheoryContext) -> f64 {
    1.0 / (ctx.lambda_max * ctx.beta_l1_norm().max(f64::MIN_POSITIVE))
}

/// `18 a`, the bound on `‖ξ_t‖₁` (and hence `‖β_t‖₁`) on event A.
pub fn boundedness_bound(ctx: &TheoryContext) -> f64 {
    18.0 * ctx.a
}

/// `−(‖β*‖₁/4) ln(18√2 a / min α²)`, the lower bound on `V_t`.
pub fn v_lower_bound(ctx: &TheoryContext) -> f64 {
    -(ctx.beta_l1_norm() / 4.0) * ln(18.0 * sqrt(2.0) * ctx.a / ctx.alpha.min_sq())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use alloc::vec;

    /// A context with `λ_max = 1`, `‖β*‖₁ = 1`, `α = (0.1, 0.1)`.
    pub(crate) fn hand_ctx(p_fail: f64, alpha: f64) -> TheoryContext {
        let data = Dataset::new(Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap(), vec![1.0], None).unwrap();
        TheoryContext::from_parts(data, vec![1.0, 0.0], 1.0, vec![1.0, 0.0], EntropyParams::uniform(alpha, 2).unwrap(), p_fail)
            .unwrap()
    }

    #[test]
    fn step_size_direct_value() {
        let ctx = hand_ctx(0.04, 0.1);
        let expect = 1.0 / (400.0 * 100f64.ln() * (100.0 * 2f64.sqrt()).ln());
        assert!((step_size_bound(&ctx) - expect).abs() < 1e-18);
        assert!((step_size_bound(&ctx) - 1.096e-4).abs() < 1e-7);
        assert!((ctx.a * ctx.b - 0.5 * 100f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn alpha_branch() {
        let ctx = hand_ctx(0.04, 10.0);
        assert_eq!(ctx.a, 200.0);
        assert!((step_size_bound(&ctx) - 1.0 / (400.0 * 100f64.ln() * 200.0)).abs() < 1e-18);
        assert_eq!(boundedness_bound(&ctx), 3600.0);
    }

    #[test]
    fn doubling_lambda_halves_bound() {
        let mut ctx = hand_ctx(0.04, 0.1);
        let s = step_size_bound(&ctx);
        ctx.lambda_max *= 2.0;
        assert!((step_size_bound(&ctx) - s / 2.0).abs() < 1e-18);
    }

    #[test]
    fn boundedness_direct_value() {
        let v = boundedness_bound(&hand_ctx(0.04, 0.1));
        assert!((v - 18.0 * (100.0 * 2f64.sqrt()).ln()).abs() < 1e-12);
        assert!((v - 89.14).abs() < 0.01);
    }

    #[test]
    fn context_from_data() {
        let d = crate::model::generate_sparse_regression(10, 20, 2, 3).unwrap();
        let ctx = TheoryContext::new(&d, EntropyParams::uniform(0.3, 20).unwrap(), 0.04).unwrap();
        let hmax = ctx.h_tilde_diag.iter().cloned().fold(0.0, f64::max);
        assert!(ctx.lambda_max >= hmax);
        assert!(TheoryContext::new(&d, EntropyParams::uniform(0.3, 20).unwrap(), 0.7).is_err());
    }
}
