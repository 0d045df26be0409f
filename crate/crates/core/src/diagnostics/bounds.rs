use alloc::format;
use alloc::vec::Vec;

use super::{step_size_bound, v_lower_bound, TheoryContext};
use crate::bias::{entropy_gap, solve_implicit_bias};
use crate::error::config_err;
use crate::math::{exp, ln, sqrt};
use crate::{Error, Result};

/// Bounds on `∫₀^∞ L ds` for a run at step size `γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossIntegralBounds {
    /// `(W₀/4) / (1 + γM/W₀)`.
    pub lower: f64,
    /// `⅛ ‖β*‖₁ ln(‖β*‖₁/α²)`, meaningful only as `α → 0`.
    pub small_alpha_lower: f64,
    /// `−V_lower + 2a`.
    pub upper: f64,
    /// `W₀^α = min_{Xβ=y} φ_α − φ_α(0)`.
    pub w0_alpha: f64,
    pub m: f64,
}

/// Lower and upper bounds on the loss integral. Requires a scalar `α`.
pub fn loss_integral_bounds(ctx: &TheoryContext, gamma: f64) -> Result<LossIntegralBounds> {
    let alpha = ctx.alpha.alpha();
    let a0 = alpha[0];
    if alpha.iter().any(|a| *a != a0) {
        return Err(config_err!("loss_integral_bounds assumes a scalar alpha"));
    }
    let beta = solve_implicit_bias(&ctx.data, &ctx.alpha)?;
    let w0 = entropy_gap(&beta, &ctx.alpha);
    let s = ctx.beta_l1_norm();
    let a2 = a0 * a0;
    let d = ctx.data.d() as f64;
    let log_s = if s > 0.0 { ln(sqrt(2.0) * s / a2) } else { 0.0 };
    let m = 325.0 * ctx.lambda_max * ctx.log_term() * (s * s * log_s * log_s).max(a2 * a2 * d * d);
    let lower = if w0 > 0.0 { 0.25 * w0 / (1.0 + gamma * m / w0) } else { 0.0 };
    let small_alpha_lower = if s > 0.0 { 0.125 * s * ln(s / a2) } else { 0.0 };
    let upper = -v_lower_bound(ctx) + 2.0 * ctx.a;
    Ok(LossIntegralBounds { lower, small_alpha_lower, upper, w0_alpha: w0, m })
}

/// Exponential bound on `α_∞/α` at the largest admissible step size.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlphaRatioBounds {
    /// `exp(−H̃_i / (1600 ln(4/p) λ_max))`.
    pub exp_bound: Vec<f64>,
    /// Step size the bound refers to.
    pub gamma: Option<f64>,
    /// Fitted power-law exponent `ζ`, filled in from runs when available.
    pub power_law_exponent: Option<f64>,
}

pub fn alpha_ratio_bounds(ctx: &TheoryContext, gamma_at_max: bool) -> AlphaRatioBounds {
    let c = 1600.0 * ctx.log_term() * ctx.lambda_max;
    AlphaRatioBounds {
        exp_bound: ctx.h_tilde_diag.iter().map(|h| exp(-h / c)).collect(),
        gamma: gamma_at_max.then(|| step_size_bound(ctx)),
        power_law_exponent: None,
    }
}

/// Least-squares `ζ` in `ln(α_∞/α) = ζ ln(α²/‖β*_ℓ1‖₁)` (no intercept), from
/// `(α, α_∞/α)` pairs. The power law presumes iterates bounded uniformly in
/// `α`, which is an unproved assumption, so the fit is descriptive only.
pub fn fit_power_law_exponent(points: &[(f64, f64)], beta_l1_norm: f64) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Diagnostic("power-law fit needs at least two points".into()));
    }
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(alpha, ratio) in points {
        if !(alpha > 0.0 && ratio > 0.0) {
            return Err(Error::Diagnostic(format!("invalid fit point ({alpha}, {ratio})")));
        }
        let x = ln(alpha * alpha / beta_l1_norm);
        let y = ln(ratio);
        sxy += x * y;
        sxx += x * x;
    }
    Ok(sxy / sxx)
}

/// Whether `x ≤ A + B ln x`. Errors when the lemma's preconditions
/// (`A, B > 0`, `A/B + ln B ≥ 2`) fail.
pub fn lambert_bound_check(a: f64, b: f64, x: f64) -> Result<bool> {
    if !(a > 0.0 && b > 0.0) || a / b + ln(b) < 2.0 {
        return Err(Error::Diagnostic(format!("Lambert lemma inapplicable for A={a}, B={b}")));
    }
    if !(x > 0.0) {
        return Err(Error::Diagnostic(format!("Lambert lemma needs x > 0, got {x}")));
    }
    Ok(x <= a + b * ln(x))
}

/// The lemma's conclusion `x ≤ (5/2)(A + B ln B)`.
pub fn lambert_conclusion(a: f64, b: f64) -> f64 {
    2.5 * (a + b * ln(b))
}

#[cfg(test)]
mod tests {
    use super::super::context::tests::hand_ctx;
    use super::*;

    #[test]
    fn exp_bound_direct_value() {
        let ctx = hand_ctx(0.04, 0.1);
        let r = alpha_ratio_bounds(&ctx, true);
        let e = (-1.0 / (1600.0 * 100f64.ln())).exp();
        assert!((r.exp_bound[0] - e).abs() < 1e-16);
        assert!((r.exp_bound[0] - (-1.357e-4f64).exp()).abs() < 1e-7);
        assert_eq!(r.exp_bound[1], 1.0);
        assert_eq!(r.gamma, Some(step_size_bound(&ctx)));
    }

    #[test]
    fn loss_bounds_direct_values() {
        // one sample, x = (1, 0), y = 1: β* = (1, 0) for every α
        let ctx = hand_ctx(0.04, 0.1);
        let g = 1e-4;
        let b = loss_integral_bounds(&ctx, g).unwrap();
        let a2: f64 = 0.01;
        let w0 = 0.25 * ((1.0 / (2.0 * a2)).asinh() - (1.0 + 4.0 * a2 * a2).sqrt() + 2.0 * a2);
        assert!((b.w0_alpha - w0).abs() < 1e-9);
        let log_s = (2f64.sqrt() / a2).ln();
        let m = 325.0 * 100f64.ln() * (log_s * log_s).max(a2 * a2 * 4.0);
        assert!((b.m - m).abs() < 1e-9 * m);
        assert!((b.lower - 0.25 * w0 / (1.0 + g * m / w0)).abs() < 1e-9);
        assert!((b.small_alpha_lower - 0.125 * (1.0 / a2).ln()).abs() < 1e-12);
        let a = log_s;
        let upper = 0.25 * (18.0 * 2f64.sqrt() * a / a2).ln() + 2.0 * a;
        assert!((b.upper - upper).abs() < 1e-12);
    }

    #[test]
    fn loss_bounds_need_scalar_alpha() {
        let mut ctx = hand_ctx(0.04, 0.1);
        ctx.alpha = crate::bias::EntropyParams::new(alloc::vec![0.1, 0.2]).unwrap();
        assert!(loss_integral_bounds(&ctx, 1e-4).is_err());
    }

    #[test]
    fn lambert_fixed_point_example() {
        // largest x with x = 5 + ln x
        let mut x: f64 = 7.0;
        for _ in 0..100 {
            x = 5.0 + x.ln();
        }
        assert!((x - 6.9368).abs() < 1e-4);
        assert!(lambert_bound_check(5.0, 1.0, x).unwrap());
        assert!(!lambert_bound_check(5.0, 1.0, x + 1e-6).unwrap());
        assert!(x <= lambert_conclusion(5.0, 1.0));
        assert_eq!(lambert_conclusion(5.0, 1.0), 12.5);
    }

    #[test]
    fn lambert_preconditions() {
        assert!(lambert_bound_check(-1.0, 1.0, 1.0).is_err());
        assert!(lambert_bound_check(0.5, 1.0, 1.0).is_err());
        assert!(lambert_bound_check(3.0, 1.0, 3.0).unwrap());
    }

    #[test]
    fn power_law_fit_recovers_exponent() {
        let pts: alloc::vec::Vec<(f64, f64)> =
            [0.2, 0.1, 0.05, 0.02].iter().map(|&a: &f64| (a, (a * a / 3.0).powf(0.3))).collect();
        assert!((fit_power_law_exponent(&pts, 3.0).unwrap() - 0.3).abs() < 1e-12);
    }
}
