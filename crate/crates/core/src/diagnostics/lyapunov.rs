use alloc::vec::Vec;

use super::TheoryContext;
use crate::bias::{bregman_divergence, grad_hyperbolic_entropy, hyperbolic_entropy, EntropyParams};
use crate::error::config_err;
use crate::linalg::{dot, norm1};
use crate::math::{exp, powf, sqrt};
use crate::model::Dataset;
use crate::{Error, Result};

fn underflow(what: &str) -> Error {
    Error::Domain(alloc::format!("{what} underflowed to zero"))
}

/// `α_t = α ⊙ exp(−2γ H̃ ∫₀ᵗ L ds)`.
pub fn alpha_t(alpha: &[f64], gamma: f64, h_tilde_diag: &[f64], loss_integral: f64) -> Result<EntropyParams> {
    if !(loss_integral >= 0.0) {
        return Err(config_err!("loss integral must be nonnegative, got {loss_integral}"));
    }
    if alpha.len() != h_tilde_diag.len() {
        return Err(config_err!("alpha and diag(H) lengths differ"));
    }
    let v: Vec<f64> = alpha.iter().zip(h_tilde_diag).map(|(a, h)| a * exp(-2.0 * gamma * h * loss_integral)).collect();
    if v.contains(&0.0) {
        return Err(underflow("alpha_t"));
    }
    EntropyParams::new(v)
}

/// `α_eff`: [`alpha_t`] at the run's terminal loss integral.
pub fn alpha_eff(alpha: &[f64], gamma: f64, h_tilde_diag: &[f64], terminal_loss_integral: f64) -> Result<EntropyParams> {
    alpha_t(alpha, gamma, h_tilde_diag, terminal_loss_integral)
}

/// `α ⊙ exp(−2γ diag(X̃ᵀ diag(∫L_i) X̃))` for the per-sample noise model.
pub fn general_alpha_eff(alpha: &[f64], gamma: f64, data: &Dataset, sample_loss_integrals: &[f64]) -> Result<EntropyParams> {
    if sample_loss_integrals.len() != data.n() || alpha.len() != data.d() {
        return Err(config_err!("dimension mismatch in general_alpha_eff"));
    }
    let n = data.n() as f64;
    let mut w = alloc::vec![0.0; data.d()];
    for (i, li) in sample_loss_integrals.iter().enumerate() {
        for (wj, x) in w.iter_mut().zip(data.x.row(i)) {
            *wj += li * x * x;
        }
    }
    let v: Vec<f64> = alpha.iter().zip(&w).map(|(a, wj)| a * exp(-2.0 * gamma * wj / n)).collect();
    if v.contains(&0.0) {
        return Err(underflow("alpha_eff"));
    }
    EntropyParams::new(v)
}

/// Depth-`p` effective scales
/// `α_eff,± = α (1 + 2γ(p−2)(p−1) α^{p−2} H̃ ⊙ ∫ L w±^{p−2} ds)^{−1/(p−2)}`.
pub fn depth_p_alpha_eff(
    alpha: &[f64],
    gamma: f64,
    p: u32,
    h_tilde_diag: &[f64],
    aux_plus: &[f64],
    aux_minus: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if p < 3 {
        return Err(config_err!("depth_p_alpha_eff needs p >= 3, got {p}"));
    }
    let d = alpha.len();
    if h_tilde_diag.len() != d || aux_plus.len() != d || aux_minus.len() != d {
        return Err(config_err!("dimension mismatch in depth_p_alpha_eff"));
    }
    if aux_plus.iter().chain(aux_minus).any(|v| !(*v >= 0.0)) {
        return Err(config_err!("auxiliary integrals must be nonnegative"));
    }
    let pf = p as f64;
    let one = |a: f64, h: f64, int: f64| a * powf(1.0 + 2.0 * gamma * (pf - 2.0) * (pf - 1.0) * powf(a, pf - 2.0) * h * int, -1.0 / (pf - 2.0));
    let plus = (0..d).map(|j| one(alpha[j], h_tilde_diag[j], aux_plus[j])).collect();
    let minus = (0..d).map(|j| one(alpha[j], h_tilde_diag[j], aux_minus[j])).collect();
    Ok((plus, minus))
}

/// `ξ = √(β² + 4α_t⁴)` componentwise.
pub fn xi(beta: &[f64], alpha_t: &EntropyParams) -> Vec<f64> {
    beta.iter().zip(alpha_t.alpha()).map(|(b, a)| sqrt(b * b + 4.0 * a * a * a * a)).collect()
}

/// `V_t = −φ_{α_t}(β_t) + ⟨∇φ_{α_t}(β_t), β_t − β*_ℓ1⟩ + γ ∫L ⟨|β*_ℓ1|, H̃⟩`.
pub fn lyapunov_v(beta_t: &[f64], alpha_t: &EntropyParams, ctx: &TheoryContext, gamma: f64, loss_integral: f64) -> f64 {
    let g = grad_hyperbolic_entropy(beta_t, alpha_t);
    let diff: Vec<f64> = beta_t.iter().zip(&ctx.beta_l1).map(|(b, s)| b - s).collect();
    let abs_star: Vec<f64> = ctx.beta_l1.iter().map(|v| v.abs()).collect();
    -hyperbolic_entropy(beta_t, alpha_t) + dot(&g, &diff) + gamma * loss_integral * dot(&abs_star, &ctx.h_tilde_diag)
}

/// `W_t = φ_{α_∞}(β*) − φ_{α_t}(β_t) + ⟨∇φ_{α_t}(β_t), β_t − β*⟩`, evaluated
/// as `[φ_{α_∞}(β*) − φ_{α_t}(β*)] + D_{φ_{α_t}}(β*, β_t)`.
pub fn lyapunov_w(beta_t: &[f64], alpha_t: &EntropyParams, beta_target: &[f64], alpha_inf: &EntropyParams) -> Result<f64> {
    if alpha_inf.alpha().iter().zip(alpha_t.alpha()).any(|(ai, at)| ai > at) {
        return Err(config_err!("lyapunov_w needs alpha_inf <= alpha_t componentwise"));
    }
    let shift = hyperbolic_entropy(beta_target, alpha_inf) - hyperbolic_entropy(beta_target, alpha_t);
    Ok(shift + bregman_divergence(beta_target, beta_t, alpha_t))
}

/// `U_t = 1 − (γ/2)[⟨H̃, ξ_t + |β*|⟩ + 2bλ_max(‖β_t‖₁² + ‖β*‖₁²)]`.
pub fn weight_u(beta_t: &[f64], xi_t: &[f64], ctx: &TheoryContext, gamma: f64) -> f64 {
    let lin: f64 = ctx.h_tilde_diag.iter().zip(xi_t.iter().zip(&ctx.beta_l1)).map(|(h, (x, s))| h * (x + s.abs())).sum();
    let (nb, ns) = (norm1(beta_t), ctx.beta_l1_norm());
    1.0 - 0.5 * gamma * (lin + 2.0 * ctx.b * ctx.lambda_max * (nb * nb + ns * ns))
}
