use crate::bias::{grad_hyperbolic_entropy, EntropyParams};
use crate::linalg::{norm2, RowSpace};
use crate::model::Dataset;

/// Stationarity and feasibility of `β` for `min_{Xβ=y} φ_α(β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KktReport {
    /// `‖P⊥ ∇φ_α(β)‖ / max(‖∇φ_α(β)‖, ε)`.
    pub stationarity: f64,
    /// `‖Xβ − y‖ / ‖y‖`.
    pub feasibility: f64,
}

/// KKT residuals, building the row-space projector on the fly.
pub fn kkt_residual(beta: &[f64], data: &Dataset, params: &EntropyParams) -> KktReport {
    kkt_residual_in(&RowSpace::new(&data.x), beta, data, params)
}

/// KKT residuals with a precomputed row-space projector.
pub fn kkt_residual_in(rs: &RowSpace, beta: &[f64], data: &Dataset, params: &EntropyParams) -> KktReport {
    let g = grad_hyperbolic_entropy(beta, params);
    let stationarity = norm2(&rs.orthogonal_part(&g)) / norm2(&g).max(f64::MIN_POSITIVE);
    let y_norm = norm2(&data.y);
    let res = norm2(&data.residual(beta));
    let feasibility = if y_norm > 0.0 { res / y_norm } else { res };
    KktReport { stationarity, feasibility }
}
