//! Quantities the theory predicts or bounds, evaluated on simulated runs.
//!
//! Constants (400, 18, 325, 1600, 5/2) are used verbatim. Stochastic
//! integrals are accumulated with the integrator's own increments: Euler for
//! `dB` integrals and trapezoid for `dt` integrals. `γ̃` is taken equal to `γ`,
//! with `X̃ = X/√n` absorbing the `1/n`.

mod bounds;
mod context;
mod event_a;
mod kkt;
mod lyapunov;

pub use bounds::{
    alpha_ratio_bounds, fit_power_law_exponent, lambert_bound_check, lambert_conclusion, loss_integral_bounds,
    AlphaRatioBounds, LossIntegralBounds,
};
pub use context::{boundedness_bound, heuristic_step_size_bound, step_size_bound, v_lower_bound, TheoryContext};
pub use event_a::{martingale_s_and_event_a, EventAMonitor, EventAReport};
pub use kkt::{kkt_residual, kkt_residual_in, KktReport};
pub use lyapunov::{
    alpha_eff, alpha_t, depth_p_alpha_eff, general_alpha_eff, lyapunov_v, lyapunov_w, weight_u, xi,
};
