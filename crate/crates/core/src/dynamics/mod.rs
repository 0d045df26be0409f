//! Gradient descent, SGD and Euler–Maruyama discretizations of the
//! stochastic gradient flow (SGF) on `β = w₊^p − w₋^p`.
//!
//! All algorithms share one update: with `r = Xβ − y` and a per-sample
//! coefficient vector `v ∈ Rⁿ`, set `Δ = Xᵀv` and
//! `w₊ ← w₊ + w₊^{p−1} ⊙ Δ`, `w₋ ← w₋ − w₋^{p−1} ⊙ Δ`.
//!
//! | algorithm | `v_i` |
//! |---|---|
//! | GD | `−(dt/n) r_i` |
//! | SGD | `−(γ/b) Σ_{draws of i} (r_i + Δ_t)` over the batch |
//! | SGF | `−(p/2)(dt/n) r_i + 2√(γ L/n) ξ_i` |
//! | SGF, general noise | `−(dt/n) r_i + 2√(γ L_i/n) ξ_i` |
//!
//! Here `ξ` is a Brownian increment: i.i.d. Gaussians with standard deviation
//! `√dt`. A one-step noise written `N(0, √γ I)` means standard deviation `√γ`,
//! the only reading that reproduces the SGD noise covariance. The same `ξ` drives
//! `w₊` and `w₋`, and it also updates the dual path
//! `η ← η − X̃(β − β*) dt + 2√(γL) ξ` (with `X̃ = X/√n`), for which
//! `w± = α_t exp(±X̃ᵀη)`.

mod config;
mod engine;

pub use config::{Algorithm, DynamicsConfig, LabelNoise, Sampling};
pub use engine::{Observer, StepEvent};

use alloc::vec::Vec;

use crate::error::config_err;
use crate::model::{Dataset, WeightState};
use crate::Result;

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Status {
    Converged,
    MaxSteps,
    Diverged,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxSteps => "max_steps",
            Status::Diverged => "diverged",
        }
    }
}

/// One recorded point of a trajectory.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Record {
    pub step: u64,
    pub time: f64,
    pub beta: Vec<f64>,
    pub loss: f64,
    pub loss_integral: f64,
    /// `∫ L w₊^{p−2} ds` (depth-p runs only).
    pub aux_integral_plus: Option<Vec<f64>>,
    /// `∫ L w₋^{p−2} ds` (depth-p runs only).
    pub aux_integral_minus: Option<Vec<f64>>,
    /// Dual path `η` (SGF runs only).
    pub eta: Option<Vec<f64>>,
    pub val_loss: Option<f64>,
}

/// Output of a run. Integrals are accumulated at every integrator step,
/// independently of `record_every`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    pub algo: Algorithm,
    pub seed: u64,
    pub records: Vec<Record>,
    pub terminal: WeightState,
    pub status: Status,
    pub steps: u64,
    pub time: f64,
    pub final_loss: f64,
    pub loss_integral: f64,
    /// `∫ (L + δ_t²) ds` (label-noise runs only).
    pub tilde_loss_integral: Option<f64>,
    /// `∫ L_i ds` per sample (general-noise SGF only).
    pub sample_loss_integrals: Option<Vec<f64>>,
    pub aux_integral_plus: Option<Vec<f64>>,
    pub aux_integral_minus: Option<Vec<f64>>,
    /// Brownian increments, `n` per step, when `record_noise` is set.
    pub noise: Option<Vec<f64>>,
    /// GD steps at which the loss increased (a sign that `dt` is too large).
    pub nonmonotone_steps: u64,
    /// Depth-p steps that needed `dt` halving to stay positive.
    pub halved_steps: u64,
}

impl Trajectory {
    pub fn final_beta(&self) -> Vec<f64> {
        self.terminal.beta()
    }

    pub fn is_converged(&self) -> bool {
        self.status == Status::Converged
    }
}

/// Step size of the SGF that models mini-batch SGD with batch size `b`.
pub fn effective_step_size(gamma: f64, b: usize, n: usize, sampling: Sampling) -> Result<f64> {
    if b == 0 || b > n {
        return Err(config_err!("batch size must satisfy 1 <= b <= n (b={b}, n={n})"));
    }
    Ok(match sampling {
        Sampling::WithReplacement => gamma / b as f64,
        Sampling::WithoutReplacement if n == 1 => gamma,
        Sampling::WithoutReplacement => gamma * (n - b) as f64 / ((n - 1) as f64 * b as f64),
    })
}

/// One Euler–Maruyama step of the depth-2 SGF driven by the given Brownian increment.
pub fn sgf_step(state: &WeightState, data: &Dataset, gamma: f64, dt: f64, noise: &[f64]) -> Result<WeightState> {
    engine::single_step(state, data, gamma, dt, noise, engine::NoiseModel::Shared { extra: 0.0 }, Some(2))
}

/// One Euler–Maruyama step of the depth-`p` SGF (noise factor `w±^{p−1}`).
pub fn sgf_depth_p_step(state: &WeightState, data: &Dataset, gamma: f64, dt: f64, noise: &[f64]) -> Result<WeightState> {
    engine::single_step(state, data, gamma, dt, noise, engine::NoiseModel::Shared { extra: 0.0 }, None)
}

/// One step of the SGF with per-sample noise amplitudes `√L_i`.
pub fn sgf_general_step(state: &WeightState, data: &Dataset, gamma: f64, dt: f64, noise: &[f64]) -> Result<WeightState> {
    engine::single_step(state, data, gamma, dt, noise, engine::NoiseModel::PerSample, Some(2))
}

fn expect_algo(config: &DynamicsConfig, algo: Algorithm) -> Result<()> {
    if config.algo != algo {
        return Err(config_err!("expected algo {:?}, config has {:?}", algo, config.algo));
    }
    Ok(())
}

/// Runs whichever algorithm the config names.
pub fn run(data: &Dataset, config: &DynamicsConfig) -> Result<Trajectory> {
    engine::simulate(data, config, None)
}

/// As [`run`], calling `observer` after every integrator step.
pub fn run_observed(data: &Dataset, config: &DynamicsConfig, observer: &mut dyn Observer) -> Result<Trajectory> {
    engine::simulate(data, config, Some(observer))
}

macro_rules! driver {
    ($(#[$doc:meta])* $name:ident, $algo:expr) => {
        $(#[$doc])*
        pub fn $name(data: &Dataset, config: &DynamicsConfig) -> Result<Trajectory> {
            expect_algo(config, $algo)?;
            run(data, config)
        }
    };
}

driver!(
    /// Explicit Euler on the gradient flow in `w`, step `dt`.
    run_gd, Algorithm::Gd);
driver!(
    /// Mini-batch SGD with step `γ`.
    run_sgd, Algorithm::Sgd);
driver!(
    /// SGF with step `dt`, noise level `γ`.
    run_sgf, Algorithm::Sgf);
driver!(
    /// SGD whose residuals are perturbed by `±2δ_t`.
    run_sgd_label_noise, Algorithm::SgdLabelNoise);
driver!(
    /// SGF with diffusion amplitude `√(L + δ_t²)`.
    run_sgf_label_noise, Algorithm::SgfLabelNoise);
driver!(
    /// SGF with per-sample diffusion amplitudes `√L_i`.
    run_sgf_general, Algorithm::SgfGeneral);
driver!(
    /// SGF for depth `p`, with positivity-preserving step halving.
    run_sgf_depth_p, Algorithm::SgfDepthP);
