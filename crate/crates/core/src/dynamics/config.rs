use alloc::vec::Vec;

use crate::error::config_err;
use crate::model::Dataset;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Algorithm {
    Gd,
    Sgd,
    Sgf,
    SgdLabelNoise,
    SgfLabelNoise,
    SgfGeneral,
    SgfDepthP,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Gd,
        Algorithm::Sgd,
        Algorithm::Sgf,
        Algorithm::SgdLabelNoise,
        Algorithm::SgfLabelNoise,
        Algorithm::SgfGeneral,
        Algorithm::SgfDepthP,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Gd => "gd",
            Algorithm::Sgd => "sgd",
            Algorithm::Sgf => "sgf",
            Algorithm::SgdLabelNoise => "sgd_label_noise",
            Algorithm::SgfLabelNoise => "sgf_label_noise",
            Algorithm::SgfGeneral => "sgf_general",
            Algorithm::SgfDepthP => "sgf_depth_p",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.as_str() == s)
    }

    /// Continuous-time algorithms integrated with step `dt`.
    pub fn is_flow(self) -> bool {
        matches!(self, Algorithm::Sgf | Algorithm::SgfLabelNoise | Algorithm::SgfGeneral | Algorithm::SgfDepthP)
    }

    pub fn is_sgd(self) -> bool {
        matches!(self, Algorithm::Sgd | Algorithm::SgdLabelNoise)
    }

    pub fn has_label_noise(self) -> bool {
        matches!(self, Algorithm::SgdLabelNoise | Algorithm::SgfLabelNoise)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Sampling {
    WithReplacement,
    /// A fresh batch without replacement at every step.
    WithoutReplacement,
}

/// `δ_t = delta` for steps `t ≤ cutoff_step`, zero afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LabelNoise {
    pub delta: f64,
    pub cutoff_step: u64,
}

impl LabelNoise {
    #[inline]
    pub fn delta_at(&self, step: u64) -> f64 {
        if step <= self.cutoff_step {
            self.delta
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DynamicsConfig {
    pub algo: Algorithm,
    /// Step size `γ` (SGD step, SGF noise level).
    pub gamma: f64,
    /// Integrator step of GD and the flows.
    pub dt: f64,
    /// Initialization `w₊ = w₋ = α`.
    pub alpha: Vec<f64>,
    pub depth: u32,
    pub batch_size: usize,
    pub sampling: Sampling,
    pub label_noise: Option<LabelNoise>,
    pub max_steps: u64,
    pub loss_tol: f64,
    pub seed: u64,
    pub record_every: u64,
    /// Keep every Brownian increment in the trajectory.
    pub record_noise: bool,
}

impl DynamicsConfig {
    /// Defaults: `dt = γ`, depth 2, single-sample batches with replacement,
    /// no label noise, 10⁶ steps, `loss_tol = 1e-10`, a record every 1000 steps.
    pub fn new(algo: Algorithm, gamma: f64, alpha: Vec<f64>) -> Self {
        Self {
            algo,
            gamma,
            dt: gamma,
            alpha,
            depth: 2,
            batch_size: 1,
            sampling: Sampling::WithReplacement,
            label_noise: None,
            max_steps: 1_000_000,
            loss_tol: 1e-10,
            seed: 0,
            record_every: 1000,
            record_noise: false,
        }
    }

    /// Integrator step actually used: `γ` for SGD, `dt` otherwise.
    pub fn step_length(&self) -> f64 {
        if self.algo.is_sgd() {
            self.gamma
        } else {
            self.dt
        }
    }

    pub fn validate(&self, data: &Dataset) -> Result<()> {
        let (n, d) = (data.n(), data.d());
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(config_err!("gamma must be positive and finite, got {}", self.gamma));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(config_err!("dt must be positive and finite, got {}", self.dt));
        }
        if self.alpha.len() != d {
            return Err(config_err!("alpha has {} entries, data has d={d}", self.alpha.len()));
        }
        if self.alpha.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(config_err!("alpha entries must be positive and finite"));
        }
        if self.batch_size == 0 || self.batch_size > n {
            return Err(config_err!("batch size must satisfy 1 <= b <= n (b={}, n={n})", self.batch_size));
        }
        match self.algo {
            Algorithm::SgfDepthP if self.depth < 2 => {
                return Err(config_err!("depth must be at least 2, got {}", self.depth))
            }
            Algorithm::SgfDepthP => {}
            _ if self.depth != 2 => {
                return Err(config_err!("depth {} is only supported by sgf_depth_p", self.depth))
            }
            _ => {}
        }
        match (&self.label_noise, self.algo.has_label_noise()) {
            (None, true) => return Err(config_err!("{} needs a label-noise schedule", self.algo.as_str())),
            (Some(_), false) => {
                return Err(config_err!("label noise is only used by the label-noise algorithms"))
            }
            (Some(ln), true) if !(ln.delta >= 0.0 && ln.delta.is_finite()) => {
                return Err(config_err!("label-noise delta must be nonnegative, got {}", ln.delta))
            }
            _ => {}
        }
        if !(self.loss_tol >= 0.0) {
            return Err(config_err!("loss_tol must be nonnegative"));
        }
        if self.record_every == 0 {
            return Err(config_err!("record_every must be at least 1"));
        }
        Ok(())
    }
}
