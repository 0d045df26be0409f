//! JSON configuration mirroring [`DynamicsConfig`], with every field optional
//! so that a file, CLI flags and preset defaults can be layered.

use serde::{Deserialize, Serialize};
use sgflab_core::dynamics::{Algorithm, DynamicsConfig, LabelNoise, Sampling};

use crate::error::{LabError, Result};

/// `α` given as one scale for every coordinate or as a full vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl AlphaSpec {
    pub fn expand(&self, d: usize) -> Result<Vec<f64>> {
        match self {
            AlphaSpec::Scalar(a) => Ok(vec![*a; d]),
            AlphaSpec::Vector(v) if v.len() == d => Ok(v.clone()),
            AlphaSpec::Vector(v) => Err(LabError::Config(format!("alpha has {} entries, data has d={d}", v.len()))),
        }
    }

    pub fn scalar(&self) -> Option<f64> {
        match self {
            AlphaSpec::Scalar(a) => Some(*a),
            AlphaSpec::Vector(v) => {
                let a = *v.first()?;
                v.iter().all(|x| *x == a).then_some(a)
            }
        }
    }
}

/// Partial [`DynamicsConfig`]. `dt_div` sets `dt = γ / dt_div` when `dt` is absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub algo: Option<Algorithm>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_div: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<AlphaSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampling: Option<Sampling>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label_noise: Option<LabelNoise>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_every: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub record_noise: Option<bool>,
}

macro_rules! layer {
    ($self:ident, $other:ident; $($f:ident),*) => {
        ConfigFile { $($f: $other.$f.clone().or_else(|| $self.$f.clone()),)* }
    };
}

impl ConfigFile {
    /// Fields set in `top` win over fields set in `self`.
    pub fn overlay(&self, top: &ConfigFile) -> ConfigFile {
        let mut out = layer!(self, top; algo, gamma, dt, dt_div, alpha, depth, batch_size, sampling, label_noise,
            max_steps, loss_tol, seed, record_every, record_noise);
        // An explicit divisor on top replaces an inherited absolute dt and vice versa.
        if top.dt_div.is_some() && top.dt.is_none() {
            out.dt = None;
        }
        if top.dt.is_some() && top.dt_div.is_none() {
            out.dt_div = None;
        }
        out
    }

    /// Fills unset fields from [`DynamicsConfig::new`] defaults.
    pub fn resolve(&self, d: usize) -> Result<DynamicsConfig> {
        let algo = self.algo.ok_or_else(|| LabError::Config("algo is required".into()))?;
        let gamma = self.gamma.ok_or_else(|| LabError::Config("gamma is required".into()))?;
        let alpha = self.alpha.as_ref().ok_or_else(|| LabError::Config("alpha is required".into()))?.expand(d)?;
        let mut cfg = DynamicsConfig::new(algo, gamma, alpha);
        match (self.dt, self.dt_div) {
            (Some(_), Some(_)) => return Err(LabError::Config("give either dt or dt_div, not both".into())),
            (Some(dt), None) => cfg.dt = dt,
            (None, Some(div)) if div > 0.0 && div.is_finite() => cfg.dt = gamma / div,
            (None, Some(div)) => return Err(LabError::Config(format!("dt_div must be positive, got {div}"))),
            (None, None) => {}
        }
        if let Some(v) = self.depth {
            cfg.depth = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.sampling {
            cfg.sampling = v;
        }
        cfg.label_noise = self.label_noise;
        if let Some(v) = self.max_steps {
            cfg.max_steps = v;
        }
        if let Some(v) = self.loss_tol {
            cfg.loss_tol = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.record_every {
            cfg.record_every = v;
        }
        if let Some(v) = self.record_noise {
            cfg.record_noise = v;
        }
        Ok(cfg)
    }
}
