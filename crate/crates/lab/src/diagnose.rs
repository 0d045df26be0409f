//! Post-hoc diagnostics of a recorded run.
//!
//! The trajectory CSV is checked against a deterministic replay of its
//! configuration; the replay carries the event-A monitor, whose inputs (the
//! Brownian increments) are not part of the CSV.

use serde::{Deserialize, Serialize};
use sgflab_core::bias::EntropyParams;
use sgflab_core::diagnostics::{
    alpha_eff, alpha_ratio_bounds, heuristic_step_size_bound, kkt_residual, loss_integral_bounds, step_size_bound,
    EventAMonitor, KktReport, LossIntegralBounds, TheoryContext,
};
use sgflab_core::dynamics::{run_observed, DynamicsConfig};
use sgflab_core::model::Dataset;

use crate::error::{LabError, Result};
use crate::io::TrajectoryRow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub step_size_bound: f64,
    pub heuristic_step_size_bound: f64,
    /// Absent for per-coordinate `α`.
    pub loss_integral: Option<LossIntegralBounds>,
    pub loss_integral_within: Option<bool>,
    /// `exp(−H̃_j / (1600 ln(4/p) λ_max))`, a lower bound on `α_eff/α` at the largest admissible `γ`.
    pub alpha_ratio_lower: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseReport {
    pub alpha_eff: Vec<f64>,
    pub loss_integral: f64,
    /// Against `φ_{α_eff}`; absent when the CSV has no `beta_*` columns.
    pub kkt_residual: Option<KktReport>,
    pub bounds: Bounds,
    #[serde(rename = "eventA_violated")]
    pub event_a_violated: bool,
    #[serde(rename = "U_min")]
    pub u_min: f64,
    pub xi_l1_max: f64,
    pub replay_steps: u64,
}

/// Diagnoses `rows` (a trajectory CSV written from `config` on `data`).
pub fn diagnose(data: &Dataset, config: &DynamicsConfig, rows: &[TrajectoryRow], p_fail: f64) -> Result<DiagnoseReport> {
    let last = rows.last().ok_or_else(|| LabError::Config("trajectory is empty".into()))?;
    let ctx = TheoryContext::new(data, EntropyParams::new(config.alpha.clone())?, p_fail)?;
    let mut mon = EventAMonitor::new(&ctx, config.gamma, false);
    let replay = run_observed(data, config, &mut mon)?;
    let event = mon.into_report();

    let same = replay.records.len() == rows.len()
        && replay.records.iter().zip(rows).all(|(r, c)| {
            r.step == c.step && r.time == c.time && r.loss == c.loss && r.loss_integral == c.loss_integral
        });
    if !same {
        return Err(LabError::Config("trajectory does not match a replay of the given configuration".into()));
    }

    let eff = alpha_eff(&config.alpha, config.gamma, &ctx.h_tilde_diag, last.loss_integral)?;
    let kkt = last.beta.as_ref().map(|b| kkt_residual(b, data, &eff));
    let li = loss_integral_bounds(&ctx, config.gamma).ok();
    let bounds = Bounds {
        step_size_bound: step_size_bound(&ctx),
        heuristic_step_size_bound: heuristic_step_size_bound(&ctx),
        loss_integral_within: li.map(|b| last.loss_integral >= b.lower && last.loss_integral <= b.upper),
        loss_integral: li,
        alpha_ratio_lower: alpha_ratio_bounds(&ctx, true).exp_bound,
    };
    Ok(DiagnoseReport {
        alpha_eff: eff.into_inner(),
        loss_integral: last.loss_integral,
        kkt_residual: kkt,
        bounds,
        event_a_violated: event.violated,
        u_min: event.u_min,
        xi_l1_max: event.xi_l1_max,
        replay_steps: replay.steps,
    })
}
