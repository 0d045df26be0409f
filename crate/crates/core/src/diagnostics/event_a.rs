//! The martingale `S_t = ∫ √(γL) ⟨X̃ᵀdB, β − β*_ℓ1⟩` and event
//! `A = {|S_t| ≤ a + 2bγλ_max ∫ L (‖β‖₁² + ‖β*‖₁²) ds for all t}`, plus the
//! trajectory bounds that hold on `A` (`U_t ≥ ½`, `‖ξ_t‖₁ ≤ 18a`, the
//! decrease and lower bound of `V_t`).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{boundedness_bound, lyapunov_v, v_lower_bound, weight_u, TheoryContext};
use crate::dynamics::{Observer, StepEvent, Trajectory};
use crate::linalg::{dot, norm1};
use crate::math::{exp, sqrt};
use crate::{Error, Result};

/// Summary of an event-A evaluation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EventAReport {
    /// `S` after every step (empty unless paths were requested).
    pub s_path: Vec<f64>,
    pub bound_path: Vec<f64>,
    pub violated: bool,
    pub first_violation_step: Option<u64>,
    pub s_final: f64,
    pub u_min: f64,
    pub u_min_step: u64,
    pub xi_l1_max: f64,
    pub xi_bound_violated: bool,
    pub v_min: f64,
    pub v_lower_bound: f64,
    pub v_lower_violated: bool,
    /// Steps on event A where `V_t > V₀ − 2∫U L + a`.
    pub v_decrease_violations: u64,
}

/// Online evaluator, attached to a run through [`Observer`].
#[derive(Debug, Clone)]
pub struct EventAMonitor<'a> {
    ctx: &'a TheoryContext,
    gamma: f64,
    inv_sqrt_n: f64,
    l1_star_sq: f64,
    keep_paths: bool,
    s: f64,
    bound_integral: f64,
    ul_integral: f64,
    prev_bound_integrand: f64,
    prev_ul: f64,
    v0: f64,
    xi_bound: f64,
    alpha_buf: Vec<f64>,
    xi_buf: Vec<f64>,
    report: EventAReport,
}

impl<'a> EventAMonitor<'a> {
    pub fn new(ctx: &'a TheoryContext, gamma: f64, keep_paths: bool) -> Self {
        let l1 = ctx.beta_l1_norm();
        let d = ctx.data.d();
        Self {
            ctx,
            gamma,
            inv_sqrt_n: 1.0 / sqrt(ctx.data.n() as f64),
            l1_star_sq: l1 * l1,
            keep_paths,
            s: 0.0,
            bound_integral: 0.0,
            ul_integral: 0.0,
            prev_bound_integrand: 0.0,
            prev_ul: 0.0,
            v0: 0.5 * ctx.alpha.norm_sq(),
            xi_bound: boundedness_bound(ctx),
            alpha_buf: vec![0.0; d],
            xi_buf: vec![0.0; d],
            report: EventAReport {
                s_path: Vec::new(),
                bound_path: Vec::new(),
                violated: false,
                first_violation_step: None,
                s_final: 0.0,
                u_min: f64::INFINITY,
                u_min_step: 0,
                xi_l1_max: 0.0,
                xi_bound_violated: false,
                v_min: f64::INFINITY,
                v_lower_bound: v_lower_bound(ctx),
                v_lower_violated: false,
                v_decrease_violations: 0,
            },
        }
    }

    /// State-dependent checks at one time; returns `U_t`.
    fn check_state(&mut self, step: u64, beta: &[f64], loss_integral: f64) -> f64 {
        let ctx = self.ctx;
        for ((a, a0), h) in self.alpha_buf.iter_mut().zip(ctx.alpha.alpha()).zip(&ctx.h_tilde_diag) {
            *a = a0 * exp(-2.0 * self.gamma * h * loss_integral);
        }
        for ((x, b), a) in self.xi_buf.iter_mut().zip(beta).zip(&self.alpha_buf) {
            *x = sqrt(b * b + 4.0 * a * a * a * a);
        }
        let xi_l1 = norm1(&self.xi_buf);
        let r = &mut self.report;
        r.xi_l1_max = r.xi_l1_max.max(xi_l1);
        if xi_l1 > self.xi_bound {
            r.xi_bound_violated = true;
        }
        let u = weight_u(beta, &self.xi_buf, ctx, self.gamma);
        if u < r.u_min {
            r.u_min = u;
            r.u_min_step = step;
        }
        if let Ok(at) = crate::bias::EntropyParams::new(self.alpha_buf.clone()) {
            let v = lyapunov_v(beta, &at, ctx, self.gamma, loss_integral);
            r.v_min = r.v_min.min(v);
            if v < r.v_lower_bound {
                r.v_lower_violated = true;
            }
            if !r.violated && v > self.v0 - 2.0 * self.ul_integral + ctx.a + 1e-9 * (1.0 + v.abs()) {
                r.v_decrease_violations += 1;
            }
        }
        u
    }

    pub fn report(&self) -> &EventAReport {
        &self.report
    }

    pub fn into_report(self) -> EventAReport {
        self.report
    }
}

impl Observer for EventAMonitor<'_> {
    fn on_start(&mut self, beta: &[f64], loss: f64) {
        let nb = norm1(beta);
        self.prev_bound_integrand = loss * (nb * nb + self.l1_star_sq);
        let u = self.check_state(0, beta, 0.0);
        self.prev_ul = u * loss;
    }

    fn on_step(&mut self, ev: &StepEvent<'_>) {
        if let Some(noise) = ev.noise {
            // r̃ = X̃(β − β*) = (Xβ − y)/√n since β* interpolates
            let proj = dot(noise, ev.resid_prev) * self.inv_sqrt_n;
            self.s += sqrt(self.gamma * ev.diffusion_loss) * proj;
        }
        let nb = norm1(ev.beta);
        let integrand = ev.loss * (nb * nb + self.l1_star_sq);
        self.bound_integral += 0.5 * (self.prev_bound_integrand + integrand) * ev.dt;
        self.prev_bound_integrand = integrand;
        let bound = self.ctx.a + 2.0 * self.ctx.b * self.gamma * self.ctx.lambda_max * self.bound_integral;
        let u = self.check_state(ev.step, ev.beta, ev.loss_integral);
        let ul = u * ev.loss;
        self.ul_integral += 0.5 * (self.prev_ul + ul) * ev.dt;
        self.prev_ul = ul;
        let r = &mut self.report;
        if self.s.abs() > bound && !r.violated {
            r.violated = true;
            r.first_violation_step = Some(ev.step);
        }
        r.s_final = self.s;
        if self.keep_paths {
            r.s_path.push(self.s);
            r.bound_path.push(bound);
        }
    }
}

/// Replays a recorded SGF trajectory through [`EventAMonitor`]. The run must
/// have kept its Brownian increments (`record_noise`) and recorded every step.
pub fn martingale_s_and_event_a(traj: &Trajectory, ctx: &TheoryContext, gamma: f64) -> Result<EventAReport> {
    let n = ctx.data.n();
    let noise = traj
        .noise
        .as_ref()
        .ok_or_else(|| Error::Diagnostic("trajectory has no recorded Brownian increments".into()))?;
    let steps = traj.steps as usize;
    if noise.len() != steps * n {
        return Err(Error::Diagnostic(format!("noise log has {} values, expected {}", noise.len(), steps * n)));
    }
    if traj.records.len() != steps + 1 || traj.records.iter().enumerate().any(|(i, r)| r.step != i as u64) {
        return Err(Error::Diagnostic("event A needs a record at every integrator step".into()));
    }
    let mut mon = EventAMonitor::new(ctx, gamma, true);
    let first = &traj.records[0];
    mon.on_start(&first.beta, first.loss);
    for k in 0..steps {
        let (prev, cur) = (&traj.records[k], &traj.records[k + 1]);
        let resid = ctx.data.residual(&prev.beta);
        mon.on_step(&StepEvent {
            step: cur.step,
            time: cur.time,
            dt: cur.time - prev.time,
            beta_prev: &prev.beta,
            resid_prev: &resid,
            loss_prev: prev.loss,
            diffusion_loss: prev.loss,
            noise: Some(&noise[k * n..(k + 1) * n]),
            beta: &cur.beta,
            loss: cur.loss,
            loss_integral: cur.loss_integral,
        });
    }
    Ok(mon.into_report())
}
