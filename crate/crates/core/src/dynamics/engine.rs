//! The shared integration loop.

use alloc::vec;
use alloc::vec::Vec;

use super::{Algorithm, DynamicsConfig, Record, Sampling, Status, Trajectory};
use crate::error::config_err;
use crate::linalg::{axpy, Matrix};
use crate::math::{ipow, sqrt};
use crate::model::{loss_from_residual, Dataset, WeightState};
use crate::rng::{self, Sampler};
use crate::Result;

/// Loss above which (or any non-finite value) a run is declared diverged.
pub const DIVERGENCE_LOSS: f64 = 1e12;
/// Maximum number of `dt` halvings for a depth-p step.
pub const MAX_HALVINGS: u32 = 20;

/// Values passed to an [`Observer`] after each integrator step `k → k+1`.
#[derive(Debug)]
pub struct StepEvent<'a> {
    /// Index `k + 1` of the new state.
    pub step: u64,
    pub time: f64,
    pub dt: f64,
    pub beta_prev: &'a [f64],
    /// `Xβ_k − y`.
    pub resid_prev: &'a [f64],
    pub loss_prev: f64,
    /// Loss driving the diffusion at step `k` (`L` or `L + δ²`).
    pub diffusion_loss: f64,
    /// Brownian increment used for the step (flows only).
    pub noise: Option<&'a [f64]>,
    pub beta: &'a [f64],
    pub loss: f64,
    /// `∫₀^{t_{k+1}} L ds`.
    pub loss_integral: f64,
}

/// Per-step callback, used by the online diagnostics.
pub trait Observer {
    fn on_start(&mut self, _beta: &[f64], _loss: f64) {}
    fn on_step(&mut self, event: &StepEvent<'_>);
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum NoiseModel {
    /// Amplitude `2√(γ (L + extra) / n)` shared by all samples.
    Shared { extra: f64 },
    /// Amplitude `2√(γ L_i / n)` per sample.
    PerSample,
}

/// `v_i = −q r_i + c_i ξ_i` for the flows.
#[inline]
fn flow_coefficients(v: &mut [f64], r: &[f64], noise: &[f64], q: f64, gamma: f64, loss: f64, model: NoiseModel) {
    let n = r.len() as f64;
    match model {
        NoiseModel::Shared { extra } => {
            let c = 2.0 * sqrt(gamma * (loss + extra) / n);
            for ((vi, ri), zi) in v.iter_mut().zip(r).zip(noise) {
                *vi = -(q * ri) + c * zi;
            }
        }
        NoiseModel::PerSample => {
            for ((vi, ri), zi) in v.iter_mut().zip(r).zip(noise) {
                let li = ri * ri / 4.0;
                let c = 2.0 * sqrt(gamma * li / n);
                *vi = -(q * ri) + c * zi;
            }
        }
    }
}

/// Candidate weights `w₊ + w₊^{p−1}Δ`, `w₋ − w₋^{p−1}Δ`.
#[inline]
fn update_weights(wp: &[f64], wm: &[f64], delta: &[f64], p: u32, out_p: &mut [f64], out_m: &mut [f64]) {
    let k = p - 1;
    for j in 0..delta.len() {
        out_p[j] = wp[j] + ipow(wp[j], k) * delta[j];
        out_m[j] = wm[j] - ipow(wm[j], k) * delta[j];
    }
}

#[inline]
fn update_weights_in_place(wp: &mut [f64], wm: &mut [f64], delta: &[f64], p: u32) {
    let k = p - 1;
    for j in 0..delta.len() {
        wp[j] += ipow(wp[j], k) * delta[j];
        wm[j] -= ipow(wm[j], k) * delta[j];
    }
}

pub(crate) fn single_step(
    state: &WeightState,
    data: &Dataset,
    gamma: f64,
    dt: f64,
    noise: &[f64],
    model: NoiseModel,
    required_depth: Option<u32>,
) -> Result<WeightState> {
    let (n, d) = (data.n(), data.d());
    if state.w_plus.len() != d || state.w_minus.len() != d {
        return Err(config_err!("state dimension does not match d={d}"));
    }
    if noise.len() != n {
        return Err(config_err!("noise has {} entries, expected n={n}", noise.len()));
    }
    if let Some(p) = required_depth {
        if state.depth != p {
            return Err(config_err!("this step requires depth {p}, state has depth {}", state.depth));
        }
    }
    let beta = state.beta();
    let r = data.residual(&beta);
    let loss = loss_from_residual(&r);
    let q = state.depth as f64 / 2.0 * dt / n as f64;
    let mut v = vec![0.0; n];
    flow_coefficients(&mut v, &r, noise, q, gamma, loss, model);
    let mut delta = vec![0.0; d];
    data.x.tmul_vec_into(&v, &mut delta);
    let mut out = state.clone();
    update_weights_in_place(&mut out.w_plus, &mut out.w_minus, &delta, state.depth);
    Ok(out)
}

struct Buffers {
    beta: Vec<f64>,
    beta_prev: Vec<f64>,
    r: Vec<f64>,
    r_prev: Vec<f64>,
    v: Vec<f64>,
    delta: Vec<f64>,
    z: Vec<f64>,
    noise: Vec<f64>,
    cand_p: Vec<f64>,
    cand_m: Vec<f64>,
    g: Vec<f64>,
    touched: Vec<usize>,
    mark: Vec<bool>,
    perm: Vec<usize>,
}

fn sgd_direction(
    x: &Matrix,
    buf: &mut Buffers,
    cfg: &DynamicsConfig,
    rng: &mut Sampler,
    ln_rng: &mut Sampler,
    delta_t: f64,
) {
    let n = x.rows();
    let b = cfg.batch_size;
    buf.touched.clear();
    let mut draw = |i: usize, buf: &mut Buffers| {
        let mut ri = buf.r[i];
        if delta_t != 0.0 {
            ri += 2.0 * delta_t * ln_rng.sign();
        }
        if !buf.mark[i] {
            buf.mark[i] = true;
            buf.g[i] = 0.0;
            buf.touched.push(i);
        }
        buf.g[i] += ri;
    };
    match cfg.sampling {
        Sampling::WithReplacement => {
            for _ in 0..b {
                let i = rng.index(n);
                draw(i, buf);
            }
        }
        Sampling::WithoutReplacement => {
            rng.partial_shuffle(&mut buf.perm, b);
            for k in 0..b {
                let i = buf.perm[k];
                draw(i, buf);
            }
        }
    }
    buf.touched.sort_unstable();
    let scale = cfg.gamma / b as f64;
    buf.delta.iter_mut().for_each(|o| *o = 0.0);
    for &i in &buf.touched {
        let vi = -(scale * buf.g[i]);
        axpy(vi, x.row(i), &mut buf.delta);
        buf.mark[i] = false;
    }
}

fn val_loss(data: &Dataset, beta: &[f64]) -> Option<f64> {
    data.beta_l0.as_ref().map(|t| beta.iter().zip(t).map(|(b, s)| (b - s) * (b - s)).sum())
}

#[allow(clippy::too_many_lines)]
pub(crate) fn simulate(data: &Dataset, cfg: &DynamicsConfig, mut obs: Option<&mut dyn Observer>) -> Result<Trajectory> {
    cfg.validate(data)?;
    let (n, d) = (data.n(), data.d());
    let algo = cfg.algo;
    let p = cfg.depth;
    let flow = algo.is_flow();
    let depth_p = algo == Algorithm::SgfDepthP;
    let general = algo == Algorithm::SgfGeneral;
    let h = cfg.step_length();
    let nf = n as f64;
    let inv_sqrt_n = 1.0 / sqrt(nf);

    let mut rng = rng::stream(cfg.seed, rng::DYNAMICS);
    let mut ln_rng = rng::stream(cfg.seed, rng::LABEL_NOISE);

    let mut wp = cfg.alpha.clone();
    let mut wm = cfg.alpha.clone();
    let mut buf = Buffers {
        beta: vec![0.0; d],
        beta_prev: vec![0.0; d],
        r: vec![0.0; n],
        r_prev: vec![0.0; n],
        v: vec![0.0; n],
        delta: vec![0.0; d],
        z: vec![0.0; n],
        noise: vec![0.0; n],
        cand_p: vec![0.0; d],
        cand_m: vec![0.0; d],
        g: vec![0.0; n],
        touched: Vec::with_capacity(n),
        mark: vec![false; n],
        perm: (0..n).collect(),
    };
    let beta_of = |wp: &[f64], wm: &[f64], out: &mut [f64]| {
        for j in 0..out.len() {
            out[j] = ipow(wp[j], p) - ipow(wm[j], p);
        }
    };
    beta_of(&wp, &wm, &mut buf.beta);
    data.residual_into(&buf.beta, &mut buf.r);
    let mut loss = loss_from_residual(&buf.r);

    let mut eta = flow.then(|| vec![0.0; n]);
    let mut integral = 0.0;
    let mut tilde_integral = algo.has_label_noise().then_some(0.0);
    let mut sample_integrals = general.then(|| vec![0.0; n]);
    let mut aux = depth_p.then(|| (vec![0.0; d], vec![0.0; d]));
    let mut noise_log = (cfg.record_noise && flow).then(Vec::new);
    let delta_at = |k: u64| cfg.label_noise.map_or(0.0, |ln| ln.delta_at(k));

    let make_record = |k: u64, t: f64, beta: &[f64], loss: f64, integral: f64, aux: &Option<(Vec<f64>, Vec<f64>)>, eta: &Option<Vec<f64>>| Record {
        step: k,
        time: t,
        beta: beta.to_vec(),
        loss,
        loss_integral: integral,
        aux_integral_plus: aux.as_ref().map(|a| a.0.clone()),
        aux_integral_minus: aux.as_ref().map(|a| a.1.clone()),
        eta: eta.clone(),
        val_loss: val_loss(data, beta),
    };

    let mut records = vec![make_record(0, 0.0, &buf.beta, loss, 0.0, &aux, &eta)];
    if let Some(o) = obs.as_deref_mut() {
        o.on_start(&buf.beta, loss);
    }

    let mut status = Status::MaxSteps;
    let mut k: u64 = 0;
    let mut deficit = 0.0;
    let mut nonmonotone = 0;
    let mut halved_steps = 0;
    let diverged = |loss: f64, wp: &[f64], wm: &[f64]| {
        !loss.is_finite() || loss > DIVERGENCE_LOSS || wp.iter().chain(wm).any(|w| !w.is_finite())
    };

    loop {
        let delta_k = delta_at(k);
        if loss <= cfg.loss_tol && delta_k == 0.0 {
            status = Status::Converged;
            break;
        }
        if k >= cfg.max_steps {
            break;
        }
        let mut dt_eff = h;
        let diffusion_loss = loss + delta_k * delta_k;
        match algo {
            Algorithm::Gd => {
                let s = cfg.dt / nf;
                for (vi, ri) in buf.v.iter_mut().zip(&buf.r) {
                    *vi = -(s * ri);
                }
                data.x.tmul_vec_into(&buf.v, &mut buf.delta);
                update_weights_in_place(&mut wp, &mut wm, &buf.delta, p);
            }
            Algorithm::Sgd | Algorithm::SgdLabelNoise => {
                sgd_direction(&data.x, &mut buf, cfg, &mut rng, &mut ln_rng, delta_k);
                update_weights_in_place(&mut wp, &mut wm, &buf.delta, p);
            }
            _ => {
                for zi in buf.z.iter_mut() {
                    *zi = rng.normal();
                }
                let model = if general { NoiseModel::PerSample } else { NoiseModel::Shared { extra: delta_k * delta_k } };
                let q = p as f64 / 2.0 * cfg.dt / nf;
                let mut halvings = 0;
                loop {
                    let q_eff = if halvings == 0 { q } else { p as f64 / 2.0 * dt_eff / nf };
                    let s = sqrt(dt_eff);
                    for (ni, zi) in buf.noise.iter_mut().zip(&buf.z) {
                        *ni = s * zi;
                    }
                    flow_coefficients(&mut buf.v, &buf.r, &buf.noise, q_eff, cfg.gamma, loss, model);
                    data.x.tmul_vec_into(&buf.v, &mut buf.delta);
                    if !depth_p {
                        update_weights_in_place(&mut wp, &mut wm, &buf.delta, p);
                        break;
                    }
                    update_weights(&wp, &wm, &buf.delta, p, &mut buf.cand_p, &mut buf.cand_m);
                    let positive = buf.cand_p.iter().chain(&buf.cand_m).all(|w| *w > 0.0);
                    if positive {
                        // the candidate buffers now hold the previous weights
                        core::mem::swap(&mut wp, &mut buf.cand_p);
                        core::mem::swap(&mut wm, &mut buf.cand_m);
                        break;
                    }
                    if halvings == MAX_HALVINGS {
                        status = Status::Diverged;
                        break;
                    }
                    halvings += 1;
                    dt_eff *= 0.5;
                }
                if status == Status::Diverged {
                    break;
                }
                if halvings > 0 {
                    halved_steps += 1;
                    deficit += h - dt_eff;
                }
                if let Some(eta) = eta.as_mut() {
                    for i in 0..n {
                        let amp_loss = if general { buf.r[i] * buf.r[i] / 4.0 } else { diffusion_loss };
                        eta[i] += -(buf.r[i] * inv_sqrt_n) * dt_eff + 2.0 * sqrt(cfg.gamma * amp_loss) * buf.noise[i];
                    }
                }
                if let Some(log) = noise_log.as_mut() {
                    log.extend_from_slice(&buf.noise);
                }
            }
        }

        core::mem::swap(&mut buf.beta, &mut buf.beta_prev);
        core::mem::swap(&mut buf.r, &mut buf.r_prev);
        beta_of(&wp, &wm, &mut buf.beta);
        data.residual_into(&buf.beta, &mut buf.r);
        let loss_prev = loss;
        loss = loss_from_residual(&buf.r);
        k += 1;
        let time = k as f64 * h - deficit;

        if diverged(loss, &wp, &wm) {
            status = Status::Diverged;
            records.push(make_record(k, time, &buf.beta, loss, integral, &aux, &eta));
            break;
        }

        integral += 0.5 * (loss_prev + loss) * dt_eff;
        if let Some(ti) = tilde_integral.as_mut() {
            let dn = delta_at(k);
            *ti += 0.5 * (diffusion_loss + loss + dn * dn) * dt_eff;
        }
        if let Some(si) = sample_integrals.as_mut() {
            for i in 0..n {
                let (a, b) = (buf.r_prev[i], buf.r[i]);
                si[i] += 0.5 * (a * a / 4.0 + b * b / 4.0) * dt_eff;
            }
        }
        if let Some((ap, am)) = aux.as_mut() {
            let e = p - 2;
            for j in 0..d {
                ap[j] += 0.5 * (loss_prev * ipow(buf.cand_p[j], e) + loss * ipow(wp[j], e)) * dt_eff;
                am[j] += 0.5 * (loss_prev * ipow(buf.cand_m[j], e) + loss * ipow(wm[j], e)) * dt_eff;
            }
        }
        if algo == Algorithm::Gd && loss > loss_prev {
            nonmonotone += 1;
        }
        if let Some(o) = obs.as_deref_mut() {
            o.on_step(&StepEvent {
                step: k,
                time,
                dt: dt_eff,
                beta_prev: &buf.beta_prev,
                resid_prev: &buf.r_prev,
                loss_prev,
                diffusion_loss,
                noise: flow.then_some(&buf.noise[..]),
                beta: &buf.beta,
                loss,
                loss_integral: integral,
            });
        }
        if k.is_multiple_of(cfg.record_every) {
            records.push(make_record(k, time, &buf.beta, loss, integral, &aux, &eta));
        }
    }
    let last = records.last().map_or(u64::MAX, |r| r.step);
    if last != k {
        let time = k as f64 * h - deficit;
        records.push(make_record(k, time, &buf.beta, loss, integral, &aux, &eta));
    }
    Ok(Trajectory {
        algo,
        seed: cfg.seed,
        records,
        terminal: WeightState { w_plus: wp, w_minus: wm, depth: p },
        status,
        steps: k,
        time: k as f64 * h - deficit,
        final_loss: loss,
        loss_integral: integral,
        tilde_loss_integral: tilde_integral,
        sample_loss_integrals: sample_integrals,
        aux_integral_plus: aux.as_ref().map(|a| a.0.clone()),
        aux_integral_minus: aux.map(|a| a.1),
        noise: noise_log,
        nonmonotone_steps: nonmonotone,
        halved_steps,
    })
}
