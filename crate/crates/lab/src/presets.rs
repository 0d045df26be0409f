//! Experiment presets at the scale of the reference sparse-regression setup
//! (`n = 40`, `d = 100`, `s = 5`, Gaussian features, noiseless labels).
//!
//! Every preset resolves its defaults into a full [`ExperimentSpec`], which is
//! written as `config.json`; `report.json` and `manifest.json` sit next to it
//! and per-seed trajectories go to `{preset}/{seed}/trajectory*.csv`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sgflab_core::bias::{depth_p_kkt_residual, DepthPPotential, EntropyParams};
use sgflab_core::diagnostics::{alpha_eff, depth_p_alpha_eff, step_size_bound, TheoryContext};
use sgflab_core::dynamics::{run, Algorithm, DynamicsConfig, LabelNoise, Record, Status, Trajectory};
use sgflab_core::model::{generate_sparse_regression, Dataset};

use crate::config::{AlphaSpec, ConfigFile};
use crate::error::{LabError, Result};
use crate::io::{self, fmt_f64, DatasetMeta};
use crate::manifest::{self, GammaChoice, Manifest, SearchStep};
use crate::report::{quantile_sorted, Check, RunReport, RunRow};
use crate::svg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Fig1Generalization,
    FigMainTheorem,
    SdeValidation,
    GdFromAlphaEff,
    LabelNoise,
    AlphaSweep,
    DepthPDemo,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Fig1Generalization,
        Preset::FigMainTheorem,
        Preset::SdeValidation,
        Preset::GdFromAlphaEff,
        Preset::LabelNoise,
        Preset::AlphaSweep,
        Preset::DepthPDemo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Fig1Generalization => "fig1_generalization",
            Preset::FigMainTheorem => "fig_main_theorem",
            Preset::SdeValidation => "sde_validation",
            Preset::GdFromAlphaEff => "gd_from_alpha_eff",
            Preset::LabelNoise => "label_noise",
            Preset::AlphaSweep => "alpha_sweep",
            Preset::DepthPDemo => "depth_p_demo",
        }
    }

    /// Dataset, base configuration and seeds used when the spec leaves them unset.
    pub fn defaults(self) -> (DataSpec, ConfigFile, Vec<u64>) {
        let reference = DataSpec { n: 40, d: 100, s: 5, seed: 1 };
        let base = |algo: Algorithm, alpha: f64| ConfigFile {
            algo: Some(algo),
            alpha: Some(AlphaSpec::Scalar(alpha)),
            max_steps: Some(1_000_000),
            loss_tol: Some(1e-10),
            ..Default::default()
        };
        let seeds = |k: u64| (1..=k).collect::<Vec<_>>();
        match self {
            Preset::Fig1Generalization => (reference, base(Algorithm::Sgd, 0.05), seeds(10)),
            Preset::AlphaSweep => (reference, base(Algorithm::Sgd, 0.05), seeds(10)),
            Preset::GdFromAlphaEff => (reference, base(Algorithm::Sgd, 0.01), seeds(10)),
            Preset::SdeValidation => (
                reference,
                ConfigFile { dt_div: Some(10.0), record_every: Some(10), ..base(Algorithm::Sgd, 0.05) },
                seeds(5),
            ),
            Preset::LabelNoise => (
                reference,
                ConfigFile {
                    gamma: Some(0.02),
                    label_noise: Some(LabelNoise { delta: 1.0, cutoff_step: 1000 }),
                    ..base(Algorithm::SgdLabelNoise, 0.01)
                },
                seeds(10),
            ),
            Preset::FigMainTheorem => (
                DataSpec { n: 10, d: 20, s: 2, seed: 1 },
                ConfigFile {
                    dt_div: Some(10.0),
                    max_steps: Some(200_000_000),
                    record_every: Some(100_000),
                    ..base(Algorithm::Sgf, 0.5)
                },
                seeds(20),
            ),
            Preset::DepthPDemo => (
                DataSpec { n: 3, d: 6, s: 2, seed: 1 },
                ConfigFile {
                    gamma: Some(0.05),
                    dt_div: Some(10.0),
                    depth: Some(3),
                    max_steps: Some(20_000_000),
                    ..base(Algorithm::SgfDepthP, 0.5)
                },
                seeds(10),
            ),
        }
    }
}

impl FromStr for Preset {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| LabError::Config(format!("unknown preset {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub n: usize,
    pub d: usize,
    pub s: usize,
    pub seed: u64,
}

impl From<DataSpec> for DatasetMeta {
    fn from(d: DataSpec) -> Self {
        DatasetMeta { n: d.n, d: d.d, s: d.s, seed: d.seed }
    }
}

/// Knobs that are not part of [`DynamicsConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PresetOptions {
    /// `α` grid of `alpha_sweep`.
    pub alphas: Vec<f64>,
    /// Failure probability `p` of the admissible step size.
    pub p_fail: f64,
    /// Length of the divergence probes in the step-size search.
    pub pilot_steps: u64,
    pub max_doublings: u32,
    /// Points of the shared time grid in `sde_validation`.
    pub grid_points: usize,
    /// Also write SVG charts.
    pub svg: bool,
    /// Write `beta_*`/`eta_*` columns into trajectories.
    pub dump_state: bool,
}

impl Default for PresetOptions {
    fn default() -> Self {
        Self {
            alphas: vec![0.2, 0.1, 0.05, 0.02],
            p_fail: 0.04,
            pilot_steps: 20_000,
            max_doublings: 40,
            grid_points: 200,
            svg: false,
            dump_state: false,
        }
    }
}

/// A full experiment description; unset fields take the preset's defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub preset: Preset,
    #[serde(default)]
    pub base: ConfigFile,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSpec>,
    #[serde(default)]
    pub options: PresetOptions,
}

impl ExperimentSpec {
    pub fn new(preset: Preset) -> Self {
        Self { preset, base: ConfigFile::default(), seeds: vec![], output_dir: None, data: None, options: PresetOptions::default() }
    }

    /// Fills dataset, seeds and base-config fields from the preset defaults.
    pub fn resolved(&self) -> Self {
        let (data, base, seeds) = self.preset.defaults();
        Self {
            preset: self.preset,
            base: base.overlay(&self.base),
            seeds: if self.seeds.is_empty() { seeds } else { self.seeds.clone() },
            output_dir: None,
            data: Some(self.data.unwrap_or(data)),
            options: self.options.clone(),
        }
    }
}

/// What a preset produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: RunReport,
    pub manifest: Manifest,
    /// Band curves of `sde_validation`.
    pub curves: Option<Curves>,
}

/// Writes files under an optional root and keeps the list of relative paths.
struct Sink {
    root: Option<PathBuf>,
    dump_state: bool,
    files: Vec<String>,
}

impl Sink {
    fn path(&mut self, rel: &str) -> Option<PathBuf> {
        self.files.push(rel.to_owned());
        self.root.as_ref().map(|r| r.join(rel))
    }

    fn trajectory(&mut self, rel: &str, t: &Trajectory) -> Result<()> {
        let dump = self.dump_state;
        match self.path(rel) {
            Some(p) => io::write_trajectory(&p, t, dump),
            None => Ok(()),
        }
    }

    fn json<T: Serialize>(&mut self, rel: &str, v: &T) -> Result<()> {
        match self.path(rel) {
            Some(p) => io::write_json(&p, v),
            None => Ok(()),
        }
    }

    fn table(&mut self, rel: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        match self.path(rel) {
            Some(p) => io::write_table(&p, header, rows),
            None => Ok(()),
        }
    }

    fn text(&mut self, rel: &str, text: &str) -> Result<()> {
        match self.path(rel) {
            Some(p) => io::write_text(&p, text),
            None => Ok(()),
        }
    }
}

/// Runs `spec`, writing outputs under `out` (`{out}/{preset}/...`) when given.
pub fn run_experiment(spec: &ExperimentSpec, out: Option<&Path>) -> Result<ExperimentOutcome> {
    let resolved = spec.resolved();
    let ds = resolved.data.expect("resolved spec has data");
    if resolved.seeds.is_empty() {
        return Err(LabError::Config("seed list is empty".into()));
    }
    let data = generate_sparse_regression(ds.n, ds.d, ds.s, ds.seed)?;
    let preset = resolved.preset.as_str();
    let mut sink = Sink { root: out.map(|o| o.join(preset)), dump_state: resolved.options.dump_state, files: vec![] };

    let dataset_bytes = io::dataset_csv_bytes(&data)?;
    if let Some(p) = sink.path("dataset.csv") {
        io::write_text(&p, std::str::from_utf8(&dataset_bytes).expect("csv is utf-8"))?;
    }
    sink.json("dataset.json", &DatasetMeta::from(ds))?;

    let mut config_text = serde_json::to_string_pretty(&resolved)?;
    config_text.push('\n');
    sink.text("config.json", &config_text)?;

    let ctx = Ctx { data: &data, spec: &resolved };
    let (report, gamma, curves) = match resolved.preset {
        Preset::Fig1Generalization => fig1(&ctx, &mut sink)?,
        Preset::AlphaSweep => alpha_sweep(&ctx, &mut sink)?,
        Preset::GdFromAlphaEff => gd_from_alpha_eff(&ctx, &mut sink)?,
        Preset::SdeValidation => sde_validation(&ctx, &mut sink)?,
        Preset::LabelNoise => label_noise(&ctx, &mut sink)?,
        Preset::FigMainTheorem => main_theorem(&ctx, &mut sink)?,
        Preset::DepthPDemo => depth_p_demo(&ctx, &mut sink)?,
    };
    sink.json("report.json", &report)?;
    let mut files = sink.files.clone();
    files.push("manifest.json".into());
    files.sort();
    let manifest = Manifest {
        tool: "sgflab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        preset: preset.into(),
        config_sha256: manifest::sha256_hex(config_text.as_bytes()),
        dataset: ds.into(),
        dataset_hash: manifest::git_blob_hash(&dataset_bytes),
        gamma,
        seeds: resolved.seeds.clone(),
        files,
    };
    sink.json("manifest.json", &manifest)?;
    Ok(ExperimentOutcome { report, manifest, curves })
}

struct Ctx<'a> {
    data: &'a Dataset,
    spec: &'a ExperimentSpec,
}

type PresetResult = Result<(RunReport, Vec<(String, GammaChoice)>, Option<Curves>)>;

impl Ctx<'_> {
    fn d(&self) -> usize {
        self.data.d()
    }

    fn base(&self) -> &ConfigFile {
        &self.spec.base
    }

    fn scalar_alpha(&self) -> Result<f64> {
        self.base()
            .alpha
            .as_ref()
            .and_then(AlphaSpec::scalar)
            .ok_or_else(|| LabError::Config(format!("{} needs a scalar alpha", self.spec.preset.as_str())))
    }

    /// Base config with `γ` set and `dt` following the base `dt`/`dt_div`.
    fn config(&self, algo: Algorithm, gamma: f64, alpha: &[f64]) -> Result<DynamicsConfig> {
        let mut f = self.base().clone();
        f.algo = Some(algo);
        f.gamma = Some(gamma);
        f.alpha = Some(AlphaSpec::Vector(alpha.to_vec()));
        let mut cfg = f.resolve(self.d())?;
        if !algo.has_label_noise() {
            cfg.label_noise = None;
        }
        if algo != Algorithm::SgfDepthP {
            cfg.depth = 2;
        }
        Ok(cfg)
    }

    fn theory(&self, alpha: &[f64]) -> Result<TheoryContext> {
        Ok(TheoryContext::new(self.data, EntropyParams::new(alpha.to_vec())?, self.spec.options.p_fail)?)
    }
}

/// GD at `dt = γ` and the base record cadence.
fn gd_config(base: &DynamicsConfig, gamma: f64, alpha: &[f64]) -> DynamicsConfig {
    let mut c = base.clone();
    c.algo = Algorithm::Gd;
    c.gamma = gamma;
    c.dt = gamma;
    c.alpha = alpha.to_vec();
    c.label_noise = None;
    c.seed = 0;
    c
}

/// Flows stepping at `dt < γ` get `γ/dt` times more steps, so every run covers the same time horizon.
fn flow_config(mut c: DynamicsConfig) -> DynamicsConfig {
    let ratio = (c.gamma / c.dt).max(1.0);
    c.max_steps = (c.max_steps as f64 * ratio).round() as u64;
    c.record_every = ((c.record_every as f64 * ratio).round() as u64).max(1);
    c
}

fn run_seeds(data: &Dataset, cfg: &DynamicsConfig, seeds: &[u64]) -> Result<Vec<Trajectory>> {
    seeds
        .par_iter()
        .map(|&s| {
            let mut c = cfg.clone();
            c.seed = s;
            run(data, &c).map_err(LabError::from)
        })
        .collect()
}

/// Result of the step-size search: the final full runs are kept.
struct Searched {
    choice: GammaChoice,
    runs: Vec<Trajectory>,
    gd: Option<Trajectory>,
}

/// Largest `γ = γ₀·2^k` (with `γ₀` the admissible bound) at which every seed,
/// and GD when `with_gd`, converges. Short pilots double `γ` until one of
/// them diverges; full runs then walk back down until all converge.
fn search_gamma(ctx: &Ctx, template: &DynamicsConfig, seeds: &[u64], with_gd: bool) -> Result<Searched> {
    let opts = &ctx.spec.options;
    let gamma0 = step_size_bound(&ctx.theory(&template.alpha)?);
    let mut trace = Vec::new();
    let attempt = |gamma: f64, steps: Option<u64>| -> Result<(Vec<Trajectory>, Option<Trajectory>)> {
        let mut c = template.clone();
        c.gamma = gamma;
        c.dt = gamma;
        if let Some(s) = steps {
            c.max_steps = c.max_steps.min(s);
        }
        let runs = run_seeds(ctx.data, &c, seeds)?;
        let gd = if with_gd { Some(run(ctx.data, &gd_config(&c, gamma, &c.alpha))?) } else { None };
        Ok((runs, gd))
    };
    let tally = |gamma: f64, phase: &str, runs: &[Trajectory], gd: &Option<Trajectory>| {
        let all: Vec<&Trajectory> = runs.iter().chain(gd.iter()).collect();
        SearchStep {
            gamma,
            phase: phase.into(),
            diverged: all.iter().filter(|t| t.status == Status::Diverged).count(),
            converged: all.iter().filter(|t| t.status == Status::Converged).count(),
            runs: all.len(),
        }
    };

    let mut k = 0u32;
    loop {
        let gamma = gamma0 * 2f64.powi(k as i32);
        let (runs, gd) = attempt(gamma, Some(opts.pilot_steps))?;
        let step = tally(gamma, "pilot", &runs, &gd);
        let diverged = step.diverged > 0;
        trace.push(step);
        if diverged {
            break;
        }
        if k >= opts.max_doublings {
            k += 1;
            break;
        }
        k += 1;
    }
    for j in (0..k).rev() {
        let gamma = gamma0 * 2f64.powi(j as i32);
        let (runs, gd) = attempt(gamma, None)?;
        let step = tally(gamma, "full", &runs, &gd);
        let ok = step.converged == step.runs;
        trace.push(step);
        if ok {
            return Ok(Searched {
                choice: GammaChoice { gamma, source: "doubling_search".into(), theorem_bound: Some(gamma0), search: trace },
                runs,
                gd,
            });
        }
    }
    Err(LabError::Divergence(format!("no step size in the doubling search from {gamma0:e} converged for every seed")))
}

/// Runs at the override `γ` when given, else searches.
fn gamma_runs(ctx: &Ctx, template: &DynamicsConfig, seeds: &[u64], with_gd: bool) -> Result<Searched> {
    match ctx.base().gamma {
        Some(gamma) => {
            let mut c = template.clone();
            c.gamma = gamma;
            if ctx.base().dt.is_none() && ctx.base().dt_div.is_none() {
                c.dt = gamma;
            }
            let runs = run_seeds(ctx.data, &c, seeds)?;
            let gd = if with_gd { Some(run(ctx.data, &gd_config(&c, gamma, &c.alpha))?) } else { None };
            Ok(Searched { choice: GammaChoice { gamma, source: "override".into(), theorem_bound: None, search: vec![] }, runs, gd })
        }
        None => search_gamma(ctx, template, seeds, with_gd),
    }
}

fn sgd_alpha_eff(data: &Dataset, alpha: &[f64], gamma: f64, integral: f64) -> Result<EntropyParams> {
    Ok(alpha_eff(alpha, gamma, &data.h_tilde_diag(), integral)?)
}

/// GD plus SGD at one `α`; rows are grouped under `prefix`.
fn gd_vs_sgd(ctx: &Ctx, sink: &mut Sink, alpha: f64, dir: &str, prefix: &str) -> Result<(Vec<RunRow>, GammaChoice)> {
    let alpha_v = vec![alpha; ctx.d()];
    let mut template = ctx.config(Algorithm::Sgd, ctx.base().gamma.unwrap_or(1.0), &alpha_v)?;
    template.dt = template.gamma;
    let s = gamma_runs(ctx, &template, &ctx.spec.seeds, true)?;
    let gamma = s.choice.gamma;
    let gd = s.gd.expect("gd requested");
    let gd_params = EntropyParams::new(alpha_v.clone())?;
    let mut rows = vec![RunRow::from_run(&format!("{prefix}gd"), &gd, ctx.data, Some(&gd_params))];
    sink.trajectory(&format!("{dir}gd/trajectory.csv"), &gd)?;
    for t in &s.runs {
        let eff = sgd_alpha_eff(ctx.data, &alpha_v, gamma, t.loss_integral)?;
        rows.push(RunRow::from_run(&format!("{prefix}sgd"), t, ctx.data, Some(&eff)));
        sink.trajectory(&format!("{dir}{}/trajectory.csv", t.seed), t)?;
    }
    Ok((rows, s.choice))
}

fn val_of(report: &RunReport, group: &str) -> f64 {
    report.summary(group, "final_val_loss").map_or(f64::NAN, |s| s.median)
}

fn fig1(ctx: &Ctx, sink: &mut Sink) -> PresetResult {
    let alpha = ctx.scalar_alpha()?;
    let (rows, choice) = gd_vs_sgd(ctx, sink, alpha, "", "")?;
    let mut report = RunReport::new(Preset::Fig1Generalization.as_str(), rows);
    let (gd, sgd) = (val_of(&report, "gd"), val_of(&report, "sgd"));
    report.checks.push(Check::new("sgd_median_val_below_gd", sgd - gd, "<", 0.0));
    report.checks.push(Check::new("gd_over_sgd_median_val_ratio", gd / sgd, ">=", 2.0));
    Ok((report, vec![("sgd".into(), choice)], None))
}

fn alpha_sweep(ctx: &Ctx, sink: &mut Sink) -> PresetResult {
    let alphas = ctx.spec.options.alphas.clone();
    if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(LabError::Config("alpha grid must be nonempty and positive".into()));
    }
    let mut rows = Vec::new();
    let mut gammas = Vec::new();
    for &a in &alphas {
        let tag = format!("alpha={}", fmt_f64(a));
        let (r, choice) = gd_vs_sgd(ctx, sink, a, &format!("alpha_{}/", fmt_f64(a)), &format!("{tag}/"))?;
        rows.extend(r);
        gammas.push((tag, choice));
    }
    let sweep: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let (alpha, algo) = r.group.split_once('/').expect("grouped rows");
            vec![
                alpha.trim_start_matches("alpha=").to_owned(),
                algo.to_owned(),
                r.seed.to_string(),
                r.final_val_loss.map(fmt_f64).unwrap_or_default(),
                fmt_f64(r.loss_integral),
                r.alpha_eff_geom_mean.map(fmt_f64).unwrap_or_default(),
            ]
        })
        .collect();
    sink.table("sweep.csv", &["alpha", "algo", "seed", "final_val_loss", "loss_integral", "alpha_eff_geo_mean"], &sweep)?;
    let mut report = RunReport::new(Preset::AlphaSweep.as_str(), rows);
    for &a in &alphas {
        let tag = format!("alpha={}", fmt_f64(a));
        let (gd, sgd) = (val_of(&report, &format!("{tag}/gd")), val_of(&report, &format!("{tag}/sgd")));
        report.checks.push(Check::new(&format!("{tag}/sgd_median_val_below_gd"), sgd - gd, "<", 0.0));
    }
    if ctx.spec.options.svg {
        let pts = |algo: &str| -> Vec<(f64, f64)> {
            alphas.iter().map(|&a| (a, val_of(&report, &format!("alpha={}/{algo}", fmt_f64(a))))).collect()
        };
        let series = [
            svg::Series { name: "GD".into(), points: pts("gd"), dashed: false },
            svg::Series { name: "SGD (median)".into(), points: pts("sgd"), dashed: false },
        ];
        sink.text("sweep.svg", &svg::line_chart("final validation loss", "alpha", "validation loss", &series, true))?;
    }
    Ok((report, gammas, None))
}

fn gd_from_alpha_eff(ctx: &Ctx, sink: &mut Sink) -> PresetResult {
    let alpha = ctx.scalar_alpha()?;
    let alpha_v = vec![alpha; ctx.d()];
    let mut template = ctx.config(Algorithm::Sgd, ctx.base().gamma.unwrap_or(1.0), &alpha_v)?;
    template.dt = template.gamma;
    let s = gamma_runs(ctx, &template, &ctx.spec.seeds, true)?;
    let gamma = s.choice.gamma;
    let gd_alpha = s.gd.expect("gd requested");
    sink.trajectory("gd/trajectory.csv", &gd_alpha)?;
    let mut rows = vec![RunRow::from_run("gd_alpha", &gd_alpha, ctx.data, Some(&EntropyParams::new(alpha_v.clone())?))];

    let followups: Vec<(EntropyParams, Trajectory)> = s
        .runs
        .par_iter()
        .map(|t| {
            let eff = sgd_alpha_eff(ctx.data, &alpha_v, gamma, t.loss_integral)?;
            let gd = run(ctx.data, &gd_config(&template, gamma, eff.alpha()))?;
            Ok((eff, gd))
        })
        .collect::<Result<_>>()?;
    for (t, (eff, gd)) in s.runs.iter().zip(&followups) {
        let (b_sgd, b_gd) = (t.final_beta(), gd.final_beta());
        let num: f64 = b_sgd.iter().zip(&b_gd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let den: f64 = b_sgd.iter().map(|a| a * a).sum::<f64>().sqrt();
        let both = t.is_converged() && gd.is_converged();
        let mut row = RunRow::from_run("sgd", t, ctx.data, Some(eff));
        if !gd.is_converged() {
            row.status = gd.status;
        }
        if both {
            row = row.with("relative_terminal_distance", num / den);
        }
        rows.push(row);
        let mut gd_row = RunRow::from_run("gd_alpha_inf", gd, ctx.data, Some(eff));
        gd_row.seed = t.seed;
        rows.push(gd_row);
        sink.trajectory(&format!("{}/trajectory.csv", t.seed), t)?;
        sink.trajectory(&format!("{}/trajectory_gd_alpha_inf.csv", t.seed), gd)?;
    }
    let mut report = RunReport::new(Preset::GdFromAlphaEff.as_str(), rows);
    let dist = report.summary("sgd", "relative_terminal_distance").map_or(f64::NAN, |s| s.median);
    let (gd, sgd, gd_inf) = (val_of(&report, "gd_alpha"), val_of(&report, "sgd"), val_of(&report, "gd_alpha_inf"));
    report.checks.push(Check::new("median_relative_terminal_distance", dist, "<=", 0.05));
    report.checks.push(Check::new("sgd_median_val_below_gd_alpha", sgd - gd, "<", 0.0));
    report.checks.push(Check::new("gd_alpha_inf_median_val_below_gd_alpha", gd_inf - gd, "<", 0.0));
    Ok((report, vec![("sgd".into(), s.choice)], None))
}

fn label_noise(ctx: &Ctx, sink: &mut Sink) -> PresetResult {
    let alpha = ctx.scalar_alpha()?;
    let alpha_v = vec![alpha; ctx.d()];
    let gamma = ctx.base().gamma.ok_or_else(|| LabError::Config("label_noise needs gamma".into()))?;
    let noisy = ctx.config(Algorithm::SgdLabelNoise, gamma, &alpha_v)?;
    if noisy.label_noise.is_none() {
        return Err(LabError::Config("label_noise needs a label-noise schedule".into()));
    }
    let plain = ctx.config(Algorithm::Sgd, gamma, &alpha_v)?;
    let seeds = &ctx.spec.seeds;
    let (a, b) = rayon::join(|| run_seeds(ctx.data, &noisy, seeds), || run_seeds(ctx.data, &plain, seeds));
    let (a, b) = (a?, b?);
    let mut rows = Vec::new();
    for (t, p) in a.iter().zip(&b) {
        let tilde = t.tilde_loss_integral.unwrap_or(t.loss_integral);
        let eff = sgd_alpha_eff(ctx.data, &alpha_v, gamma, tilde)?;
        rows.push(RunRow::from_run("sgd_label_noise", t, ctx.data, Some(&eff)).with("tilde_loss_integral", tilde));
        let eff = sgd_alpha_eff(ctx.data, &alpha_v, gamma, p.loss_integral)?;
        rows.push(RunRow::from_run("sgd", p, ctx.data, Some(&eff)));
        sink.trajectory(&format!("{}/trajectory.csv", t.seed), t)?;
        sink.trajectory(&format!("{}/trajectory_sgd.csv", p.seed), p)?;
    }
    let mut report = RunReport::new(Preset::LabelNoise.as_str(), rows);
    let (ln, sgd) = (val_of(&report, "sgd_label_noise"), val_of(&report, "sgd"));
    let tilde = report.summary("sgd_label_noise", "tilde_loss_integral").map_or(f64::NAN, |s| s.median);
    let plain_int = report.summary("sgd", "loss_integral").map_or(f64::NAN, |s| s.median);
    report.checks.push(Check::new("label_noise_median_val_below_sgd", ln - sgd, "<", 0.0));
    report.checks.push(Check::new("median_tilde_integral_minus_plain_integral", tilde - plain_int, ">", 0.0));
    let choice = GammaChoice { gamma, source: "preset_default".into(), theorem_bound: None, search: vec![] };
    Ok((report, vec![("sgd_label_noise".into(), choice)], None))
}

fn main_theorem(ctx: &Ctx, sink: &mut Sink) -> PresetResult {
    let alpha_v = ctx.base().alpha.as_ref().expect("preset sets alpha").expand(ctx.d())?;
    let theory = ctx.theory(&alpha_v)?;
    let bound = step_size_bound(&theory);
    let (gamma, source) = match ctx.base().gamma {
        Some(g) => (g, "override"),
        None => (bound, "theorem_bound"),
    };
    let cfg = ctx.config(Algorithm::Sgf, gamma, &alpha_v)?;
    let runs = run_seeds(ctx.data, &cfg, &ctx.spec.seeds)?;
    let mut rows = Vec::new();
    for t in &runs {
        let eff = alpha_eff(&alpha_v, gamma, &theory.h_tilde_diag, t.loss_integral)?;
        let below = eff.alpha().iter().zip(&alpha_v).all(|(e, a)| e < a);
        let row = RunRow::from_run("sgf", t, ctx.data, Some(&eff));
        let pass = row.converged() && row.final_loss <= 1e-10 && row.kkt_residual.is_some_and(|k| k <= 1e-3) && below;
        rows.push(row.with("alpha_eff_below_alpha", f64::from(u8::from(below))).with("pass", f64::from(u8::from(pass))));
        sink.trajectory(&format!("{}/trajectory.csv", t.seed), t)?;
    }
    let mut report = RunReport::new(Preset::FigMainTheorem.as_str(), rows);
    let frac = report.rows.iter().filter(|r| r.extra.get("pass") == Some(&1.0)).count() as f64 / report.rows.len() as f64;
    report.checks.push(Check::new("pass_fraction", frac, ">=", 0.9));
    let choice = GammaChoice { gamma, source: source.into(), theorem_bound: Some(bound), search: vec![] };
    Ok((report, vec![("sgf".into(), choice)], None))
}

fn depth_p_demo(ctx: &Ctx, sink: &mut Sink) -> PresetResult {
    let alpha_v = ctx.base().alpha.as_ref().expect("preset sets alpha").expand(ctx.d())?;
    let gamma = ctx.base().gamma.ok_or_else(|| LabError::Config("depth_p_demo needs gamma".into()))?;
    let cfg = ctx.config(Algorithm::SgfDepthP, gamma, &alpha_v)?;
    if cfg.depth < 3 {
        return Err(LabError::Config("depth_p_demo needs depth >= 3".into()));
    }
    let h = ctx.data.h_tilde_diag();
    let runs = run_seeds(ctx.data, &cfg, &ctx.spec.seeds)?;
    let mut rows = Vec::new();
    for t in &runs {
        let (plus, minus) = depth_p_alpha_eff(
            &alpha_v,
            gamma,
            cfg.depth,
            &h,
            t.aux_integral_plus.as_deref().expect("depth-p runs track auxiliary integrals"),
            t.aux_integral_minus.as_deref().expect("depth-p runs track auxiliary integrals"),
        )?;
        let ratio = plus.iter().chain(&minus).zip(alpha_v.iter().chain(&alpha_v)).map(|(e, a)| e / a).fold(0.0, f64::max);
        let pot = DepthPPotential::new(plus.clone(), minus.clone(), cfg.depth)?;
        let kkt = depth_p_kkt_residual(&t.final_beta(), ctx.data, &pot)?;
        let mut row = RunRow::from_run("sgf_depth_p", t, ctx.data, None);
        let all: Vec<f64> = plus.iter().chain(&minus).copied().collect();
        row.alpha_eff_geom_mean = Some(EntropyParams::new(all)?.geo_mean());
        row.kkt_residual = Some(kkt);
        rows.push(row.with("alpha_eff_max_ratio", ratio).with("halved_steps", t.halved_steps as f64));
        sink.trajectory(&format!("{}/trajectory.csv", t.seed), t)?;
    }
    let mut report = RunReport::new(Preset::DepthPDemo.as_str(), rows);
    let m = report.rows.len() as f64;
    let kkt_ok = report.rows.iter().filter(|r| r.converged() && r.kkt_residual.is_some_and(|k| k <= 1e-3)).count() as f64 / m;
    let below = report.rows.iter().filter(|r| r.extra["alpha_eff_max_ratio"] <= 1.0).count() as f64 / m;
    report.checks.push(Check::new("kkt_pass_fraction", kkt_ok, ">=", 1.0));
    report.checks.push(Check::new("alpha_eff_below_alpha_fraction", below, ">=", 1.0));
    let choice = GammaChoice { gamma, source: "preset_default".into(), theorem_bound: None, search: vec![] };
    Ok((report, vec![("sgf_depth_p".into(), choice)], None))
}

/// Quartile bands of log-loss on a shared time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curves {
    pub time: Vec<f64>,
    /// `[q25, median, q75]` per grid point.
    pub sgd_log_loss: Vec<[f64; 3]>,
    pub sgf_log_loss: Vec<[f64; 3]>,
    pub sgd_log_val_loss: Vec<[f64; 3]>,
    pub sgf_log_val_loss: Vec<[f64; 3]>,
    pub gd_log_loss: Vec<f64>,
    pub gd_log_val_loss: Vec<f64>,
    /// Fraction of grid points whose loss bands intersect.
    pub overlap_fraction: f64,
}

/// Piecewise-linear interpolation of `f(record)` at time `t`.
pub fn interp_records(records: &[Record], t: f64, f: impl Fn(&Record) -> f64) -> f64 {
    let i = records.partition_point(|r| r.time <= t);
    if i == 0 {
        return f(&records[0]);
    }
    if i >= records.len() {
        return f(&records[records.len() - 1]);
    }
    let (a, b) = (&records[i - 1], &records[i]);
    let w = (t - a.time) / (b.time - a.time);
    (1.0 - w) * f(a) + w * f(b)
}

fn bands(runs: &[Trajectory], t: f64, f: &dyn Fn(&Record) -> f64) -> [f64; 3] {
    let mut v: Vec<f64> = runs.iter().map(|r| interp_records(&r.records, t, f)).collect();
    v.sort_by(f64::total_cmp);
    [quantile_sorted(&v, 0.25), quantile_sorted(&v, 0.5), quantile_sorted(&v, 0.75)]
}

/// Bands of `a` and `b` on `m` midpoints of `(0, T]`, `T` the earliest stop time of any run.
pub fn band_curves(a: &[Trajectory], b: &[Trajectory], gd: &Trajectory, m: usize) -> Curves {
    let t_end = a.iter().chain(b).chain([gd]).map(|t| t.time).fold(f64::INFINITY, f64::min);
    let time: Vec<f64> = (0..m).map(|k| t_end * (k as f64 + 0.5) / m as f64).collect();
    let log_loss = |r: &Record| r.loss.ln();
    let log_val = |r: &Record| r.val_loss.map_or(f64::NAN, f64::ln);
    let sgd_log_loss: Vec<[f64; 3]> = time.iter().map(|&t| bands(a, t, &log_loss)).collect();
    let sgf_log_loss: Vec<[f64; 3]> = time.iter().map(|&t| bands(b, t, &log_loss)).collect();
    let hits = sgd_log_loss.iter().zip(&sgf_log_loss).filter(|(x, y)| x[0] <= y[2] && y[0] <= x[2]).count();
    Curves {
        sgd_log_val_loss: time.iter().map(|&t| bands(a, t, &log_val)).collect(),
        sgf_log_val_loss: time.iter().map(|&t| bands(b, t, &log_val)).collect(),
        gd_log_loss: time.iter().map(|&t| interp_records(&gd.records, t, log_loss)).collect(),
        gd_log_val_loss: time.iter().map(|&t| interp_records(&gd.records, t, log_val)).collect(),
        overlap_fraction: hits as f64 / m as f64,
        sgd_log_loss,
        sgf_log_loss,
        time,
    }
}

fn sde_validation(ctx: &Ctx, sink: &mut Sink) -> PresetResult {
    let alpha = ctx.scalar_alpha()?;
    let alpha_v = vec![alpha; ctx.d()];
    let mut template = ctx.config(Algorithm::Sgd, ctx.base().gamma.unwrap_or(1.0), &alpha_v)?;
    template.dt = template.gamma;
    let s = gamma_runs(ctx, &template, &ctx.spec.seeds, true)?;
    let gamma = s.choice.gamma;
    let gd = s.gd.expect("gd requested");
    let mut sgf_cfg = ctx.config(Algorithm::Sgf, gamma, &alpha_v)?;
    if ctx.base().dt.is_none() && ctx.base().dt_div.is_none() {
        sgf_cfg.dt = gamma / 10.0;
    }
    let sgf_cfg = flow_config(sgf_cfg);
    let sgf = run_seeds(ctx.data, &sgf_cfg, &ctx.spec.seeds)?;

    let mut rows = vec![RunRow::from_run("gd", &gd, ctx.data, Some(&EntropyParams::new(alpha_v.clone())?))];
    sink.trajectory("gd/trajectory.csv", &gd)?;
    let h = ctx.data.h_tilde_diag();
    for (t, f) in s.runs.iter().zip(&sgf) {
        rows.push(RunRow::from_run("sgd", t, ctx.data, Some(&alpha_eff(&alpha_v, gamma, &h, t.loss_integral)?)));
        rows.push(RunRow::from_run("sgf", f, ctx.data, Some(&alpha_eff(&alpha_v, gamma, &h, f.loss_integral)?)));
        sink.trajectory(&format!("{}/trajectory.csv", t.seed), t)?;
        sink.trajectory(&format!("{}/trajectory_sgf.csv", f.seed), f)?;
    }
    let mut report = RunReport::new(Preset::SdeValidation.as_str(), rows);
    let curves = band_curves(&s.runs, &sgf, &gd, ctx.spec.options.grid_points.max(1));
    report.checks.push(Check::new("log_loss_band_overlap_fraction", curves.overlap_fraction, ">=", 0.9));

    let mut table = Vec::new();
    for k in 0..curves.time.len() {
        let mut row = vec![fmt_f64(curves.time[k]), fmt_f64(curves.gd_log_loss[k])];
        row.extend(curves.sgd_log_loss[k].iter().chain(&curves.sgf_log_loss[k]).map(|x| fmt_f64(*x)));
        row.push(fmt_f64(curves.gd_log_val_loss[k]));
        row.extend(curves.sgd_log_val_loss[k].iter().chain(&curves.sgf_log_val_loss[k]).map(|x| fmt_f64(*x)));
        table.push(row);
    }
    let header = [
        "time", "gd_log_loss", "sgd_log_loss_q25", "sgd_log_loss_median", "sgd_log_loss_q75", "sgf_log_loss_q25",
        "sgf_log_loss_median", "sgf_log_loss_q75", "gd_log_val_loss", "sgd_log_val_loss_q25", "sgd_log_val_loss_median",
        "sgd_log_val_loss_q75", "sgf_log_val_loss_q25", "sgf_log_val_loss_median", "sgf_log_val_loss_q75",
    ];
    sink.table("curves.csv", &header, &table)?;
    if ctx.spec.options.svg {
        let col = |v: &[[f64; 3]], q: usize| -> Vec<(f64, f64)> {
            curves.time.iter().zip(v).map(|(t, b)| (*t, b[q].exp())).collect()
        };
        let mut series = vec![svg::Series {
            name: "GD".into(),
            points: curves.time.iter().zip(&curves.gd_log_loss).map(|(t, l)| (*t, l.exp())).collect(),
            dashed: false,
        }];
        for (name, v) in [("SGD", &curves.sgd_log_loss), ("SGF", &curves.sgf_log_loss)] {
            series.push(svg::Series { name: name.into(), points: col(v, 1), dashed: false });
            series.push(svg::Series { name: format!("{name} (q25)"), points: col(v, 0), dashed: true });
            series.push(svg::Series { name: format!("{name} (q75)"), points: col(v, 2), dashed: true });
        }
        sink.text("curves.svg", &svg::line_chart("training loss", "time", "loss", &series, true))?;
    }
    Ok((report, vec![("sgd".into(), s.choice)], Some(curves)))
}
