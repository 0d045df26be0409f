//! Per-seed summary rows and their aggregates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sgflab_core::bias::EntropyParams;
use sgflab_core::diagnostics::kkt_residual;
use sgflab_core::dynamics::{Status, Trajectory};
use sgflab_core::model::{validation_loss, Dataset};

/// Summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    /// Which family of runs the row belongs to (`"sgd"`, `"gd"`, `"alpha=0.05/sgd"`, ...).
    pub group: String,
    pub seed: u64,
    pub status: Status,
    pub steps: u64,
    pub final_loss: f64,
    pub final_val_loss: Option<f64>,
    pub loss_integral: f64,
    pub alpha_eff_geom_mean: Option<f64>,
    pub kkt_residual: Option<f64>,
    /// Preset-specific per-run numbers.
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub extra: BTreeMap<String, f64>,
}

impl RunRow {
    /// Row for `traj`; the KKT residual is taken against `bias_params` when given.
    pub fn from_run(group: &str, traj: &Trajectory, data: &Dataset, bias_params: Option<&EntropyParams>) -> Self {
        let beta = traj.final_beta();
        let kkt = bias_params.map(|p| kkt_residual(&beta, data, p).stationarity);
        Self {
            group: group.to_owned(),
            seed: traj.seed,
            status: traj.status,
            steps: traj.steps,
            final_loss: traj.final_loss,
            final_val_loss: validation_loss(&beta, data).ok(),
            loss_integral: traj.loss_integral,
            alpha_eff_geom_mean: bias_params.map(EntropyParams::geo_mean),
            kkt_residual: kkt,
            extra: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.extra.insert(key.to_owned(), value);
        self
    }

    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }
}

/// Median and quartiles of one metric over the converged rows of a group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        Some(Self {
            count: v.len(),
            q25: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q75: quantile_sorted(&v, 0.75),
            min: v[0],
            max: v[v.len() - 1],
        })
    }
}

/// Linear-interpolation quantile (type 7) of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let x = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = x.floor() as usize;
    let f = x - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + f * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// A named pass/fail claim of a preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// How `value` is compared with `threshold` (`"<="`, `"<"`, `">="`, `">"`).
    pub relation: String,
    pub pass: bool,
}

impl Check {
    pub fn new(name: &str, value: f64, relation: &str, threshold: f64) -> Self {
        let pass = match relation {
            "<=" => value <= threshold,
            "<" => value < threshold,
            ">=" => value >= threshold,
            ">" => value > threshold,
            _ => panic!("unknown relation {relation}"),
        };
        Self { name: name.to_owned(), value, threshold, relation: relation.to_owned(), pass }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub preset: String,
    pub rows: Vec<RunRow>,
    /// `group → metric → summary`, over converged rows only.
    pub aggregate: BTreeMap<String, BTreeMap<String, Summary>>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

impl RunReport {
    /// Builds the report; rows are sorted by group then seed so that the
    /// output does not depend on the order seeds were given in.
    pub fn new(preset: &str, mut rows: Vec<RunRow>) -> Self {
        rows.sort_by(|a, b| a.group.cmp(&b.group).then(a.seed.cmp(&b.seed)));
        let mut warnings = Vec::new();
        for r in rows.iter().filter(|r| !r.converged()) {
            warnings.push(format!(
                "{} seed {} ended with status {}; excluded from aggregates",
                r.group,
                r.seed,
                r.status.as_str()
            ));
        }
        let mut report = Self { preset: preset.to_owned(), rows, aggregate: BTreeMap::new(), checks: vec![], warnings };
        report.recompute_aggregates();
        report
    }

    pub fn recompute_aggregates(&mut self) {
        let mut agg: BTreeMap<String, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.converged()) {
            let g = agg.entry(r.group.clone()).or_default();
            let mut put = |k: &str, v: Option<f64>| {
                if let Some(v) = v {
                    g.entry(k.to_owned()).or_default().push(v);
                }
            };
            put("steps", Some(r.steps as f64));
            put("final_loss", Some(r.final_loss));
            put("final_val_loss", r.final_val_loss);
            put("loss_integral", Some(r.loss_integral));
            put("alpha_eff_geom_mean", r.alpha_eff_geom_mean);
            put("kkt_residual", r.kkt_residual);
            for (k, v) in &r.extra {
                put(k, Some(*v));
            }
        }
        self.aggregate = agg
            .into_iter()
            .map(|(g, m)| (g, m.into_iter().filter_map(|(k, v)| Summary::of(&v).map(|s| (k, s))).collect()))
            .collect();
    }

    pub fn group(&self, group: &str) -> impl Iterator<Item = &RunRow> {
        let group = group.to_owned();
        self.rows.iter().filter(move |r| r.group == group)
    }

    pub fn summary(&self, group: &str, metric: &str) -> Option<&Summary> {
        self.aggregate.get(group)?.get(metric)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn any_diverged(&self) -> bool {
        self.rows.iter().any(|r| r.status == Status::Diverged)
    }
}
