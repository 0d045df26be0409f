//! Command-line interface.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sgflab_core::bias::{solve_implicit_bias, EntropyParams};
use sgflab_core::diagnostics::kkt_residual;
use sgflab_core::dynamics::{run, Algorithm, DynamicsConfig, LabelNoise, Sampling, Status};
use sgflab_core::model::generate_sparse_regression;

use crate::config::{AlphaSpec, ConfigFile};
use crate::diagnose::diagnose;
use crate::error::{exit, LabError, Result};
use crate::io::{self, DatasetMeta};
use crate::presets::{run_experiment, DataSpec, ExperimentSpec, Preset};
use crate::report::RunRow;

#[derive(Debug, Parser)]
#[command(name = "sgflab", version, about = "Simulate GD, SGD and the stochastic gradient flow on diagonal linear networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a sparse-regression dataset.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        s: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory; receives dataset.csv and dataset.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one algorithm and write its trajectory.
    Run(RunArgs),
    /// Solve the implicit-bias problem for a dataset and initialization.
    Solve {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        alpha: AlphaArgs,
        /// Write β as CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a recorded trajectory against the theory.
    Diagnose {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        trajectory: PathBuf,
        /// Configuration JSON of the run (as written by `run`).
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0.04)]
        p_fail: f64,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment preset.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct AlphaArgs {
    /// Scalar initialization scale.
    #[arg(long, conflicts_with = "alpha_csv")]
    pub alpha: Option<f64>,
    /// Per-coordinate initialization scales.
    #[arg(long)]
    pub alpha_csv: Option<PathBuf>,
}

impl AlphaArgs {
    fn spec(&self) -> Result<Option<AlphaSpec>> {
        Ok(match (&self.alpha, &self.alpha_csv) {
            (Some(a), _) => Some(AlphaSpec::Scalar(*a)),
            (None, Some(p)) => Some(AlphaSpec::Vector(io::read_alpha_csv(p)?)),
            (None, None) => None,
        })
    }
}

#[derive(Debug, Args)]
pub struct DynamicsArgs {
    #[arg(long, value_parser = parse_algo)]
    pub algo: Option<Algorithm>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, conflicts_with = "dt_div")]
    pub dt: Option<f64>,
    /// Set `dt = gamma / DT_DIV`.
    #[arg(long)]
    pub dt_div: Option<f64>,
    #[command(flatten)]
    pub alpha: AlphaArgs,
    #[arg(long)]
    pub depth: Option<u32>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// `with_replacement` or `without_replacement`.
    #[arg(long, value_parser = parse_sampling)]
    pub sampling: Option<Sampling>,
    /// Label-noise amplitude δ (label-noise algorithms).
    #[arg(long, requires = "label_noise_cutoff")]
    pub label_noise_delta: Option<f64>,
    /// Last step with nonzero δ.
    #[arg(long, requires = "label_noise_delta")]
    pub label_noise_cutoff: Option<u64>,
    #[arg(long)]
    pub max_steps: Option<u64>,
    #[arg(long)]
    pub loss_tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub record_every: Option<u64>,
}

impl DynamicsArgs {
    fn to_config(&self) -> Result<ConfigFile> {
        Ok(ConfigFile {
            algo: self.algo,
            gamma: self.gamma,
            dt: self.dt,
            dt_div: self.dt_div,
            alpha: self.alpha.spec()?,
            depth: self.depth,
            batch_size: self.batch_size,
            sampling: self.sampling,
            label_noise: match (self.label_noise_delta, self.label_noise_cutoff) {
                (Some(delta), Some(cutoff_step)) => Some(LabelNoise { delta, cutoff_step }),
                _ => None,
            },
            max_steps: self.max_steps,
            loss_tol: self.loss_tol,
            seed: self.seed,
            record_every: self.record_every,
            record_noise: None,
        })
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// JSON configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub dynamics: DynamicsArgs,
    /// Add beta_* and eta_* columns to the trajectory.
    #[arg(long)]
    pub dump_state: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_parser = parse_preset)]
    pub preset: Preset,
    /// Experiment JSON (preset defaults fill the rest); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Comma-separated α grid for alpha_sweep.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub data_seed: Option<u64>,
    #[arg(long)]
    pub p_fail: Option<f64>,
    #[command(flatten)]
    pub dynamics: DynamicsArgs,
    #[arg(long)]
    pub svg: bool,
    #[arg(long)]
    pub dump_state: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Prints to stdout, ignoring a closed pipe.
fn stdout_line(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn parse_algo(s: &str) -> std::result::Result<Algorithm, String> {
    Algorithm::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Algorithm::ALL.iter().map(|a| a.as_str()).collect();
        format!("unknown algorithm {s:?}; expected one of {}", names.join(", "))
    })
}

fn parse_sampling(s: &str) -> std::result::Result<Sampling, String> {
    match s {
        "with_replacement" => Ok(Sampling::WithReplacement),
        "without_replacement" => Ok(Sampling::WithoutReplacement),
        _ => Err(format!("unknown sampling {s:?}")),
    }
}

fn parse_preset(s: &str) -> std::result::Result<Preset, String> {
    s.parse::<Preset>().map_err(|_| {
        let names: Vec<&str> = Preset::ALL.iter().map(|p| p.as_str()).collect();
        format!("unknown preset {s:?}; expected one of {}", names.join(", "))
    })
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::CONFIG } else { exit::OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("sgflab: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Generate { n, d, s, seed, out } => {
            let data = generate_sparse_regression(n, d, s, seed)?;
            io::write_dataset(&out.join("dataset.csv"), &data, &DatasetMeta { n, d, s, seed })?;
            Ok(exit::OK)
        }
        Command::Run(args) => cmd_run(&args),
        Command::Solve { data, alpha, out } => cmd_solve(&data, &alpha, out.as_deref()),
        Command::Diagnose { data, trajectory, config, p_fail, out } => {
            let (data, _) = io::read_dataset(&data)?;
            let cfg: DynamicsConfig = io::read_json(&config)?;
            let rows = io::read_trajectory(&trajectory)?;
            let report = diagnose(&data, &cfg, &rows, p_fail)?;
            match out {
                Some(p) => io::write_json(&p, &report)?,
                None => stdout_line(&serde_json::to_string_pretty(&report)?),
            }
            Ok(exit::OK)
        }
        Command::Experiment(args) => cmd_experiment(&args),
    }
}

fn cmd_run(args: &RunArgs) -> Result<i32> {
    let (data, _) = io::read_dataset(&args.data)?;
    let file: ConfigFile = match &args.config {
        Some(p) => io::read_json(p)?,
        None => ConfigFile::default(),
    };
    let cfg = file.overlay(&args.dynamics.to_config()?).resolve(data.d())?;
    cfg.validate(&data)?;
    let traj = run(&data, &cfg)?;
    io::write_trajectory(&args.out.join("trajectory.csv"), &traj, args.dump_state)?;
    io::write_json(&args.out.join("config.json"), &cfg)?;
    let row = RunRow::from_run(cfg.algo.as_str(), &traj, &data, None);
    io::write_json(&args.out.join("summary.json"), &row)?;
    println!("{} seed {}: {} after {} steps, final loss {:e}", cfg.algo.as_str(), cfg.seed, traj.status.as_str(), traj.steps, traj.final_loss);
    Ok(if traj.status == Status::Diverged { exit::DIVERGENCE } else { exit::OK })
}

fn cmd_solve(data: &Path, alpha: &AlphaArgs, out: Option<&Path>) -> Result<i32> {
    let (data, _) = io::read_dataset(data)?;
    let spec = alpha.spec()?.ok_or_else(|| LabError::Config("solve needs --alpha or --alpha-csv".into()))?;
    let params = EntropyParams::new(spec.expand(data.d())?)?;
    let beta = solve_implicit_bias(&data, &params)?;
    let kkt = kkt_residual(&beta, &data, &params);
    match out {
        Some(p) => io::write_vector_csv(p, "beta", &beta)?,
        None => {
            let mut text = String::from("index,beta");
            for (j, b) in beta.iter().enumerate() {
                text.push_str(&format!("\n{j},{}", io::fmt_f64(*b)));
            }
            stdout_line(&text);
        }
    }
    let msg = format!("kkt_stationarity={:e} kkt_feasibility={:e}", kkt.stationarity, kkt.feasibility);
    if out.is_some() {
        println!("{msg}");
    } else {
        eprintln!("{msg}");
    }
    Ok(exit::OK)
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<i32> {
    let mut spec: ExperimentSpec = match &args.config {
        Some(p) => io::read_json(p)?,
        None => ExperimentSpec::new(args.preset),
    };
    if spec.preset != args.preset {
        return Err(LabError::Config(format!(
            "config is for preset {}, command line names {}",
            spec.preset.as_str(),
            args.preset.as_str()
        )));
    }
    spec.base = spec.base.overlay(&args.dynamics.to_config()?);
    if let Some(s) = &args.seeds {
        spec.seeds = s.clone();
    }
    if let Some(a) = &args.alphas {
        spec.options.alphas = a.clone();
    }
    if let Some(p) = args.p_fail {
        spec.options.p_fail = p;
    }
    spec.options.svg |= args.svg;
    spec.options.dump_state |= args.dump_state;
    if args.n.is_some() || args.d.is_some() || args.s.is_some() || args.data_seed.is_some() {
        let (def, _, _) = spec.preset.defaults();
        let cur = spec.data.unwrap_or(def);
        spec.data = Some(DataSpec {
            n: args.n.unwrap_or(cur.n),
            d: args.d.unwrap_or(cur.d),
            s: args.s.unwrap_or(cur.s),
            seed: args.data_seed.unwrap_or(cur.seed),
        });
    }
    let outcome = run_experiment(&spec, Some(&args.out))?;
    for c in &outcome.report.checks {
        println!(
            "{} {}: {:.6e} {} {:.6e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.relation,
            c.threshold
        );
    }
    for w in &outcome.report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(if outcome.report.any_diverged() { exit::DIVERGENCE } else { exit::OK })
}
