use std::path::Path;
use std::process::{Command, Output};

use sgflab::io::{read_dataset, read_trajectory};
use sgflab::presets::{run_experiment, ExperimentSpec, Preset};

fn sgflab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgflab")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path) {
    let out = sgflab(&["generate", "--n", "5", "--d", "10", "--s", "2", "--seed", "3", "--out", s(dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn help_exits_zero_and_bad_flags_exit_three() {
    assert_eq!(code(&sgflab(&["--help"])), 0);
    assert_eq!(code(&sgflab(&["generate", "--bogus"])), 3);
    assert_eq!(code(&sgflab(&["experiment", "no_such_preset"])), 3);
}

#[test]
fn inconsistent_config_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path());
    let data = tmp.path().join("dataset.csv");
    let out = sgflab(&["run", "--data", s(&data), "--algo", "gd", "--alpha", "0.3", "--out", s(tmp.path())]);
    assert_eq!(code(&out), 3, "missing gamma");
    let out = sgflab(&[
        "run", "--data", s(&data), "--algo", "gd", "--gamma", "0.01", "--alpha", "0.3", "--batch-size", "99", "--out",
        s(tmp.path()),
    ]);
    assert_eq!(code(&out), 3, "batch larger than n");
}

#[test]
fn divergent_run_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path());
    let data = tmp.path().join("dataset.csv");
    let out = sgflab(&["run", "--data", s(&data), "--algo", "gd", "--gamma", "50", "--alpha", "1", "--out", s(tmp.path())]);
    assert_eq!(code(&out), 2);
}

#[test]
fn generate_run_diagnose_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    generate(dir);
    let data_path = dir.join("dataset.csv");
    let (data, meta) = read_dataset(&data_path).unwrap();
    assert_eq!((data.n(), data.d()), (5, 10));
    assert_eq!(meta.unwrap().seed, 3);

    let run_dir = dir.join("run");
    let out = sgflab(&[
        "run", "--data", s(&data_path), "--algo", "sgf", "--gamma", "1e-3", "--dt-div", "10", "--alpha", "0.3",
        "--max-steps", "5000", "--record-every", "500", "--seed", "7", "--dump-state", "--out", s(&run_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_trajectory(&run_dir.join("trajectory.csv")).unwrap();
    assert_eq!(rows.last().unwrap().step, 5000);
    assert_eq!(rows[0].beta.as_ref().unwrap().len(), 10);
    assert_eq!(rows[0].eta.as_ref().unwrap().len(), 5);

    let report = dir.join("diag.json");
    let out = sgflab(&[
        "diagnose", "--data", s(&data_path), "--trajectory", s(&run_dir.join("trajectory.csv")), "--config",
        s(&run_dir.join("config.json")), "--out", s(&report),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["replay_steps"], 5000);
    assert_eq!(json["alpha_eff"].as_array().unwrap().len(), 10);
    assert!(json["alpha_eff"][0].as_f64().unwrap() < 0.3);
    assert!(json["eventA_violated"].is_boolean());

    // A trajectory from another seed no longer matches the replay.
    let other = dir.join("other");
    let out = sgflab(&[
        "run", "--data", s(&data_path), "--algo", "sgf", "--gamma", "1e-3", "--dt-div", "10", "--alpha", "0.3",
        "--max-steps", "5000", "--record-every", "500", "--seed", "8", "--out", s(&other),
    ]);
    assert_eq!(code(&out), 0);
    let out = sgflab(&[
        "diagnose", "--data", s(&data_path), "--trajectory", s(&other.join("trajectory.csv")), "--config",
        s(&run_dir.join("config.json")),
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn solve_reports_stationary_interpolator() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path());
    let beta = tmp.path().join("beta.csv");
    let out = sgflab(&["solve", "--data", s(&tmp.path().join("dataset.csv")), "--alpha", "0.1", "--out", s(&beta)]);
    assert_eq!(code(&out), 0);
    let line = String::from_utf8_lossy(&out.stdout).to_string();
    let stat: f64 = line.split_whitespace().next().unwrap().trim_start_matches("kkt_stationarity=").parse().unwrap();
    assert!(stat < 1e-10, "{line}");
    assert_eq!(std::fs::read_to_string(&beta).unwrap().lines().count(), 11);
}

fn files_under(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn experiment_reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = |dir: &Path| {
        sgflab(&["experiment", "depth_p_demo", "--seeds", "1,2", "--max-steps", "200000", "--dump-state", "--out", s(dir)])
    };
    assert_eq!(code(&args(a.path())), 0);
    assert_eq!(code(&args(b.path())), 0);
    let (fa, fb) = (files_under(a.path()), files_under(b.path()));
    assert!(fa.iter().any(|(name, _)| name.ends_with("manifest.json")));
    assert_eq!(fa, fb);
}

#[test]
fn report_ignores_seed_order() {
    let mut spec = ExperimentSpec::new(Preset::DepthPDemo);
    spec.base.max_steps = Some(200_000);
    spec.seeds = vec![3, 1, 2];
    let forward = run_experiment(&spec, None).unwrap();
    spec.seeds = vec![2, 3, 1];
    let shuffled = run_experiment(&spec, None).unwrap();
    assert_eq!(forward.report, shuffled.report);
}
