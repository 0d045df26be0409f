//! On-disk formats.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a file
//! read back reproduces the exact `f64` values and reruns are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sgflab_core::dynamics::Trajectory;
use sgflab_core::linalg::Matrix;
use sgflab_core::model::Dataset;

use crate::error::{LabError, Result};

/// Generation parameters stored next to a dataset CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n: usize,
    pub d: usize,
    pub s: usize,
    pub seed: u64,
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn parse_f64(path: &Path, field: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| LabError::format(path, format!("not a number: {field:?}")))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(LabError::io(dir))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    fs::write(path, text).map_err(LabError::io(path))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(LabError::io(path))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_text(path, &s)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| LabError::format(path, e.to_string()))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    let file = fs::File::create(path).map_err(LabError::io(path))?;
    Ok(csv::WriterBuilder::new().flexible(true).from_writer(file))
}

/// Optional header plus the non-blank records.
type RawTable = (Option<Vec<String>>, Vec<Vec<String>>);

fn csv_rows(path: &Path, has_headers: bool) -> Result<RawTable> {
    let file = fs::File::open(path).map_err(LabError::io(path))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(has_headers).flexible(true).from_reader(file);
    let header = if has_headers { Some(rdr.headers()?.iter().map(str::to_owned).collect()) } else { None };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        rows.push(rec.iter().map(str::to_owned).collect());
    }
    Ok((header, rows))
}

/// Sidecar path of a dataset CSV (`foo.csv` → `foo.json`).
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Dataset CSV bytes: `X` row by row, then `y`, then `β*_ℓ0` when present.
pub fn dataset_csv_bytes(data: &Dataset) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    let mut put = |xs: &[f64]| w.write_record(xs.iter().map(|x| fmt_f64(*x)));
    for i in 0..data.n() {
        put(data.x.row(i))?;
    }
    put(&data.y)?;
    if let Some(b) = &data.beta_l0 {
        put(b)?;
    }
    w.into_inner().map_err(|e| LabError::Csv(e.into_error().into()))
}

/// Writes the dataset CSV and its JSON sidecar.
pub fn write_dataset(csv_path: &Path, data: &Dataset, meta: &DatasetMeta) -> Result<()> {
    let bytes = dataset_csv_bytes(data)?;
    if let Some(parent) = csv_path.parent() {
        ensure_dir(parent)?;
    }
    fs::write(csv_path, bytes).map_err(LabError::io(csv_path))?;
    write_json(&sidecar_path(csv_path), meta)
}

/// Reads a dataset CSV; the sidecar, when present, fixes `n` and is returned.
pub fn read_dataset(csv_path: &Path) -> Result<(Dataset, Option<DatasetMeta>)> {
    let (_, raw) = csv_rows(csv_path, false)?;
    let rows: Vec<Vec<f64>> = raw
        .iter()
        .map(|r| r.iter().map(|f| parse_f64(csv_path, f)).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;
    let side = sidecar_path(csv_path);
    let meta: Option<DatasetMeta> = if side.exists() { Some(read_json(&side)?) } else { None };
    let bad = |msg: &str| LabError::format(csv_path, msg.to_owned());
    if rows.len() < 2 {
        return Err(bad("expected X rows followed by a label row"));
    }
    let d = rows[0].len();
    let n = match meta {
        Some(m) => m.n,
        None => {
            let with_beta = rows.len() >= 3 && rows[rows.len() - 2].len() == rows.len() - 2;
            if with_beta {
                rows.len() - 2
            } else {
                rows.len() - 1
            }
        }
    };
    if rows.len() != n + 1 && rows.len() != n + 2 {
        return Err(bad("row count does not match n"));
    }
    if rows[..n].iter().any(|r| r.len() != d) || rows[n].len() != n {
        return Err(bad("inconsistent row lengths"));
    }
    let beta_l0 = if rows.len() == n + 2 {
        if rows[n + 1].len() != d {
            return Err(bad("ground-truth row must have d entries"));
        }
        Some(rows[n + 1].clone())
    } else {
        None
    };
    if let Some(m) = meta {
        if m.d != d {
            return Err(bad("sidecar d disagrees with the CSV"));
        }
    }
    let x = Matrix::from_rows(&rows[..n])?;
    Ok((Dataset::new(x, rows[n].clone(), beta_l0)?, meta))
}

/// Reads per-coordinate `α` from a CSV holding `d` numbers in any row layout.
pub fn read_alpha_csv(path: &Path) -> Result<Vec<f64>> {
    let (_, rows) = csv_rows(path, false)?;
    let alpha: Vec<f64> = rows.iter().flatten().map(|f| parse_f64(path, f)).collect::<Result<_>>()?;
    if alpha.is_empty() {
        return Err(LabError::format(path, "no values"));
    }
    Ok(alpha)
}

/// One row of a trajectory CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub step: u64,
    pub time: f64,
    pub loss: f64,
    pub loss_integral: f64,
    pub val_loss: Option<f64>,
    pub beta: Option<Vec<f64>>,
    pub eta: Option<Vec<f64>>,
}

/// `step,time,loss,loss_integral,val_loss`, plus `beta_*` and `eta_*` columns
/// when `dump_state` is set.
pub fn write_trajectory(path: &Path, traj: &Trajectory, dump_state: bool) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = ["step", "time", "loss", "loss_integral", "val_loss"].map(String::from).to_vec();
    let d = traj.records.first().map_or(0, |r| r.beta.len());
    let n_eta = traj.records.first().and_then(|r| r.eta.as_ref()).map_or(0, Vec::len);
    if dump_state {
        header.extend((0..d).map(|j| format!("beta_{j}")));
        header.extend((0..n_eta).map(|i| format!("eta_{i}")));
    }
    w.write_record(&header)?;
    for r in &traj.records {
        let mut row = vec![
            r.step.to_string(),
            fmt_f64(r.time),
            fmt_f64(r.loss),
            fmt_f64(r.loss_integral),
            r.val_loss.map(fmt_f64).unwrap_or_default(),
        ];
        if dump_state {
            row.extend(r.beta.iter().map(|x| fmt_f64(*x)));
            if let Some(eta) = &r.eta {
                row.extend(eta.iter().map(|x| fmt_f64(*x)));
            }
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(LabError::io(path))
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>> {
    let (header, rows) = csv_rows(path, true)?;
    let header = header.unwrap_or_default();
    let fixed = ["step", "time", "loss", "loss_integral", "val_loss"];
    if header.len() < fixed.len() || header[..5] != fixed {
        return Err(LabError::format(path, "unexpected trajectory header"));
    }
    let beta_cols: Vec<usize> = (0..header.len()).filter(|&k| header[k].starts_with("beta_")).collect();
    let eta_cols: Vec<usize> = (0..header.len()).filter(|&k| header[k].starts_with("eta_")).collect();
    let pick = |row: &[String], cols: &[usize]| -> Result<Option<Vec<f64>>> {
        if cols.is_empty() {
            return Ok(None);
        }
        cols.iter().map(|&k| parse_f64(path, &row[k])).collect::<Result<Vec<_>>>().map(Some)
    };
    rows.iter()
        .map(|row| {
            if row.len() != header.len() {
                return Err(LabError::format(path, "row length differs from header"));
            }
            let step = row[0].trim().parse::<u64>().map_err(|_| LabError::format(path, "bad step"))?;
            let val_loss = if row[4].trim().is_empty() { None } else { Some(parse_f64(path, &row[4])?) };
            Ok(TrajectoryRow {
                step,
                time: parse_f64(path, &row[1])?,
                loss: parse_f64(path, &row[2])?,
                loss_integral: parse_f64(path, &row[3])?,
                val_loss,
                beta: pick(row, &beta_cols)?,
                eta: pick(row, &eta_cols)?,
            })
        })
        .collect()
}

/// Writes a headed CSV of arbitrary string cells.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(LabError::io(path))
}

pub fn write_vector_csv(path: &Path, name: &str, values: &[f64]) -> Result<()> {
    let rows: Vec<Vec<String>> = values.iter().enumerate().map(|(j, v)| vec![j.to_string(), fmt_f64(*v)]).collect();
    write_table(path, &["index", name], &rows)
}
