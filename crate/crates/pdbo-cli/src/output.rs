//! Output files.
//!
//! `trajectory.csv` has a header row and the columns in [`TRAJECTORY_COLUMNS`]. Floats are
//! written as `{:.16e}` (17 significant digits, exact round trip); a missing value is an
//! empty cell. `t` and `grad_calls` are integers. Row `t` describes the iterate after `t`
//! updates. The merged comparison file prepends a `method` column.

use std::fs;
use std::io::Write;
use std::path::Path;

use pdbo_core::experiments::{MethodConfig, MethodOutput};
use pdbo_core::metrics::{benchmark_metrics, BenchmarkMetrics};
use pdbo_core::problem::Reference;
use pdbo_core::{CallCounts, ProblemSpec, VectorPair};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const TRAJECTORY_COLUMNS: [&str; 10] =
    ["t", "f", "h_hat", "lambda", "outer_gap", "inner_gap", "dist_x", "dist_y", "grad_calls", "wall_time_s"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: usize,
    pub f: f64,
    pub h_hat: Option<f64>,
    pub lambda: Option<f64>,
    pub outer_gap: Option<f64>,
    pub inner_gap: Option<f64>,
    pub dist_x: Option<f64>,
    pub dist_y: Option<f64>,
    pub grad_calls: u64,
    pub wall_time_s: f64,
}

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn cell(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

impl TrajectoryRow {
    fn cells(&self) -> Vec<String> {
        vec![
            self.t.to_string(),
            format_float(self.f),
            cell(self.h_hat),
            cell(self.lambda),
            cell(self.outer_gap),
            cell(self.inner_gap),
            cell(self.dist_x),
            cell(self.dist_y),
            self.grad_calls.to_string(),
            format_float(self.wall_time_s),
        ]
    }

    fn parse(rec: &csv::StringRecord, path: &Path, line: usize) -> CliResult<Self> {
        let bad = |what: &str| CliError::Format { path: path.into(), message: format!("row {line}: bad {what}") };
        if rec.len() != TRAJECTORY_COLUMNS.len() {
            return Err(bad("column count"));
        }
        let req = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(TRAJECTORY_COLUMNS[i]));
        let opt = |i: usize| -> CliResult<Option<f64>> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                req(i).map(Some)
            }
        };
        Ok(TrajectoryRow {
            t: rec[0].parse().map_err(|_| bad("t"))?,
            f: req(1)?,
            h_hat: opt(2)?,
            lambda: opt(3)?,
            outer_gap: opt(4)?,
            inner_gap: opt(5)?,
            dist_x: opt(6)?,
            dist_y: opt(7)?,
            grad_calls: rec[8].parse().map_err(|_| bad("grad_calls"))?,
            wall_time_s: req(9)?,
        })
    }
}

fn reference_of(spec: &ProblemSpec) -> (Option<VectorPair>, Option<f64>) {
    match &spec.reference {
        Some(Reference { z_star, f_star }) => (z_star.clone(), *f_star),
        None => (None, None),
    }
}

pub fn metrics_at(spec: &ProblemSpec, z: &VectorPair, inner_gap: bool) -> CliResult<BenchmarkMetrics> {
    let (z_star, f_star) = reference_of(spec);
    Ok(benchmark_metrics(spec, z, z_star.as_ref(), f_star, inner_gap)?)
}

pub fn trajectory_rows(spec: &ProblemSpec, out: &MethodOutput, inner_gap: bool) -> CliResult<Vec<TrajectoryRow>> {
    out.trajectory
        .iter()
        .map(|r| {
            let m = metrics_at(spec, &r.z, inner_gap)?;
            Ok(TrajectoryRow {
                t: r.t,
                f: r.f_value,
                h_hat: r.h_hat,
                lambda: r.lambda,
                outer_gap: m.outer_gap,
                inner_gap: m.inner_gap,
                dist_x: m.dist_x,
                dist_y: m.dist_y,
                grad_calls: r.grad_calls_cum,
                wall_time_s: r.wall_time_s,
            })
        })
        .collect()
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Format { path: path.into(), message: e.to_string() }
}

pub fn write_trajectory(path: &Path, rows: &[TrajectoryRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error(path))?;
    w.write_record(TRAJECTORY_COLUMNS).map_err(csv_error(path))?;
    for r in rows {
        w.write_record(r.cells()).map_err(csv_error(path))?;
    }
    w.flush().map_err(CliError::io(path))
}

pub fn read_trajectory(path: &Path) -> CliResult<Vec<TrajectoryRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error(path))?;
    let header = r.headers().map_err(csv_error(path))?.clone();
    if header.iter().ne(TRAJECTORY_COLUMNS) {
        return Err(CliError::Format { path: path.into(), message: format!("unexpected header {header:?}") });
    }
    r.records()
        .enumerate()
        .map(|(i, rec)| TrajectoryRow::parse(&rec.map_err(csv_error(path))?, path, i + 2))
        .collect()
}

/// Merged comparison file: `method` followed by the trajectory columns, grouped by method
/// in run order and sorted by `t` within each method.
pub fn write_merged(path: &Path, runs: &[(String, Vec<TrajectoryRow>)]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error(path))?;
    let mut header = vec!["method"];
    header.extend(TRAJECTORY_COLUMNS);
    w.write_record(&header).map_err(csv_error(path))?;
    for (method, rows) in runs {
        for r in rows {
            let mut cells = vec![method.clone()];
            cells.extend(r.cells());
            w.write_record(&cells).map_err(csv_error(path))?;
        }
    }
    w.flush().map_err(CliError::io(path))
}

/// Contents of `summary.json`. Keys are written in field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub problem: String,
    pub method: String,
    pub seed: u64,
    pub rows: usize,
    /// f at the method's reported solution (z̄ for PDBO, z̃_k̂ for Proximal-PDBO).
    pub f_final: f64,
    /// f at the last recorded iterate.
    pub f_last_iterate: f64,
    pub z_final: VectorPair,
    pub lambda_final: Option<f64>,
    pub lambda_max: Option<f64>,
    pub metrics: BenchmarkMetrics,
    pub val_accuracy: Option<f64>,
    pub gradient_calls: u64,
    pub calls: CallCounts,
    pub wall_time_s: f64,
    pub config: MethodConfig,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Format { path: path.into(), message: e.to_string() })?;
    text.push('\n');
    let mut f = fs::File::create(path).map_err(CliError::io(path))?;
    f.write_all(text.as_bytes()).map_err(CliError::io(path))
}

/// Markdown table of final results, one row per method.
pub fn summary_table(summaries: &[RunSummary]) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_else(|| "-".into());
    let mut s = String::from(
        "| method | final f | last-iterate f | outer gap | dist x | dist y | final λ | gradient calls |\n|---|---|---|---|---|---|---|---|\n",
    );
    for r in summaries {
        s.push_str(&format!(
            "| {} | {:.6e} | {:.6e} | {} | {} | {} | {} | {} |\n",
            r.method,
            r.f_final,
            r.f_last_iterate,
            opt(r.metrics.outer_gap),
            opt(r.metrics.dist_x),
            opt(r.metrics.dist_y),
            opt(r.lambda_final),
            r.gradient_calls
        ));
    }
    s
}
