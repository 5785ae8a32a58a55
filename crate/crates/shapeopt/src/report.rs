//! `report`: terminal values and retardation factors of finished runs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use shapeopt_core::oneshot::retardation;

use crate::formats::read_history;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub run: String,
    pub objective: f64,
    #[serde(rename = "E_max")]
    pub e_max: f64,
    #[serde(rename = "C_min")]
    pub c_min: Option<f64>,
    pub iterations: usize,
    /// From the `summary.json` next to the history, when present.
    pub solver_iterations: Option<usize>,
    pub time_s: f64,
    pub time_retardation: f64,
    pub iteration_retardation: Option<f64>,
}

fn sidecar_solver_iterations(history: &Path) -> Option<usize> {
    let summary = history.with_file_name("summary.json");
    let text = std::fs::read_to_string(summary).ok()?;
    let v: serde_json::Value = serde_json::from_str(&text).ok()?;
    v.get("solver_iterations")?.as_u64().map(|n| n as usize)
}

pub fn build_report(histories: &[PathBuf], baseline_time: f64, baseline_iters: f64) -> Result<Vec<ReportRow>> {
    anyhow::ensure!(!histories.is_empty(), "at least one history file is required");
    histories
        .iter()
        .map(|path| {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            let rows = read_history(&text).with_context(|| format!("malformed history {}", path.display()))?;
            let last = rows.last().with_context(|| format!("empty history {}", path.display()))?;
            let solver_iterations = sidecar_solver_iterations(path);
            let r = retardation(last.time_s, baseline_time, solver_iterations.unwrap_or(0) as f64, baseline_iters)?;
            Ok(ReportRow {
                run: path.display().to_string(),
                objective: last.objective,
                e_max: last.e_max,
                c_min: last.c_min,
                iterations: last.iter,
                solver_iterations,
                time_s: last.time_s,
                time_retardation: r.time_factor,
                iteration_retardation: solver_iterations.map(|_| r.iter_factor),
            })
        })
        .collect()
}

pub fn to_csv(rows: &[ReportRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn to_text(rows: &[ReportRow]) -> String {
    let opt = |x: Option<String>| x.unwrap_or_else(|| "-".into());
    let table: Vec<[String; 9]> = rows
        .iter()
        .map(|r| {
            [
                r.run.clone(),
                format!("{:.10e}", r.objective),
                format!("{:.2e}", r.e_max),
                opt(r.c_min.map(|c| format!("{c:.2e}"))),
                r.iterations.to_string(),
                opt(r.solver_iterations.map(|n| n.to_string())),
                format!("{:.2}", r.time_s),
                format!("{:.2}", r.time_retardation),
                opt(r.iteration_retardation.map(|x| format!("{x:.2}"))),
            ]
        })
        .collect();
    let header = ["run", "objective", "E_max", "C_min", "iters", "solver_iters", "time_s", "time_ret", "iter_ret"];
    let mut widths = header.map(str::len);
    for row in &table {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut s = String::new();
    let line = |s: &mut String, cells: &[&str]| {
        let parts: Vec<String> = cells.iter().zip(widths).map(|(c, w)| format!("{c:>w$}")).collect();
        let _ = writeln!(s, "{}", parts.join("  "));
    };
    line(&mut s, &header);
    for row in &table {
        line(&mut s, &row.each_ref().map(String::as_str));
    }
    s
}
