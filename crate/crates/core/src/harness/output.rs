//! Trace CSV, summary JSON, and aggregate files.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so identical
//! runs produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::diagnostics::{aggregate_curves, mean_std, pseudo_regret, AggregateCurve, BoundDiagnostic};
use crate::harness::run::{Algorithm, RunSummary, Trace, SCHEMA_VERSION};

pub const AGGREGATE_CSV: &str = "aggregate.csv";
pub const AGGREGATE_JSON: &str = "aggregate.json";
pub const BOUND_JSON: &str = "bound.json";

pub fn trace_file_name(seed: u64) -> String {
    format!("trace_seed{seed}.csv")
}

pub fn summary_file_name(seed: u64) -> String {
    format!("summary_seed{seed}.json")
}

/// Trace CSV. Columns: `t,arm,loss,regret,marg_0..marg_{K-1},clean_loss,consumed`, then
/// `plus_0..plus_{K-1},p_best,plus_best` when the bound monitor ran and `p_0..p_{N-1}` in
/// full-detail mode. `regret` is the cumulative pseudo-regret. The first line is a
/// `# schema_version = ...` comment.
pub fn trace_to_csv(trace: &Trace) -> Result<String> {
    let regret = pseudo_regret(trace, trace.regime)?;
    let k = trace.num_cliques;
    let first = trace.records.first();
    let has_plus = first.is_some_and(|r| r.plus_marginals.is_some());
    let has_best = first.is_some_and(|r| r.best_arm_prob.is_some());
    let has_full = first.is_some_and(|r| r.distribution.is_some());

    let mut out = format!("# schema_version = {SCHEMA_VERSION}\nt,arm,loss,regret");
    (0..k).for_each(|j| write!(out, ",marg_{j}").unwrap());
    out.push_str(",clean_loss,consumed");
    if has_plus {
        (0..k).for_each(|j| write!(out, ",plus_{j}").unwrap());
    }
    if has_best {
        out.push_str(",p_best,plus_best");
    }
    if has_full {
        (0..trace.num_arms).for_each(|i| write!(out, ",p_{i}").unwrap());
    }
    out.push('\n');

    for (r, reg) in trace.records.iter().zip(&regret) {
        write!(out, "{},{},{},{}", r.t, r.arm, r.loss, reg).unwrap();
        r.marginals.iter().for_each(|m| write!(out, ",{m}").unwrap());
        write!(out, ",{},{}", r.clean_loss, r.consumed).unwrap();
        if has_plus {
            let plus = r.plus_marginals.as_ref().ok_or_else(|| inconsistent(r.t))?;
            plus.iter().for_each(|m| write!(out, ",{m}").unwrap());
        }
        if has_best {
            let (a, b) = r.best_arm_prob.zip(r.plus_best_arm_prob).ok_or_else(|| inconsistent(r.t))?;
            write!(out, ",{a},{b}").unwrap();
        }
        if has_full {
            let p = r.distribution.as_ref().ok_or_else(|| inconsistent(r.t))?;
            p.iter().for_each(|x| write!(out, ",{x}").unwrap());
        }
        out.push('\n');
    }
    Ok(out)
}

fn inconsistent(t: usize) -> Error {
    Error::MissingMonitorData(format!("round {t} lacks a column present in round 1"))
}

/// Reads the `regret` column of a trace CSV.
pub fn read_regret_column(text: &str) -> Result<Vec<f64>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::Parse { line: 1, message: "empty trace".into() })?;
    let column = header
        .split(',')
        .position(|c| c == "regret")
        .ok_or(Error::Parse { line: 1, message: "no `regret` column".into() })?;
    lines
        .map(|(idx, line)| {
            line.split(',')
                .nth(column)
                .and_then(|f| f.parse::<f64>().ok())
                .ok_or(Error::Parse { line: idx + 1, message: "bad regret value".into() })
        })
        .collect()
}

/// Cross-seed summary table; excludes timings so it is reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSummary {
    pub schema_version: u32,
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub mean_final_regret: f64,
    pub std_final_regret: f64,
    pub mean_realized_corruption: f64,
    pub total_violations: usize,
}

/// Seed-averaged bound diagnostic written by a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub schema_version: u32,
    pub mean_regret: f64,
    pub bound: BoundDiagnostic,
    /// `None` when the bound is outside its proved range (`NT < 3^11`).
    pub holds: Option<bool>,
}

pub fn aggregate_curve_to_csv(curve: &AggregateCurve) -> String {
    let mut out = format!("# schema_version = {SCHEMA_VERSION}\nt,mean_regret,std_regret\n");
    for (t, (m, s)) in curve.mean.iter().zip(&curve.std).enumerate() {
        writeln!(out, "{},{m},{s}", t + 1).unwrap();
    }
    out
}

pub fn aggregate_summaries(summaries: &[RunSummary]) -> Result<AggregateSummary> {
    let first = summaries.first().ok_or_else(|| Error::InconsistentHorizons("no runs to aggregate".into()))?;
    if let Some(s) = summaries.iter().find(|s| s.horizon != first.horizon) {
        return Err(Error::InconsistentHorizons(format!("horizons {} and {}", first.horizon, s.horizon)));
    }
    let finals: Vec<f64> = summaries.iter().map(|s| s.final_regret).collect();
    let (mean, std) = mean_std(&finals);
    let corruption: Vec<f64> = summaries.iter().map(|s| s.realized_corruption).collect();
    Ok(AggregateSummary {
        schema_version: SCHEMA_VERSION,
        algorithm: first.algorithm,
        horizon: first.horizon,
        seeds: summaries.iter().map(|s| s.seed).collect(),
        mean_final_regret: mean,
        std_final_regret: std,
        mean_realized_corruption: mean_std(&corruption).0,
        total_violations: summaries.iter().map(|s| s.violations.total()).sum(),
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

pub fn write_run(dir: &Path, trace: &Trace, summary: &RunSummary) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
    write_file(&dir.join(trace_file_name(summary.seed)), &trace_to_csv(trace)?)?;
    write_file(&dir.join(summary_file_name(summary.seed)), &(serde_json::to_string_pretty(summary)? + "\n"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

/// Seeds with both a trace and a summary file in `dir`, in increasing order.
pub fn seeds_in_dir(dir: &Path) -> Result<Vec<u64>> {
    let mut seeds: Vec<u64> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            name.strip_prefix("summary_seed")?.strip_suffix(".json")?.parse().ok()
        })
        .filter(|s| dir.join(trace_file_name(*s)).exists())
        .collect();
    seeds.sort_unstable();
    Ok(seeds)
}

/// Reads every per-seed trace and summary in `input` and writes the aggregate
/// CSV and JSON into `out`. Returns the written paths.
pub fn aggregate_dir(input: &Path, out: &Path) -> Result<(AggregateSummary, Vec<PathBuf>)> {
    let seeds = seeds_in_dir(input)?;
    if seeds.is_empty() {
        return Err(Error::Config(format!("no per-seed results in {}", input.display())));
    }
    let mut curves = Vec::with_capacity(seeds.len());
    let mut summaries = Vec::with_capacity(seeds.len());
    for &seed in &seeds {
        curves.push(read_regret_column(&fs::read_to_string(input.join(trace_file_name(seed)))?)?);
        summaries.push(serde_json::from_str::<RunSummary>(&fs::read_to_string(
            input.join(summary_file_name(seed)),
        )?)?);
    }
    let curve = aggregate_curves(&curves)?;
    let summary = aggregate_summaries(&summaries)?;
    fs::create_dir_all(out)?;
    let csv_path = out.join(AGGREGATE_CSV);
    let json_path = out.join(AGGREGATE_JSON);
    write_file(&csv_path, &aggregate_curve_to_csv(&curve))?;
    write_json(&json_path, &summary)?;
    Ok((summary, vec![csv_path, json_path]))
}
