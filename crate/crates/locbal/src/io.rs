//! File formats: trace CSV with JSON sidecar, numeric matrices, manifests.

use std::fs;
use std::path::Path;

use anyhow::Context;
use locbal_core::diagnostics::EssReport;
use locbal_core::kernels::Trace;
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(())
}

/// `iteration, <summaries...>, accepted, cum_flips`.
pub fn write_trace_csv(path: &Path, trace: &Trace) -> CliResult<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    let mut header = vec!["iteration".to_string()];
    header.extend(trace.summary_names.iter().cloned());
    header.push("accepted".into());
    header.push("cum_flips".into());
    w.write_record(&header)?;
    for r in 0..trace.records() {
        let mut row = vec![trace.record_iterations[r].to_string()];
        row.extend(trace.summaries.iter().map(|s| fmt_f64(s[r])));
        row.push(u8::from(trace.record_accepted[r]).to_string());
        row.push(trace.record_flips[r].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest representation that round-trips.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceSidecar<'a> {
    pub scheme: &'a str,
    pub seed: u64,
    pub stream: u64,
    pub target: &'a str,
    pub iterations: u64,
    pub thin: u64,
    pub burn_in: u64,
    pub wall_seconds: f64,
    pub proposals: u64,
    pub accepted: u64,
    pub flips: u64,
    /// MH acceptance rate, or the moved-rate when `moved_rate` is true.
    pub acceptance_rate: f64,
    pub moved_rate: bool,
    pub flips_per_second: f64,
    pub ess: Option<&'a EssReport>,
}

impl<'a> TraceSidecar<'a> {
    pub fn new(trace: &'a Trace, target: &'a str, ess: Option<&'a EssReport>) -> Self {
        Self {
            scheme: &trace.scheme,
            seed: trace.seed,
            stream: trace.stream,
            target,
            iterations: trace.iterations,
            thin: trace.thin,
            burn_in: trace.burn_in,
            wall_seconds: trace.wall_seconds,
            proposals: trace.proposals,
            accepted: trace.accepted,
            flips: trace.flips,
            acceptance_rate: trace.acceptance_rate(),
            moved_rate: trace.moved_rate,
            flips_per_second: trace.flips_per_second(),
            ess,
        }
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Trace CSV plus `<stem>.json` next to it.
pub fn write_trace(
    dir: &Path,
    stem: &str,
    trace: &Trace,
    target: &str,
    ess: Option<&EssReport>,
) -> CliResult<()> {
    write_trace_csv(&dir.join(format!("{stem}.csv")), trace)?;
    write_json(
        &dir.join(format!("{stem}.json")),
        &TraceSidecar::new(trace, target, ess),
    )
}

/// A headerless numeric CSV as `(rows, cols, row-major values)`.
pub fn read_matrix_csv(path: &Path) -> CliResult<(usize, usize, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        if *cols.get_or_insert(rec.len()) != rec.len() {
            return Err(CliError::Usage(format!(
                "{} line {}: expected {} values, found {}",
                path.display(),
                line + 1,
                cols.unwrap_or(0),
                rec.len()
            )));
        }
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::Usage(format!(
                    "{} line {} column {}: '{field}' is not a number",
                    path.display(),
                    line + 1,
                    c + 1
                ))
            })?;
            values.push(v);
        }
        rows += 1;
    }
    Ok((rows, cols.unwrap_or(0), values))
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    pub version: &'a str,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub config: &'a toml::Value,
    pub outputs: Vec<String>,
}

pub fn write_manifest(dir: &Path, manifest: &Manifest<'_>) -> CliResult<()> {
    write_json(&dir.join("manifest.json"), manifest)
}
