//! `simulate`: run several kernels on one target and compare them.

use std::path::Path;

use locbal_core::diagnostics::{efficiency_table, EfficiencyRow, EssReport};
use locbal_core::kernels::{run_chain, Clock, KernelSpec, RunConfig, Summary, Trace};
use locbal_core::DiscreteTarget;
use rayon::prelude::*;
use serde::Serialize;

use crate::clock::MonotonicClock;
use crate::config::{Config, ConfigSource};
use crate::error::{CliError, CliResult};
use crate::io::{ensure_dir, fmt_f64, write_json, write_manifest, write_trace, Manifest};
use crate::targets::{
    binary_summaries, build_target, initial_state, ising_summaries, permutation_summaries,
    BuiltTarget,
};

#[derive(Debug, Clone)]
pub struct KernelResult {
    pub trace: Trace,
    pub ess: EssReport,
}

pub fn parse_kernels(names: &[String]) -> CliResult<Vec<KernelSpec>> {
    if names.is_empty() {
        return Err(CliError::Usage(
            "run.kernels must list at least one kernel".into(),
        ));
    }
    names
        .iter()
        .map(|n| KernelSpec::from_name(n).map_err(|e| CliError::Usage(format!("run.kernels: {e}"))))
        .collect()
}

fn run_one<T: DiscreteTarget>(
    spec: &KernelSpec,
    target: &T,
    init: T::State,
    summaries: &[Summary<T::State>],
    cfg: &Config,
    seed: u64,
    clock: &dyn Clock,
) -> CliResult<KernelResult> {
    let run = RunConfig {
        iterations: cfg.run.iterations,
        thin: cfg.run.thin,
        burn_in: cfg.run.burn_in,
        seed,
        stream: 0,
    };
    let res = run_chain(spec, target, init, &run, summaries, clock)?;
    let ess = EssReport::from_trace(&res.trace)?;
    Ok(KernelResult {
        trace: res.trace,
        ess,
    })
}

/// Run one kernel on the configured target; every kernel shares the seed,
/// the RNG stream and the initial state.
pub fn run_kernel(
    cfg: &Config,
    target: &BuiltTarget,
    spec: &KernelSpec,
) -> CliResult<KernelResult> {
    let seed = cfg.seed()?;
    let clock = MonotonicClock::new();
    let names = &cfg.run.summaries;
    match target {
        BuiltTarget::Binary(t) => run_one(
            spec,
            t,
            initial_state(t, seed),
            &binary_summaries(t, names)?,
            cfg,
            seed,
            &clock,
        ),
        BuiltTarget::Permutation(t) => run_one(
            spec,
            t,
            initial_state(t, seed),
            &permutation_summaries(t, names)?,
            cfg,
            seed,
            &clock,
        ),
        BuiltTarget::Ising(t) => run_one(
            spec,
            t,
            initial_state(t, seed),
            &ising_summaries(t, names)?,
            cfg,
            seed,
            &clock,
        ),
    }
}

pub fn thread_pool(threads: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Runtime(anyhow::anyhow!("cannot start worker threads: {e}")))
}

/// All kernels of `cfg.run.kernels` on the configured target.
pub fn run_all(
    cfg: &Config,
    pool: &rayon::ThreadPool,
) -> CliResult<(BuiltTarget, Vec<KernelResult>)> {
    let specs = parse_kernels(&cfg.run.kernels)?;
    let target = build_target(cfg.target()?, cfg.seed()?)?;
    let results = pool.install(|| {
        specs
            .par_iter()
            .map(|s| run_kernel(cfg, &target, s))
            .collect::<CliResult<Vec<_>>>()
    })?;
    Ok((target, results))
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub cell: Vec<(String, String)>,
    pub scheme: String,
    pub acceptance_rate: f64,
    pub moved_rate: bool,
    pub flips_per_second: f64,
    /// `log(flips/sec)` minus the reference scheme's.
    pub log_relative_flips: f64,
    pub ess_per_second: f64,
    pub relative_ess: f64,
}

fn cartesian(axes: &[(String, Vec<toml::Value>)]) -> Vec<Vec<(String, toml::Value)>> {
    let mut cells: Vec<Vec<(String, toml::Value)>> = vec![Vec::new()];
    for (key, values) in axes {
        cells = cells
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.push((key.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    cells
}

fn value_label(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Rows of the sweep table, one per (cell, kernel).
pub fn run_sweep(
    source: &ConfigSource,
    cfg: &Config,
    pool: &rayon::ThreadPool,
) -> CliResult<Vec<SweepRow>> {
    let axes: Vec<(String, Vec<toml::Value>)> = cfg
        .sweep
        .axes
        .iter()
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    if axes.iter().any(|(_, v)| v.is_empty()) {
        return Err(CliError::Usage(
            "every sweep axis needs at least one value".into(),
        ));
    }
    let cells = cartesian(&axes);
    let mut configs = Vec::with_capacity(cells.len());
    for cell in &cells {
        let mut src = source.clone();
        for (k, v) in cell {
            src.set_value(k, v.clone())?;
        }
        configs.push(src.parse()?);
    }
    let specs = parse_kernels(&cfg.run.kernels)?;
    let targets = configs
        .iter()
        .map(|c| build_target(c.target()?, c.seed()?))
        .collect::<CliResult<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..specs.len()).map(move |k| (c, k)))
        .collect();
    let results = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, k)| run_kernel(&configs[c], &targets[c], &specs[k]))
            .collect::<CliResult<Vec<_>>>()
    })?;
    let mut rows = Vec::new();
    for (c, cell) in cells.iter().enumerate() {
        let chunk = &results[c * specs.len()..(c + 1) * specs.len()];
        let reports: Vec<EssReport> = chunk.iter().map(|r| r.ess.clone()).collect();
        let table = efficiency_table(&reports, &reference_name(cfg)?)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let ref_flips = table
            .iter()
            .find(|r| r.scheme == reference_name(cfg).unwrap_or_default())
            .map(|r| r.flips_per_second);
        for (res, row) in chunk.iter().zip(&table) {
            rows.push(SweepRow {
                cell: cell
                    .iter()
                    .map(|(k, v)| (k.clone(), value_label(v)))
                    .collect(),
                scheme: res.trace.scheme.clone(),
                acceptance_rate: res.trace.acceptance_rate(),
                moved_rate: res.trace.moved_rate,
                flips_per_second: row.flips_per_second,
                log_relative_flips: ref_flips
                    .map_or(f64::NAN, |f| row.flips_per_second.ln() - f.ln()),
                ess_per_second: row.ess_per_second,
                relative_ess: row.relative,
            });
        }
    }
    Ok(rows)
}

fn reference_name(cfg: &Config) -> CliResult<String> {
    let spec = KernelSpec::from_name(&cfg.run.reference)
        .map_err(|e| CliError::Usage(format!("run.reference: {e}")))?;
    Ok(spec.name())
}

pub fn write_efficiency_csv(
    path: &Path,
    rows: &[EfficiencyRow],
    results: &[KernelResult],
) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "scheme",
        "ess_per_second",
        "relative_ess",
        "acceptance_rate",
        "moved_rate",
        "flips_per_second",
    ])?;
    for (row, res) in rows.iter().zip(results) {
        w.write_record([
            row.scheme.clone(),
            fmt_f64(row.ess_per_second),
            fmt_f64(row.relative),
            fmt_f64(row.acceptance_rate),
            res.trace.moved_rate.to_string(),
            fmt_f64(row.flips_per_second),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    let keys: Vec<String> = rows
        .first()
        .map(|r| r.cell.iter().map(|(k, _)| k.clone()).collect())
        .unwrap_or_default();
    let mut header = keys.clone();
    header.extend(
        [
            "scheme",
            "acceptance_rate",
            "moved_rate",
            "flips_per_second",
            "log_relative_flips",
            "ess_per_second",
            "relative_ess",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    for r in rows {
        let mut rec: Vec<String> = r.cell.iter().map(|(_, v)| v.clone()).collect();
        rec.extend([
            r.scheme.clone(),
            fmt_f64(r.acceptance_rate),
            r.moved_rate.to_string(),
            fmt_f64(r.flips_per_second),
            fmt_f64(r.log_relative_flips),
            fmt_f64(r.ess_per_second),
            fmt_f64(r.relative_ess),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_simulate(source: &ConfigSource) -> CliResult<()> {
    let cfg = source.parse()?;
    let seed = cfg.seed()?;
    let out = cfg.out_dir()?;
    ensure_dir(&out)?;
    let pool = thread_pool(cfg.threads)?;
    let mut outputs = Vec::new();
    if !cfg.sweep.axes.is_empty() {
        let rows = run_sweep(source, &cfg, &pool)?;
        write_sweep_csv(&out.join("sweep.csv"), &rows)?;
        outputs.push("sweep.csv".to_string());
    } else {
        let (target, results) = run_all(&cfg, &pool)?;
        let traces = out.join("traces");
        ensure_dir(&traces)?;
        let desc = target.description();
        for r in &results {
            write_trace(&traces, &r.trace.scheme, &r.trace, &desc, Some(&r.ess))?;
            outputs.push(format!("traces/{}.csv", r.trace.scheme));
            outputs.push(format!("traces/{}.json", r.trace.scheme));
        }
        let reports: Vec<EssReport> = results.iter().map(|r| r.ess.clone()).collect();
        let table = efficiency_table(&reports, &reference_name(&cfg)?)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        write_efficiency_csv(&out.join("efficiency.csv"), &table, &results)?;
        write_json(&out.join("efficiency.json"), &table)?;
        outputs.extend(["efficiency.csv".to_string(), "efficiency.json".to_string()]);
    }
    let manifest = Manifest {
        command: "simulate",
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: source.hash(),
        seed: Some(seed),
        config: &source.value,
        outputs,
    };
    write_manifest(&out, &manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cartesian_product_order() {
        let axes = vec![
            (
                "a".to_string(),
                vec![toml::Value::Integer(1), toml::Value::Integer(2)],
            ),
            ("b".to_string(), vec![toml::Value::String("x".into())]),
        ];
        let cells = cartesian(&axes);
        assert_eq!(cells.len(), 2);
        assert_eq!(value_label(&cells[1][0].1), "2");
        assert_eq!(value_label(&cells[1][1].1), "x");
    }
}
