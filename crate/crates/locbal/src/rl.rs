//! `rl`: record linkage between two CSV files.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use locbal_core::diagnostics::EssReport;
use locbal_core::kernels::KernelSpec;
use locbal_core::recordlinkage::{
    run_rl_sampler, Dataset, HyperConfig, LambdaSupport, LinkageModel, PMatchUpdate, RlConfig,
    RlResult,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::clock::MonotonicClock;
use crate::config::{ConfigSource, RlSection};
use crate::error::{CliError, CliResult};
use crate::io::{ensure_dir, fmt_f64, write_json, write_manifest, write_trace, Manifest};
use crate::simulate::thread_pool;

/// Both files coded against shared per-field category tables.
#[derive(Debug, Clone)]
pub struct RecordTables {
    pub fields: Vec<String>,
    pub x: Vec<Vec<u32>>,
    pub y: Vec<Vec<u32>>,
    /// Category labels of each field, indexed by code.
    pub labels: Vec<Vec<String>>,
}

impl RecordTables {
    pub fn dataset(&self) -> CliResult<Dataset> {
        let categories = self.labels.iter().map(|l| l.len()).collect();
        Ok(Dataset::from_codes(&self.x, &self.y, categories)?)
    }
}

fn ingest_error(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{}: {msg}", path.display()))
}

fn read_rows(path: &Path, fields: &[String]) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ingest_error(path, format!("cannot open: {e}")))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| ingest_error(path, e))?
        .iter()
        .map(String::from)
        .collect();
    let wanted: Vec<String> = if fields.is_empty() {
        header.clone()
    } else {
        fields.to_vec()
    };
    let columns = wanted
        .iter()
        .map(|f| {
            header
                .iter()
                .position(|h| h == f)
                .ok_or_else(|| ingest_error(path, format!("no column named '{f}'")))
        })
        .collect::<CliResult<Vec<usize>>>()?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            ingest_error(path, format!("line {line}: {e}"))
        })?;
        rows.push(
            columns
                .iter()
                .map(|&c| rec.get(c).unwrap_or("").to_string())
                .collect(),
        );
    }
    if rows.is_empty() {
        return Err(ingest_error(path, "no records"));
    }
    Ok((wanted, rows))
}

/// Read two CSV files with header rows; every selected column is a
/// categorical field (all columns of `x` when `fields` is empty).
pub fn read_record_tables(x: &Path, y: &Path, fields: &[String]) -> CliResult<RecordTables> {
    let (fields, xs) = read_rows(x, fields)?;
    let (_, ys) = read_rows(y, &fields)?;
    let mut codes: Vec<HashMap<String, u32>> = vec![HashMap::new(); fields.len()];
    let mut labels: Vec<Vec<String>> = vec![Vec::new(); fields.len()];
    let mut encode = |rows: Vec<Vec<String>>| -> Vec<Vec<u32>> {
        rows.into_iter()
            .map(|row| {
                row.into_iter()
                    .enumerate()
                    .map(|(s, v)| {
                        let next = labels[s].len() as u32;
                        *codes[s].entry(v.clone()).or_insert_with(|| {
                            labels[s].push(v);
                            next
                        })
                    })
                    .collect()
            })
            .collect()
    };
    let x = encode(xs);
    let y = encode(ys);
    Ok(RecordTables {
        fields,
        x,
        y,
        labels,
    })
}

pub fn hyper_config(s: &RlSection) -> CliResult<HyperConfig> {
    let p_update = match s.p_update.as_str() {
        "conjugate" => PMatchUpdate::Conjugate,
        "transposed" => PMatchUpdate::Transposed,
        other => {
            return Err(CliError::Usage(format!(
                "rl.p_update must be conjugate or transposed, got '{other}'"
            )))
        }
    };
    let lambda_support = match s.lambda_support.as_str() {
        "max" => LambdaSupport::Max,
        "min" => LambdaSupport::Min,
        other => {
            return Err(CliError::Usage(format!(
                "rl.lambda_support must be max or min, got '{other}'"
            )))
        }
    };
    Ok(HyperConfig {
        p_update,
        lambda_support,
    })
}

pub fn rl_config(s: &RlSection, seed: u64) -> CliResult<RlConfig> {
    let scheme =
        KernelSpec::from_name(&s.scheme).map_err(|e| CliError::Usage(format!("rl.scheme: {e}")))?;
    Ok(RlConfig {
        scheme,
        iterations: s.iterations,
        moves_per_sweep: s.moves_per_sweep,
        burn_in: s.burn_in,
        thin: s.thin,
        beta: s.beta,
        hyper: hyper_config(s)?,
        seed,
        stream: 0,
        references: Vec::new(),
        initial: None,
    })
}

/// Independent chains on RNG streams `0..replicates`.
pub fn run_replicates(
    model: &LinkageModel,
    cfg: &RlConfig,
    replicates: usize,
    threads: usize,
) -> CliResult<Vec<RlResult>> {
    if replicates == 0 {
        return Err(CliError::Usage("rl.replicates must be >= 1".into()));
    }
    let pool = thread_pool(threads)?;
    pool.install(|| {
        (0..replicates)
            .into_par_iter()
            .map(|k| {
                let mut c = cfg.clone();
                c.stream = k as u64;
                run_rl_sampler(model, &c, &MonotonicClock::new()).map_err(CliError::from)
            })
            .collect()
    })
}

/// Per-pair probabilities from every replicate, over pairs matched in any.
pub fn replicate_table(results: &[RlResult]) -> Vec<((usize, usize), Vec<f64>)> {
    let pairs: BTreeSet<(u32, u32)> = results
        .iter()
        .flat_map(|r| r.pair_counts.keys().copied())
        .collect();
    pairs
        .into_iter()
        .map(|(i, j)| {
            let (i, j) = (i as usize, j as usize);
            (
                (i, j),
                results.iter().map(|r| r.pair_probability(i, j)).collect(),
            )
        })
        .collect()
}

pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len();
    if n < 2 || b.len() != n {
        return None;
    }
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// Correlation of the first two replicates' pair probabilities.
pub fn replicate_correlation(results: &[RlResult]) -> Option<f64> {
    if results.len() < 2 {
        return None;
    }
    let table = replicate_table(results);
    let a: Vec<f64> = table.iter().map(|(_, p)| p[0]).collect();
    let b: Vec<f64> = table.iter().map(|(_, p)| p[1]).collect();
    pearson(&a, &b)
}

/// Pair probabilities averaged over replicates.
pub fn pooled_pairs(results: &[RlResult], floor: f64) -> Vec<(usize, usize, f64)> {
    replicate_table(results)
        .into_iter()
        .map(|((i, j), ps)| (i, j, ps.iter().sum::<f64>() / ps.len() as f64))
        .filter(|&(_, _, p)| p >= floor)
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplicateSummary {
    pub stream: u64,
    pub ess: EssReport,
    pub mean_matches: f64,
    pub mean_lambda: f64,
    pub mean_p_match: f64,
    pub final_matches: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RlSummary {
    pub scheme: String,
    pub nx: usize,
    pub ny: usize,
    pub fields: Vec<String>,
    pub beta: f64,
    pub sweeps: u64,
    pub moves_per_sweep: usize,
    pub replicates: Vec<ReplicateSummary>,
    pub replicate_correlation: Option<f64>,
    pub pairs_reported: usize,
    pub floor: f64,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn cmd_rl(source: &ConfigSource) -> CliResult<RlSummary> {
    let cfg = source.parse()?;
    let seed = cfg.seed()?;
    let out = cfg.out_dir()?;
    let s = &cfg.rl;
    let x =
        s.x.as_ref()
            .ok_or_else(|| CliError::Usage("no x file (rl.x or --x)".into()))?;
    let y =
        s.y.as_ref()
            .ok_or_else(|| CliError::Usage("no y file (rl.y or --y)".into()))?;
    if !(0.0..=1.0).contains(&s.floor) {
        return Err(CliError::Usage(format!(
            "rl.floor must lie in [0, 1], got {}",
            s.floor
        )));
    }
    let tables = read_record_tables(x, y, &s.fields)?;
    let model = LinkageModel::new(tables.dataset()?, s.beta)
        .map_err(|e| CliError::Usage(format!("rl: {e}")))?;
    let rl = rl_config(s, seed)?;
    let results = run_replicates(&model, &rl, s.replicates, cfg.threads)?;

    ensure_dir(&out)?;
    let mut outputs = Vec::new();
    let mut replicates = Vec::new();
    for r in &results {
        let ess = EssReport::from_trace(&r.trace)?;
        let stem = format!("trace_rep{}", r.trace.stream);
        write_trace(&out, &stem, &r.trace, "record-linkage", Some(&ess))?;
        outputs.extend([format!("{stem}.csv"), format!("{stem}.json")]);
        replicates.push(ReplicateSummary {
            stream: r.trace.stream,
            mean_matches: mean(r.trace.summary("matches").unwrap_or(&[])),
            mean_lambda: mean(r.trace.summary("lambda").unwrap_or(&[])),
            mean_p_match: mean(r.trace.summary("p_match").unwrap_or(&[])),
            final_matches: r.matching.n_matched(),
            ess,
        });
    }
    let pairs = pooled_pairs(&results, s.floor);
    let mut w = csv::Writer::from_path(out.join("pairs.csv"))?;
    w.write_record(["i", "j", "probability"])?;
    for (i, j, p) in &pairs {
        w.write_record([i.to_string(), j.to_string(), fmt_f64(*p)])?;
    }
    w.flush()?;
    outputs.push("pairs.csv".into());
    if results.len() >= 2 {
        let mut w = csv::Writer::from_path(out.join("replicates.csv"))?;
        let mut header = vec!["i".to_string(), "j".to_string()];
        header.extend((0..results.len()).map(|k| format!("rep{k}")));
        w.write_record(&header)?;
        for ((i, j), ps) in replicate_table(&results) {
            if ps.iter().any(|&p| p >= s.floor) {
                let mut rec = vec![i.to_string(), j.to_string()];
                rec.extend(ps.iter().map(|&p| fmt_f64(p)));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        outputs.push("replicates.csv".into());
    }
    let summary = RlSummary {
        scheme: rl.scheme.name(),
        nx: tables.x.len(),
        ny: tables.y.len(),
        fields: tables.fields.clone(),
        beta: s.beta,
        sweeps: s.iterations,
        moves_per_sweep: s.moves_per_sweep,
        replicates,
        replicate_correlation: replicate_correlation(&results),
        pairs_reported: pairs.len(),
        floor: s.floor,
    };
    write_json(&out.join("summary.json"), &summary)?;
    outputs.push("summary.json".into());
    let manifest = Manifest {
        command: "rl",
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: source.hash(),
        seed: Some(seed),
        config: &source.value,
        outputs,
    };
    write_manifest(&out, &manifest)?;
    Ok(summary)
}

/// Pairs of a truth file (`x_index,y_index` with a header row).
pub fn read_truth(path: &Path) -> CliResult<Vec<(usize, usize)>> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| ingest_error(path, format!("cannot open: {e}")))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ingest_error(path, e))?;
        let parse = |k: usize| -> CliResult<usize> {
            rec.get(k)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| ingest_error(path, format!("bad index in record {:?}", rec)))
        };
        out.push((parse(0)?, parse(1)?));
    }
    Ok(out)
}

/// Number of categories of each field.
pub fn category_counts(tables: &RecordTables) -> BTreeMap<String, usize> {
    tables
        .fields
        .iter()
        .cloned()
        .zip(tables.labels.iter().map(|l| l.len()))
        .collect()
}
