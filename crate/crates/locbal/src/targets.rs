//! Building targets, initial states and summaries from a `[target]` table.

use std::path::Path;

use locbal_core::kernels::Summary;
use locbal_core::rng::{chain_rng, ChainRng};
use locbal_core::target::{Boundary, IsingPreset};
use locbal_core::{BinaryTarget, DiscreteTarget, IsingTarget, PermState, PermutationTarget};

use crate::config::{TargetConfig, TargetKind};
use crate::error::{CliError, CliResult};
use crate::io::read_matrix_csv;

/// RNG stream reserved for generating target parameters.
pub const TARGET_STREAM: u64 = u64::MAX;
/// RNG stream reserved for drawing the initial state.
pub const INIT_STREAM: u64 = u64::MAX - 1;

/// Default disk radius as a fraction of the Ising grid side.
pub const DEFAULT_RADIUS: f64 = 0.25;

#[derive(Debug, Clone)]
pub enum BuiltTarget {
    Binary(BinaryTarget),
    Permutation(PermutationTarget),
    Ising(IsingTarget),
}

impl BuiltTarget {
    pub fn description(&self) -> String {
        match self {
            BuiltTarget::Binary(t) => format!("binary(n={})", t.n()),
            BuiltTarget::Permutation(t) => format!("permutation(n={})", t.n()),
            BuiltTarget::Ising(t) => format!("ising(n={}, lambda={})", t.side(), t.interaction()),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// `name(a, b, ...)` → `(name, [a, b, ...])`; a bare `name` has no arguments.
pub fn parse_call(spec: &str) -> CliResult<(String, Vec<f64>)> {
    let spec = spec.trim();
    let Some(open) = spec.find('(') else {
        return Ok((spec.to_ascii_lowercase(), Vec::new()));
    };
    let inner = spec[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| usage(format!("generator '{spec}' is missing ')'")))?;
    let args = inner
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("generator '{spec}': '{s}' is not a number")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok((spec[..open].trim().to_ascii_lowercase(), args))
}

fn need_n(cfg: &TargetConfig) -> CliResult<usize> {
    cfg.n.ok_or_else(|| usage("target.n is required"))
}

pub fn build_target(cfg: &TargetConfig, seed: u64) -> CliResult<BuiltTarget> {
    let mut rng = chain_rng(seed, TARGET_STREAM);
    Ok(match cfg.kind {
        TargetKind::Binary => BuiltTarget::Binary(build_binary(cfg, &mut rng)?),
        TargetKind::Permutation => BuiltTarget::Permutation(build_permutation(cfg, &mut rng)?),
        TargetKind::Ising => BuiltTarget::Ising(build_ising(cfg, &mut rng)?),
    })
}

fn build_binary(cfg: &TargetConfig, rng: &mut ChainRng) -> CliResult<BinaryTarget> {
    if let Some(p) = &cfg.p {
        if let Some(n) = cfg.n {
            if n != p.len() {
                return Err(usage(format!(
                    "target.n = {n} but target.p has {} entries",
                    p.len()
                )));
            }
        }
        return Ok(BinaryTarget::new(p.clone())?);
    }
    let n = need_n(cfg)?;
    let generator = cfg.generator.as_deref().unwrap_or("iid-uniform(0.2,0.8)");
    match parse_call(generator)? {
        (name, args) if name == "iid-uniform" && args.len() == 2 => {
            Ok(BinaryTarget::iid_uniform(n, args[0], args[1], rng)?)
        }
        _ => Err(usage(format!(
            "unknown binary generator '{generator}', expected iid-uniform(a,b)"
        ))),
    }
}

fn csv_path(spec: &str) -> Option<&Path> {
    spec.strip_prefix("csv:").map(Path::new)
}

fn build_permutation(cfg: &TargetConfig, rng: &mut ChainRng) -> CliResult<PermutationTarget> {
    let weights = cfg.weights.as_deref().unwrap_or("lognormal");
    if let Some(path) = csv_path(weights) {
        let (rows, cols, w) = read_matrix_csv(path)?;
        if rows != cols {
            return Err(usage(format!(
                "{}: weight matrix is {rows}x{cols}, expected square",
                path.display()
            )));
        }
        if cfg.n.is_some_and(|n| n != rows) {
            return Err(usage(format!(
                "target.n disagrees with the {rows}x{rows} weight matrix"
            )));
        }
        return Ok(PermutationTarget::new(rows, &w)?);
    }
    let n = need_n(cfg)?;
    match parse_call(weights)? {
        (name, args) if name == "lognormal" => {
            let lambda = match (args.first(), cfg.lambda) {
                (Some(&l), _) => l,
                (None, Some(l)) => l,
                (None, None) => {
                    return Err(usage(
                        "lognormal weights need target.lambda or lognormal(λ)",
                    ))
                }
            };
            Ok(PermutationTarget::lognormal(n, lambda, rng)?)
        }
        (name, _) if name == "banded" => Ok(PermutationTarget::banded(n, rng)?),
        _ => Err(usage(format!(
            "unknown permutation weights '{weights}', expected lognormal, banded or csv:<path>"
        ))),
    }
}

fn build_ising(cfg: &TargetConfig, rng: &mut ChainRng) -> CliResult<IsingTarget> {
    let boundary = match cfg.boundary.as_deref().unwrap_or("periodic") {
        "periodic" => Boundary::Periodic,
        "free" => Boundary::Free,
        other => {
            return Err(usage(format!(
                "unknown boundary '{other}', expected periodic or free"
            )))
        }
    };
    let base = match cfg.preset {
        Some(i) => IsingPreset::target(i)?,
        None => IsingPreset {
            mu: 0.0,
            sigma: 0.0,
            lambda: 0.0,
        },
    };
    let preset = IsingPreset {
        mu: cfg.mu.unwrap_or(base.mu),
        sigma: cfg.sigma.unwrap_or(base.sigma),
        lambda: cfg.lambda.unwrap_or(base.lambda),
    };
    if let Some(spec) = &cfg.field {
        let path = csv_path(spec)
            .ok_or_else(|| usage(format!("target.field must be csv:<path>, got '{spec}'")))?;
        let (rows, cols, alpha) = read_matrix_csv(path)?;
        if rows != cols || cfg.n.is_some_and(|n| n != rows) {
            return Err(usage(format!(
                "{}: field is {rows}x{cols}, expected n x n",
                path.display()
            )));
        }
        return Ok(IsingTarget::new(rows, alpha, preset.lambda, boundary)?);
    }
    let n = need_n(cfg)?;
    let radius = cfg.radius.unwrap_or(DEFAULT_RADIUS);
    Ok(IsingTarget::disk_field(n, preset, radius, boundary, rng)?)
}

pub fn initial_state<T: DiscreteTarget>(target: &T, seed: u64) -> T::State {
    target.random_state(&mut chain_rng(seed, INIT_STREAM))
}

pub fn binary_summaries(
    target: &BinaryTarget,
    names: &[String],
) -> CliResult<Vec<Summary<Vec<u8>>>> {
    let t = target.clone();
    select(
        names,
        vec![
            Summary::new("ones", |x: &Vec<u8>| x.iter().map(|&b| f64::from(b)).sum()),
            Summary::new("log_density", move |x: &Vec<u8>| t.log_density(x)),
        ],
    )
}

pub fn permutation_summaries(
    target: &PermutationTarget,
    names: &[String],
) -> CliResult<Vec<Summary<PermState>>> {
    let t = target.clone();
    select(
        names,
        vec![
            Summary::new("hamming", |x: &PermState| {
                x.as_slice()
                    .iter()
                    .enumerate()
                    .filter(|&(i, &v)| v as usize != i)
                    .count() as f64
            }),
            Summary::new("log_density", move |x: &PermState| t.log_density(x)),
        ],
    )
}

pub fn ising_summaries(target: &IsingTarget, names: &[String]) -> CliResult<Vec<Summary<Vec<i8>>>> {
    let t = target.clone();
    select(
        names,
        vec![
            Summary::new("magnetization", |x: &Vec<i8>| IsingTarget::magnetization(x)),
            Summary::new("log_density", move |x: &Vec<i8>| t.log_density(x)),
        ],
    )
}

fn select<S>(names: &[String], all: Vec<Summary<S>>) -> CliResult<Vec<Summary<S>>> {
    if names.is_empty() {
        return Ok(all);
    }
    let available: Vec<String> = all.iter().map(|s| s.name.clone()).collect();
    let mut all: Vec<Option<Summary<S>>> = all.into_iter().map(Some).collect();
    names
        .iter()
        .map(|n| {
            let k = available.iter().position(|a| a == n).ok_or_else(|| {
                usage(format!(
                    "unknown summary '{n}', available: {}",
                    available.join(", ")
                ))
            })?;
            all[k]
                .take()
                .ok_or_else(|| usage(format!("summary '{n}' listed twice")))
        })
        .collect()
}
