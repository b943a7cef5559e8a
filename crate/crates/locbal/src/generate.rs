//! `generate`: synthetic record-linkage data with known truth.

use std::path::Path;

use locbal_core::recordlinkage::{generate_synthetic, SyntheticConfig, SyntheticData};
use locbal_core::rng::chain_rng;

use crate::config::{ConfigSource, GenerateSection};
use crate::error::{CliError, CliResult};
use crate::io::{ensure_dir, write_manifest, Manifest};

pub fn synthetic_config(g: &GenerateSection) -> CliResult<SyntheticConfig> {
    if g.categories.is_empty() || g.categories.contains(&0) {
        return Err(CliError::Usage(
            "generate.categories needs at least one positive entry".into(),
        ));
    }
    Ok(SyntheticConfig {
        lambda: g.lambda,
        p_match: g.p_match,
        beta: g.beta,
        theta: g
            .categories
            .iter()
            .map(|&m| vec![1.0 / m as f64; m])
            .collect(),
    })
}

pub fn generate(g: &GenerateSection, seed: u64) -> CliResult<SyntheticData> {
    let cfg = synthetic_config(g)?;
    generate_synthetic(&cfg, &mut chain_rng(seed, 0))
        .map_err(|e| CliError::Usage(format!("generate: {e}")))
}

/// Columns `f0, f1, ...` with values `v<code>`.
pub fn write_records(path: &Path, rows: &[Vec<u32>]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    let fields = rows.first().map_or(0, |r| r.len());
    w.write_record((0..fields).map(|s| format!("f{s}")))?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("v{v}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_truth(path: &Path, data: &SyntheticData) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x_index", "y_index"])?;
    for (i, j) in data.truth.pairs() {
        w.write_record([i.to_string(), j.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_generate(source: &ConfigSource) -> CliResult<SyntheticData> {
    let cfg = source.parse()?;
    let seed = cfg.seed()?;
    let out = cfg.out_dir()?;
    let data = generate(&cfg.generate, seed)?;
    ensure_dir(&out)?;
    write_records(&out.join("x.csv"), &data.x)?;
    write_records(&out.join("y.csv"), &data.y)?;
    write_truth(&out.join("truth.csv"), &data)?;
    let manifest = Manifest {
        command: "generate",
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: source.hash(),
        seed: Some(seed),
        config: &source.value,
        outputs: vec!["x.csv".into(), "y.csv".into(), "truth.csv".into()],
    };
    write_manifest(&out, &manifest)?;
    Ok(data)
}
