//! Experiment configuration: a TOML document, optionally overridden by
//! `key.path=value` assignments from the command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Mandatory; all randomness derives from it.
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps and replicates; 0 means all cores.
    #[serde(default = "one")]
    pub threads: usize,
    pub target: Option<TargetConfig>,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub exact: ExactSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub rl: RlSection,
    #[serde(default)]
    pub generate: GenerateSection,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Binary,
    Permutation,
    Ising,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub kind: TargetKind,
    /// Bits, permutation size, or Ising grid side.
    pub n: Option<usize>,
    /// Binary: explicit probabilities.
    pub p: Option<Vec<f64>>,
    /// Binary: `iid-uniform(a,b)`.
    pub generator: Option<String>,
    /// Permutation: `lognormal`, `banded` or `csv:<path>`.
    pub weights: Option<String>,
    /// Permutation: log-weight standard deviation; Ising: interaction.
    pub lambda: Option<f64>,
    /// Ising: preset target 0..=4 providing `mu`, `sigma` and `lambda`.
    pub preset: Option<usize>,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    /// Ising: disk radius as a fraction of the side.
    pub radius: Option<f64>,
    /// Ising: `csv:<path>` with the external field as an n × n grid.
    pub field: Option<String>,
    /// Ising: `periodic` (default) or `free`.
    pub boundary: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub kernels: Vec<String>,
    pub iterations: u64,
    pub thin: u64,
    pub burn_in: u64,
    /// Empty means the target's defaults.
    pub summaries: Vec<String>,
    /// Scheme the efficiency table is relative to.
    pub reference: String,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            kernels: ["rw", "gb", "sqrt", "barker", "hb"]
                .map(String::from)
                .to_vec(),
            iterations: 10_000,
            thin: 1,
            burn_in: 0,
            summaries: Vec::new(),
            reference: "rw".into(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Config keys mapped to the values they take; the sweep runs the
    /// Cartesian product.
    pub axes: BTreeMap<String, Vec<toml::Value>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ExactSection {
    pub cap: usize,
}

impl Default for ExactSection {
    fn default() -> Self {
        Self {
            cap: locbal_core::exact::DEFAULT_CAP,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    /// Sizes of the random binary targets in the default battery.
    pub binary_n: Vec<usize>,
    pub permutation_n: Vec<usize>,
    /// Ising grid sides.
    pub ising_n: Vec<usize>,
    pub schemes: Vec<String>,
    /// Balancing functions whose flow matrices must be symmetric.
    pub balanced: Vec<String>,
    pub peskun_instances: usize,
    pub peskun_functions: usize,
    pub smoothness_binary_n: Vec<usize>,
    pub smoothness_permutation_n: Vec<usize>,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            binary_n: vec![3, 4, 5, 6, 7, 8],
            permutation_n: vec![3, 4, 5],
            ising_n: vec![3],
            schemes: ["rw", "gb", "sqrt", "barker", "hb", "block-barker-2x1"]
                .map(String::from)
                .to_vec(),
            balanced: ["sqrt", "barker", "min", "max"].map(String::from).to_vec(),
            peskun_instances: 20,
            peskun_functions: 10,
            smoothness_binary_n: vec![4, 6, 8, 10, 12],
            smoothness_permutation_n: vec![3, 4, 5],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RlSection {
    pub x: Option<PathBuf>,
    pub y: Option<PathBuf>,
    /// Columns used as fields; empty means every column.
    pub fields: Vec<String>,
    pub scheme: String,
    pub iterations: u64,
    pub moves_per_sweep: usize,
    pub burn_in: u64,
    pub thin: u64,
    pub beta: f64,
    pub replicates: usize,
    /// Pairs below this posterior probability are left out of pairs.csv.
    pub floor: f64,
    /// `conjugate` or `transposed`.
    pub p_update: String,
    /// `max` or `min`.
    pub lambda_support: String,
}

impl Default for RlSection {
    fn default() -> Self {
        Self {
            x: None,
            y: None,
            fields: Vec::new(),
            scheme: "barker".into(),
            iterations: 10_000,
            moves_per_sweep: 10,
            burn_in: 1_000,
            thin: 1,
            beta: locbal_core::recordlinkage::DEFAULT_BETA,
            replicates: 1,
            floor: 0.01,
            p_update: "conjugate".into(),
            lambda_support: "max".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateSection {
    pub lambda: f64,
    pub p_match: f64,
    pub beta: f64,
    /// Number of equally likely categories of each field.
    pub categories: Vec<usize>,
}

impl Default for GenerateSection {
    fn default() -> Self {
        Self {
            lambda: 200.0,
            p_match: 0.5,
            beta: 0.01,
            categories: vec![10, 10, 20, 5],
        }
    }
}

/// Raw TOML plus the overrides applied to it.
#[derive(Debug, Clone)]
pub struct ConfigSource {
    pub value: toml::Value,
    // original text while no override has been applied, for line-accurate errors
    text: Option<String>,
}

impl ConfigSource {
    pub fn empty() -> Self {
        Self {
            value: toml::Value::Table(Default::default()),
            text: None,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_str(&text).map_err(|e| match e {
            CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    #[allow(clippy::should_implement_trait)]
    pub fn from_str(text: &str) -> Result<Self, CliError> {
        let table: toml::Table =
            toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        Ok(Self {
            value: toml::Value::Table(table),
            text: Some(text.to_string()),
        })
    }

    /// Apply `key.path=value`; the value is parsed as TOML and falls back to
    /// a bare string.
    pub fn set(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("override '{assignment}' is not key=value")))?;
        self.set_value(key.trim(), parse_value(raw.trim()))
    }

    pub fn set_value(&mut self, key: &str, value: toml::Value) -> Result<(), CliError> {
        let parts: Vec<&str> = key.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(CliError::Usage(format!("bad override key '{key}'")));
        }
        let mut node = &mut self.value;
        for part in &parts[..parts.len() - 1] {
            let table = node.as_table_mut().ok_or_else(|| {
                CliError::Usage(format!("override '{key}': '{part}' is not a table"))
            })?;
            node = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(Default::default()));
        }
        let table = node.as_table_mut().ok_or_else(|| {
            CliError::Usage(format!("override '{key}' does not address a table entry"))
        })?;
        table.insert(parts[parts.len() - 1].to_string(), value);
        self.text = None;
        Ok(())
    }

    pub fn parse(&self) -> Result<Config, CliError> {
        let text = match &self.text {
            Some(t) => t.clone(),
            None => toml::to_string(&self.value)
                .map_err(|e| CliError::Usage(format!("invalid config: {e}")))?,
        };
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let text = toml::to_string(&self.value).unwrap_or_default();
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

impl Config {
    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Usage("a seed is required (config `seed` or --seed)".into()))
    }

    pub fn out_dir(&self) -> Result<PathBuf, CliError> {
        self.out.clone().ok_or_else(|| {
            CliError::Usage("an output directory is required (config `out` or --out)".into())
        })
    }

    pub fn target(&self) -> Result<&TargetConfig, CliError> {
        self.target
            .as_ref()
            .ok_or_else(|| CliError::Usage("config has no [target] section".into()))
    }
}
