//! Output analysis: autocorrelation, effective sample size, batch means and
//! relative-efficiency tables.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernels::Trace;
use crate::math::{log, sqrt};
use crate::target::DiscreteTarget;

/// Minimum series length accepted by [`ess`].
pub const MIN_ESS_LEN: usize = 100;

struct Centered {
    dev: Vec<f64>,
    c0: f64,
}

impl Centered {
    fn new(series: &[f64]) -> Self {
        let n = series.len() as f64;
        let mean = series.iter().sum::<f64>() / n;
        let dev: Vec<f64> = series.iter().map(|v| v - mean).collect();
        let c0 = dev.iter().map(|d| d * d).sum::<f64>();
        Self { dev, c0 }
    }

    fn is_constant(&self) -> bool {
        // exact zero or pure rounding noise around the mean
        let scale = self.dev.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        self.c0 == 0.0 || scale == 0.0
    }

    /// Biased autocorrelation at `lag`.
    fn rho(&self, lag: usize) -> f64 {
        let d = &self.dev;
        let s: f64 = d[..d.len() - lag]
            .iter()
            .zip(&d[lag..])
            .map(|(a, b)| a * b)
            .sum();
        s / self.c0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Autocorrelation {
    /// `ρ̂(1..=max_lag)`.
    pub values: Vec<f64>,
    /// The series had no variation; `values` are all zero.
    pub constant: bool,
}

/// Biased (`1/N`-normalized) autocorrelations at lags `1..=max_lag`.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Autocorrelation> {
    if max_lag == 0 || series.len() <= max_lag {
        return Err(Error::InvalidArgument(format!(
            "need series length > max_lag >= 1, got length {} and max_lag {max_lag}",
            series.len()
        )));
    }
    let c = Centered::new(series);
    if c.is_constant() {
        return Ok(Autocorrelation {
            values: alloc::vec![0.0; max_lag],
            constant: true,
        });
    }
    Ok(Autocorrelation {
        values: (1..=max_lag).map(|k| c.rho(k)).collect(),
        constant: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssEstimate {
    pub ess: f64,
    /// Integrated autocorrelation time `1 + 2 Σ ρ̂(k)`.
    pub tau: f64,
    /// Number of autocorrelation lags summed.
    pub lags: usize,
    /// The series was constant; `ess` is reported as `N`.
    pub constant: bool,
}

/// ESS with Geyer's initial monotone positive sequence truncation.
///
/// Autocorrelations are computed on demand up to the truncation point, so
/// the cost is `O(N · lags)`. `τ` is floored at `1 / log10(N)`, which caps
/// super-efficient estimates at `N log10 N`.
pub fn ess(series: &[f64]) -> Result<EssEstimate> {
    let n = series.len();
    if n < MIN_ESS_LEN {
        return Err(Error::InvalidArgument(format!(
            "ESS needs at least {MIN_ESS_LEN} samples, got {n}"
        )));
    }
    let c = Centered::new(series);
    if c.is_constant() {
        return Ok(EssEstimate {
            ess: n as f64,
            tau: 1.0,
            lags: 0,
            constant: true,
        });
    }
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    let mut lags = 0;
    while 2 * k + 1 < n {
        let r0 = if k == 0 { 1.0 } else { c.rho(2 * k) };
        let r1 = c.rho(2 * k + 1);
        lags = 2 * k + 1;
        let pair = r0 + r1;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        k += 1;
    }
    let floor = 1.0 / (log(n as f64) / core::f64::consts::LN_10);
    let tau = (2.0 * sum - 1.0).max(floor);
    Ok(EssEstimate {
        ess: n as f64 / tau,
        tau,
        lags,
        constant: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchMeans {
    pub mean: f64,
    /// Estimated asymptotic variance `σ²` of the sample mean times `N`.
    pub sigma2: f64,
    /// Approximate standard error of `sigma2` (`σ̂² √(2/(B-1))`).
    pub std_error: f64,
    pub batch_size: usize,
}

/// Non-overlapping batch means with `batches` batches; a trailing partial
/// batch is dropped.
pub fn batch_means(series: &[f64], batches: usize) -> Result<BatchMeans> {
    if batches < 2 || series.len() < 2 * batches {
        return Err(Error::InvalidArgument(format!(
            "batch means needs >= 2 batches of >= 2 samples, got {} samples for {batches} batches",
            series.len()
        )));
    }
    let b = series.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|i| series[i * b..(i + 1) * b].iter().sum::<f64>() / b as f64)
        .collect();
    let mean = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (batches - 1) as f64;
    let sigma2 = b as f64 * var;
    Ok(BatchMeans {
        mean,
        sigma2,
        std_error: sigma2 * sqrt(2.0 / (batches - 1) as f64),
        batch_size: b,
    })
}

/// Coordinates where two states differ.
pub fn hamming_distance<T: DiscreteTarget>(
    target: &T,
    a: &T::State,
    b: &T::State,
) -> Result<usize> {
    target.hamming(a, b)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EssReport {
    pub scheme: String,
    pub summaries: Vec<String>,
    pub ess: Vec<f64>,
    pub tau: Vec<f64>,
    pub ess_per_second: Vec<f64>,
    /// MH acceptance rate, or moved-rate when `moved_rate` is set.
    pub acceptance_rate: f64,
    pub moved_rate: bool,
    pub flips_per_second: f64,
    pub wall_seconds: f64,
    /// Summaries whose series was constant.
    pub constant: Vec<String>,
}

impl EssReport {
    pub fn from_trace(trace: &Trace) -> Result<Self> {
        let mut r = EssReport {
            scheme: trace.scheme.clone(),
            summaries: trace.summary_names.clone(),
            ess: Vec::new(),
            tau: Vec::new(),
            ess_per_second: Vec::new(),
            acceptance_rate: trace.acceptance_rate(),
            moved_rate: trace.moved_rate,
            flips_per_second: trace.flips_per_second(),
            wall_seconds: trace.wall_seconds,
            constant: Vec::new(),
        };
        for (name, series) in trace.summary_names.iter().zip(&trace.summaries) {
            let e = ess(series)?;
            if e.constant {
                r.constant.push(name.clone());
            }
            r.ess.push(e.ess);
            r.tau.push(e.tau);
            r.ess_per_second.push(if trace.wall_seconds > 0.0 {
                e.ess / trace.wall_seconds
            } else {
                0.0
            });
        }
        Ok(r)
    }

    /// ESS per second averaged over summaries.
    pub fn mean_ess_per_second(&self) -> f64 {
        if self.ess_per_second.is_empty() {
            0.0
        } else {
            self.ess_per_second.iter().sum::<f64>() / self.ess_per_second.len() as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EfficiencyRow {
    pub scheme: String,
    pub ess_per_second: f64,
    /// `ess_per_second` divided by the reference scheme's.
    pub relative: f64,
    pub acceptance_rate: f64,
    pub flips_per_second: f64,
}

/// Per-scheme ESS/time averaged over summaries, relative to `reference`.
pub fn efficiency_table(reports: &[EssReport], reference: &str) -> Result<Vec<EfficiencyRow>> {
    let base = reports
        .iter()
        .find(|r| r.scheme == reference)
        .ok_or_else(|| {
            Error::InvalidArgument(format!("no trace for reference scheme '{reference}'"))
        })?
        .mean_ess_per_second();
    Ok(reports
        .iter()
        .map(|r| {
            let e = r.mean_ess_per_second();
            EfficiencyRow {
                scheme: r.scheme.clone(),
                ess_per_second: e,
                relative: if base > 0.0 { e / base } else { f64::NAN },
                acceptance_rate: r.acceptance_rate,
                flips_per_second: r.flips_per_second,
            }
        })
        .collect())
}
