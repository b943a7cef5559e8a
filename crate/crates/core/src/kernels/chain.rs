use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use super::{KernelSpec, Sampler};
use crate::error::{Error, Result};
use crate::rng::chain_rng;
use crate::target::DiscreteTarget;

/// Wall-clock source; the core crate has none, the std companion supplies a
/// monotonic one.
pub trait Clock {
    fn seconds(&self) -> f64;
}

/// Always reports zero elapsed time.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn seconds(&self) -> f64 {
        0.0
    }
}

/// A named scalar summary of the state, recorded while the chain runs.
pub struct Summary<S> {
    pub name: String,
    f: Box<dyn Fn(&S) -> f64 + Send + Sync>,
}

impl<S> Summary<S> {
    pub fn new(name: impl Into<String>, f: impl Fn(&S) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            f: Box::new(f),
        }
    }

    pub fn eval(&self, x: &S) -> f64 {
        (self.f)(x)
    }
}

impl<S> core::fmt::Debug for Summary<S> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Summary").field("name", &self.name).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunConfig {
    pub iterations: u64,
    pub thin: u64,
    pub burn_in: u64,
    pub seed: u64,
    /// Stream id for this chain within the seed.
    pub stream: u64,
}

impl RunConfig {
    pub fn new(iterations: u64, seed: u64) -> Self {
        Self {
            iterations,
            thin: 1,
            burn_in: 0,
            seed,
            stream: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trace {
    pub scheme: String,
    pub seed: u64,
    pub stream: u64,
    pub iterations: u64,
    pub thin: u64,
    pub burn_in: u64,
    pub summary_names: Vec<String>,
    /// `summaries[k][r]`: summary `k` at record `r`.
    pub summaries: Vec<Vec<f64>>,
    /// 1-based iteration of each record.
    pub record_iterations: Vec<u64>,
    /// Whether the step producing each record was accepted (moved, for HB).
    pub record_accepted: Vec<bool>,
    /// Cumulative flips at each record.
    pub record_flips: Vec<u64>,
    pub proposals: u64,
    pub accepted: u64,
    pub flips: u64,
    pub wall_seconds: f64,
    /// True when `accepted` counts moved steps rather than MH acceptances.
    pub moved_rate: bool,
}

impl Trace {
    pub fn records(&self) -> usize {
        self.record_iterations.len()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    /// Flips per wall-clock second; zero when no time was measured.
    pub fn flips_per_second(&self) -> f64 {
        if self.wall_seconds > 0.0 {
            self.flips as f64 / self.wall_seconds
        } else {
            0.0
        }
    }

    pub fn summary(&self, name: &str) -> Option<&[f64]> {
        let k = self.summary_names.iter().position(|n| n == name)?;
        Some(&self.summaries[k])
    }
}

#[derive(Debug, Clone)]
pub struct ChainResult<S> {
    pub trace: Trace,
    pub state: S,
}

/// Run `cfg.burn_in` unrecorded steps and then `cfg.iterations` recorded
/// ones, evaluating `summaries` after every `thin`-th step starting with the
/// first. Only the recorded phase is timed, and summary evaluation is
/// excluded from it.
pub fn run_chain<T, C>(
    spec: &KernelSpec,
    target: &T,
    init: T::State,
    cfg: &RunConfig,
    summaries: &[Summary<T::State>],
    clock: &C,
) -> Result<ChainResult<T::State>>
where
    T: DiscreteTarget,
    C: Clock + ?Sized,
{
    if cfg.iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be >= 1".into()));
    }
    if cfg.thin == 0 {
        return Err(Error::InvalidArgument("thin must be >= 1".into()));
    }
    target.validate(&init)?;
    let mut sampler = Sampler::new(spec.clone())?;
    let mut rng = chain_rng(cfg.seed, cfg.stream);
    let mut x = init;
    for _ in 0..cfg.burn_in {
        sampler.step(target, &mut x, &mut rng)?;
    }

    let records = cfg.iterations.div_ceil(cfg.thin) as usize;
    let mut trace = Trace {
        scheme: spec.name(),
        seed: cfg.seed,
        stream: cfg.stream,
        iterations: cfg.iterations,
        thin: cfg.thin,
        burn_in: cfg.burn_in,
        summary_names: summaries.iter().map(|s| s.name.clone()).collect(),
        summaries: summaries
            .iter()
            .map(|_| Vec::with_capacity(records))
            .collect(),
        record_iterations: Vec::with_capacity(records),
        record_accepted: Vec::with_capacity(records),
        record_flips: Vec::with_capacity(records),
        proposals: 0,
        accepted: 0,
        flips: 0,
        wall_seconds: 0.0,
        moved_rate: spec.reports_moved_rate(),
    };

    let mut elapsed = 0.0;
    let mut start = clock.seconds();
    for t in 0..cfg.iterations {
        let out = sampler.step(target, &mut x, &mut rng)?;
        trace.proposals += u64::from(out.proposals);
        trace.accepted += u64::from(out.accepted);
        trace.flips += u64::from(out.flips);
        if t % cfg.thin == 0 {
            if !summaries.is_empty() {
                elapsed += clock.seconds() - start;
            }
            for (k, s) in summaries.iter().enumerate() {
                trace.summaries[k].push(s.eval(&x));
            }
            trace.record_iterations.push(t + 1);
            trace.record_accepted.push(out.accepted > 0);
            trace.record_flips.push(trace.flips);
            if !summaries.is_empty() {
                start = clock.seconds();
            }
        }
    }
    trace.wall_seconds = elapsed + clock.seconds() - start;
    Ok(ChainResult { trace, state: x })
}
