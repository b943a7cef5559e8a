use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index::sample as sample_indices;
use rand::Rng;

use super::data::Dataset;
use super::hyper::{gibbs_update_hyper, HyperConfig};
use super::matching::Matching;
use super::model::{HyperState, LinkageModel, MatchingTarget};
use crate::error::{Error, Result};
use crate::kernels::{
    blockwise_step, BlockSelector, Clock, KernelSpec, Sampler, StepOutcome, Trace,
};
use crate::rng::chain_rng;
use crate::target::{GridSet, MoveSet};

/// Default cap on `|I|` and `|J|`.
pub const DEFAULT_BLOCK_SIZE: usize = 300;
const MAX_RETRIES: usize = 20;

/// Alternates uniformly random index blocks with blocks of records that
/// agree with a random x record on up to three random fields, then drops
/// indices matched across the block boundary.
///
/// Only data-dependent emptiness triggers a redraw; a block emptied by the
/// boundary filter is returned empty, and the caller skips the step, so the
/// choice of block never depends on the current matching beyond the filter.
#[derive(Debug, Clone)]
pub struct RlBlockSelector {
    pub block_size: usize,
    calls: u64,
}

impl RlBlockSelector {
    pub fn new(block_size: usize) -> Result<Self> {
        if block_size == 0 {
            return Err(Error::InvalidArgument("block size must be >= 1".into()));
        }
        Ok(Self {
            block_size,
            calls: 0,
        })
    }

    fn cap<R: Rng + ?Sized>(&self, mut idx: Vec<usize>, rng: &mut R) -> Vec<usize> {
        if idx.len() > self.block_size {
            let keep = sample_indices(rng, idx.len(), self.block_size);
            let mut picked: Vec<usize> = keep.iter().map(|k| idx[k]).collect();
            picked.sort_unstable();
            idx = picked;
        }
        idx
    }

    fn uniform<R: Rng + ?Sized>(&self, data: &Dataset, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
        let pick = |n: usize, rng: &mut R| {
            let mut v = sample_indices(rng, n, self.block_size.min(n)).into_vec();
            v.sort_unstable();
            v
        };
        let rows = pick(data.nx(), rng);
        let cols = pick(data.ny(), rng);
        (rows, cols)
    }

    fn by_features<R: Rng + ?Sized>(
        &self,
        data: &Dataset,
        rng: &mut R,
    ) -> (Vec<usize>, Vec<usize>) {
        let i0 = rng.random_range(0..data.nx());
        let k = data.num_fields().min(3);
        let fields = sample_indices(rng, data.num_fields(), k).into_vec();
        let key: Vec<u32> = fields.iter().map(|&s| data.x(i0, s)).collect();
        let rows = (0..data.nx())
            .filter(|&i| fields.iter().zip(&key).all(|(&s, &v)| data.x(i, s) == v))
            .collect();
        let cols = (0..data.ny())
            .filter(|&j| fields.iter().zip(&key).all(|(&s, &v)| data.y(j, s) == v))
            .collect();
        (self.cap(rows, rng), self.cap(cols, rng))
    }

    /// Candidate `(I, J)` before the boundary filter.
    pub fn candidate<R: Rng + ?Sized>(
        &mut self,
        data: &Dataset,
        rng: &mut R,
    ) -> (Vec<usize>, Vec<usize>) {
        let feature = self.calls % 2 == 1;
        self.calls += 1;
        if feature {
            for _ in 0..MAX_RETRIES {
                let (rows, cols) = self.by_features(data, rng);
                if !rows.is_empty() && !cols.is_empty() {
                    return (rows, cols);
                }
            }
        }
        self.uniform(data, rng)
    }
}

/// Remove `i ∈ I` matched outside `J` and `j ∈ J` matched outside `I`.
pub fn filter_block(m: &Matching, rows: &[usize], cols: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let keep_rows = rows
        .iter()
        .copied()
        .filter(|&i| {
            m.partner_of_x(i)
                .is_none_or(|j| cols.binary_search(&j).is_ok())
        })
        .collect();
    let keep_cols = cols
        .iter()
        .copied()
        .filter(|&j| {
            m.partner_of_y(j)
                .is_none_or(|i| rows.binary_search(&i).is_ok())
        })
        .collect();
    (keep_rows, keep_cols)
}

impl<'a> BlockSelector<MatchingTarget<'a>> for RlBlockSelector {
    fn select<R: Rng + ?Sized>(
        &mut self,
        target: &MatchingTarget<'a>,
        x: &Matching,
        rng: &mut R,
    ) -> Result<MoveSet> {
        let data = target.model().data();
        let (rows, cols) = self.candidate(data, rng);
        let (rows, cols) = filter_block(x, &rows, &cols);
        if rows.is_empty() || cols.is_empty() {
            return Ok(MoveSet::List(Vec::new()));
        }
        Ok(MoveSet::Grid(GridSet {
            rows,
            cols,
            stride: data.ny(),
        }))
    }
}

#[derive(Debug, Clone)]
pub struct RlConfig {
    /// Matching update; `Blockwise` uses record-linkage blocking with its
    /// `block_size` and `inner_steps`.
    pub scheme: KernelSpec,
    /// Sweeps after burn-in; each sweep updates `(λ, p)` once and then runs
    /// `moves_per_sweep` matching updates.
    pub iterations: u64,
    pub moves_per_sweep: usize,
    pub burn_in: u64,
    pub thin: u64,
    pub beta: f64,
    pub hyper: HyperConfig,
    pub seed: u64,
    pub stream: u64,
    /// When non-empty, the trace records the Hamming distance to each of
    /// these matchings instead of [`RL_SUMMARIES`].
    pub references: Vec<Matching>,
    /// Starting matching; `None` starts from the empty one.
    pub initial: Option<Matching>,
}

impl RlConfig {
    pub fn new(scheme: KernelSpec, iterations: u64, seed: u64) -> Self {
        Self {
            scheme,
            iterations,
            moves_per_sweep: 1,
            burn_in: 0,
            thin: 1,
            beta: super::model::DEFAULT_BETA,
            hyper: HyperConfig::default(),
            seed,
            stream: 0,
            references: Vec::new(),
            initial: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RlResult {
    pub trace: Trace,
    /// Sweeps in which each pair was matched (post burn-in).
    pub pair_counts: BTreeMap<(u32, u32), u64>,
    pub samples: u64,
    pub matching: Matching,
    pub hyper: HyperState,
}

impl RlResult {
    pub fn pair_probability(&self, i: usize, j: usize) -> f64 {
        let c = self
            .pair_counts
            .get(&(i as u32, j as u32))
            .copied()
            .unwrap_or(0);
        c as f64 / self.samples.max(1) as f64
    }

    /// `(i, j, probability)` for pairs at or above `floor`.
    pub fn pair_probabilities(&self, floor: f64) -> Vec<(usize, usize, f64)> {
        self.pair_counts
            .iter()
            .map(|(&(i, j), &c)| {
                (
                    i as usize,
                    j as usize,
                    c as f64 / self.samples.max(1) as f64,
                )
            })
            .filter(|&(_, _, p)| p >= floor)
            .collect()
    }
}

/// Names of the summaries recorded by [`run_rl_sampler`].
pub const RL_SUMMARIES: [&str; 5] = [
    "matches",
    "lambda",
    "p_match",
    "log_fit",
    "distance_from_start",
];

/// Metropolis-within-Gibbs over `(λ, p_match, M)` starting from
/// `cfg.initial` or the empty matching. Only post-burn-in sampling is timed; recording summaries and
/// pair counts is not.
pub fn run_rl_sampler<C: Clock + ?Sized>(
    model: &LinkageModel,
    cfg: &RlConfig,
    clock: &C,
) -> Result<RlResult> {
    if cfg.iterations == 0 || cfg.thin == 0 || cfg.moves_per_sweep == 0 {
        return Err(Error::InvalidArgument(
            "iterations, thin and moves_per_sweep must be >= 1".into(),
        ));
    }
    if (cfg.beta - model.beta()).abs() > 0.0 {
        return Err(Error::InvalidArgument(
            "config beta differs from the model's".into(),
        ));
    }
    cfg.scheme.validate()?;
    let data = model.data();
    let (nx, ny) = (data.nx(), data.ny());
    let mut rng = chain_rng(cfg.seed, cfg.stream);
    let start_state = match &cfg.initial {
        Some(m0) if m0.nx() == nx && m0.ny() == ny => m0.clone(),
        Some(_) => {
            return Err(Error::InvalidArgument(
                "initial matching has the wrong dimensions".into(),
            ))
        }
        None => Matching::empty(nx, ny),
    };
    let mut m = start_state.clone();
    let mut sampler = Sampler::new(cfg.scheme.clone())?;
    let mut selector = match &cfg.scheme {
        KernelSpec::Blockwise { block_size, .. } => Some(RlBlockSelector::new(*block_size)?),
        _ => None,
    };
    for r in &cfg.references {
        if r.nx() != nx || r.ny() != ny {
            return Err(Error::InvalidArgument(
                "reference matching has the wrong dimensions".into(),
            ));
        }
    }
    let summary_names: Vec<String> = if cfg.references.is_empty() {
        RL_SUMMARIES.iter().map(|s| String::from(*s)).collect()
    } else {
        (0..cfg.references.len())
            .map(|k| format!("distance_ref{k}"))
            .collect()
    };
    let mut trace = Trace {
        scheme: cfg.scheme.name(),
        seed: cfg.seed,
        stream: cfg.stream,
        iterations: cfg.iterations,
        thin: cfg.thin,
        burn_in: cfg.burn_in,
        summaries: summary_names.iter().map(|_| Vec::new()).collect(),
        summary_names,
        record_iterations: Vec::new(),
        record_accepted: Vec::new(),
        record_flips: Vec::new(),
        proposals: 0,
        accepted: 0,
        flips: 0,
        wall_seconds: 0.0,
        moved_rate: cfg.scheme.reports_moved_rate(),
    };
    let mut pair_counts = BTreeMap::new();
    let mut hyper = HyperState {
        lambda: 1.0,
        p_match: 0.5,
        beta: cfg.beta,
    };
    let mut elapsed = 0.0;
    let mut start = clock.seconds();
    for sweep in 0..cfg.burn_in + cfg.iterations {
        if sweep == cfg.burn_in {
            start = clock.seconds();
        }
        hyper = gibbs_update_hyper(m.n_matched(), nx, ny, cfg.beta, &cfg.hyper, &mut rng)?;
        let target = model.target(&hyper);
        sampler.reset();
        let mut sweep_out = StepOutcome::default();
        for _ in 0..cfg.moves_per_sweep {
            let out = match (&cfg.scheme, selector.as_mut()) {
                (KernelSpec::Blockwise { g, inner_steps, .. }, Some(sel)) => {
                    match blockwise_step(&target, g, &mut m, sel, *inner_steps, &mut rng) {
                        Err(Error::EmptyBlock) => StepOutcome::default(),
                        other => other?,
                    }
                }
                _ => sampler.step(&target, &mut m, &mut rng)?,
            };
            sweep_out.proposals += out.proposals;
            sweep_out.accepted += out.accepted;
            sweep_out.flips += out.flips;
        }
        if sweep < cfg.burn_in {
            continue;
        }
        elapsed += clock.seconds() - start;
        trace.proposals += u64::from(sweep_out.proposals);
        trace.accepted += u64::from(sweep_out.accepted);
        trace.flips += u64::from(sweep_out.flips);
        for (i, j) in m.pairs() {
            *pair_counts.entry((i as u32, j as u32)).or_insert(0u64) += 1;
        }
        let t = sweep - cfg.burn_in;
        if t % cfg.thin == 0 {
            if cfg.references.is_empty() {
                let fit: f64 = m.pairs().map(|(i, j)| model.field_score(i, j)).sum();
                let values = [
                    m.n_matched() as f64,
                    hyper.lambda,
                    hyper.p_match,
                    fit,
                    m.hamming(&start_state)? as f64,
                ];
                for (k, v) in values.iter().enumerate() {
                    trace.summaries[k].push(*v);
                }
            } else {
                for (k, r) in cfg.references.iter().enumerate() {
                    trace.summaries[k].push(m.hamming(r)? as f64);
                }
            }
            trace.record_iterations.push(t + 1);
            trace.record_accepted.push(sweep_out.accepted > 0);
            trace.record_flips.push(trace.flips);
        }
        start = clock.seconds();
    }
    trace.wall_seconds = elapsed;
    Ok(RlResult {
        trace,
        pair_counts,
        samples: cfg.iterations,
        matching: m,
        hyper,
    })
}
