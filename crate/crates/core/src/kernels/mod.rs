//! Transition kernels: random-walk MH, pointwise informed MH, the Hamming
//! Ball sampler and block-wise informed updates.

mod chain;
mod table;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::balance::BalancingFunction;
use crate::error::{Error, Result};
use crate::math::log;
use crate::target::{DiscreteTarget, MoveSet};

pub use chain::{run_chain, ChainResult, Clock, NoClock, RunConfig, Summary, Trace};
pub use table::{WeightTable, RESCALE_NATS};

/// What one kernel application did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepOutcome {
    /// MH proposals made (one per informed or RW step).
    pub proposals: u32,
    /// Accepted proposals; for HB the number of moved steps.
    pub accepted: u32,
    /// Steps after which the state differs from before.
    pub flips: u32,
}

/// Details of one informed MH step.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    pub accepted: bool,
    pub log_ratio: f64,
    pub log_acceptance: f64,
    pub log_w_x: f64,
    pub log_w_y: f64,
}

/// Random-walk MH: uniform proposal on the neighborhood, accept with
/// `min{1, π(y)/π(x)}`.
pub fn rw_step<T, R>(target: &T, x: &mut T::State, rng: &mut R) -> bool
where
    T: DiscreteTarget,
    R: Rng + ?Sized,
{
    let m = rng.random_range(0..target.num_moves());
    let lr = target.log_ratio(x, m);
    let u: f64 = rng.random();
    if log(u) < lr {
        target.apply_move(x, m);
        true
    } else {
        false
    }
}

/// One pointwise informed MH step restricted to `table`'s move set.
///
/// `table` must be current for `x`; on return it is current for the new
/// state. A rejected step leaves both untouched.
pub fn informed_step<T, R>(
    target: &T,
    g: &BalancingFunction,
    x: &mut T::State,
    table: &mut WeightTable,
    rng: &mut R,
) -> Result<StepInfo>
where
    T: DiscreteTarget,
    R: Rng + ?Sized,
{
    let slot = table.sample(rng);
    let m = table.move_set().move_at(slot);
    let lr = target.log_ratio(x, m);
    let log_w_x = table.log_total();
    let undo = target.apply_move(x, m);
    let log_w_y = table.stage(target, g, x, &undo);
    let log_acceptance = lr + g.log_g(-lr) - g.log_g(lr) + log_w_x - log_w_y;
    let u: f64 = rng.random();
    let accepted = log(u) < log_acceptance;
    if accepted {
        table.commit()?;
    } else {
        target.undo_move(x, &undo);
        table.discard();
    }
    Ok(StepInfo {
        accepted,
        log_ratio: lr,
        log_acceptance,
        log_w_x,
        log_w_y,
    })
}

/// Hamming Ball step: `u ~ K(x, ·)`, then `x' ∝ π(y) K(u, y)`. `table` holds
/// the linear-`g` weights of the current state and is kept current. Returns
/// whether the chain moved.
pub fn hamming_ball_step<T, R>(
    target: &T,
    x: &mut T::State,
    table: &mut WeightTable,
    rng: &mut R,
) -> Result<bool>
where
    T: DiscreteTarget,
    R: Rng + ?Sized,
{
    let g = BalancingFunction::Linear;
    let first = table.move_set().move_at(rng.random_range(0..table.len()));
    let undo1 = target.apply_move(x, first);
    table.stage(target, &g, x, &undo1);
    table.commit()?;
    let second = table.move_set().move_at(table.sample(rng));
    let undo2 = target.apply_move(x, second);
    table.stage(target, &g, x, &undo2);
    table.commit()?;
    Ok(!target.returns_to_start(&undo1, &undo2))
}

/// Chooses a sub-neighborhood on which the restricted base kernel stays
/// symmetric.
pub trait BlockSelector<T: DiscreteTarget> {
    fn select<R: Rng + ?Sized>(&mut self, target: &T, x: &T::State, rng: &mut R)
        -> Result<MoveSet>;
}

/// Uniformly random subsets of `size` coordinates, independent of the state.
/// Sizes at or above the coordinate count select the full neighborhood
/// without consuming randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniformCoordinates {
    pub size: usize,
}

impl UniformCoordinates {
    fn coords_to_set<T: DiscreteTarget>(target: &T, coords: &[usize]) -> MoveSet {
        let mut moves = Vec::new();
        target.block_moves(coords, &mut moves);
        MoveSet::List(moves)
    }

    /// Every block the selector can return, each equally likely.
    pub fn enumerate_blocks<T: DiscreteTarget>(&self, target: &T) -> Vec<MoveSet> {
        let n = target.num_coordinates();
        if self.size >= n {
            return alloc::vec![MoveSet::Full(target.num_moves())];
        }
        let k = self.size;
        let mut out = Vec::new();
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            out.push(Self::coords_to_set(target, &idx));
            // next k-combination in lexicographic order
            let mut i = k;
            while i > 0 && idx[i - 1] == n - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
        out
    }
}

impl<T: DiscreteTarget> BlockSelector<T> for UniformCoordinates {
    fn select<R: Rng + ?Sized>(
        &mut self,
        target: &T,
        _x: &T::State,
        rng: &mut R,
    ) -> Result<MoveSet> {
        let n = target.num_coordinates();
        if self.size >= n {
            return Ok(MoveSet::Full(target.num_moves()));
        }
        let mut coords = rand::seq::index::sample(rng, n, self.size).into_vec();
        coords.sort_unstable();
        let set = Self::coords_to_set(target, &coords);
        if set.is_empty() {
            return Err(Error::EmptyBlock);
        }
        Ok(set)
    }
}

/// Draw a block, then run `inner_steps` informed MH steps inside it with
/// within-block normalizers.
pub fn blockwise_step<T, S, R>(
    target: &T,
    g: &BalancingFunction,
    x: &mut T::State,
    selector: &mut S,
    inner_steps: usize,
    rng: &mut R,
) -> Result<StepOutcome>
where
    T: DiscreteTarget,
    S: BlockSelector<T>,
    R: Rng + ?Sized,
{
    let set = selector.select(target, x, rng)?;
    if set.is_empty() {
        return Err(Error::EmptyBlock);
    }
    let mut table = WeightTable::build(target, g, x, set)?;
    let mut out = StepOutcome::default();
    for _ in 0..inner_steps {
        let info = informed_step(target, g, x, &mut table, rng)?;
        out.proposals += 1;
        if info.accepted {
            out.accepted += 1;
            out.flips += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub enum KernelSpec {
    RandomWalk,
    Informed(BalancingFunction),
    HammingBall,
    Blockwise {
        g: BalancingFunction,
        block_size: usize,
        inner_steps: usize,
    },
}

impl KernelSpec {
    /// Parse the scheme names used in configs: `rw`, `gb`, `sqrt`/`lb1`,
    /// `barker`/`lb2`/`lb`, `min`, `max`, `hb`, and `block-<g>-<size>x<steps>`.
    pub fn from_name(name: &str) -> Result<Self> {
        let name = name.trim().to_ascii_lowercase();
        if let Some(rest) = name.strip_prefix("block-") {
            let bad = || {
                Error::InvalidArgument(format!(
                    "bad blockwise scheme '{name}', expected block-<g>-<size>x<steps>"
                ))
            };
            let (g, dims) = rest.rsplit_once('-').ok_or_else(bad)?;
            let (bs, k) = dims.split_once('x').ok_or_else(bad)?;
            let spec = KernelSpec::Blockwise {
                g: BalancingFunction::from_name(g)?,
                block_size: bs.parse().map_err(|_| bad())?,
                inner_steps: k.parse().map_err(|_| bad())?,
            };
            spec.validate()?;
            return Ok(spec);
        }
        match name.as_str() {
            "rw" => Ok(KernelSpec::RandomWalk),
            "hb" | "hamming-ball" => Ok(KernelSpec::HammingBall),
            other => BalancingFunction::from_name(other).map(KernelSpec::Informed),
        }
    }

    pub fn name(&self) -> String {
        match self {
            KernelSpec::RandomWalk => "rw".into(),
            KernelSpec::Informed(g) => g.name(),
            KernelSpec::HammingBall => "hb".into(),
            KernelSpec::Blockwise {
                g,
                block_size,
                inner_steps,
            } => {
                format!("block-{}-{}x{}", g.name(), block_size, inner_steps)
            }
        }
    }

    /// HB reports a moved-rate rather than an MH acceptance rate.
    pub fn reports_moved_rate(&self) -> bool {
        matches!(self, KernelSpec::HammingBall)
    }

    pub fn validate(&self) -> Result<()> {
        if let KernelSpec::Blockwise {
            block_size,
            inner_steps,
            ..
        } = self
        {
            if *block_size == 0 || *inner_steps == 0 {
                return Err(Error::InvalidArgument(
                    "blockwise kernels need block_size >= 1 and inner_steps >= 1".into(),
                ));
            }
        }
        Ok(())
    }
}

/// A kernel plus the scratch state it carries between steps.
#[derive(Debug, Clone)]
pub struct Sampler {
    spec: KernelSpec,
    table: Option<WeightTable>,
}

impl Sampler {
    pub fn new(spec: KernelSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec, table: None })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    /// Drop cached weights; required whenever the state is changed from
    /// outside or the target itself changes.
    pub fn reset(&mut self) {
        self.table = None;
    }

    pub fn table(&self) -> Option<&WeightTable> {
        self.table.as_ref()
    }

    pub fn step<T, R>(&mut self, target: &T, x: &mut T::State, rng: &mut R) -> Result<StepOutcome>
    where
        T: DiscreteTarget,
        R: Rng + ?Sized,
    {
        match &self.spec {
            KernelSpec::RandomWalk => {
                let acc = rw_step(target, x, rng) as u32;
                Ok(StepOutcome {
                    proposals: 1,
                    accepted: acc,
                    flips: acc,
                })
            }
            KernelSpec::Informed(g) => {
                let table = match &mut self.table {
                    Some(t) => t,
                    slot @ None => slot.insert(WeightTable::build(
                        target,
                        g,
                        x,
                        MoveSet::Full(target.num_moves()),
                    )?),
                };
                let acc = informed_step(target, g, x, table, rng)?.accepted as u32;
                Ok(StepOutcome {
                    proposals: 1,
                    accepted: acc,
                    flips: acc,
                })
            }
            KernelSpec::HammingBall => {
                let table = match &mut self.table {
                    Some(t) => t,
                    slot @ None => slot.insert(WeightTable::build(
                        target,
                        &BalancingFunction::Linear,
                        x,
                        MoveSet::Full(target.num_moves()),
                    )?),
                };
                let moved = hamming_ball_step(target, x, table, rng)? as u32;
                Ok(StepOutcome {
                    proposals: 1,
                    accepted: moved,
                    flips: moved,
                })
            }
            KernelSpec::Blockwise {
                g,
                block_size,
                inner_steps,
            } => {
                let mut sel = UniformCoordinates { size: *block_size };
                blockwise_step(target, g, x, &mut sel, *inner_steps, rng)
            }
        }
    }
}
