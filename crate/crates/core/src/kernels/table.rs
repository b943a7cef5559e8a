//! Per-state cache of proposal weights `g(π(y)/π(x))` over a move set.
//!
//! Weights live as exact per-slot log weights and as linear weights relative
//! to a common log shift, stored in the leaves of a sum tree. Every internal
//! node is recomputed from its two children, never delta-updated, so the
//! total `W(x)` is a fixed function of the current leaves: incremental
//! updates cannot accumulate cancellation error, and sampling is an
//! `O(log N)` descent. The shift is re-derived (an `O(N)` pass, no target
//! evaluations) when a weight climbs more than [`RESCALE_NATS`] above it or
//! the total falls more than that below it.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::balance::BalancingFunction;
use crate::error::{Error, Result};
use crate::math::{exp, log};
use crate::target::{DiscreteTarget, MoveSet};

pub const RESCALE_NATS: f64 = 200.0;

#[derive(Debug, Clone)]
struct SumTree {
    // node k has children 2k and 2k+1; leaves start at `cap`
    nodes: Vec<f64>,
    cap: usize,
}

impl SumTree {
    fn from_weights(w: &[f64]) -> Self {
        let cap = w.len().next_power_of_two().max(1);
        let mut nodes = vec![0.0; 2 * cap];
        nodes[cap..cap + w.len()].copy_from_slice(w);
        for k in (1..cap).rev() {
            nodes[k] = nodes[2 * k] + nodes[2 * k + 1];
        }
        Self { nodes, cap }
    }

    fn leaf(&self, slot: usize) -> f64 {
        self.nodes[self.cap + slot]
    }

    fn set(&mut self, slot: usize, value: f64) {
        let mut k = self.cap + slot;
        self.nodes[k] = value;
        while k > 1 {
            k /= 2;
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    fn total(&self) -> f64 {
        self.nodes[1]
    }

    /// Slot whose cumulative interval contains `u`.
    fn search(&self, mut u: f64) -> usize {
        let mut k = 1;
        while k < self.cap {
            let left = self.nodes[2 * k];
            if u < left {
                k *= 2;
            } else {
                u -= left;
                k = 2 * k + 1;
            }
        }
        k - self.cap
    }
}

#[derive(Debug, Clone)]
pub struct WeightTable {
    set: MoveSet,
    log_w: Vec<f64>,
    tree: SumTree,
    shift: f64,
    stamp: Vec<u32>,
    epoch: u32,
    pending_slots: Vec<usize>,
    pending_lw: Vec<f64>,
    // linear leaf values replaced by the staged update, for `discard`
    pending_old: Vec<f64>,
    scratch: Vec<usize>,
}

impl WeightTable {
    /// One log-ratio evaluation per slot of `set`.
    pub fn build<T: DiscreteTarget>(
        target: &T,
        g: &BalancingFunction,
        x: &T::State,
        set: MoveSet,
    ) -> Result<Self> {
        let len = set.len();
        let log_w: Vec<f64> = (0..len)
            .map(|s| g.log_g(target.log_ratio(x, set.move_at(s))))
            .collect();
        let mut table = Self {
            set,
            log_w,
            tree: SumTree::from_weights(&[]),
            shift: 0.0,
            stamp: vec![0; len],
            epoch: 0,
            pending_slots: Vec::new(),
            pending_lw: Vec::new(),
            pending_old: Vec::new(),
            scratch: Vec::new(),
        };
        table.rescale()?;
        Ok(table)
    }

    fn rescale(&mut self) -> Result<()> {
        let max = self.log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY || max.is_nan() {
            return Err(Error::IsolatedState);
        }
        self.rescale_to(max);
        Ok(())
    }

    fn rescale_to(&mut self, shift: f64) {
        self.shift = shift;
        let lin: Vec<f64> = self.log_w.iter().map(|&lw| exp(lw - shift)).collect();
        self.tree = SumTree::from_weights(&lin);
    }

    pub fn move_set(&self) -> &MoveSet {
        &self.set
    }

    pub fn len(&self) -> usize {
        self.log_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_w.is_empty()
    }

    /// `log W(x) = log Σ_slots g(π(y)/π(x))`.
    pub fn log_total(&self) -> f64 {
        self.shift + log(self.tree.total())
    }

    pub fn log_weight(&self, slot: usize) -> f64 {
        self.log_w[slot]
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_w
    }

    /// Draw a slot with probability `w(slot) / W`, inverse CDF with one
    /// uniform.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = rng.random::<f64>() * self.tree.total();
        let len = self.log_w.len();
        let mut slot = self.tree.search(u);
        if slot >= len || self.tree.leaf(slot) <= 0.0 {
            // rounding pushed the descent onto a zero-weight slot or past the end
            slot = slot.min(len - 1);
            if let Some(s) = (slot..len).find(|&s| self.tree.leaf(s) > 0.0) {
                return s;
            }
            slot = (0..slot)
                .rev()
                .find(|&s| self.tree.leaf(s) > 0.0)
                .expect("positive weight");
        }
        slot
    }

    /// Evaluate the weights that change when the move recorded in `undo`
    /// takes the chain to `y` and stage them; [`commit`](Self::commit) keeps
    /// them, [`discard`](Self::discard) restores the table. Returns `log W(y)`.
    pub fn stage<T: DiscreteTarget>(
        &mut self,
        target: &T,
        g: &BalancingFunction,
        y: &T::State,
        undo: &T::Undo,
    ) -> f64 {
        self.discard();
        self.scratch.clear();
        target.affected_slots(y, undo, &self.set, &mut self.scratch);
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        for &slot in &self.scratch {
            if self.stamp[slot] != self.epoch {
                self.stamp[slot] = self.epoch;
                self.pending_slots.push(slot);
                self.pending_lw
                    .push(g.log_g(target.log_ratio(y, self.set.move_at(slot))));
            }
        }
        let new_max = self
            .pending_lw
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if new_max - self.shift > RESCALE_NATS {
            self.rescale_to(new_max);
        }
        for k in 0..self.pending_slots.len() {
            let slot = self.pending_slots[k];
            self.pending_old.push(self.tree.leaf(slot));
            self.tree.set(slot, exp(self.pending_lw[k] - self.shift));
        }
        let total = self.tree.total();
        if total > 0.0 && total.is_finite() {
            self.shift + log(total)
        } else {
            self.staged_log_total_exact()
        }
    }

    // log W(y) straight from the log weights, for totals the shifted leaves
    // cannot represent.
    fn staged_log_total_exact(&self) -> f64 {
        let mut lws = self.log_w.clone();
        for (&slot, &lw) in self.pending_slots.iter().zip(&self.pending_lw) {
            lws[slot] = lw;
        }
        crate::math::log_sum_exp(&lws)
    }

    /// Keep the weights staged by the last [`stage`](Self::stage).
    pub fn commit(&mut self) -> Result<()> {
        for (&slot, &lw) in self.pending_slots.iter().zip(&self.pending_lw) {
            self.log_w[slot] = lw;
        }
        self.pending_slots.clear();
        self.pending_lw.clear();
        self.pending_old.clear();
        let total = self.tree.total();
        if !(total > exp(-RESCALE_NATS)) || !total.is_finite() {
            self.rescale()?;
        }
        Ok(())
    }

    /// Forget the last staged update.
    pub fn discard(&mut self) {
        for (&slot, &old) in self.pending_slots.iter().zip(&self.pending_old).rev() {
            self.tree.set(slot, old);
        }
        let restaged = !self.pending_old.is_empty();
        self.pending_slots.clear();
        self.pending_lw.clear();
        self.pending_old.clear();
        // a stage that raised the shift can leave the old total unrepresentable
        if restaged && !(self.tree.total() > exp(-RESCALE_NATS)) {
            self.rescale().expect("table was valid before staging");
        }
    }

    /// Number of slots touched by the last staged update.
    pub fn staged_len(&self) -> usize {
        self.pending_slots.len()
    }

    /// Largest disagreement with another table over the same set:
    /// `(max |Δ log w| / (1 + |log w|), |W_self / W_other - 1|)`.
    pub fn deviation_from(&self, other: &WeightTable) -> (f64, f64) {
        let mut worst = 0.0f64;
        for (a, b) in self.log_w.iter().zip(&other.log_w) {
            if a.is_infinite() && a == b {
                continue;
            }
            worst = worst.max((a - b).abs() / (1.0 + a.abs()));
        }
        let rel = libm::expm1(self.log_total() - other.log_total()).abs();
        (worst, rel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::target::{BinaryTarget, DiscreteTarget, PermutationTarget};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sum_tree_search_and_update() {
        let mut f = SumTree::from_weights(&[1.0, 0.0, 2.0, 3.0, 0.0]);
        assert_eq!(f.total(), 6.0);
        assert_eq!(f.search(0.0), 0);
        assert_eq!(f.search(0.999), 0);
        assert_eq!(f.search(1.0), 2);
        assert_eq!(f.search(2.5), 2);
        assert_eq!(f.search(3.0), 3);
        f.set(1, 4.0);
        assert_eq!(f.search(1.0), 1);
        assert_eq!(f.total(), 10.0);
        f.set(1, 0.0);
        assert_eq!(f.total(), 6.0);
    }

    #[test]
    fn discard_restores_the_table_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let t = PermutationTarget::lognormal(7, 5.0, &mut rng).unwrap();
        let g = BalancingFunction::Linear;
        let mut x = t.random_state(&mut rng);
        let mut tab = WeightTable::build(&t, &g, &x, MoveSet::Full(t.num_moves())).unwrap();
        let before = tab.log_total();
        let undo = t.apply_move(&mut x, 3);
        tab.stage(&t, &g, &x, &undo);
        t.undo_move(&mut x, &undo);
        tab.discard();
        assert_eq!(tab.log_total(), before);
    }

    #[test]
    fn binary_barker_uniform_weights() {
        let t = BinaryTarget::new(alloc::vec![0.5, 0.5]).unwrap();
        let tab = WeightTable::build(
            &t,
            &BalancingFunction::Barker,
            &alloc::vec![0, 0],
            MoveSet::Full(2),
        )
        .unwrap();
        assert!((exp(tab.log_weight(0)) - 0.5).abs() < 1e-15);
        assert!((exp(tab.log_weight(1)) - 0.5).abs() < 1e-15);
        assert!(tab.log_total().abs() < 1e-15);
    }

    #[test]
    fn binary_linear_weights() {
        let t = BinaryTarget::new(alloc::vec![0.3, 0.7]).unwrap();
        let tab = WeightTable::build(
            &t,
            &BalancingFunction::Linear,
            &alloc::vec![0, 0],
            MoveSet::Full(2),
        )
        .unwrap();
        assert!((exp(tab.log_weight(0)) - 7.0 / 3.0).abs() < 1e-13);
        assert!((exp(tab.log_weight(1)) - 3.0 / 7.0).abs() < 1e-13);
        assert!((exp(tab.log_total()) - (7.0 / 3.0 + 3.0 / 7.0)).abs() < 1e-13);
    }

    #[test]
    fn permutation_n2_sqrt_weight() {
        let w = [1.5, 2.0, 3.0, 0.5];
        let t = PermutationTarget::new(2, &w).unwrap();
        let x = crate::target::PermState::identity(2);
        let tab = WeightTable::build(&t, &BalancingFunction::Sqrt, &x, MoveSet::Full(1)).unwrap();
        let expect = libm::sqrt(2.0 * 3.0 / (1.5 * 0.5));
        assert!((exp(tab.log_weight(0)) - expect).abs() < 1e-13);
    }

    #[test]
    fn isolated_state_is_an_error() {
        let g = BalancingFunction::custom_log("zero", |_| f64::NEG_INFINITY, None);
        let t = BinaryTarget::new(alloc::vec![0.5]).unwrap();
        let err = WeightTable::build(&t, &g, &alloc::vec![0], MoveSet::Full(1)).unwrap_err();
        assert_eq!(err, Error::IsolatedState);
    }

    #[test]
    fn sampling_frequencies_follow_weights() {
        let t = BinaryTarget::new(alloc::vec![0.2, 0.5, 0.9]).unwrap();
        let x = alloc::vec![0, 0, 0];
        let tab = WeightTable::build(&t, &BalancingFunction::Sqrt, &x, MoveSet::Full(3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = [0usize; 3];
        let draws = 200_000;
        for _ in 0..draws {
            counts[tab.sample(&mut rng)] += 1;
        }
        let w: alloc::vec::Vec<f64> = (0..3)
            .map(|s| exp(tab.log_weight(s) - tab.log_total()))
            .collect();
        for s in 0..3 {
            let freq = counts[s] as f64 / draws as f64;
            assert!((freq - w[s]).abs() < 0.005, "slot {s}: {freq} vs {}", w[s]);
        }
    }

    #[test]
    fn staged_updates_match_rebuilds_under_extreme_weights() {
        // λ = 40 lognormal weights produce ratios far beyond the rescale window
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let t = PermutationTarget::lognormal(12, 40.0, &mut rng).unwrap();
        let g = BalancingFunction::Barker;
        let mut x = t.random_state(&mut rng);
        let mut tab = WeightTable::build(&t, &g, &x, MoveSet::Full(t.num_moves())).unwrap();
        for _ in 0..2000 {
            let slot = tab.sample(&mut rng);
            let undo = t.apply_move(&mut x, slot);
            let lw_y = tab.stage(&t, &g, &x, &undo);
            tab.commit().unwrap();
            let fresh = WeightTable::build(&t, &g, &x, MoveSet::Full(t.num_moves())).unwrap();
            let (w, tot) = tab.deviation_from(&fresh);
            assert!(w < 1e-12 && tot < 1e-10, "{w} {tot}");
            assert!((lw_y - fresh.log_total()).abs() < 1e-10 * (1.0 + lw_y.abs()));
        }
    }
}
