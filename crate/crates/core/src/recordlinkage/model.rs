use alloc::vec::Vec;

use rand::Rng;

use super::data::Dataset;
use super::matching::{MatchUndo, Matching, UNMATCHED};
use crate::error::{Error, Result};
use crate::math::{ln_factorial, log};
use crate::target::{check_cap, DiscreteTarget, Move, MoveSet};

/// Distortion probability used unless configured otherwise.
pub const DEFAULT_BETA: f64 = 0.001;
/// Largest `nx · ny` for which pair field terms are tabulated.
pub const DENSE_SCORE_LIMIT: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HyperState {
    /// Expected number of entities.
    pub lambda: f64,
    pub p_match: f64,
    /// Distortion probability, held fixed.
    pub beta: f64,
}

impl HyperState {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Domain {
                what: "lambda",
                value: self.lambda,
            });
        }
        if !(self.p_match > 0.0 && self.p_match < 1.0) {
            return Err(Error::Domain {
                what: "p_match",
                value: self.p_match,
            });
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Domain {
                what: "beta",
                value: self.beta,
            });
        }
        Ok(())
    }

    /// `log(4p / (λ (1-p)²))`, the hyperparameter part of every pair score.
    pub fn log_pair_constant(&self) -> f64 {
        log(4.0 * self.p_match) - log(self.lambda) - 2.0 * log(1.0 - self.p_match)
    }
}

/// Log prior of a matching given `(λ, p)`:
/// `-λ + (nx+ny-N) log λ - log nx! - log ny! + (nx+ny-2N) log((1-p)/2) + N log p`.
pub fn log_prior_matching(m: &Matching, lambda: f64, p_match: f64) -> f64 {
    let (nx, ny, nm) = (m.nx() as f64, m.ny() as f64, m.n_matched() as f64);
    let mut v = -lambda + (nx + ny - nm) * log(lambda)
        - ln_factorial(m.nx() as u64)
        - ln_factorial(m.ny() as u64);
    let singles = nx + ny - 2.0 * nm;
    if singles > 0.0 {
        v += singles * log((1.0 - p_match) / 2.0);
    }
    if nm > 0.0 {
        v += nm * log(p_match);
    }
    v
}

/// `log(β(2-β) + (1-β)²/θ · 1[agree])` for one field of a matched pair.
fn field_term(beta: f64, theta: f64, agree: bool) -> f64 {
    let base = beta * (2.0 - beta);
    if agree {
        log(base + (1.0 - beta) * (1.0 - beta) / theta)
    } else {
        log(base)
    }
}

/// Hit-miss log likelihood: the `Σ log θ` baseline over every record plus the
/// field terms of every matched pair.
pub fn log_likelihood(data: &Dataset, m: &Matching, beta: f64) -> f64 {
    let mut v = 0.0;
    for s in 0..data.num_fields() {
        for i in 0..data.nx() {
            v += log(data.theta(s, data.x(i, s)));
        }
        for j in 0..data.ny() {
            v += log(data.theta(s, data.y(j, s)));
        }
    }
    for (i, j) in m.pairs() {
        for s in 0..data.num_fields() {
            let xs = data.x(i, s);
            v += field_term(beta, data.theta(s, xs), xs == data.y(j, s));
        }
    }
    v
}

/// Dataset plus the per-pair field terms of the likelihood, which do not
/// depend on `(λ, p)`.
#[derive(Debug, Clone)]
pub struct LinkageModel {
    data: Dataset,
    beta: f64,
    // agree[s][c] for field s and shared value c; disagree is common
    agree: Vec<Vec<f64>>,
    disagree: f64,
    dense: Option<Vec<f64>>,
}

impl LinkageModel {
    pub fn new(data: Dataset, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::Domain {
                what: "beta",
                value: beta,
            });
        }
        let agree = data
            .thetas()
            .iter()
            .map(|th| {
                th.iter()
                    .map(|&t| {
                        if t > 0.0 {
                            field_term(beta, t, true)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let disagree = field_term(beta, 1.0, false);
        let mut model = Self {
            data,
            beta,
            agree,
            disagree,
            dense: None,
        };
        let (nx, ny) = (model.data.nx(), model.data.ny());
        if nx * ny <= DENSE_SCORE_LIMIT {
            let mut dense = Vec::with_capacity(nx * ny);
            for i in 0..nx {
                for j in 0..ny {
                    dense.push(model.compute_field_score(i, j));
                }
            }
            model.dense = Some(dense);
        }
        Ok(model)
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn compute_field_score(&self, i: usize, j: usize) -> f64 {
        let mut v = 0.0;
        for s in 0..self.data.num_fields() {
            let xs = self.data.x(i, s);
            v += if xs == self.data.y(j, s) {
                self.agree[s][xs as usize]
            } else {
                self.disagree
            };
        }
        v
    }

    /// Data part of the score of couple `(i, j)`.
    #[inline]
    pub fn field_score(&self, i: usize, j: usize) -> f64 {
        match &self.dense {
            Some(d) => d[i * self.data.ny() + j],
            None => self.compute_field_score(i, j),
        }
    }

    /// `log(4p/(λ(1-p)²)) + Σ_s field terms`.
    pub fn match_score(&self, hyper: &HyperState, i: usize, j: usize) -> f64 {
        hyper.log_pair_constant() + self.field_score(i, j)
    }

    /// The matching full conditional at fixed hyperparameters.
    pub fn target(&self, hyper: &HyperState) -> MatchingTarget<'_> {
        MatchingTarget {
            model: self,
            log_c: hyper.log_pair_constant(),
        }
    }
}

/// Matchings with density `Π_{(i,j)∈M} exp(score(i,j))` and the couple
/// base kernel: move `i · ny + j` applies the base move of couple `(i, j)`.
#[derive(Debug, Clone, Copy)]
pub struct MatchingTarget<'a> {
    model: &'a LinkageModel,
    log_c: f64,
}

impl<'a> MatchingTarget<'a> {
    pub fn model(&self) -> &'a LinkageModel {
        self.model
    }

    #[inline]
    fn score(&self, i: usize, j: usize) -> f64 {
        self.log_c + self.model.field_score(i, j)
    }

    #[inline]
    pub fn couple(&self, m: Move) -> (usize, usize) {
        let ny = self.model.data.ny();
        (m / ny, m % ny)
    }
}

impl DiscreteTarget for MatchingTarget<'_> {
    type State = Matching;
    type Undo = MatchUndo;

    fn num_moves(&self) -> usize {
        self.model.data.nx() * self.model.data.ny()
    }

    /// Matchings offer no state-independent symmetric sub-neighborhoods, so
    /// generic block selectors always see a single coordinate (the full
    /// neighborhood). Record-linkage blocking uses its own selector.
    fn num_coordinates(&self) -> usize {
        1
    }

    fn block_moves(&self, _coords: &[usize], out: &mut Vec<Move>) {
        out.extend(0..self.num_moves());
    }

    #[inline]
    fn log_ratio(&self, x: &Matching, m: Move) -> f64 {
        let (i, j) = self.couple(m);
        let (mi, inv_j) = (x.raw_x(i), x.raw_y(j));
        if mi == j as u32 {
            return -self.score(i, j);
        }
        let mut v = self.score(i, j);
        if mi != UNMATCHED {
            v -= self.score(i, mi as usize);
        }
        if inv_j != UNMATCHED {
            v -= self.score(inv_j as usize, j);
            if mi != UNMATCHED {
                v += self.score(inv_j as usize, mi as usize);
            }
        }
        v
    }

    fn apply_move(&self, x: &mut Matching, m: Move) -> MatchUndo {
        let (i, j) = self.couple(m);
        x.apply_couple(i, j)
    }

    fn undo_move(&self, x: &mut Matching, undo: &MatchUndo) {
        x.undo(undo);
    }

    fn reverse_move(&self, undo: &MatchUndo) -> Move {
        let (a, b) = undo.reverse_couple();
        a * self.model.data.ny() + b
    }

    fn returns_to_start(&self, first: &MatchUndo, second: &MatchUndo) -> bool {
        first.is_reversed_by(second.i as usize, second.j as usize)
    }

    fn log_density(&self, x: &Matching) -> f64 {
        x.pairs().map(|(i, j)| self.score(i, j)).sum()
    }

    fn affected_moves(&self, _y: &Matching, undo: &MatchUndo, out: &mut Vec<Move>) {
        let (nx, ny) = (self.model.data.nx(), self.model.data.ny());
        for r in undo.changed_rows() {
            out.extend(r * ny..(r + 1) * ny);
        }
        for c in undo.changed_cols() {
            out.extend((0..nx).map(|r| r * ny + c));
        }
    }

    fn affected_slots(&self, y: &Matching, undo: &MatchUndo, set: &MoveSet, out: &mut Vec<usize>) {
        match set {
            MoveSet::Full(_) => self.affected_moves(y, undo, out),
            MoveSet::Grid(g) => {
                let w = g.cols.len();
                for r in undo.changed_rows() {
                    if let Some(rp) = g.row_pos(r) {
                        out.extend(rp * w..(rp + 1) * w);
                    }
                }
                for c in undo.changed_cols() {
                    if let Some(cp) = g.col_pos(c) {
                        out.extend((0..g.rows.len()).map(|rp| rp * w + cp));
                    }
                }
            }
            MoveSet::List(_) => {
                let mut moves = Vec::new();
                self.affected_moves(y, undo, &mut moves);
                out.extend(moves.into_iter().filter_map(|m| set.slot_of(m)));
            }
        }
    }

    fn state_space_size(&self) -> Option<u128> {
        Matching::count_all(self.model.data.nx(), self.model.data.ny())
    }

    fn enumerate_states(&self, cap: usize) -> Result<Vec<Matching>> {
        check_cap(self.state_space_size(), cap)?;
        Ok(Matching::enumerate_all(
            self.model.data.nx(),
            self.model.data.ny(),
        ))
    }

    fn hamming(&self, a: &Matching, b: &Matching) -> Result<usize> {
        a.hamming(b)
    }

    fn validate(&self, x: &Matching) -> Result<()> {
        if x.nx() != self.model.data.nx() {
            return Err(Error::SizeMismatch {
                expected: self.model.data.nx(),
                found: x.nx(),
            });
        }
        if x.ny() != self.model.data.ny() {
            return Err(Error::SizeMismatch {
                expected: self.model.data.ny(),
                found: x.ny(),
            });
        }
        x.check_invariants()
    }

    /// A random matching built by visiting x records in random order and
    /// pairing each with a random free y record with probability ½ (not
    /// uniform over matchings).
    fn random_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Matching {
        let (nx, ny) = (self.model.data.nx(), self.model.data.ny());
        let mut m = Matching::empty(nx, ny);
        for i in 0..nx {
            if rng.random::<bool>() {
                let j = rng.random_range(0..ny);
                if m.partner_of_y(j).is_none() {
                    m.apply_couple(i, j);
                }
            }
        }
        m
    }
}
