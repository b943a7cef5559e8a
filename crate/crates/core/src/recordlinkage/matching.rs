use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const UNMATCHED: u32 = u32::MAX;

/// A partial matching between records `0..nx` and `0..ny`, with its inverse.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Matching {
    m: Vec<u32>,
    inv: Vec<u32>,
    n_matched: usize,
}

/// The five base moves induced by a couple `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MoveKind {
    /// `M_i = 0`, `M⁻¹_j = 0`: match `i` with `j`.
    Add,
    /// `M_i = j`: unmatch them.
    Delete,
    /// `M_i = 0`, `M⁻¹_j = i'`: `j` moves from `i'` to `i`.
    SwitchX,
    /// `M_i = j'`, `M⁻¹_j = 0`: `i` moves from `j'` to `j`.
    SwitchY,
    /// `M_i = j'`, `M⁻¹_j = i'`: match `(i, j)` and `(i', j')`.
    DoubleSwitch,
}

/// Record of one base move, enough to revert it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchUndo {
    pub kind: MoveKind,
    pub i: u32,
    pub j: u32,
    /// Former partner of `j` (`i'`), or [`UNMATCHED`].
    pub other_i: u32,
    /// Former partner of `i` (`j'`), or [`UNMATCHED`].
    pub other_j: u32,
}

impl MatchUndo {
    /// x-side indices whose partner changed.
    pub fn changed_rows(&self) -> impl Iterator<Item = usize> {
        let second = (self.other_i != UNMATCHED).then_some(self.other_i as usize);
        core::iter::once(self.i as usize).chain(second)
    }

    /// y-side indices whose partner changed.
    pub fn changed_cols(&self) -> impl Iterator<Item = usize> {
        let second = (self.other_j != UNMATCHED).then_some(self.other_j as usize);
        core::iter::once(self.j as usize).chain(second)
    }

    /// A couple whose move reverts this one.
    pub fn reverse_couple(&self) -> (usize, usize) {
        match self.kind {
            MoveKind::Add | MoveKind::Delete => (self.i as usize, self.j as usize),
            MoveKind::SwitchX => (self.other_i as usize, self.j as usize),
            MoveKind::SwitchY | MoveKind::DoubleSwitch => (self.i as usize, self.other_j as usize),
        }
    }

    /// Whether couple `(a, b)` applied after this move restores the start.
    pub fn is_reversed_by(&self, a: usize, b: usize) -> bool {
        (a, b) == self.reverse_couple()
            || (self.kind == MoveKind::DoubleSwitch
                && (a, b) == (self.other_i as usize, self.j as usize))
    }
}

impl Matching {
    pub fn empty(nx: usize, ny: usize) -> Self {
        Self {
            m: vec![UNMATCHED; nx],
            inv: vec![UNMATCHED; ny],
            n_matched: 0,
        }
    }

    pub fn from_pairs(nx: usize, ny: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut out = Self::empty(nx, ny);
        for &(i, j) in pairs {
            if i >= nx || j >= ny {
                return Err(Error::InvalidState(format!("pair ({i}, {j}) out of range")));
            }
            if out.m[i] != UNMATCHED || out.inv[j] != UNMATCHED {
                return Err(Error::InvalidState(format!(
                    "pair ({i}, {j}) breaks injectivity"
                )));
            }
            out.m[i] = j as u32;
            out.inv[j] = i as u32;
            out.n_matched += 1;
        }
        Ok(out)
    }

    pub fn nx(&self) -> usize {
        self.m.len()
    }

    pub fn ny(&self) -> usize {
        self.inv.len()
    }

    pub fn n_matched(&self) -> usize {
        self.n_matched
    }

    pub fn partner_of_x(&self, i: usize) -> Option<usize> {
        let j = self.m[i];
        (j != UNMATCHED).then_some(j as usize)
    }

    pub fn partner_of_y(&self, j: usize) -> Option<usize> {
        let i = self.inv[j];
        (i != UNMATCHED).then_some(i as usize)
    }

    #[inline]
    pub(crate) fn raw_x(&self, i: usize) -> u32 {
        self.m[i]
    }

    #[inline]
    pub(crate) fn raw_y(&self, j: usize) -> u32 {
        self.inv[j]
    }

    /// Matched pairs in increasing `i`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.m
            .iter()
            .enumerate()
            .filter(|(_, &j)| j != UNMATCHED)
            .map(|(i, &j)| (i, j as usize))
    }

    pub fn classify(&self, i: usize, j: usize) -> MoveKind {
        let (mi, inv_j) = (self.m[i], self.inv[j]);
        if mi == j as u32 {
            MoveKind::Delete
        } else if mi == UNMATCHED && inv_j == UNMATCHED {
            MoveKind::Add
        } else if mi == UNMATCHED {
            MoveKind::SwitchX
        } else if inv_j == UNMATCHED {
            MoveKind::SwitchY
        } else {
            MoveKind::DoubleSwitch
        }
    }

    /// Apply the base move of couple `(i, j)`.
    pub fn apply_couple(&mut self, i: usize, j: usize) -> MatchUndo {
        let kind = self.classify(i, j);
        let (mi, inv_j) = (self.m[i], self.inv[j]);
        let mut undo = MatchUndo {
            kind,
            i: i as u32,
            j: j as u32,
            other_i: UNMATCHED,
            other_j: UNMATCHED,
        };
        match kind {
            MoveKind::Add => {
                self.m[i] = j as u32;
                self.inv[j] = i as u32;
                self.n_matched += 1;
            }
            MoveKind::Delete => {
                self.m[i] = UNMATCHED;
                self.inv[j] = UNMATCHED;
                self.n_matched -= 1;
            }
            MoveKind::SwitchX => {
                undo.other_i = inv_j;
                self.m[inv_j as usize] = UNMATCHED;
                self.m[i] = j as u32;
                self.inv[j] = i as u32;
            }
            MoveKind::SwitchY => {
                undo.other_j = mi;
                self.inv[mi as usize] = UNMATCHED;
                self.m[i] = j as u32;
                self.inv[j] = i as u32;
            }
            MoveKind::DoubleSwitch => {
                undo.other_i = inv_j;
                undo.other_j = mi;
                self.m[i] = j as u32;
                self.inv[j] = i as u32;
                self.m[inv_j as usize] = mi;
                self.inv[mi as usize] = inv_j;
            }
        }
        undo
    }

    pub fn undo(&mut self, u: &MatchUndo) {
        let (i, j) = (u.i as usize, u.j as usize);
        match u.kind {
            MoveKind::Add => {
                self.m[i] = UNMATCHED;
                self.inv[j] = UNMATCHED;
                self.n_matched -= 1;
            }
            MoveKind::Delete => {
                self.m[i] = u.j;
                self.inv[j] = u.i;
                self.n_matched += 1;
            }
            MoveKind::SwitchX => {
                self.m[i] = UNMATCHED;
                self.m[u.other_i as usize] = u.j;
                self.inv[j] = u.other_i;
            }
            MoveKind::SwitchY => {
                self.inv[j] = UNMATCHED;
                self.m[i] = u.other_j;
                self.inv[u.other_j as usize] = u.i;
            }
            MoveKind::DoubleSwitch => {
                self.m[i] = u.other_j;
                self.inv[u.other_j as usize] = u.i;
                self.m[u.other_i as usize] = u.j;
                self.inv[j] = u.other_i;
            }
        }
    }

    /// Recheck injectivity, inverse consistency and the match count.
    pub fn check_invariants(&self) -> Result<()> {
        let mut count = 0;
        for (i, &j) in self.m.iter().enumerate() {
            if j == UNMATCHED {
                continue;
            }
            count += 1;
            if j as usize >= self.inv.len() || self.inv[j as usize] != i as u32 {
                return Err(Error::InvalidState(format!(
                    "x record {i} and its partner disagree"
                )));
            }
        }
        for (j, &i) in self.inv.iter().enumerate() {
            if i != UNMATCHED && (i as usize >= self.m.len() || self.m[i as usize] != j as u32) {
                return Err(Error::InvalidState(format!(
                    "y record {j} and its partner disagree"
                )));
            }
        }
        if count != self.n_matched {
            return Err(Error::InvalidState(format!(
                "match count {} but {count} pairs present",
                self.n_matched
            )));
        }
        Ok(())
    }

    /// Number of x records whose partner differs.
    pub fn hamming(&self, other: &Matching) -> Result<usize> {
        if self.nx() != other.nx() || self.ny() != other.ny() {
            return Err(Error::SizeMismatch {
                expected: self.nx(),
                found: other.nx(),
            });
        }
        Ok(self.m.iter().zip(&other.m).filter(|(a, b)| a != b).count())
    }

    /// Every partial matching, sorted.
    pub fn enumerate_all(nx: usize, ny: usize) -> Vec<Matching> {
        fn rec(i: usize, cur: &mut Matching, out: &mut Vec<Matching>) {
            if i == cur.nx() {
                out.push(cur.clone());
                return;
            }
            rec(i + 1, cur, out);
            for j in 0..cur.ny() {
                if cur.inv[j] == UNMATCHED {
                    cur.m[i] = j as u32;
                    cur.inv[j] = i as u32;
                    cur.n_matched += 1;
                    rec(i + 1, cur, out);
                    cur.m[i] = UNMATCHED;
                    cur.inv[j] = UNMATCHED;
                    cur.n_matched -= 1;
                }
            }
        }
        let mut out = Vec::new();
        rec(0, &mut Matching::empty(nx, ny), &mut out);
        out.sort();
        out
    }

    /// `Σ_k C(nx,k) C(ny,k) k!`, if it fits.
    pub fn count_all(nx: usize, ny: usize) -> Option<u128> {
        let mut total: u128 = 0;
        // term_k = C(nx,k) C(ny,k) k! = term_{k-1} (nx-k+1)(ny-k+1)/k
        let mut term: u128 = 1;
        for k in 0..=nx.min(ny) {
            if k > 0 {
                term = term.checked_mul(((nx - k + 1) * (ny - k + 1)) as u128)? / k as u128;
            }
            total = total.checked_add(term)?;
        }
        Some(total)
    }
}
