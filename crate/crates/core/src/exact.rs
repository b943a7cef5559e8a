//! Exhaustive analysis of small state spaces: dense transition matrices,
//! stationarity and reversibility checks, spectra, asymptotic variances,
//! smoothness constants, Peskun comparisons and binary limiting rates.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::balance::BalancingFunction;
use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, UniformCoordinates};
use crate::math::{exp, log, log_sum_exp, sqrt};
use crate::target::{DiscreteTarget, Move, MoveSet};

pub const DEFAULT_CAP: usize = 4096;
/// Relative tolerance (to the largest flow) of the reversibility check.
pub const REVERSIBILITY_TOL: f64 = 1e-10;

/// An enumerated state space with its normalized target and the
/// neighbor structure of every state.
#[derive(Debug, Clone)]
pub struct ExactSpace<S> {
    states: Vec<S>,
    pi: Vec<f64>,
    log_pi: Vec<f64>,
    moves: usize,
    // nb[x * moves + m] = index of the state reached from x by move m
    nb: Vec<usize>,
    lr: Vec<f64>,
}

impl<S: Clone + Ord> ExactSpace<S> {
    pub fn new<T: DiscreteTarget<State = S>>(target: &T, cap: usize) -> Result<Self> {
        let states = target.enumerate_states(cap)?;
        let moves = target.num_moves();
        let log_d: Vec<f64> = states.iter().map(|s| target.log_density(s)).collect();
        let lz = log_sum_exp(&log_d);
        let log_pi: Vec<f64> = log_d.iter().map(|l| l - lz).collect();
        let pi = log_pi.iter().map(|&l| exp(l)).collect();
        let mut nb = Vec::with_capacity(states.len() * moves);
        let mut lr = Vec::with_capacity(states.len() * moves);
        for x in &states {
            for m in 0..moves {
                let mut y = x.clone();
                lr.push(target.log_ratio(x, m));
                target.apply_move(&mut y, m);
                let j = states
                    .binary_search(&y)
                    .map_err(|_| Error::InvalidState("neighbor missing from enumeration".into()))?;
                nb.push(j);
            }
        }
        Ok(Self {
            states,
            pi,
            log_pi,
            moves,
            nb,
            lr,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn index_of(&self, s: &S) -> Option<usize> {
        self.states.binary_search(s).ok()
    }

    pub fn num_moves(&self) -> usize {
        self.moves
    }

    /// Normalized visit frequencies of a sequence of states.
    pub fn histogram<'a, I>(&self, visits: I) -> Vec<f64>
    where
        I: IntoIterator<Item = &'a S>,
        S: 'a,
    {
        let mut counts = vec![0u64; self.len()];
        let mut total = 0u64;
        for s in visits {
            if let Some(i) = self.index_of(s) {
                counts[i] += 1;
                total += 1;
            }
        }
        counts
            .iter()
            .map(|&c| c as f64 / total.max(1) as f64)
            .collect()
    }

    fn set_moves(&self, set: &MoveSet) -> Vec<Move> {
        (0..set.len()).map(|s| set.move_at(s)).collect()
    }

    /// `log W(x)` over the given moves, for every state.
    fn log_totals(&self, g: &BalancingFunction, moves: &[Move]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.len());
        let mut buf = Vec::with_capacity(moves.len());
        for x in 0..self.len() {
            buf.clear();
            buf.extend(moves.iter().map(|&m| g.log_g(self.lr[x * self.moves + m])));
            let lw = log_sum_exp(&buf);
            if lw == f64::NEG_INFINITY {
                return Err(Error::IsolatedState);
            }
            out.push(lw);
        }
        Ok(out)
    }

    /// `log Z_g(x) = log W(x) - log |N(x)|` for every state.
    pub fn log_normalizers(&self, g: &BalancingFunction) -> Result<Vec<f64>> {
        let all: Vec<Move> = (0..self.moves).collect();
        let lm = log(self.moves as f64);
        Ok(self
            .log_totals(g, &all)?
            .into_iter()
            .map(|l| l - lm)
            .collect())
    }

    pub fn random_walk(&self) -> ExactKernel {
        let n = self.len();
        let mut p = DMatrix::zeros(n, n);
        let k = 1.0 / self.moves as f64;
        for x in 0..n {
            for m in 0..self.moves {
                let a = exp(self.lr[x * self.moves + m].min(0.0));
                p[(x, self.nb[x * self.moves + m])] += k * a;
            }
        }
        self.finish(p)
    }

    /// Informed MH restricted to `set` (normalizers computed within it).
    pub fn informed_on(&self, g: &BalancingFunction, set: &MoveSet) -> Result<ExactKernel> {
        let moves = self.set_moves(set);
        let lw = self.log_totals(g, &moves)?;
        let n = self.len();
        let mut p = DMatrix::zeros(n, n);
        for x in 0..n {
            for &m in &moves {
                let lr = self.lr[x * self.moves + m];
                let lg = g.log_g(lr);
                if lg == f64::NEG_INFINITY {
                    continue;
                }
                let y = self.nb[x * self.moves + m];
                let la = lr + g.log_g(-lr) - lg + lw[x] - lw[y];
                p[(x, y)] += exp(lg - lw[x] + la.min(0.0));
            }
        }
        Ok(self.finish(p))
    }

    pub fn informed(&self, g: &BalancingFunction) -> Result<ExactKernel> {
        self.informed_on(g, &MoveSet::Full(self.moves))
    }

    /// The proposal `Q_g` itself, without the MH correction.
    pub fn proposal(&self, g: &BalancingFunction) -> Result<ExactKernel> {
        let all: Vec<Move> = (0..self.moves).collect();
        let lw = self.log_totals(g, &all)?;
        let n = self.len();
        let mut p = DMatrix::zeros(n, n);
        for x in 0..n {
            for m in 0..self.moves {
                let lg = g.log_g(self.lr[x * self.moves + m]);
                p[(x, self.nb[x * self.moves + m])] += exp(lg - lw[x]);
            }
        }
        Ok(ExactKernel {
            p,
            pi: self.pi.clone(),
        })
    }

    /// Two-stage Hamming Ball kernel `A · B` with `A = K` and
    /// `B(u, y) ∝ π(y) K(u, y)`.
    pub fn hamming_ball(&self) -> ExactKernel {
        let n = self.len();
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut b = DMatrix::<f64>::zeros(n, n);
        let k = 1.0 / self.moves as f64;
        let mut buf = Vec::with_capacity(self.moves);
        for u in 0..n {
            buf.clear();
            buf.extend((0..self.moves).map(|m| self.log_pi[self.nb[u * self.moves + m]]));
            let lz = log_sum_exp(&buf);
            for m in 0..self.moves {
                let y = self.nb[u * self.moves + m];
                a[(u, y)] += k;
                b[(u, y)] += exp(buf[m] - lz);
            }
        }
        ExactKernel {
            p: a * b,
            pi: self.pi.clone(),
        }
    }

    /// Random block from `selector`, then `inner_steps` informed steps
    /// inside it.
    pub fn blockwise(
        &self,
        target: &impl DiscreteTarget<State = S>,
        g: &BalancingFunction,
        selector: UniformCoordinates,
        inner_steps: usize,
    ) -> Result<ExactKernel> {
        let blocks = selector.enumerate_blocks(target);
        let n = self.len();
        let mut p = DMatrix::zeros(n, n);
        let w = 1.0 / blocks.len() as f64;
        for set in &blocks {
            let pb = self.informed_on(g, set)?.p;
            let mut pk = pb.clone();
            for _ in 1..inner_steps {
                pk = &pk * &pb;
            }
            p += pk * w;
        }
        Ok(ExactKernel {
            p,
            pi: self.pi.clone(),
        })
    }

    pub fn kernel(
        &self,
        target: &impl DiscreteTarget<State = S>,
        spec: &KernelSpec,
    ) -> Result<ExactKernel> {
        match spec {
            KernelSpec::RandomWalk => Ok(self.random_walk()),
            KernelSpec::Informed(g) => self.informed(g),
            KernelSpec::HammingBall => Ok(self.hamming_ball()),
            KernelSpec::Blockwise {
                g,
                block_size,
                inner_steps,
            } => self.blockwise(
                target,
                g,
                UniformCoordinates { size: *block_size },
                *inner_steps,
            ),
        }
    }

    /// `F(x, y) = π(x) Z_g(x) Q_g(x, y) = π(x) Σ_{m: x→y} g(π(y)/π(x)) / |N|`.
    pub fn flow_matrix(&self, g: &BalancingFunction) -> DMatrix<f64> {
        let n = self.len();
        let mut f = DMatrix::zeros(n, n);
        let k = 1.0 / self.moves as f64;
        for x in 0..n {
            for m in 0..self.moves {
                let lg = g.log_g(self.lr[x * self.moves + m]);
                f[(x, self.nb[x * self.moves + m])] += k * exp(self.log_pi[x] + lg);
            }
        }
        f
    }

    /// `c_g = max Z_g(y) / Z_g(x)` over neighboring pairs.
    pub fn smoothness_constant(&self, g: &BalancingFunction) -> Result<f64> {
        let lz = self.log_normalizers(g)?;
        let mut worst = f64::NEG_INFINITY;
        for x in 0..self.len() {
            for m in 0..self.moves {
                worst = worst.max(lz[self.nb[x * self.moves + m]] - lz[x]);
            }
        }
        Ok(exp(worst))
    }

    fn finish(&self, mut p: DMatrix<f64>) -> ExactKernel {
        for x in 0..self.len() {
            let off: f64 = (0..self.len()).filter(|&y| y != x).map(|y| p[(x, y)]).sum();
            p[(x, x)] = (1.0 - off).max(0.0);
        }
        ExactKernel {
            p,
            pi: self.pi.clone(),
        }
    }
}

/// Convenience: enumerate `target` and build the kernel of `spec`.
pub fn build_exact_kernel<T: DiscreteTarget>(
    spec: &KernelSpec,
    target: &T,
    cap: usize,
) -> Result<ExactKernel> {
    ExactSpace::new(target, cap)?.kernel(target, spec)
}

/// `c_g` of a target by full enumeration.
pub fn smoothness_constant<T: DiscreteTarget>(
    target: &T,
    g: &BalancingFunction,
    cap: usize,
) -> Result<f64> {
    ExactSpace::new(target, cap)?.smoothness_constant(g)
}

/// Row-stochastic matrix `P` together with the target `π`.
#[derive(Debug, Clone)]
pub struct ExactKernel {
    pub p: DMatrix<f64>,
    pub pi: Vec<f64>,
}

impl ExactKernel {
    pub fn new(p: DMatrix<f64>, pi: Vec<f64>) -> Result<Self> {
        if !p.is_square() || p.nrows() != pi.len() {
            return Err(Error::SizeMismatch {
                expected: pi.len(),
                found: p.nrows(),
            });
        }
        Ok(Self { p, pi })
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    /// `max_x |Σ_y P(x, y) - 1|`.
    pub fn row_sum_error(&self) -> f64 {
        self.p
            .row_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.p.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `‖πᵀP - πᵀ‖∞`.
    pub fn stationarity_error(&self) -> f64 {
        stationarity_error(&self.p, &self.pi)
    }

    /// `max |π(x)P(x,y) - π(y)P(y,x)|` relative to the largest flow.
    pub fn reversibility_violation(&self) -> f64 {
        let n = self.len();
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for x in 0..n {
            for y in 0..n {
                let f = self.pi[x] * self.p[(x, y)];
                scale = scale.max(f);
                if y > x {
                    worst = worst.max((f - self.pi[y] * self.p[(y, x)]).abs());
                }
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    /// Absolute flow asymmetry `max |π(x)P(x,y) - π(y)P(y,x)|`.
    pub fn detailed_balance_error(&self) -> f64 {
        let n = self.len();
        let mut worst: f64 = 0.0;
        for x in 0..n {
            for y in x + 1..n {
                worst =
                    worst.max((self.pi[x] * self.p[(x, y)] - self.pi[y] * self.p[(y, x)]).abs());
            }
        }
        worst
    }

    pub fn check_reversible(&self) -> Result<()> {
        let v = self.reversibility_violation();
        if v > REVERSIBILITY_TOL {
            return Err(Error::NotReversible { max_violation: v });
        }
        Ok(())
    }

    /// Eigen-decomposition of `D^{1/2} P D^{-1/2}`, eigenvalues descending.
    pub fn spectrum(&self) -> Result<Spectrum> {
        self.check_reversible()?;
        let n = self.len();
        let sq: Vec<f64> = self.pi.iter().map(|&v| sqrt(v)).collect();
        let mut s = DMatrix::zeros(n, n);
        for x in 0..n {
            for y in 0..n {
                s[(x, y)] = sq[x] * self.p[(x, y)] / sq[y];
            }
        }
        let sym = (&s + s.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(Spectrum {
            values,
            vectors,
            sqrt_pi: sq,
        })
    }

    /// `1 - λ₂`.
    pub fn spectral_gap(&self) -> Result<f64> {
        let s = self.spectrum()?;
        Ok(if s.values.len() < 2 {
            1.0
        } else {
            1.0 - s.values[1]
        })
    }

    /// `Σ_{i≥2} (1+λ_i)/(1-λ_i) E_π[h f_i]²`.
    pub fn asymptotic_variance(&self, h: &[f64]) -> Result<f64> {
        self.spectrum()?.asymptotic_variance(h)
    }

    /// `πᵀ Pᵗ` starting from `init`.
    pub fn distribution_after(&self, init: &[f64], steps: usize) -> Vec<f64> {
        let mut v = nalgebra::RowDVector::from_row_slice(init);
        for _ in 0..steps {
            v = &v * &self.p;
        }
        v.iter().copied().collect()
    }

    /// `½P + ½I`.
    pub fn lazy(&self) -> ExactKernel {
        let n = self.len();
        ExactKernel {
            p: (&self.p + DMatrix::identity(n, n)) * 0.5,
            pi: self.pi.clone(),
        }
    }
}

pub fn stationarity_error(p: &DMatrix<f64>, pi: &[f64]) -> f64 {
    let n = pi.len();
    let mut worst: f64 = 0.0;
    for y in 0..n {
        let mut s = crate::math::KahanSum::new();
        for x in 0..n {
            s.add(pi[x] * p[(x, y)]);
        }
        worst = worst.max((s.value() - pi[y]).abs());
    }
    worst
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Descending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors of the symmetrized matrix, column per value.
    pub vectors: DMatrix<f64>,
    sqrt_pi: Vec<f64>,
}

impl Spectrum {
    pub fn asymptotic_variance(&self, h: &[f64]) -> Result<f64> {
        let n = self.values.len();
        if h.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                found: h.len(),
            });
        }
        let unit = self.values.iter().filter(|&&l| l > 1.0 - 1e-9).count();
        if unit > 1 {
            return Err(Error::Reducible { multiplicity: unit });
        }
        let pi: Vec<f64> = self.sqrt_pi.iter().map(|s| s * s).collect();
        let mean: f64 = h.iter().zip(&pi).map(|(a, b)| a * b).sum();
        let mut var = 0.0;
        for i in 1..n {
            let lam = self.values[i];
            let coef: f64 = (0..n)
                .map(|x| self.sqrt_pi[x] * (h[x] - mean) * self.vectors[(x, i)])
                .sum();
            var += (1.0 + lam) / (1.0 - lam) * coef * coef;
        }
        Ok(var.max(0.0))
    }
}

/// `var_π(h)`.
pub fn variance_under(pi: &[f64], h: &[f64]) -> f64 {
    let mean: f64 = h.iter().zip(pi).map(|(a, b)| a * b).sum();
    h.iter()
        .zip(pi)
        .map(|(a, b)| b * (a - mean) * (a - mean))
        .sum()
}

/// Total variation distance between two probability vectors.
pub fn tv_distance(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Stationarity of `Q_g` with respect to the normalized `π^power Z_g`.
///
/// Balanced `g` make `Q_g` reversible for `π Z_g` (`power = 1`); the linear
/// `g(t) = t` makes it reversible for `π² Z_g` instead.
pub fn proposal_stationarity_error<S: Clone + Ord>(
    space: &ExactSpace<S>,
    g: &BalancingFunction,
    power: f64,
) -> Result<f64> {
    let q = space.proposal(g)?;
    let lz = space.log_normalizers(g)?;
    let lw: Vec<f64> = lz
        .iter()
        .zip(space.pi())
        .map(|(z, p)| z + power * log(*p))
        .collect();
    let norm = log_sum_exp(&lw);
    let target: Vec<f64> = lw.iter().map(|l| exp(l - norm)).collect();
    Ok(stationarity_error(&q.p, &target))
}

/// Maximum entry of `|F - Fᵀ|`.
pub fn asymmetry(f: &DMatrix<f64>) -> f64 {
    (f - f.transpose()).amax()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeskunReport {
    pub c: f64,
    /// `min_{x≠y} P1(x,y) - c P2(x,y)`.
    pub min_slack: f64,
    pub entrywise_pass: bool,
    pub gap1: f64,
    pub gap2: f64,
    pub gap_pass: bool,
    /// `(var(h, P1), var(h, P2)/c + (1-c)/c var_π(h))` per test function.
    pub variances: Vec<(f64, f64)>,
    pub variance_pass: bool,
}

impl PeskunReport {
    pub fn all_pass(&self) -> bool {
        self.entrywise_pass && self.gap_pass && self.variance_pass
    }
}

/// Checks `P1 ≥ c P2` off the diagonal and the gap and variance orderings it
/// implies.
pub fn peskun_check(
    p1: &ExactKernel,
    p2: &ExactKernel,
    c: f64,
    hs: &[Vec<f64>],
) -> Result<PeskunReport> {
    let n = p1.len();
    if p2.len() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            found: p2.len(),
        });
    }
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::Domain {
            what: "Peskun constant",
            value: c,
        });
    }
    let mut min_slack = f64::INFINITY;
    for x in 0..n {
        for y in 0..n {
            if x != y {
                min_slack = min_slack.min(p1.p[(x, y)] - c * p2.p[(x, y)]);
            }
        }
    }
    let s1 = p1.spectrum()?;
    let s2 = p2.spectrum()?;
    let gap = |s: &Spectrum| {
        if s.values.len() < 2 {
            1.0
        } else {
            1.0 - s.values[1]
        }
    };
    let (gap1, gap2) = (gap(&s1), gap(&s2));
    let mut variances = Vec::with_capacity(hs.len());
    let mut variance_pass = true;
    for h in hs {
        let v1 = s1.asymptotic_variance(h)?;
        let v2 = s2.asymptotic_variance(h)?;
        let bound = v2 / c + (1.0 - c) / c * variance_under(&p1.pi, h);
        variance_pass &= v1 <= bound * (1.0 + 1e-9) + 1e-12;
        variances.push((v1, bound));
    }
    Ok(PeskunReport {
        c,
        min_slack,
        entrywise_pass: min_slack >= -1e-12,
        gap1,
        gap2,
        gap_pass: gap1 >= c * gap2 - 1e-12,
        variances,
        variance_pass,
    })
}

/// Parameters `(v, c)` of the binary-component limit: the informed weights
/// of flipping a bit with `π(0) = p` are `g((1-p)/p) = v c (1-p)` upward and
/// `g(p/(1-p)) = v (1-c) p` downward.
pub fn binary_parameters(g: &BalancingFunction, p: f64) -> Result<(f64, f64)> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain {
            what: "binary probability",
            value: p,
        });
    }
    let a = g.evaluate((1.0 - p) / p)? / (1.0 - p);
    let b = g.evaluate(p / (1.0 - p))? / p;
    Ok((a + b, a / (a + b)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitRates {
    /// `e_i = v_i min{c_i, 1-c_i} / Z̄`.
    pub e: Vec<f64>,
    /// Rate of `x_i: 0 → 1`, `e_i (1-p_i)`.
    pub up: Vec<f64>,
    /// Rate of `x_i: 1 → 0`, `e_i p_i`.
    pub down: Vec<f64>,
    pub z_bar: f64,
}

pub fn limit_rates(p: &[f64], v: &[f64], c: &[f64]) -> Result<LimitRates> {
    let n = p.len();
    if v.len() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            found: v.len(),
        });
    }
    if c.len() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            found: c.len(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("empty probability vector".into()));
    }
    for i in 0..n {
        if !(p[i] > 0.0 && p[i] < 1.0) {
            return Err(Error::Domain {
                what: "p_i",
                value: p[i],
            });
        }
        if !(v[i] > 0.0 && v[i].is_finite()) {
            return Err(Error::Domain {
                what: "v_i",
                value: v[i],
            });
        }
        if !(c[i] > 0.0 && c[i] < 1.0) {
            return Err(Error::Domain {
                what: "c_i",
                value: c[i],
            });
        }
    }
    let z_bar = (0..n).map(|i| v[i] * p[i] * (1.0 - p[i])).sum::<f64>() / n as f64;
    let e: Vec<f64> = (0..n)
        .map(|i| v[i] * c[i].min(1.0 - c[i]) / z_bar)
        .collect();
    let up = (0..n).map(|i| e[i] * (1.0 - p[i])).collect();
    let down = (0..n).map(|i| e[i] * p[i]).collect();
    Ok(LimitRates { e, up, down, z_bar })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chain_rng;
    use crate::target::{BinaryTarget, Boundary, IsingTarget, PermutationTarget};
    use alloc::vec;

    fn specs() -> Vec<KernelSpec> {
        vec![
            KernelSpec::RandomWalk,
            KernelSpec::Informed(BalancingFunction::Linear),
            KernelSpec::Informed(BalancingFunction::Sqrt),
            KernelSpec::Informed(BalancingFunction::Barker),
            KernelSpec::HammingBall,
            KernelSpec::Blockwise {
                g: BalancingFunction::Barker,
                block_size: 2,
                inner_steps: 2,
            },
        ]
    }

    #[test]
    fn two_state_rw() {
        // π = (1/3, 2/3): p = 1/3 for the single bit
        let t = BinaryTarget::new(vec![1.0 / 3.0]).unwrap();
        let k = build_exact_kernel(&KernelSpec::RandomWalk, &t, DEFAULT_CAP).unwrap();
        assert!((k.p[(0, 1)] - 1.0).abs() < 1e-15);
        assert!((k.p[(1, 0)] - 0.5).abs() < 1e-15);
        let s = k.spectrum().unwrap();
        assert!((s.values[0] - 1.0).abs() < 1e-14);
        assert!((s.values[1] + 0.5).abs() < 1e-14);
        assert!((k.spectral_gap().unwrap() - 1.5).abs() < 1e-14);
    }

    #[test]
    fn two_state_variance_closed_form() {
        // for a 2-state chain λ₂ = 1 - a - b and var(1{x=1}) = π₀π₁(1+λ₂)/(1-λ₂)
        for &(a, b) in &[(0.3, 0.6), (1.0, 0.5), (0.05, 0.2), (0.9, 0.9)] {
            let pi = vec![b / (a + b), a / (a + b)];
            let p = DMatrix::from_row_slice(2, 2, &[1.0 - a, a, b, 1.0 - b]);
            let k = ExactKernel::new(p, pi.clone()).unwrap();
            let lam = 1.0 - a - b;
            assert!((k.spectral_gap().unwrap() - (a + b)).abs() < 1e-13);
            let expect = pi[0] * pi[1] * (1.0 + lam) / (1.0 - lam);
            let got = k.asymptotic_variance(&[0.0, 1.0]).unwrap();
            assert!(
                (got - expect).abs() < 1e-13 * (1.0 + expect),
                "{got} {expect}"
            );
        }
    }

    #[test]
    fn identity_and_independent_kernels() {
        let pi = vec![0.2, 0.3, 0.5];
        let id = ExactKernel::new(DMatrix::identity(3, 3), pi.clone()).unwrap();
        assert!(id.spectral_gap().unwrap().abs() < 1e-14);
        assert!(matches!(
            id.asymptotic_variance(&[1.0, 2.0, 3.0]),
            Err(Error::Reducible { .. })
        ));
        let ind = ExactKernel::new(DMatrix::from_fn(3, 3, |_, y| pi[y]), pi.clone()).unwrap();
        assert!((ind.spectral_gap().unwrap() - 1.0).abs() < 1e-14);
        let h = [1.0, -2.0, 4.0];
        let v = ind.asymptotic_variance(&h).unwrap();
        assert!((v - variance_under(&pi, &h)).abs() < 1e-13);
        assert!(ind.asymptotic_variance(&[5.0; 3]).unwrap() < 1e-25);
    }

    #[test]
    fn all_schemes_stationary_on_small_targets() {
        let b = BinaryTarget::new(vec![0.2, 0.8, 0.2, 0.8]).unwrap();
        let sb = ExactSpace::new(&b, DEFAULT_CAP).unwrap();
        let mut rng = chain_rng(1, 0);
        let p = PermutationTarget::lognormal(4, 1.0, &mut rng).unwrap();
        let sp = ExactSpace::new(&p, DEFAULT_CAP).unwrap();
        for spec in specs() {
            let k = sb.kernel(&b, &spec).unwrap();
            assert!(k.stationarity_error() < 1e-12, "{}", spec.name());
            assert!(k.row_sum_error() < 1e-12);
            assert!(k.min_entry() >= 0.0);
            let k = sp.kernel(&p, &spec).unwrap();
            assert!(k.stationarity_error() < 1e-12, "{}", spec.name());
            if !matches!(spec, KernelSpec::HammingBall) {
                assert!(k.reversibility_violation() < 1e-12, "{}", spec.name());
            }
        }
    }

    #[test]
    fn barker_uniform_doubly_stochastic() {
        let t = BinaryTarget::new(vec![0.5, 0.5]).unwrap();
        let k =
            build_exact_kernel(&KernelSpec::Informed(BalancingFunction::Barker), &t, 16).unwrap();
        for j in 0..4 {
            assert!((k.p.column(j).sum() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn overflow_cap() {
        let t = BinaryTarget::new(vec![0.5; 13]).unwrap();
        assert!(matches!(
            ExactSpace::new(&t, DEFAULT_CAP),
            Err(Error::StateSpaceOverflow { .. })
        ));
    }

    #[test]
    fn flow_symmetry_and_counterexample() {
        let t = IsingTarget::new(
            3,
            (0..9).map(|i| 0.1 * i as f64 - 0.4).collect(),
            0.7,
            Boundary::Periodic,
        )
        .unwrap();
        let s = ExactSpace::new(&t, DEFAULT_CAP).unwrap();
        for g in [
            BalancingFunction::Sqrt,
            BalancingFunction::Barker,
            BalancingFunction::Min,
            BalancingFunction::Max,
        ] {
            assert!(asymmetry(&s.flow_matrix(&g)) < 1e-12);
            assert!(proposal_stationarity_error(&s, &g, 1.0).unwrap() < 1e-12);
        }
        // π = (1/4, 3/4), g(t) = t
        let two = BinaryTarget::new(vec![0.25]).unwrap();
        let s2 = ExactSpace::new(&two, 4).unwrap();
        let a = asymmetry(&s2.flow_matrix(&BalancingFunction::Linear));
        assert!((a - 0.5).abs() < 1e-14);
        // Q_g is stationary for π² Z_g, not π Z_g
        assert!(proposal_stationarity_error(&s2, &BalancingFunction::Linear, 2.0).unwrap() < 1e-14);
        assert!(proposal_stationarity_error(&s2, &BalancingFunction::Linear, 1.0).unwrap() > 0.1);
        let mut rng = chain_rng(3, 0);
        let p = PermutationTarget::lognormal(4, 1.5, &mut rng).unwrap();
        let sp = ExactSpace::new(&p, DEFAULT_CAP).unwrap();
        assert!(proposal_stationarity_error(&sp, &BalancingFunction::Linear, 2.0).unwrap() < 1e-12);
    }

    #[test]
    fn smoothness_uniform_is_one() {
        let t = BinaryTarget::new(vec![0.5; 5]).unwrap();
        for g in [
            BalancingFunction::Linear,
            BalancingFunction::Barker,
            BalancingFunction::Sqrt,
        ] {
            assert!((smoothness_constant(&t, &g, DEFAULT_CAP).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn peskun_trivial_and_lazy() {
        let t = BinaryTarget::new(vec![0.3, 0.6, 0.45]).unwrap();
        let k = build_exact_kernel(&KernelSpec::Informed(BalancingFunction::Sqrt), &t, 64).unwrap();
        let hs = vec![(0..8).map(|i| i as f64).collect::<Vec<_>>()];
        let same = peskun_check(&k, &k, 1.0, &hs).unwrap();
        assert!(same.all_pass() && same.min_slack >= 0.0);
        let lazy = k.lazy();
        // lazy chain against the original, c = ½: P_lazy ≥ ½ P off-diagonal
        let r = peskun_check(&lazy, &k, 0.5, &hs).unwrap();
        assert!(r.all_pass());
        assert!((r.gap1 - 0.5 * r.gap2).abs() < 1e-12);
        // var(h, lazy) = 2 var(h, P) + var_π(h) attains the bound
        let (v1, bound) = r.variances[0];
        assert!((v1 - bound).abs() < 1e-10 * bound);
    }

    #[test]
    fn non_reversible_refused() {
        let pi = vec![1.0 / 3.0; 3];
        let p = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let k = ExactKernel::new(p, pi).unwrap();
        assert!(k.stationarity_error() < 1e-15);
        assert!(matches!(k.spectral_gap(), Err(Error::NotReversible { .. })));
    }

    #[test]
    fn binary_limit_parameters() {
        for p in [0.1, 0.3, 0.5, 0.77] {
            for g in [
                BalancingFunction::Barker,
                BalancingFunction::Sqrt,
                BalancingFunction::Min,
            ] {
                let (_, c) = binary_parameters(&g, p).unwrap();
                assert!((c - 0.5).abs() < 1e-12);
            }
            let (_, c) = binary_parameters(&BalancingFunction::Linear, p).unwrap();
            assert!((c - (1.0 - p)).abs() < 1e-12 || (c - p).abs() < 1e-12);
        }
    }

    #[test]
    fn limit_rates_properties() {
        let p = vec![0.2, 0.5, 0.7];
        let v = vec![1.0, 2.0, 3.0];
        let half = vec![0.5; 3];
        let r = limit_rates(&p, &v, &half).unwrap();
        let v2: Vec<f64> = v.iter().map(|x| 2.0 * x).collect();
        let r2 = limit_rates(&p, &v2, &half).unwrap();
        for i in 0..3 {
            assert!((r.e[i] - r2.e[i]).abs() < 1e-14);
        }
        // constant v with c = ½ gives up-rates proportional to 1 - p_i
        let rc = limit_rates(&p, &[1.0; 3], &half).unwrap();
        for i in 0..3 {
            assert!((rc.up[i] / (1.0 - p[i]) - rc.up[0] / (1.0 - p[0])).abs() < 1e-14);
            assert!((rc.down[i] / p[i] - rc.down[0] / p[0]).abs() < 1e-14);
        }
        assert!(limit_rates(&[0.0], &[1.0], &[0.5]).is_err());
    }

    #[test]
    fn exact_iteration_converges() {
        let t = BinaryTarget::new(vec![0.3, 0.6, 0.45]).unwrap();
        let k =
            build_exact_kernel(&KernelSpec::Informed(BalancingFunction::Barker), &t, 64).unwrap();
        let mut init = vec![0.0; 8];
        init[0] = 1.0;
        let d = k.distribution_after(&init, 2000);
        assert!(tv_distance(&d, &k.pi) < 1e-10);
    }
}
