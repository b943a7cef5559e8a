use rand::Rng;
use rand_distr::{Beta, Distribution};

use super::model::HyperState;
use crate::error::{Error, Result};
use crate::math::{exp, ln_gamma_pq, log, log_sub_exp};

/// Which Beta update `p_match` receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PMatchUpdate {
    /// `Beta(1 + N, 1 + nx + ny - 2N)`, the conjugate update of the uniform
    /// prior; the matching prior has `p` to the power `N` and `1 - p` to the
    /// power `nx + ny - 2N`.
    #[default]
    Conjugate,
    /// `Beta(1 + nx + ny - 2N, 1 + N)`, with the two parameters transposed.
    Transposed,
}

/// Lower end of the `λ` support; the upper end is always `nx + ny`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LambdaSupport {
    /// `max(nx, ny)`.
    #[default]
    Max,
    /// `min(nx, ny)`.
    Min,
}

impl LambdaSupport {
    pub fn interval(self, nx: usize, ny: usize) -> (f64, f64) {
        let lo = match self {
            LambdaSupport::Max => nx.max(ny),
            LambdaSupport::Min => nx.min(ny),
        };
        (lo as f64, (nx + ny) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HyperConfig {
    pub p_update: PMatchUpdate,
    pub lambda_support: LambdaSupport,
}

/// `log(F(x) - F(lo))` for the Gamma(shape, 1) CDF, in whichever tail keeps
/// precision.
fn log_mass(shape: f64, lo: f64, x: f64, lower_tail: bool) -> f64 {
    let (pl, ql) = ln_gamma_pq(shape, lo);
    let (px, qx) = ln_gamma_pq(shape, x);
    if lower_tail {
        log_sub_exp(px, pl)
    } else {
        log_sub_exp(ql, qx)
    }
}

/// Gamma(shape, rate 1) truncated to `[lo, hi]`, by bisection on the CDF.
pub fn sample_truncated_gamma<R: Rng + ?Sized>(
    shape: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(shape > 0.0) {
        return Err(Error::Domain {
            what: "gamma shape",
            value: shape,
        });
    }
    if !(0.0 <= lo && lo < hi && hi.is_finite()) {
        return Err(Error::InvalidArgument(
            "truncation interval must satisfy 0 <= lo < hi".into(),
        ));
    }
    let (pl, _) = ln_gamma_pq(shape, lo);
    let lower_tail = pl < log(0.5);
    let total = log_mass(shape, lo, hi, lower_tail);
    let u: f64 = rng.random();
    if total == f64::NEG_INFINITY {
        // no representable mass: fall back to the uniform within the interval
        return Ok(lo + u * (hi - lo));
    }
    let goal = log(u.max(f64::MIN_POSITIVE)) + total;
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if log_mass(shape, lo, mid, lower_tail) < goal {
            a = mid;
        } else {
            b = mid;
        }
        if b - a <= 1e-12 * b {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

/// Draw `(λ, p_match)` from their full conditionals given `N` matches.
pub fn gibbs_update_hyper<R: Rng + ?Sized>(
    n_matched: usize,
    nx: usize,
    ny: usize,
    beta: f64,
    cfg: &HyperConfig,
    rng: &mut R,
) -> Result<HyperState> {
    let singles = (nx + ny - 2 * n_matched) as f64;
    let nm = n_matched as f64;
    let (a, b) = match cfg.p_update {
        PMatchUpdate::Conjugate => (1.0 + nm, 1.0 + singles),
        PMatchUpdate::Transposed => (1.0 + singles, 1.0 + nm),
    };
    let dist = Beta::new(a, b).map_err(|_| Error::Domain {
        what: "beta parameter",
        value: a,
    })?;
    // keep p strictly inside (0, 1) so the pair score stays finite
    let p_match = dist.sample(rng).clamp(1e-300, 1.0 - 1e-16);
    let (lo, hi) = cfg.lambda_support.interval(nx, ny);
    let lambda = sample_truncated_gamma(1.0 + (nx + ny - n_matched) as f64, lo, hi, rng)?;
    Ok(HyperState {
        lambda,
        p_match,
        beta,
    })
}

/// `log ∫_lo^hi e^{-λ} λ^{k} dλ` by adaptive Simpson on the shifted
/// integrand; used by the exact posterior, independently of the incomplete
/// gamma routines.
pub fn log_lambda_integral(k: f64, lo: f64, hi: f64) -> f64 {
    let mode = k.clamp(lo, hi);
    let lmax = -mode + if mode > 0.0 { k * log(mode) } else { 0.0 };
    let f = |l: f64| match (k == 0.0, l > 0.0) {
        (true, _) => exp(-l - lmax),
        (false, true) => exp(-l + k * log(l) - lmax),
        (false, false) => 0.0,
    };
    // split at the mode so each piece is unimodal
    let mut total = 0.0;
    for (a, b) in [(lo, mode), (mode, hi)] {
        if b > a {
            total += adaptive_simpson(&f, a, b, 1e-14, 50);
        }
    }
    log(total) + lmax
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, eps: f64, depth: u32) -> f64 {
    let c = 0.5 * (a + b);
    let (fa, fb, fc) = (f(a), f(b), f(c));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    simpson_rec(f, a, b, fa, fb, fc, whole, eps, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fc: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let c = 0.5 * (a + b);
    let (d, e) = (0.5 * (a + c), 0.5 * (c + b));
    let (fd, fe) = (f(d), f(e));
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, c, fa, fc, fd, left, eps / 2.0, depth - 1)
        + simpson_rec(f, c, b, fc, fb, fe, right, eps / 2.0, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::lgamma;
    use crate::rng::chain_rng;

    #[test]
    fn lambda_integral_matches_gamma_function() {
        // ∫_0^∞ e^{-λ} λ^k = k!
        for k in [0.0, 1.0, 3.0, 7.0] {
            let v = log_lambda_integral(k, 0.0, 200.0);
            assert!((v - lgamma(k + 1.0)).abs() < 1e-10, "k={k}: {v}");
        }
        // ∫_2^5 e^{-λ} λ dλ = [-(λ+1)e^{-λ}]
        let exact = 3.0 * exp(-2.0) - 6.0 * exp(-5.0);
        assert!((exp(log_lambda_integral(1.0, 2.0, 5.0)) - exact).abs() < 1e-13);
    }

    #[test]
    fn truncated_gamma_in_support_and_correct_mean() {
        let mut rng = chain_rng(1, 0);
        let (shape, lo, hi) = (5.0, 3.0, 8.0);
        let n = 200_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let v = sample_truncated_gamma(shape, lo, hi, &mut rng).unwrap();
            assert!((lo..=hi).contains(&v));
            sum += v;
        }
        // E[λ] = ∫ λ^shape e^-λ / ∫ λ^(shape-1) e^-λ over [lo, hi]
        let mean =
            exp(log_lambda_integral(shape, lo, hi) - log_lambda_integral(shape - 1.0, lo, hi));
        assert!(
            (sum / n as f64 - mean).abs() < 0.01,
            "{} vs {mean}",
            sum / n as f64
        );
    }

    #[test]
    fn truncated_gamma_far_tails() {
        let mut rng = chain_rng(2, 0);
        // interval far in the upper tail, then far in the lower tail
        for (shape, lo, hi) in [(3.0, 400.0, 410.0), (500.0, 10.0, 20.0)] {
            for _ in 0..100 {
                let v = sample_truncated_gamma(shape, lo, hi, &mut rng).unwrap();
                assert!((lo..=hi).contains(&v));
            }
        }
        // deep upper tail: the truncated law is close to lo + Exp(1)
        let mut s = 0.0;
        for _ in 0..20_000 {
            s += sample_truncated_gamma(1.0, 400.0, 1e4, &mut rng).unwrap() - 400.0;
        }
        assert!((s / 20_000.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn gibbs_draws_in_support_and_reproducible() {
        let cfg = HyperConfig::default();
        let mut a = chain_rng(3, 0);
        let mut b = chain_rng(3, 0);
        for nm in 0..=4 {
            let h = gibbs_update_hyper(nm, 4, 6, 0.001, &cfg, &mut a).unwrap();
            assert!(h.lambda >= 6.0 && h.lambda <= 10.0);
            assert!(h.p_match > 0.0 && h.p_match < 1.0);
            assert_eq!(
                h,
                gibbs_update_hyper(nm, 4, 6, 0.001, &cfg, &mut b).unwrap()
            );
        }
    }

    #[test]
    fn transposed_update_concentrates_high_without_matches() {
        let cfg = HyperConfig {
            p_update: PMatchUpdate::Transposed,
            ..HyperConfig::default()
        };
        let mut rng = chain_rng(4, 0);
        let mean: f64 = (0..2000)
            .map(|_| {
                gibbs_update_hyper(0, 50, 50, 0.001, &cfg, &mut rng)
                    .unwrap()
                    .p_match
            })
            .sum::<f64>()
            / 2000.0;
        assert!(mean > 0.98);
        let conj = HyperConfig::default();
        let mean: f64 = (0..2000)
            .map(|_| {
                gibbs_update_hyper(0, 50, 50, 0.001, &conj, &mut rng)
                    .unwrap()
                    .p_match
            })
            .sum::<f64>()
            / 2000.0;
        assert!(mean < 0.02);
    }
}
