//! Scalar numerics for a `no_std` build: thin wrappers over `libm`, stable
//! log-domain helpers and the regularized incomplete gamma function.

pub use libm::{exp, expm1, fabs, lgamma, log, log1p, pow, sqrt};

/// `log(exp(a) + exp(b))` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + log1p(exp(lo - hi))
}

/// Log-sum-exp over a slice; `-inf` for an empty or all-`-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    let s: f64 = xs.iter().map(|&x| exp(x - max)).sum();
    max + log(s)
}

/// `log(1 + exp(x))`, stable for large |x|.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + log1p(exp(-x))
    } else {
        log1p(exp(x))
    }
}

/// Compensated (Kahan–Babuška/Neumaier) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if fabs(self.sum) >= fabs(x) {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn ln_factorial(n: u64) -> f64 {
    lgamma(n as f64 + 1.0)
}

/// `log B(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    lgamma(a) + lgamma(b) - lgamma(a + b)
}

/// Logs of the regularized incomplete gamma functions `(ln P(a,x), ln Q(a,x))`.
///
/// Series expansion below `x < a + 1`, Lentz continued fraction above; both
/// evaluated with the prefactor kept in log space so that large shapes do not
/// underflow.
pub fn ln_gamma_pq(a: f64, x: f64) -> (f64, f64) {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return (f64::NEG_INFINITY, 0.0);
    }
    if x == f64::INFINITY {
        return (0.0, f64::NEG_INFINITY);
    }
    let ln_pref = a * log(x) - x - lgamma(a);
    if x < a + 1.0 {
        // P(a,x) = x^a e^-x / Γ(a+1) * Σ x^n / ((a+1)...(a+n))
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if fabs(term) < fabs(sum) * 1e-17 {
                break;
            }
        }
        let ln_p = ln_pref + log(sum);
        (ln_p, log1m_exp(ln_p))
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if fabs(d) < tiny {
                d = tiny;
            }
            c = b + an / c;
            if fabs(c) < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if fabs(del - 1.0) < 1e-16 {
                break;
            }
        }
        let ln_q = ln_pref + log(h);
        (log1m_exp(ln_q), ln_q)
    }
}

/// `log(1 - exp(x))` for `x <= 0`.
pub fn log1m_exp(x: f64) -> f64 {
    if x > -core::f64::consts::LN_2 {
        log(-expm1(x))
    } else {
        log1p(-exp(x))
    }
}

/// `log(exp(a) - exp(b))` for `a >= b`.
pub fn log_sub_exp(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    a + log1m_exp(b - a)
}
