//! Balancing functions `g` used to reweight a symmetric base kernel by a
//! function of the target ratio `π(y)/π(x)`.
//!
//! Everything inside the samplers works with `log g(exp(log_t))`; the
//! linear-domain [`BalancingFunction::evaluate`] exists for tests and the
//! exact-analysis code.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use core::fmt;

use crate::error::{Error, Result};
use crate::math::{exp, log, softplus, sqrt};

/// Declared coefficients of a linear upper bound `g(t) <= a + b t`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinearBound {
    pub a: f64,
    pub b: f64,
}

type LogFn = dyn Fn(f64) -> f64 + Send + Sync;

/// A user supplied balancing function, stored as a log-domain map.
#[derive(Clone)]
pub struct CustomFn {
    name: String,
    log_fn: Arc<LogFn>,
    bound: Option<LinearBound>,
}

impl CustomFn {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bound(&self) -> Option<LinearBound> {
        self.bound
    }
}

impl fmt::Debug for CustomFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomFn")
            .field("name", &self.name)
            .field("bound", &self.bound)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum BalancingFunction {
    /// `g(t) = 1`: the uninformed random-walk proposal.
    Constant,
    /// `g(t) = t`: the globally-balanced proposal.
    Linear,
    /// `g(t) = √t`.
    Sqrt,
    /// `g(t) = t / (1 + t)`.
    Barker,
    /// `g(t) = 1 ∧ t`.
    Min,
    /// `g(t) = 1 ∨ t`.
    Max,
    Custom(CustomFn),
}

impl BalancingFunction {
    /// Wrap a linear-domain map. The map must be positive on `(0, ∞)`.
    pub fn custom<F>(name: impl Into<String>, f: F, bound: Option<LinearBound>) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::custom_log(name, move |lt: f64| log(f(exp(lt))), bound)
    }

    /// Wrap a map already expressed as `log_t ↦ log g(exp(log_t))`.
    pub fn custom_log<F>(name: impl Into<String>, f: F, bound: Option<LinearBound>) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        BalancingFunction::Custom(CustomFn {
            name: name.into(),
            log_fn: Arc::new(f),
            bound,
        })
    }

    /// Parse the short names used in configs: `rw`, `gb`, `sqrt`, `barker`,
    /// `min`, `max` (plus a few aliases).
    pub fn from_name(name: &str) -> Result<Self> {
        let g = match name.trim().to_ascii_lowercase().as_str() {
            "rw" | "constant" | "one" => BalancingFunction::Constant,
            "gb" | "linear" | "t" => BalancingFunction::Linear,
            "sqrt" | "lb1" => BalancingFunction::Sqrt,
            "barker" | "lb2" | "lb" => BalancingFunction::Barker,
            "min" => BalancingFunction::Min,
            "max" => BalancingFunction::Max,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown balancing function '{other}'"
                )))
            }
        };
        Ok(g)
    }

    pub fn name(&self) -> String {
        match self {
            BalancingFunction::Constant => "rw".into(),
            BalancingFunction::Linear => "gb".into(),
            BalancingFunction::Sqrt => "sqrt".into(),
            BalancingFunction::Barker => "barker".into(),
            BalancingFunction::Min => "min".into(),
            BalancingFunction::Max => "max".into(),
            BalancingFunction::Custom(c) => c.name.clone(),
        }
    }

    /// Built-in kinds known to satisfy `g(t) = t g(1/t)`.
    pub fn is_builtin_balanced(&self) -> bool {
        matches!(
            self,
            BalancingFunction::Sqrt
                | BalancingFunction::Barker
                | BalancingFunction::Min
                | BalancingFunction::Max
        )
    }

    pub fn linear_bound(&self) -> Option<LinearBound> {
        let (a, b) = match self {
            BalancingFunction::Constant => (1.0, 0.0),
            BalancingFunction::Linear => (0.0, 1.0),
            BalancingFunction::Sqrt => (1.0, 1.0),
            BalancingFunction::Barker => (1.0, 0.0),
            BalancingFunction::Min => (1.0, 0.0),
            BalancingFunction::Max => (1.0, 1.0),
            BalancingFunction::Custom(c) => return c.bound,
        };
        Some(LinearBound { a, b })
    }

    /// `g(t)` in the linear domain.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Domain {
                what: "ratio t",
                value: t,
            });
        }
        Ok(match self {
            BalancingFunction::Constant => 1.0,
            BalancingFunction::Linear => t,
            BalancingFunction::Sqrt => sqrt(t),
            BalancingFunction::Barker => t / (1.0 + t),
            BalancingFunction::Min => t.min(1.0),
            BalancingFunction::Max => t.max(1.0),
            BalancingFunction::Custom(c) => exp((c.log_fn)(log(t))),
        })
    }

    /// `log g(exp(log_t))`, rejecting non-finite input.
    pub fn log_evaluate(&self, log_t: f64) -> Result<f64> {
        if !log_t.is_finite() {
            return Err(Error::Domain {
                what: "log ratio",
                value: log_t,
            });
        }
        Ok(self.log_g(log_t))
    }

    /// Unchecked hot-path version of [`log_evaluate`](Self::log_evaluate).
    ///
    /// `log_t = -inf` (a zero-probability neighbor) maps to the limit `g(0)`:
    /// weight 0 for every built-in except `Constant` and `Max`.
    #[inline]
    pub fn log_g(&self, log_t: f64) -> f64 {
        match self {
            BalancingFunction::Constant => 0.0,
            BalancingFunction::Linear => log_t,
            BalancingFunction::Sqrt => 0.5 * log_t,
            BalancingFunction::Barker => -softplus(-log_t),
            BalancingFunction::Min => log_t.min(0.0),
            BalancingFunction::Max => log_t.max(0.0),
            BalancingFunction::Custom(c) => (c.log_fn)(log_t),
        }
    }

    /// True iff `|g(t) - t g(1/t)| <= tol * max(1, g(t))` at every probe.
    pub fn is_balanced(&self, probes: &[f64], tol: f64) -> Result<bool> {
        if probes.is_empty() {
            return Err(Error::InvalidArgument("empty probe list".into()));
        }
        if !(tol > 0.0) {
            return Err(Error::Domain {
                what: "tolerance",
                value: tol,
            });
        }
        for &t in probes {
            let lhs = self.evaluate(t)?;
            let rhs = t * self.evaluate(1.0 / t)?;
            if (lhs - rhs).abs() > tol * lhs.max(1.0) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `t ↦ min{g(t), t g(1/t)}`, which is balanced for any positive `g`.
    pub fn balanced_transform(&self) -> BalancingFunction {
        let inner = self.clone();
        let name = format!("balanced({})", self.name());
        let bound = self.linear_bound();
        BalancingFunction::custom_log(
            name,
            move |lt: f64| {
                let direct = inner.log_g(lt);
                let mirrored = lt + inner.log_g(-lt);
                direct.min(mirrored)
            },
            bound,
        )
    }

    /// Check the declared linear bound on the supplied grid. Returns `false`
    /// when no bound is declared.
    pub fn verify_linear_bound(&self, grid: &[f64]) -> bool {
        let Some(LinearBound { a, b }) = self.linear_bound() else {
            return false;
        };
        grid.iter().all(|&t| match self.evaluate(t) {
            Ok(v) => v <= (a + b * t) * (1.0 + 1e-12) + 1e-300,
            Err(_) => false,
        })
    }
}

impl fmt::Display for BalancingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Log-spaced probe grid on `[lo, hi]` with `count` points.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> alloc::vec::Vec<f64> {
    let (a, b) = (log(lo), log(hi));
    (0..count)
        .map(|k| {
            let s = if count > 1 {
                k as f64 / (count - 1) as f64
            } else {
                0.0
            };
            exp(a + s * (b - a))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn builtins() -> Vec<BalancingFunction> {
        vec![
            BalancingFunction::Constant,
            BalancingFunction::Linear,
            BalancingFunction::Sqrt,
            BalancingFunction::Barker,
            BalancingFunction::Min,
            BalancingFunction::Max,
        ]
    }

    #[test]
    fn evaluate_examples() {
        assert!((BalancingFunction::Barker.evaluate(2.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(BalancingFunction::Sqrt.evaluate(4.0).unwrap(), 2.0);
        assert_eq!(BalancingFunction::Min.evaluate(3.0).unwrap(), 1.0);
        assert_eq!(BalancingFunction::Max.evaluate(3.0).unwrap(), 3.0);
    }

    #[test]
    fn evaluate_rejects_bad_ratio() {
        for t in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(BalancingFunction::Barker.evaluate(t).is_err());
        }
    }

    #[test]
    fn log_evaluate_examples() {
        let b = BalancingFunction::Barker.log_evaluate(0.0).unwrap();
        assert!((b - log(0.5)).abs() < 1e-15);
        assert_eq!(BalancingFunction::Sqrt.log_evaluate(200.0).unwrap(), 100.0);
        assert_eq!(
            BalancingFunction::Linear.log_evaluate(-700.0).unwrap(),
            -700.0
        );
        assert!(BalancingFunction::Linear.log_evaluate(f64::NAN).is_err());
    }

    #[test]
    fn barker_log_is_stable_at_extremes() {
        let g = BalancingFunction::Barker;
        assert!((g.log_g(800.0)).abs() < 1e-300);
        assert!((g.log_g(-800.0) + 800.0).abs() < 1e-12);
    }

    #[test]
    fn zero_ratio_limits() {
        let ninf = f64::NEG_INFINITY;
        assert_eq!(BalancingFunction::Constant.log_g(ninf), 0.0);
        assert_eq!(BalancingFunction::Max.log_g(ninf), 0.0);
        for g in [
            BalancingFunction::Linear,
            BalancingFunction::Sqrt,
            BalancingFunction::Barker,
            BalancingFunction::Min,
        ] {
            assert_eq!(g.log_g(ninf), ninf, "{g}");
        }
    }

    #[test]
    fn is_balanced_examples() {
        let probes = [0.1, 1.0, 2.0, 10.0];
        assert!(BalancingFunction::Barker
            .is_balanced(&probes, 1e-12)
            .unwrap());
        assert!(!BalancingFunction::Linear
            .is_balanced(&[2.0], 1e-12)
            .unwrap());
        assert!(!BalancingFunction::Constant
            .is_balanced(&[2.0], 1e-12)
            .unwrap());
        assert!(BalancingFunction::Barker.is_balanced(&[], 1e-12).is_err());
    }

    #[test]
    fn builtin_balanced_kinds_hold_on_wide_grid() {
        let grid = log_grid(1e-8, 1e8, 161);
        for g in builtins().into_iter().filter(|g| g.is_builtin_balanced()) {
            assert!(g.is_balanced(&grid, 1e-12).unwrap(), "{g}");
        }
    }

    #[test]
    fn transform_examples() {
        let lin = BalancingFunction::Linear.balanced_transform();
        for t in [0.5, 1.0, 3.0] {
            assert!((lin.evaluate(t).unwrap() - t.min(1.0)).abs() < 1e-14);
        }
        let bt = BalancingFunction::Barker.balanced_transform();
        for t in [0.5, 1.0, 3.0] {
            let want = BalancingFunction::Barker.evaluate(t).unwrap();
            assert!((bt.evaluate(t).unwrap() - want).abs() < 1e-14);
        }
        let sq = BalancingFunction::custom("t^2", |t| t * t, None);
        assert!((sq.balanced_transform().evaluate(2.0).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn linear_bounds_hold_for_builtins() {
        let grid = log_grid(1e-6, 1e6, 101);
        for g in builtins() {
            assert!(g.verify_linear_bound(&grid), "{g}");
        }
        let sq = BalancingFunction::custom("t^2", |t| t * t, Some(LinearBound { a: 1.0, b: 1.0 }));
        assert!(!sq.verify_linear_bound(&grid));
        let undeclared = BalancingFunction::custom("t", |t| t, None);
        assert!(!undeclared.verify_linear_bound(&grid));
    }

    #[test]
    fn names_round_trip() {
        for g in builtins() {
            let back = BalancingFunction::from_name(&g.name()).unwrap();
            assert_eq!(back.name(), g.name());
        }
        assert!(BalancingFunction::from_name("bogus").is_err());
    }

    proptest! {
        #[test]
        fn log_and_linear_domains_agree(lt in -300.0f64..300.0, k in 0usize..6) {
            let g = &builtins()[k];
            let t = exp(lt);
            let direct = g.evaluate(t).unwrap();
            let via_log = exp(g.log_evaluate(lt).unwrap());
            prop_assert!((direct - via_log).abs() <= 1e-12 * direct.abs().max(f64::MIN_POSITIVE));
        }

        #[test]
        fn transform_is_balanced_and_idempotent(lt in -30.0f64..30.0, p in 0.1f64..3.0) {
            let g = BalancingFunction::custom("power", move |t| libm::pow(t, p) + 0.1, None);
            let once = g.balanced_transform();
            let twice = once.balanced_transform();
            let t = exp(lt);
            let a = once.evaluate(t).unwrap();
            let b = twice.evaluate(t).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
            prop_assert!(once.is_balanced(&[t], 1e-10).unwrap());
        }
    }
}
