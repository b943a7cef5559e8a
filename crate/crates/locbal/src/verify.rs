//! `verify`: exact-mode assertion battery on enumerable targets.

use locbal_core::balance::{BalancingFunction, LinearBound};
use locbal_core::exact::{
    asymmetry, binary_parameters, limit_rates, peskun_check, proposal_stationarity_error,
    ExactSpace,
};
use locbal_core::kernels::KernelSpec;
use locbal_core::rng::chain_rng;
use locbal_core::target::{Boundary, IsingPreset};
use locbal_core::{BinaryTarget, DiscreteTarget, IsingTarget, PermutationTarget};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::config::{ConfigSource, VerifySection};
use crate::error::{CliError, CliResult};
use crate::io::{ensure_dir, write_json, write_manifest, Manifest};
use crate::simulate::parse_kernels;
use crate::targets::{build_target, BuiltTarget};

/// Tolerance for stationarity, row sums and flow symmetry.
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub value: f64,
    /// `value <= threshold` passes unless `lower_bound`, then `value >= threshold`.
    pub threshold: f64,
    pub lower_bound: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct GapRow {
    pub target: String,
    pub scheme: String,
    /// `None` when the kernel is not reversible (Hamming Ball composites).
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SmoothnessRow {
    pub family: String,
    pub g: String,
    pub n: usize,
    pub c_g: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PeskunRow {
    pub instance: String,
    pub g: String,
    pub c_g: f64,
    pub c_g_tilde: f64,
    pub min_slack: f64,
    pub gap_g_tilde: f64,
    pub gap_g: f64,
    pub worst_variance_ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, Serialize, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub gaps: Vec<GapRow>,
    pub smoothness: Vec<SmoothnessRow>,
    pub peskun: Vec<PeskunRow>,
    pub pass: bool,
}

impl VerifyReport {
    fn upper(&mut self, suite: &str, name: String, value: f64, threshold: f64) {
        let pass = value <= threshold;
        self.checks.push(Check {
            suite: suite.into(),
            name,
            value,
            threshold,
            lower_bound: false,
            pass,
        });
    }

    fn lower(&mut self, suite: &str, name: String, value: f64, threshold: f64) {
        let pass = value >= threshold;
        self.checks.push(Check {
            suite: suite.into(),
            name,
            value,
            threshold,
            lower_bound: true,
            pass,
        });
    }

    fn flag(&mut self, suite: &str, name: String, pass: bool) {
        let value = if pass { 1.0 } else { 0.0 };
        self.checks.push(Check {
            suite: suite.into(),
            name,
            value,
            threshold: 1.0,
            lower_bound: true,
            pass,
        });
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn finish(&mut self) {
        self.pass = self.checks.iter().all(|c| c.pass);
    }

    pub fn suite_passes(&self, suite: &str) -> bool {
        self.checks
            .iter()
            .filter(|c| c.suite == suite)
            .all(|c| c.pass)
    }
}

/// Stationarity and row sums of every scheme, plus flow symmetry of every
/// function in `balanced`.
pub fn exact_suite<T: DiscreteTarget>(
    report: &mut VerifyReport,
    label: &str,
    target: &T,
    schemes: &[KernelSpec],
    balanced: &[BalancingFunction],
    cap: usize,
) -> CliResult<()> {
    let space = ExactSpace::new(target, cap)?;
    for spec in schemes {
        let k = space.kernel(target, spec)?;
        let name = spec.name();
        report.upper(
            "stationarity",
            format!("{label} {name} |piP - pi|"),
            k.stationarity_error(),
            EXACT_TOL,
        );
        report.upper(
            "stationarity",
            format!("{label} {name} row sums"),
            k.row_sum_error(),
            EXACT_TOL,
        );
        report.lower(
            "stationarity",
            format!("{label} {name} min entry"),
            k.min_entry(),
            -EXACT_TOL,
        );
        let gap = if k.check_reversible().is_ok() {
            Some(k.spectral_gap()?)
        } else {
            None
        };
        report.gaps.push(GapRow {
            target: label.into(),
            scheme: name,
            gap,
        });
    }
    for g in balanced {
        let a = asymmetry(&space.flow_matrix(g));
        report.upper(
            "balance",
            format!("{label} {} flow asymmetry", g.name()),
            a,
            EXACT_TOL,
        );
    }
    Ok(())
}

/// Two states with `π = (1/(1+t₀), t₀/(1+t₀))`, `t₀ = 3`: balanced flows
/// are symmetric, `g(t) = t` is not, and its proposal keeps `π² Z_g`.
pub fn two_state_suite(report: &mut VerifyReport) -> CliResult<()> {
    let t0: f64 = 3.0;
    let target = BinaryTarget::new(vec![1.0 / (1.0 + t0)])?;
    let space = ExactSpace::new(&target, 2)?;
    let linear = BalancingFunction::Linear;
    report.lower(
        "two-state",
        "g(t)=t flow asymmetry".into(),
        asymmetry(&space.flow_matrix(&linear)),
        0.1,
    );
    report.upper(
        "two-state",
        "g(t)=t proposal keeps pi^2 Z_g".into(),
        proposal_stationarity_error(&space, &linear, 2.0)?,
        EXACT_TOL,
    );
    report.lower(
        "two-state",
        "g(t)=t proposal does not keep pi Z_g".into(),
        proposal_stationarity_error(&space, &linear, 1.0)?,
        1e-3,
    );
    let barker = BalancingFunction::Barker;
    report.upper(
        "two-state",
        "barker flow asymmetry".into(),
        asymmetry(&space.flow_matrix(&barker)),
        EXACT_TOL,
    );
    report.upper(
        "two-state",
        "barker proposal keeps pi Z_g".into(),
        proposal_stationarity_error(&space, &barker, 1.0)?,
        EXACT_TOL,
    );
    Ok(())
}

/// `t ↦ (1 ∨ t)(1 + 0.3 sin(log t))`, a non-balanced perturbation of `max`.
pub fn perturbed_max() -> BalancingFunction {
    BalancingFunction::custom_log(
        "max-perturbed",
        |lt: f64| lt.max(0.0) + (0.3 * lt.sin()).ln_1p(),
        Some(LinearBound { a: 1.3, b: 1.3 }),
    )
}

pub fn squared() -> BalancingFunction {
    BalancingFunction::custom_log("t^2", |lt: f64| 2.0 * lt, None)
}

/// `P_g̃ ≥ P_g / (c_g c_g̃)` with its gap and variance consequences on
/// random small targets, for `g ∈ {t², t, perturbed max}`.
pub fn peskun_suite(
    report: &mut VerifyReport,
    instances: usize,
    functions: usize,
    seed: u64,
) -> CliResult<()> {
    let gs = [squared(), BalancingFunction::Linear, perturbed_max()];
    let mut rng = chain_rng(seed, 0x9e55);
    for k in 0..instances {
        let (label, space) = if k % 3 == 2 {
            let n = 3 + (k / 3) % 2;
            let t = PermutationTarget::lognormal(n, 0.8, &mut rng)?;
            (
                format!("permutation#{k}(n={n})"),
                Space::Perm(ExactSpace::new(&t, 1000)?),
            )
        } else {
            let n = 3 + k % 4;
            let t = BinaryTarget::iid_uniform(n, 0.1, 0.9, &mut rng)?;
            (
                format!("binary#{k}(n={n})"),
                Space::Bin(ExactSpace::new(&t, 1000)?),
            )
        };
        let len = space.len();
        let hs: Vec<Vec<f64>> = (0..functions)
            .map(|_| (0..len).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        for g in &gs {
            let gt = g.balanced_transform();
            let (pg, pgt, cg, cgt) = match &space {
                Space::Bin(s) => (
                    s.informed(g)?,
                    s.informed(&gt)?,
                    s.smoothness_constant(g)?,
                    s.smoothness_constant(&gt)?,
                ),
                Space::Perm(s) => (
                    s.informed(g)?,
                    s.informed(&gt)?,
                    s.smoothness_constant(g)?,
                    s.smoothness_constant(&gt)?,
                ),
            };
            let c = 1.0 / (cg * cgt);
            let r = peskun_check(&pgt, &pg, c, &hs)?;
            let name = format!("{label} {}", g.name());
            report.lower(
                "peskun",
                format!("{name} entrywise slack"),
                r.min_slack,
                -EXACT_TOL,
            );
            report.flag("peskun", format!("{name} gap ordering"), r.gap_pass);
            report.flag("peskun", format!("{name} variance bound"), r.variance_pass);
            let worst = r
                .variances
                .iter()
                .map(|(v, b)| if *b > 0.0 { v / b } else { 0.0 })
                .fold(0.0, f64::max);
            report.peskun.push(PeskunRow {
                instance: label.clone(),
                g: g.name(),
                c_g: cg,
                c_g_tilde: cgt,
                min_slack: r.min_slack,
                gap_g_tilde: r.gap1,
                gap_g: r.gap2,
                worst_variance_ratio: worst,
                pass: r.all_pass(),
            });
        }
    }
    Ok(())
}

enum Space {
    Bin(ExactSpace<Vec<u8>>),
    Perm(ExactSpace<locbal_core::PermState>),
}

impl Space {
    fn len(&self) -> usize {
        match self {
            Space::Bin(s) => s.len(),
            Space::Perm(s) => s.len(),
        }
    }
}

/// Binary target with `p` evenly spread over `[0.2, 0.8]`.
pub fn spread_binary(n: usize) -> CliResult<BinaryTarget> {
    let p = (0..n)
        .map(|i| 0.2 + 0.6 * i as f64 / (n - 1).max(1) as f64)
        .collect();
    Ok(BinaryTarget::new(p)?)
}

/// Permutation target with weights `w_ij = 1 + ((i + 2j) mod 3) / 2`, all in `[1, 2]`.
pub fn bounded_permutation(n: usize) -> CliResult<PermutationTarget> {
    let w: Vec<f64> = (0..n * n)
        .map(|k| 1.0 + ((k / n + 2 * (k % n)) % 3) as f64 / 2.0)
        .collect();
    Ok(PermutationTarget::new(n, &w)?)
}

/// `c_g` along growing `n`; `|c_g - 1|` must strictly decrease.
pub fn smoothness_suite(
    report: &mut VerifyReport,
    binary_n: &[usize],
    perm_n: &[usize],
) -> CliResult<()> {
    for g in [BalancingFunction::Sqrt, BalancingFunction::Barker] {
        let mut families: Vec<(&str, Vec<(usize, f64)>)> = Vec::new();
        let mut seq = Vec::new();
        for &n in binary_n {
            let t = spread_binary(n)?;
            seq.push((n, ExactSpace::new(&t, 1 << 13)?.smoothness_constant(&g)?));
        }
        families.push(("binary", seq));
        let mut seq = Vec::new();
        for &n in perm_n {
            let t = bounded_permutation(n)?;
            seq.push((n, ExactSpace::new(&t, 1 << 13)?.smoothness_constant(&g)?));
        }
        families.push(("permutation", seq));
        for (family, seq) in families {
            for &(n, c) in &seq {
                report.smoothness.push(SmoothnessRow {
                    family: family.into(),
                    g: g.name(),
                    n,
                    c_g: c,
                });
            }
            for w in seq.windows(2) {
                let (d0, d1) = ((w[0].1 - 1.0).abs(), (w[1].1 - 1.0).abs());
                report.flag(
                    "smoothness",
                    format!(
                        "{family} {} |c-1| decreases from n={} ({d0:.6}) to n={} ({d1:.6})",
                        g.name(),
                        w[0].0,
                        w[1].0
                    ),
                    d1 < d0,
                );
            }
        }
    }
    Ok(())
}

/// `c = 1/2` maximizes the limiting rates, balanced functions give `c = 1/2`,
/// and the rates are invariant to scaling `v`.
pub fn limit_suite(report: &mut VerifyReport) -> CliResult<()> {
    let p = [0.2, 0.35, 0.5, 0.8];
    let v = [1.0, 2.0, 0.5, 1.5];
    let grid: Vec<f64> = (1..100).map(|k| k as f64 / 100.0).collect();
    for i in 0..p.len() {
        let mut best = (f64::NEG_INFINITY, 0.0);
        for &ci in &grid {
            let mut c = [0.5; 4];
            c[i] = ci;
            let e = limit_rates(&p, &v, &c)?.e[i];
            if e > best.0 + 1e-15 {
                best = (e, ci);
            }
        }
        report.upper(
            "limit",
            format!("argmax c_{i}"),
            (best.1 - 0.5).abs(),
            1e-12,
        );
    }
    let base = limit_rates(&p, &v, &[0.3, 0.5, 0.6, 0.5])?;
    let doubled = limit_rates(&p, &v.map(|x| 2.0 * x), &[0.3, 0.5, 0.6, 0.5])?;
    let drift = base
        .e
        .iter()
        .zip(&doubled.e)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    report.upper("limit", "rates invariant to scaling v".into(), drift, 1e-12);
    for g in [
        BalancingFunction::Sqrt,
        BalancingFunction::Barker,
        BalancingFunction::Min,
        BalancingFunction::Max,
    ] {
        let worst = p
            .iter()
            .map(|&pi| binary_parameters(&g, pi).map(|(_, c)| (c - 0.5).abs()))
            .try_fold(0.0_f64, |acc, r| r.map(|d| acc.max(d)))?;
        report.upper("limit", format!("{} has c = 1/2", g.name()), worst, 1e-12);
    }
    Ok(())
}

fn parse_balanced(names: &[String]) -> CliResult<Vec<BalancingFunction>> {
    names
        .iter()
        .map(|n| {
            BalancingFunction::from_name(n)
                .map_err(|e| CliError::Usage(format!("verify.balanced: {e}")))
        })
        .collect()
}

/// The full battery. With `target` given, the stationarity and balance
/// checks run on it alone; otherwise on the default random targets.
pub fn run_verify(
    v: &VerifySection,
    target: Option<&BuiltTarget>,
    cap: usize,
    seed: u64,
) -> CliResult<VerifyReport> {
    let schemes = parse_kernels(&v.schemes)?;
    let balanced = parse_balanced(&v.balanced)?;
    let mut report = VerifyReport::default();
    match target {
        Some(BuiltTarget::Binary(t)) => {
            exact_suite(&mut report, "target", t, &schemes, &balanced, cap)?
        }
        Some(BuiltTarget::Permutation(t)) => {
            exact_suite(&mut report, "target", t, &schemes, &balanced, cap)?
        }
        Some(BuiltTarget::Ising(t)) => {
            exact_suite(&mut report, "target", t, &schemes, &balanced, cap)?
        }
        None => {
            let mut rng = chain_rng(seed, 0xe7ac);
            for &n in &v.binary_n {
                let t = BinaryTarget::iid_uniform(n, 0.1, 0.9, &mut rng)?;
                exact_suite(
                    &mut report,
                    &format!("binary(n={n})"),
                    &t,
                    &schemes,
                    &balanced,
                    cap,
                )?;
            }
            for &n in &v.permutation_n {
                let t = PermutationTarget::lognormal(n, 1.0, &mut rng)?;
                exact_suite(
                    &mut report,
                    &format!("permutation(n={n})"),
                    &t,
                    &schemes,
                    &balanced,
                    cap,
                )?;
            }
            for &n in &v.ising_n {
                let t = IsingTarget::disk_field(
                    n,
                    IsingPreset::target(2)?,
                    0.25,
                    Boundary::Periodic,
                    &mut rng,
                )?;
                exact_suite(
                    &mut report,
                    &format!("ising({n}x{n})"),
                    &t,
                    &schemes,
                    &balanced,
                    cap,
                )?;
            }
        }
    }
    two_state_suite(&mut report)?;
    peskun_suite(&mut report, v.peskun_instances, v.peskun_functions, seed)?;
    smoothness_suite(
        &mut report,
        &v.smoothness_binary_n,
        &v.smoothness_permutation_n,
    )?;
    limit_suite(&mut report)?;
    report.finish();
    Ok(report)
}

pub fn cmd_verify(source: &ConfigSource) -> CliResult<VerifyReport> {
    let cfg = source.parse()?;
    let seed = cfg.seed()?;
    let out = cfg.out_dir()?;
    let target = match &cfg.target {
        Some(t) => Some(build_target(t, seed)?),
        None => None,
    };
    let report = run_verify(&cfg.verify, target.as_ref(), cfg.exact.cap, seed)?;
    ensure_dir(&out)?;
    write_json(&out.join("verify.json"), &report)?;
    let manifest = Manifest {
        command: "verify",
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: source.hash(),
        seed: Some(seed),
        config: &source.value,
        outputs: vec!["verify.json".into()],
    };
    write_manifest(&out, &manifest)?;
    if report.pass {
        Ok(report)
    } else {
        let names: Vec<String> = report
            .failures()
            .iter()
            .take(5)
            .map(|c| c.name.clone())
            .collect();
        let n = report.failures().len();
        Err(CliError::Verification(format!(
            "{n} check(s) failed, e.g. {}",
            names.join("; ")
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limit_and_two_state_pass() {
        let mut r = VerifyReport::default();
        two_state_suite(&mut r).unwrap();
        limit_suite(&mut r).unwrap();
        r.finish();
        assert!(r.pass, "{:?}", r.failures());
    }

    #[test]
    fn unbalanced_function_fails_balance_check() {
        let mut r = VerifyReport::default();
        let t = BinaryTarget::new(vec![0.2, 0.7, 0.4]).unwrap();
        exact_suite(
            &mut r,
            "b",
            &t,
            &[KernelSpec::RandomWalk],
            &[BalancingFunction::Linear],
            100,
        )
        .unwrap();
        r.finish();
        assert!(!r.pass);
        assert!(r.suite_passes("stationarity"));
        assert!(!r.suite_passes("balance"));
    }

    #[test]
    fn bounded_weights_lie_in_range() {
        let t = bounded_permutation(4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let w = t.log_weight(i, j).exp();
                assert!((1.0..=2.0).contains(&w));
            }
        }
    }
}
