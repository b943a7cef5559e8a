use locbal_core::balance::BalancingFunction;
use locbal_core::exact::ExactSpace;
use locbal_core::kernels::{KernelSpec, NoClock};
use locbal_core::recordlinkage::{
    brute_force_posterior, generate_synthetic, log_likelihood, log_prior_matching, run_rl_sampler,
    Dataset, HyperConfig, HyperState, LinkageModel, Matching, RlConfig, SyntheticConfig,
};
use locbal_core::rng::chain_rng;
use locbal_core::target::DiscreteTarget;

fn small_model(beta: f64) -> LinkageModel {
    let x = vec![vec![0, 1, 2], vec![1, 1, 0], vec![2, 0, 1]];
    let y = vec![vec![0, 1, 2], vec![2, 0, 0], vec![1, 0, 0]];
    LinkageModel::new(Dataset::from_codes(&x, &y, vec![3, 2, 3]).unwrap(), beta).unwrap()
}

#[test]
fn exact_matching_kernels_are_stationary() {
    let model = small_model(0.05);
    let hyper = HyperState {
        lambda: 4.5,
        p_match: 0.4,
        beta: 0.05,
    };
    let target = model.target(&hyper);
    let space = ExactSpace::new(&target, 1000).unwrap();
    assert_eq!(space.len(), 34);
    // the normalized target is prior × likelihood
    let logs: Vec<f64> = space
        .states()
        .iter()
        .map(|m| {
            log_prior_matching(m, hyper.lambda, hyper.p_match)
                + log_likelihood(model.data(), m, 0.05)
        })
        .collect();
    let z = logs.iter().map(|l| l.exp()).sum::<f64>();
    for (l, p) in logs.iter().zip(space.pi()) {
        assert!((l.exp() / z - p).abs() < 1e-12);
    }
    for spec in ["rw", "gb", "sqrt", "barker", "hb"] {
        let spec = KernelSpec::from_name(spec).unwrap();
        let k = space.kernel(&target, &spec).unwrap();
        assert!(k.row_sum_error() < 1e-12);
        assert!(k.stationarity_error() < 1e-12, "{}", spec.name());
    }
}

#[test]
fn identical_single_records_link() {
    // a single record per file carries no evidence (empirical θ = 1), so use
    // two distinct records per file
    let x = vec![vec![0; 8], vec![1; 8]];
    let data = Dataset::from_codes(&x, &x, vec![2; 8]).unwrap();
    let model = LinkageModel::new(data, 0.001).unwrap();
    let post = brute_force_posterior(&model, &HyperConfig::default()).unwrap();
    assert_eq!(post.matchings.len(), 7);
    assert!(post.pair(0, 0) > 0.9 && post.pair(1, 1) > 0.9);
    let mut cfg = RlConfig::new(KernelSpec::Informed(BalancingFunction::Barker), 40_000, 3);
    cfg.moves_per_sweep = 2;
    let res = run_rl_sampler(&model, &cfg, &NoClock).unwrap();
    for (i, j) in [(0, 0), (1, 1), (0, 1)] {
        assert!((res.pair_probability(i, j) - post.pair(i, j)).abs() < 0.01);
    }
}

#[test]
fn flat_likelihood_posterior_is_integrated_prior() {
    let model = small_model(1.0);
    let post = brute_force_posterior(&model, &HyperConfig::default()).unwrap();
    // with β = 1 the posterior depends on M only through N_m
    for (a, pa) in post.matchings.iter().zip(&post.probs) {
        for (b, pb) in post.matchings.iter().zip(&post.probs) {
            if a.n_matched() == b.n_matched() {
                assert!((pa - pb).abs() < 1e-14);
            }
        }
    }
}

#[test]
fn lb_sampler_matches_exact_posterior_on_three_by_three() {
    let model = small_model(0.05);
    let post = brute_force_posterior(&model, &HyperConfig::default()).unwrap();
    let mut cfg = RlConfig::new(KernelSpec::Informed(BalancingFunction::Barker), 50_000, 17);
    cfg.moves_per_sweep = 4;
    cfg.beta = 0.05;
    cfg.burn_in = 100;
    let res = run_rl_sampler(&model, &cfg, &NoClock).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            worst = worst.max((res.pair_probability(i, j) - post.pair(i, j)).abs());
        }
    }
    assert!(worst < 0.02, "max error {worst}");
    let mean_n = res.trace.summary("matches").unwrap().iter().sum::<f64>() / 50_000.0;
    assert!((mean_n - post.expected_matches()).abs() < 0.05);
}

#[test]
fn synthetic_match_count_mean() {
    let cfg = SyntheticConfig {
        lambda: 30.0,
        p_match: 0.3,
        beta: 0.01,
        theta: vec![vec![0.5, 0.3, 0.2]],
    };
    let mut rng = chain_rng(21, 0);
    let reps = 10_000;
    let draws: Vec<f64> = (0..reps)
        .filter_map(|_| generate_synthetic(&cfg, &mut rng).ok())
        .map(|d| d.truth.n_matched() as f64)
        .collect();
    // empty files are essentially impossible at λ = 30
    assert_eq!(draws.len(), reps);
    let mean = draws.iter().sum::<f64>() / reps as f64;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    let se = (var / reps as f64).sqrt();
    assert!((mean - 9.0).abs() < 3.0 * se, "mean {mean} se {se}");
}

#[test]
fn blocked_sampler_preserves_posterior() {
    let model = small_model(0.05);
    let post = brute_force_posterior(&model, &HyperConfig::default()).unwrap();
    let spec = KernelSpec::Blockwise {
        g: BalancingFunction::Sqrt,
        block_size: 2,
        inner_steps: 2,
    };
    let mut cfg = RlConfig::new(spec, 60_000, 5);
    cfg.moves_per_sweep = 3;
    cfg.beta = 0.05;
    let res = run_rl_sampler(&model, &cfg, &NoClock).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert!(
                (res.pair_probability(i, j) - post.pair(i, j)).abs() < 0.025,
                "({i},{j})"
            );
        }
    }
    let m: &Matching = &res.matching;
    m.check_invariants().unwrap();
    let _ = model.target(&res.hyper).num_moves();
}
