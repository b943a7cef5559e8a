use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::LN_2;

use super::hyper::{log_lambda_integral, HyperConfig, PMatchUpdate};
use super::matching::Matching;
use super::model::{log_likelihood, LinkageModel};
use crate::error::{Error, Result};
use crate::math::{exp, ln_beta, log_sum_exp};

/// Largest number of matchings enumerated.
pub const ORACLE_CAP: u128 = 200_000;

/// Posterior over matchings with `λ` and `p_match` integrated out.
#[derive(Debug, Clone)]
pub struct ExactPosterior {
    pub matchings: Vec<Matching>,
    pub probs: Vec<f64>,
    /// Row-major `nx × ny` marginal match probabilities.
    pub pair_probs: Vec<f64>,
    pub nx: usize,
    pub ny: usize,
}

impl ExactPosterior {
    pub fn pair(&self, i: usize, j: usize) -> f64 {
        self.pair_probs[i * self.ny + j]
    }

    pub fn expected_matches(&self) -> f64 {
        self.matchings
            .iter()
            .zip(&self.probs)
            .map(|(m, p)| m.n_matched() as f64 * p)
            .sum()
    }
}

/// Enumerate every matching and integrate the hyperparameters analytically
/// (`p`) and by quadrature (`λ`). Only the conjugate `p` update targets this
/// posterior.
pub fn brute_force_posterior(model: &LinkageModel, cfg: &HyperConfig) -> Result<ExactPosterior> {
    if cfg.p_update != PMatchUpdate::Conjugate {
        return Err(Error::InvalidArgument(
            "the exact posterior assumes the conjugate p update".into(),
        ));
    }
    let data = model.data();
    let (nx, ny) = (data.nx(), data.ny());
    let count = Matching::count_all(nx, ny).unwrap_or(u128::MAX);
    if count > ORACLE_CAP {
        return Err(Error::StateSpaceOverflow {
            size: count,
            cap: ORACLE_CAP as usize,
        });
    }
    let (lo, hi) = cfg.lambda_support.interval(nx, ny);
    let matchings = Matching::enumerate_all(nx, ny);
    let logw: Vec<f64> = matchings
        .iter()
        .map(|m| {
            let nm = m.n_matched() as f64;
            let singles = (nx + ny) as f64 - 2.0 * nm;
            log_likelihood(data, m, model.beta()) + ln_beta(nm + 1.0, singles + 1.0)
                - singles * LN_2
                + log_lambda_integral((nx + ny) as f64 - nm, lo, hi)
        })
        .collect();
    let z = log_sum_exp(&logw);
    let probs: Vec<f64> = logw.iter().map(|w| exp(w - z)).collect();
    let mut pair_probs = vec![0.0; nx * ny];
    for (m, p) in matchings.iter().zip(&probs) {
        for (i, j) in m.pairs() {
            pair_probs[i * ny + j] += p;
        }
    }
    Ok(ExactPosterior {
        matchings,
        probs,
        pair_probs,
        nx,
        ny,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recordlinkage::data::Dataset;
    use crate::recordlinkage::model::log_prior_matching;
    use alloc::vec;

    fn model(beta: f64) -> LinkageModel {
        let x = vec![vec![0, 1], vec![1, 1], vec![2, 0]];
        let y = vec![vec![0, 1], vec![2, 0]];
        LinkageModel::new(Dataset::from_codes(&x, &y, vec![3, 2]).unwrap(), beta).unwrap()
    }

    #[test]
    fn enumerates_and_normalizes() {
        let post = brute_force_posterior(&model(0.01), &HyperConfig::default()).unwrap();
        assert_eq!(post.matchings.len(), 13);
        assert!((post.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // records that agree everywhere are linked with high probability
        assert!(post.pair(0, 0) > 0.5 && post.pair(2, 1) > 0.5);
        assert!(post.pair(1, 0) < post.pair(0, 0));
    }

    #[test]
    fn agrees_with_grid_quadrature_over_hyperparameters() {
        // integrate the joint density over a fine (λ, p) grid instead
        let mdl = model(0.2);
        let post = brute_force_posterior(&mdl, &HyperConfig::default()).unwrap();
        let (lo, hi) = (3.0, 5.0);
        let (nl, np) = (400, 2000);
        let mut w: Vec<f64> = Vec::new();
        for m in &post.matchings {
            let ll = log_likelihood(mdl.data(), m, mdl.beta());
            let mut s = 0.0;
            for a in 0..nl {
                let l = lo + (a as f64 + 0.5) * (hi - lo) / nl as f64;
                for b in 0..np {
                    let p = (b as f64 + 0.5) / np as f64;
                    s += exp(log_prior_matching(m, l, p) + ll);
                }
            }
            w.push(s);
        }
        let z: f64 = w.iter().sum();
        for (wi, pi) in w.iter().zip(&post.probs) {
            assert!((wi / z - pi).abs() < 1e-5, "{} vs {pi}", wi / z);
        }
    }

    #[test]
    fn rejects_large_instances() {
        let x: Vec<Vec<u32>> = (0..9).map(|i| vec![i % 2]).collect();
        let mdl = LinkageModel::new(Dataset::from_codes(&x, &x, vec![2]).unwrap(), 0.1).unwrap();
        assert!(matches!(
            brute_force_posterior(&mdl, &HyperConfig::default()),
            Err(Error::StateSpaceOverflow { .. })
        ));
    }
}
