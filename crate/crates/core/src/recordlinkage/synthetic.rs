use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::data::Dataset;
use super::matching::Matching;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    /// Mean number of latent entities.
    pub lambda: f64,
    /// Probability that an entity appears in both files.
    pub p_match: f64,
    /// Distortion probability per field of each record.
    pub beta: f64,
    /// Value frequencies of each field.
    pub theta: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub x: Vec<Vec<u32>>,
    pub y: Vec<Vec<u32>>,
    pub truth: Matching,
    pub dataset: Dataset,
}

/// Draw `K ~ Poisson(λ)` entities. Each is observed in both files with
/// probability `p_match`, otherwise in one file chosen with probability ½;
/// every observed field is replaced by a fresh `θ` draw with probability
/// `β`. Records are shuffled within each file.
pub fn generate_synthetic<R: Rng + ?Sized>(
    cfg: &SyntheticConfig,
    rng: &mut R,
) -> Result<SyntheticData> {
    if !(cfg.lambda > 0.0 && cfg.lambda.is_finite()) {
        return Err(Error::Domain {
            what: "lambda",
            value: cfg.lambda,
        });
    }
    if !(0.0..=1.0).contains(&cfg.p_match) {
        return Err(Error::Domain {
            what: "p_match",
            value: cfg.p_match,
        });
    }
    if !(0.0..=1.0).contains(&cfg.beta) {
        return Err(Error::Domain {
            what: "beta",
            value: cfg.beta,
        });
    }
    if cfg.theta.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one field is required".into(),
        ));
    }
    let fields: Vec<WeightedIndex<f64>> = cfg
        .theta
        .iter()
        .map(|t| {
            WeightedIndex::new(t)
                .map_err(|e| Error::InvalidArgument(alloc::format!("bad field weights: {e}")))
        })
        .collect::<Result<_>>()?;
    let poisson = Poisson::new(cfg.lambda).map_err(|_| Error::Domain {
        what: "lambda",
        value: cfg.lambda,
    })?;
    let k = poisson.sample(rng) as usize;

    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut links = Vec::new();
    let draw = |rng: &mut R| -> Vec<u32> { fields.iter().map(|d| d.sample(rng) as u32).collect() };
    let distort = |truth: &[u32], rng: &mut R| -> Vec<u32> {
        truth
            .iter()
            .zip(&fields)
            .map(|(&v, d)| {
                if rng.random::<f64>() < cfg.beta {
                    d.sample(rng) as u32
                } else {
                    v
                }
            })
            .collect()
    };
    for _ in 0..k {
        let truth = draw(rng);
        if rng.random::<f64>() < cfg.p_match {
            links.push((x.len(), y.len()));
            x.push(distort(&truth, rng));
            y.push(distort(&truth, rng));
        } else if rng.random::<bool>() {
            x.push(distort(&truth, rng));
        } else {
            y.push(distort(&truth, rng));
        }
    }
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidArgument(
            "a generated file is empty; raise lambda".into(),
        ));
    }
    let mut px: Vec<usize> = (0..x.len()).collect();
    let mut py: Vec<usize> = (0..y.len()).collect();
    px.shuffle(rng);
    py.shuffle(rng);
    // px[new] = old
    let mut new_x = alloc::vec![0usize; x.len()];
    let mut new_y = alloc::vec![0usize; y.len()];
    for (n, &o) in px.iter().enumerate() {
        new_x[o] = n;
    }
    for (n, &o) in py.iter().enumerate() {
        new_y[o] = n;
    }
    let x: Vec<Vec<u32>> = px.iter().map(|&o| x[o].clone()).collect();
    let y: Vec<Vec<u32>> = py.iter().map(|&o| y[o].clone()).collect();
    let pairs: Vec<(usize, usize)> = links.iter().map(|&(i, j)| (new_x[i], new_y[j])).collect();
    let truth = Matching::from_pairs(x.len(), y.len(), &pairs)?;
    let categories = cfg.theta.iter().map(|t| t.len()).collect();
    let dataset = Dataset::from_codes(&x, &y, categories)?;
    Ok(SyntheticData {
        x,
        y,
        truth,
        dataset,
    })
}
