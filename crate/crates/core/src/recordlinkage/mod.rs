//! Bipartite record linkage: a Bayesian model over partial matchings between
//! two files, with Metropolis-within-Gibbs samplers and an exact posterior
//! for tiny instances.

mod data;
mod hyper;
mod matching;
mod model;
mod oracle;
mod sampler;
mod synthetic;

pub use data::Dataset;
pub use hyper::{
    gibbs_update_hyper, log_lambda_integral, sample_truncated_gamma, HyperConfig, LambdaSupport,
    PMatchUpdate,
};
pub use matching::{MatchUndo, Matching, MoveKind, UNMATCHED};
pub use model::{
    log_likelihood, log_prior_matching, HyperState, LinkageModel, MatchingTarget, DEFAULT_BETA,
    DENSE_SCORE_LIMIT,
};
pub use oracle::{brute_force_posterior, ExactPosterior, ORACLE_CAP};
pub use sampler::{
    filter_block, run_rl_sampler, RlBlockSelector, RlConfig, RlResult, DEFAULT_BLOCK_SIZE,
    RL_SUMMARIES,
};
pub use synthetic::{generate_synthetic, SyntheticConfig, SyntheticData};
