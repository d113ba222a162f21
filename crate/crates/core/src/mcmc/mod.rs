//! Collapsed Gibbs samplers over partitions for conjugate mixtures.
//!
//! Cluster parameters are integrated out, so the chain lives on membership
//! sequences only. Under an SSM prior the PPF inside each full conditional
//! is a fresh Monte Carlo estimate every sweep, which makes the sampler
//! approximate (its stationary law is only close to the posterior when
//! `ppf_draws` is large); [`ppf_noise_diagnostic`] measures that noise.

mod data;
mod models;
mod sampler;
mod summary;

pub use data::{grid_data, read_binomial_csv, read_normal_csv, sarcoma_data, SARCOMA_SUBTYPES};
pub use models::{
    binomial_cluster_marginal, normal_cluster_marginal, BinomialModelConfig, BinomialObs,
    BinomialStats, ConjugateModel, NormalGammaPosterior, NormalModelConfig, NormalStats,
};
pub use sampler::{
    gibbs_sweep, log_posterior_score, run_chain, PartitionChain, PartitionPriorSpec, SweepPpf,
    DEFAULT_BURN_IN, DEFAULT_PPF_DRAWS,
};
pub use summary::{
    batch_means_se, default_grid, predictive_density, summarize, DensityPoint, PosteriorSummary,
    DEFAULT_GRID_POINTS,
};

use crate::composition::Composition;
use crate::error::Result;
use crate::estimator::estimate_ppf;
use crate::rng::derive_seed;
use crate::weights::WeightModel;

/// Largest absolute difference between PPF estimates at `draws` and at
/// `10 · draws` over the given compositions.
pub fn ppf_noise_diagnostic(
    model: &WeightModel,
    compositions: &[Composition],
    draws: usize,
    seed: u64,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (i, n) in compositions.iter().enumerate() {
        let s = derive_seed(seed, i as u64);
        let small = estimate_ppf(model, n, draws, s)?;
        let large = estimate_ppf(model, n, 10 * draws, derive_seed(s, 1))?;
        for (a, b) in small.probabilities.iter().zip(&large.probabilities) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}
