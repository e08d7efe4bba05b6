//! Pool statistics and the closed-form adaptive redundancy weight.
//!
//! The weight is chosen so that, in expectation, the marginal gain of one
//! more chunk vanishes right at the token-budget boundary: solve
//! `alpha * E[sim(q,x)] = beta * window(k) * E[sim(x,y)]` for beta, where
//! `k` is how many average-length chunks the budget admits.

use crate::embedding::{dot, SimilarityMode};
use crate::error::{Error, Result};
use crate::pool::{CandidatePool, Query};
use crate::selection::{top_view, BoundaryConvention, SelectionConfig};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// How the pairwise-similarity mean was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairwiseEstimation {
    Exact,
    Sampled { pairs: usize },
}

/// Summary statistics of the (top-n view of a) candidate pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolStats {
    /// Mean token length over the view.
    pub mean_token_length: f64,
    /// Budget divided by mean token length: how many typical chunks fit.
    pub expected_set_size: f64,
    /// Mean query-chunk similarity over the view.
    pub mean_query_sim: f64,
    /// Mean pairwise similarity over distinct view chunks.
    pub mean_pairwise_sim: f64,
    pub pairwise_estimation: PairwiseEstimation,
}

/// Knobs for the exact-vs-sampled pairwise mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StatsOptions {
    /// Views at most this large get the exact all-pairs mean.
    pub exact_threshold: usize,
    /// Number of unordered pairs drawn above the threshold.
    pub sample_pairs: usize,
}

impl Default for StatsOptions {
    fn default() -> Self {
        StatsOptions {
            exact_threshold: 256,
            sample_pairs: 2048,
        }
    }
}

/// Record of one adaptive-beta derivation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaCalibration {
    pub beta_star: f64,
    pub lambda: f64,
    pub beta_zero: f64,
    /// `clip(lambda * beta_star + beta_zero)` under the configured range.
    pub beta_final: f64,
    pub clipped: bool,
}

/// Compute [`PoolStats`] over the `top_n` most query-similar chunks with
/// default estimation settings: exact all-pairs mean up to 256 chunks, then
/// 2048 sampled pairs seeded by `seed`.
pub fn pool_stats(
    q: &Query,
    pool: &CandidatePool,
    top_n: usize,
    token_budget: u64,
    seed: u64,
) -> Result<PoolStats> {
    pool_stats_with(q, pool, top_n, token_budget, seed, StatsOptions::default())
}

/// [`pool_stats`] with explicit estimation settings; `opts.exact_threshold`
/// of zero forces sampling, which is how the sampler is validated against the
/// exact mean in tests.
pub fn pool_stats_with(
    q: &Query,
    pool: &CandidatePool,
    top_n: usize,
    token_budget: u64,
    seed: u64,
    opts: StatsOptions,
) -> Result<PoolStats> {
    if top_n == 0 {
        return Err(Error::InvalidConfig {
            detail: "top_n must be at least 1".into(),
        });
    }
    if token_budget == 0 {
        return Err(Error::InvalidConfig {
            detail: "token_budget must be at least 1".into(),
        });
    }
    if q.embedding.dimension() != pool.dimension() {
        return Err(Error::DimensionMismatch {
            left: q.embedding.dimension(),
            right: pool.dimension(),
        });
    }
    let view = top_view(q, pool, top_n, SimilarityMode::Clamped);
    let chunks = pool.chunks();
    let m = view.len();

    let mean_token_length =
        view.iter().map(|&i| chunks[i].token_length as f64).sum::<f64>() / m as f64;
    let mean_query_sim = view
        .iter()
        .map(|&i| dot(&q.embedding, &chunks[i].embedding).max(0.0))
        .sum::<f64>()
        / m as f64;

    let (mean_pairwise_sim, pairwise_estimation) = if m <= 1 {
        (0.0, PairwiseEstimation::Exact)
    } else if m <= opts.exact_threshold {
        let mut total = 0.0;
        for (a, &i) in view.iter().enumerate() {
            for &j in &view[a + 1..] {
                total += dot(&chunks[i].embedding, &chunks[j].embedding).max(0.0);
            }
        }
        let pairs = m * (m - 1) / 2;
        (total / pairs as f64, PairwiseEstimation::Exact)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut total = 0.0;
        for _ in 0..opts.sample_pairs {
            let a = rng.random_range(0..m);
            let mut b = rng.random_range(0..m - 1);
            if b >= a {
                b += 1;
            }
            total += dot(&chunks[view[a]].embedding, &chunks[view[b]].embedding).max(0.0);
        }
        (
            total / opts.sample_pairs as f64,
            PairwiseEstimation::Sampled {
                pairs: opts.sample_pairs,
            },
        )
    };

    Ok(PoolStats {
        mean_token_length,
        expected_set_size: token_budget as f64 / mean_token_length,
        mean_query_sim,
        mean_pairwise_sim,
        pairwise_estimation,
    })
}

/// The closed-form weight under the default half-window convention.
///
/// Returns `alpha * mean_query_sim / (window * mean_pairwise_sim + eps)` with
/// `window = (k - 1) / 2`, or zero when at most one typical chunk fits the
/// budget (`expected_set_size <= 1`): with a single-chunk budget there is no
/// within-set redundancy to weigh.
pub fn beta_star(stats: &PoolStats, alpha: f64, stability_epsilon: f64) -> f64 {
    beta_star_with(stats, alpha, stability_epsilon, BoundaryConvention::Half)
}

/// [`beta_star`] with an explicit window convention; `Full` uses the whole
/// `k - 1` neighbor count in the denominator, halving the resulting weight.
pub fn beta_star_with(
    stats: &PoolStats,
    alpha: f64,
    stability_epsilon: f64,
    convention: BoundaryConvention,
) -> f64 {
    let k = stats.expected_set_size;
    if k <= 1.0 {
        return 0.0;
    }
    let window = match convention {
        BoundaryConvention::Half => (k - 1.0) / 2.0,
        BoundaryConvention::Full => k - 1.0,
    };
    alpha * stats.mean_query_sim / (window * stats.mean_pairwise_sim + stability_epsilon)
}

/// Apply empirical scaling and clipping: `clip(lambda * beta_star + beta_zero)`
/// under `cfg.beta_clip`, using `cfg`'s alpha, stability guard, and window
/// convention. Defaults `lambda = 1, beta_zero = 0` reduce to the raw weight.
pub fn calibrate(
    stats: &PoolStats,
    cfg: &SelectionConfig,
    lambda: f64,
    beta_zero: f64,
) -> BetaCalibration {
    let star = beta_star_with(
        stats,
        cfg.weights.alpha,
        cfg.stability_epsilon,
        cfg.boundary_convention,
    );
    let unclipped = lambda * star + beta_zero;
    let (beta_final, clipped) = cfg.beta_clip.apply(unclipped);
    BetaCalibration {
        beta_star: star,
        lambda,
        beta_zero,
        beta_final,
        clipped,
    }
}
