//! The set-level objective: weighted query relevance minus within-set
//! redundancy, plus its marginal-gain form used by greedy selection.

use crate::embedding::{dot, SimilarityMode};
use crate::error::{Error, Result};
use crate::pool::{CandidatePool, Query};
use serde::{Deserialize, Serialize};

/// Weights of the objective `F(C) = alpha * relevance - beta * redundancy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl ScoreWeights {
    /// `alpha` must be strictly positive, `beta` non-negative; both finite.
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::InvalidConfig {
                detail: format!("alpha must be a positive finite number, got {alpha}"),
            });
        }
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::InvalidConfig {
                detail: format!("beta must be a non-negative finite number, got {beta}"),
            });
        }
        Ok(ScoreWeights { alpha, beta })
    }
}

/// The two sums behind an objective value, kept separate for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub relevance_sum: f64,
    pub redundancy_sum: f64,
    pub objective: f64,
}

fn check_query_dims(q: &Query, pool: &CandidatePool) -> Result<()> {
    if q.embedding.dimension() != pool.dimension() {
        return Err(Error::DimensionMismatch {
            left: q.embedding.dimension(),
            right: pool.dimension(),
        });
    }
    Ok(())
}

// ── index-based kernels (callers guarantee valid, distinct indices) ──

pub(crate) fn relevance_sum_idx(
    q: &Query,
    pool: &CandidatePool,
    subset: &[usize],
    mode: SimilarityMode,
) -> f64 {
    subset
        .iter()
        .map(|&i| mode.apply(dot(&q.embedding, &pool.chunks()[i].embedding)))
        .sum()
}

pub(crate) fn redundancy_sum_idx(
    pool: &CandidatePool,
    subset: &[usize],
    mode: SimilarityMode,
) -> f64 {
    let chunks = pool.chunks();
    let mut total = 0.0;
    for (a, &i) in subset.iter().enumerate() {
        for &j in &subset[a + 1..] {
            total += mode.apply(dot(&chunks[i].embedding, &chunks[j].embedding));
        }
    }
    total
}

pub(crate) fn marginal_gain_idx(
    q: &Query,
    pool: &CandidatePool,
    x: usize,
    selected: &[usize],
    w: ScoreWeights,
    mode: SimilarityMode,
) -> f64 {
    let chunks = pool.chunks();
    let query_term = mode.apply(dot(&q.embedding, &chunks[x].embedding));
    let penalty: f64 = selected
        .iter()
        .map(|&i| mode.apply(dot(&chunks[x].embedding, &chunks[i].embedding)))
        .sum();
    w.alpha * query_term - w.beta * penalty
}

// ── id-based public operations ──

/// Sum of query similarities over `subset`; the modular half of the objective.
pub fn relevance_sum(q: &Query, pool: &CandidatePool, subset: &[&str]) -> Result<f64> {
    relevance_sum_with_mode(q, pool, subset, SimilarityMode::Clamped)
}

pub fn relevance_sum_with_mode(
    q: &Query,
    pool: &CandidatePool,
    subset: &[&str],
    mode: SimilarityMode,
) -> Result<f64> {
    check_query_dims(q, pool)?;
    let idx = pool.resolve(subset)?;
    Ok(relevance_sum_idx(q, pool, &idx, mode))
}

/// Sum of pairwise similarities over unordered pairs within `subset`; zero for
/// sets of size at most one.
pub fn redundancy_sum(pool: &CandidatePool, subset: &[&str]) -> Result<f64> {
    redundancy_sum_with_mode(pool, subset, SimilarityMode::Clamped)
}

pub fn redundancy_sum_with_mode(
    pool: &CandidatePool,
    subset: &[&str],
    mode: SimilarityMode,
) -> Result<f64> {
    let idx = pool.resolve(subset)?;
    Ok(redundancy_sum_idx(pool, &idx, mode))
}

/// Evaluate the full objective over `subset`, returning both sums and the
/// weighted combination.
pub fn objective(
    q: &Query,
    pool: &CandidatePool,
    subset: &[&str],
    w: ScoreWeights,
) -> Result<ScoreBreakdown> {
    objective_with_mode(q, pool, subset, w, SimilarityMode::Clamped)
}

pub fn objective_with_mode(
    q: &Query,
    pool: &CandidatePool,
    subset: &[&str],
    w: ScoreWeights,
    mode: SimilarityMode,
) -> Result<ScoreBreakdown> {
    check_query_dims(q, pool)?;
    let idx = pool.resolve(subset)?;
    Ok(objective_idx(q, pool, &idx, w, mode))
}

pub(crate) fn objective_idx(
    q: &Query,
    pool: &CandidatePool,
    subset: &[usize],
    w: ScoreWeights,
    mode: SimilarityMode,
) -> ScoreBreakdown {
    let relevance_sum = relevance_sum_idx(q, pool, subset, mode);
    let redundancy_sum = redundancy_sum_idx(pool, subset, mode);
    ScoreBreakdown {
        relevance_sum,
        redundancy_sum,
        objective: w.alpha * relevance_sum - w.beta * redundancy_sum,
    }
}

/// Change in objective from adding chunk `x` to `selected`:
/// `alpha * sim(q,x) - beta * sum of sim(x, c)` over selected `c`.
///
/// Depends on `selected` only through that similarity sum, which is what lets
/// selection maintain it incrementally.
pub fn marginal_gain(
    q: &Query,
    pool: &CandidatePool,
    x: &str,
    selected: &[&str],
    w: ScoreWeights,
) -> Result<f64> {
    marginal_gain_with_mode(q, pool, x, selected, w, SimilarityMode::Clamped)
}

pub fn marginal_gain_with_mode(
    q: &Query,
    pool: &CandidatePool,
    x: &str,
    selected: &[&str],
    w: ScoreWeights,
    mode: SimilarityMode,
) -> Result<f64> {
    check_query_dims(q, pool)?;
    let sel_idx = pool.resolve(selected)?;
    let xi = pool
        .index_of(x)
        .ok_or_else(|| Error::UnknownChunkId { id: x.to_string() })?;
    if sel_idx.contains(&xi) {
        return Err(Error::AlreadySelected { id: x.to_string() });
    }
    Ok(marginal_gain_idx(q, pool, xi, &sel_idx, w, mode))
}
