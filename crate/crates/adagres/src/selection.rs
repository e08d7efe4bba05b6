//! Budget-constrained greedy selection and the similarity-only top-k baseline.

use crate::calibration::{calibrate, pool_stats, BetaCalibration};
use crate::embedding::{dot, SimilarityMode};
use crate::error::{Error, Result};
use crate::pool::{CandidatePool, Query};
use crate::scoring::{objective_idx, ScoreWeights};
use serde::{Deserialize, Serialize};

/// How the redundancy weight is chosen for a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaPolicy {
    /// Use `weights.beta` as given.
    Fixed,
    /// Derive beta from pool statistics with identity scaling.
    Adaptive,
    /// Derive beta from pool statistics, then apply `lambda * beta + beta_zero`.
    AdaptiveScaled { lambda: f64, beta_zero: f64 },
}

/// Which window factor the adaptive-beta denominator uses.
///
/// At the budget boundary roughly `k - 1` already-selected chunks penalize a
/// newcomer. `Half` weighs the expected pairwise similarity by `(k-1)/2`
/// (each unordered pair counted once, the default); `Full` weighs it by the
/// whole `k-1` neighbor count, yielding a beta twice as small.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryConvention {
    Half,
    Full,
}

/// Inclusive clamp range applied to calibrated betas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaClip {
    pub min: f64,
    pub max: f64,
}

impl BetaClip {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !min.is_finite() || !max.is_finite() || min < 0.0 || min > max {
            return Err(Error::InvalidConfig {
                detail: format!("beta clip range [{min}, {max}] must satisfy 0 <= min <= max"),
            });
        }
        Ok(BetaClip { min, max })
    }

    /// The fallback range `[0, 10 * alpha]`, wide enough that clipping only
    /// fires on near-zero pairwise similarity blowing the ratio up.
    pub fn default_for_alpha(alpha: f64) -> Self {
        BetaClip {
            min: 0.0,
            max: 10.0 * alpha,
        }
    }

    /// Clamp `value` into the range; the flag reports whether it moved.
    pub fn apply(&self, value: f64) -> (f64, bool) {
        let clamped = value.clamp(self.min, self.max);
        (clamped, clamped != value)
    }
}

/// Everything a selection run needs besides the query and pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub weights: ScoreWeights,
    pub token_budget: u64,
    pub beta_policy: BetaPolicy,
    /// Restrict selection and statistics to this many most-query-similar
    /// chunks; `usize::MAX` means the whole pool.
    pub top_n: usize,
    /// Small positive denominator guard for the adaptive-beta formula.
    pub stability_epsilon: f64,
    pub beta_clip: BetaClip,
    pub seed: u64,
    pub boundary_convention: BoundaryConvention,
}

impl SelectionConfig {
    /// Defaults: fixed beta policy, no top-n restriction, stability guard
    /// `1e-6`, clip `[0, 10 * alpha]`, seed 0, half-window convention.
    pub fn new(weights: ScoreWeights, token_budget: u64) -> Result<Self> {
        let cfg = SelectionConfig {
            weights,
            token_budget,
            beta_policy: BetaPolicy::Fixed,
            top_n: usize::MAX,
            stability_epsilon: 1e-6,
            beta_clip: BetaClip::default_for_alpha(weights.alpha),
            seed: 0,
            boundary_convention: BoundaryConvention::Half,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        ScoreWeights::new(self.weights.alpha, self.weights.beta)?;
        if self.token_budget == 0 {
            return Err(Error::InvalidConfig {
                detail: "token_budget must be at least 1".into(),
            });
        }
        if self.top_n == 0 {
            return Err(Error::InvalidConfig {
                detail: "top_n must be at least 1".into(),
            });
        }
        if !self.stability_epsilon.is_finite() || self.stability_epsilon <= 0.0 {
            return Err(Error::InvalidConfig {
                detail: format!(
                    "stability_epsilon must be a positive finite number, got {}",
                    self.stability_epsilon
                ),
            });
        }
        BetaClip::new(self.beta_clip.min, self.beta_clip.max)?;
        if let BetaPolicy::AdaptiveScaled { lambda, beta_zero } = self.beta_policy {
            if !lambda.is_finite() || !beta_zero.is_finite() {
                return Err(Error::InvalidConfig {
                    detail: format!("lambda {lambda} and beta_zero {beta_zero} must be finite"),
                });
            }
        }
        Ok(())
    }
}

/// Why a selection run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Some chunk still had positive gain but none fit the remaining budget.
    BudgetExhausted,
    /// No remaining chunk had strictly positive marginal gain.
    NoPositiveGain,
    /// Every candidate chunk was selected.
    PoolExhausted,
}

/// One accepted chunk and the marginal gain it was accepted at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedChunk {
    pub id: String,
    pub gain: f64,
}

/// Outcome of a selection run, in acceptance order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub selected: Vec<SelectedChunk>,
    pub total_tokens: u64,
    pub objective_value: f64,
    pub beta_used: f64,
    pub stop_reason: StopReason,
}

impl SelectionResult {
    pub fn ids(&self) -> Vec<&str> {
        self.selected.iter().map(|s| s.id.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }
}

/// Indices of the `top_n` most query-similar chunks, original pool order
/// breaking similarity ties; the whole pool (in order) when it fits.
pub(crate) fn top_view(
    q: &Query,
    pool: &CandidatePool,
    top_n: usize,
    mode: SimilarityMode,
) -> Vec<usize> {
    let n = pool.len();
    if top_n >= n {
        return (0..n).collect();
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let sims: Vec<f64> = pool
        .chunks()
        .iter()
        .map(|c| mode.apply(dot(&q.embedding, &c.embedding)))
        .collect();
    idx.sort_by(|&a, &b| {
        sims[b]
            .partial_cmp(&sims[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx.truncate(top_n);
    idx
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

/// Greedy maximization of the objective under the token budget.
///
/// Each round picks the feasible chunk with the highest marginal gain
/// (feasible: unselected, fits the remaining budget, gain strictly positive).
/// Oversized chunks are skipped rather than aborting the run, so every round
/// either accepts a chunk or terminates. Ties break by higher query
/// similarity, then earlier pool position — the run is fully deterministic.
///
/// `beta` arrives already resolved; [`select_with_policy`] derives it from the
/// configured policy first.
pub fn greedy_select(
    q: &Query,
    pool: &CandidatePool,
    cfg: &SelectionConfig,
    beta: f64,
) -> Result<SelectionResult> {
    greedy_core(q, pool, cfg, beta, SimilarityMode::Clamped)
}

pub(crate) fn greedy_core(
    q: &Query,
    pool: &CandidatePool,
    cfg: &SelectionConfig,
    beta: f64,
    mode: SimilarityMode,
) -> Result<SelectionResult> {
    cfg.validate()?;
    check_query_dims(q, pool)?;
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::InvalidConfig {
            detail: format!("resolved beta must be a non-negative finite number, got {beta}"),
        });
    }

    let view = top_view(q, pool, cfg.top_n, mode);
    let chunks = pool.chunks();
    let alpha = cfg.weights.alpha;
    let query_sims: Vec<f64> = view
        .iter()
        .map(|&i| mode.apply(dot(&q.embedding, &chunks[i].embedding)))
        .collect();

    // Running sum of similarity to the selected set, per candidate; adding a
    // chunk updates these in one pass, so the gain formula stays O(1) per
    // candidate per round.
    let mut penalty = vec![0.0_f64; view.len()];
    let mut taken = vec![false; view.len()];
    let mut order: Vec<usize> = Vec::new();
    let mut gains: Vec<f64> = Vec::new();
    let mut total_tokens: u64 = 0;

    loop {
        let mut best: Option<(usize, f64)> = None;
        for (v, &i) in view.iter().enumerate() {
            if taken[v] || total_tokens + chunks[i].token_length > cfg.token_budget {
                continue;
            }
            let gain = alpha * query_sims[v] - beta * penalty[v];
            if gain <= 0.0 {
                continue;
            }
            let better = match best {
                None => true,
                Some((bv, bg)) => {
                    gain > bg
                        || (gain == bg
                            && (query_sims[v] > query_sims[bv]
                                || (query_sims[v] == query_sims[bv] && view[v] < view[bv])))
                }
            };
            if better {
                best = Some((v, gain));
            }
        }
        let Some((v, gain)) = best else { break };
        taken[v] = true;
        order.push(v);
        gains.push(gain);
        total_tokens += chunks[view[v]].token_length;
        let accepted = &chunks[view[v]].embedding;
        for (u, &i) in view.iter().enumerate() {
            if !taken[u] {
                penalty[u] += mode.apply(dot(accepted, &chunks[i].embedding));
            }
        }
    }

    // Stopping taxonomy: everything taken → the pool ran out; otherwise, if a
    // positive-gain chunk was only blocked by its size, the budget bound; else
    // gains died out.
    let stop_reason = if order.len() == view.len() {
        StopReason::PoolExhausted
    } else {
        let budget_blocked = view.iter().enumerate().any(|(v, &i)| {
            !taken[v]
                && alpha * query_sims[v] - beta * penalty[v] > 0.0
                && total_tokens + chunks[i].token_length > cfg.token_budget
        });
        if budget_blocked {
            StopReason::BudgetExhausted
        } else {
            StopReason::NoPositiveGain
        }
    };

    let selected_idx: Vec<usize> = order.iter().map(|&v| view[v]).collect();
    let weights = ScoreWeights {
        alpha,
        beta,
    };
    let objective_value = objective_idx(q, pool, &selected_idx, weights, mode).objective;
    Ok(SelectionResult {
        selected: order
            .iter()
            .zip(&gains)
            .map(|(&v, &g)| SelectedChunk {
                id: chunks[view[v]].id.clone(),
                gain: g,
            })
            .collect(),
        total_tokens,
        objective_value,
        beta_used: beta,
        stop_reason,
    })
}

/// The similarity-only baseline: the `k` most query-similar chunks in
/// descending-similarity order (ties by earlier pool position).
///
/// `token_budget` is reported against, never enforced — the baseline is
/// controlled by `k` so comparisons at equal cardinality stay fair. Recorded
/// per-chunk values are query similarities, and the objective value is the
/// plain similarity sum (no redundancy term).
pub fn topk_select(
    q: &Query,
    pool: &CandidatePool,
    k: usize,
    token_budget: u64,
) -> Result<SelectionResult> {
    if k == 0 {
        return Err(Error::InvalidConfig {
            detail: "k must be at least 1".into(),
        });
    }
    check_query_dims(q, pool)?;
    let view = top_view(q, pool, k, SimilarityMode::Clamped);
    let chunks = pool.chunks();
    let mut selected = Vec::with_capacity(view.len());
    let mut total_tokens = 0;
    let mut objective_value = 0.0;
    for &i in &view {
        let s = SimilarityMode::Clamped.apply(dot(&q.embedding, &chunks[i].embedding));
        selected.push(SelectedChunk {
            id: chunks[i].id.clone(),
            gain: s,
        });
        total_tokens += chunks[i].token_length;
        objective_value += s;
    }
    let _ = token_budget;
    let stop_reason = if k > pool.len() {
        StopReason::PoolExhausted
    } else {
        StopReason::BudgetExhausted
    };
    Ok(SelectionResult {
        selected,
        total_tokens,
        objective_value,
        beta_used: 0.0,
        stop_reason,
    })
}

/// Resolve beta per `cfg.beta_policy`, then run [`greedy_select`].
///
/// Adaptive policies return the calibration record alongside the selection so
/// callers can report how the weight was derived.
pub fn select_with_policy(
    q: &Query,
    pool: &CandidatePool,
    cfg: &SelectionConfig,
) -> Result<(SelectionResult, Option<BetaCalibration>)> {
    cfg.validate()?;
    let (beta, calibration) = match cfg.beta_policy {
        BetaPolicy::Fixed => (cfg.weights.beta, None),
        BetaPolicy::Adaptive => {
            let stats = pool_stats(q, pool, cfg.top_n, cfg.token_budget, cfg.seed)?;
            let cal = calibrate(&stats, cfg, 1.0, 0.0);
            (cal.beta_final, Some(cal))
        }
        BetaPolicy::AdaptiveScaled { lambda, beta_zero } => {
            let stats = pool_stats(q, pool, cfg.top_n, cfg.token_budget, cfg.seed)?;
            let cal = calibrate(&stats, cfg, lambda, beta_zero);
            (cal.beta_final, Some(cal))
        }
    };
    let result = greedy_select(q, pool, cfg, beta)?;
    Ok((result, calibration))
}
