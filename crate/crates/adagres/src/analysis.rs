//! Oracles and diagnostics: exhaustive optimum under the token budget,
//! empirical diminishing-returns gap, the `beta * k * delta` bound on it, and
//! the greedy-vs-optimal guarantee check they feed.

use crate::embedding::{dot, SimilarityMode};
use crate::error::{Error, Result};
use crate::pool::{CandidatePool, Query};
use crate::scoring::ScoreWeights;
use crate::selection::{greedy_core, SelectionConfig};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Largest pool the exhaustive optimum will enumerate (2^20 subsets).
pub const EXHAUSTIVE_POOL_LIMIT: usize = 20;

/// Pools up to this size get the exhaustive gap search; larger ones sample.
const EXHAUSTIVE_GAP_LIMIT: usize = 10;

/// Everything the guarantee check measured, in one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub opt_value: f64,
    pub opt_subset: BTreeSet<String>,
    pub greedy_value: f64,
    /// Largest observed violation of diminishing returns across sampled or
    /// enumerated (A ⊆ B, x) triples; exactly zero under clamped similarity.
    pub epsilon_empirical: f64,
    /// `beta * k_max * delta_max`, the a-priori cap on that violation.
    pub epsilon_bound: f64,
    /// Largest pairwise similarity in the pool.
    pub delta_max: f64,
    /// Most chunks that fit the budget, packing shortest first.
    pub k_max: usize,
    /// `(1 - 1/e) * opt_value - k_max * epsilon_bound / e`.
    pub guarantee_rhs: f64,
    pub guarantee_satisfied: bool,
}

fn sim_matrix(pool: &CandidatePool, mode: SimilarityMode) -> Vec<Vec<f64>> {
    let chunks = pool.chunks();
    let n = chunks.len();
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = mode.apply(dot(&chunks[i].embedding, &chunks[j].embedding));
            s[i][j] = v;
            s[j][i] = v;
        }
    }
    s
}

fn query_sims(q: &Query, pool: &CandidatePool, mode: SimilarityMode) -> Vec<f64> {
    pool.chunks()
        .iter()
        .map(|c| mode.apply(dot(&q.embedding, &c.embedding)))
        .collect()
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

/// Maximize the objective over every budget-feasible subset, the empty set
/// included. Ties within `1e-12` resolve to the lexicographically smallest
/// sorted id set, so the oracle is deterministic however the search walks.
///
/// Enumerates all `2^n` subsets; pools beyond [`EXHAUSTIVE_POOL_LIMIT`] are
/// rejected rather than silently approximated.
pub fn exact_optimum(
    q: &Query,
    pool: &CandidatePool,
    w: ScoreWeights,
    token_budget: u64,
) -> Result<(f64, BTreeSet<String>)> {
    exact_optimum_with_mode(q, pool, w, token_budget, SimilarityMode::Clamped)
}

pub fn exact_optimum_with_mode(
    q: &Query,
    pool: &CandidatePool,
    w: ScoreWeights,
    token_budget: u64,
    mode: SimilarityMode,
) -> Result<(f64, BTreeSet<String>)> {
    ScoreWeights::new(w.alpha, w.beta)?;
    check_query_dims(q, pool)?;
    let n = pool.len();
    if n > EXHAUSTIVE_POOL_LIMIT {
        return Err(Error::PoolTooLarge {
            size: n,
            limit: EXHAUSTIVE_POOL_LIMIT,
        });
    }
    let qs = query_sims(q, pool, mode);
    let s = sim_matrix(pool, mode);
    let lens: Vec<u64> = pool.chunks().iter().map(|c| c.token_length).collect();

    struct Search<'a> {
        qs: &'a [f64],
        s: &'a [Vec<f64>],
        lens: &'a [u64],
        w: ScoreWeights,
        budget: u64,
        current: Vec<usize>,
        best_value: f64,
        best_set: Vec<usize>,
    }

    impl Search<'_> {
        fn sorted_ids<'p>(&self, pool: &'p CandidatePool, set: &[usize]) -> Vec<&'p str> {
            let mut ids: Vec<&str> = set.iter().map(|&i| pool.chunks()[i].id.as_str()).collect();
            ids.sort_unstable();
            ids
        }

        fn consider(&mut self, pool: &CandidatePool, value: f64) {
            if value > self.best_value + 1e-12 {
                self.best_value = value;
                self.best_set = self.current.clone();
            } else if (value - self.best_value).abs() <= 1e-12
                && self.sorted_ids(pool, &self.current) < self.sorted_ids(pool, &self.best_set)
            {
                self.best_value = value;
                self.best_set = self.current.clone();
            }
        }

        fn explore(&mut self, pool: &CandidatePool, pos: usize, value: f64, tokens: u64) {
            if pos == self.qs.len() {
                self.consider(pool, value);
                return;
            }
            // Exclude branch first keeps the walk depth-first and cheap.
            self.explore(pool, pos + 1, value, tokens);
            if tokens + self.lens[pos] <= self.budget {
                let penalty: f64 = self.current.iter().map(|&j| self.s[pos][j]).sum();
                let gain = self.w.alpha * self.qs[pos] - self.w.beta * penalty;
                self.current.push(pos);
                self.explore(pool, pos + 1, value + gain, tokens + self.lens[pos]);
                self.current.pop();
            }
        }
    }

    let mut search = Search {
        qs: &qs,
        s: &s,
        lens: &lens,
        w,
        budget: token_budget,
        current: Vec::new(),
        best_value: f64::NEG_INFINITY,
        best_set: Vec::new(),
    };
    search.explore(pool, 0, 0.0, 0);
    let ids = search
        .best_set
        .iter()
        .map(|&i| pool.chunks()[i].id.clone())
        .collect();
    Ok((search.best_value, ids))
}

/// Largest observed violation of diminishing returns:
/// `max over (A ⊆ B, x ∉ B) of [gain(x|B) - gain(x|A)]+`.
///
/// Pools of at most ten chunks are enumerated exhaustively (every subset pair,
/// every outside chunk); larger pools draw `trials` random triples seeded by
/// `seed`. Under clamped similarity gains only shrink as sets grow, so the
/// result is exactly zero; raw signed similarity can push it positive.
pub fn empirical_submodularity_gap(
    q: &Query,
    pool: &CandidatePool,
    w: ScoreWeights,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    empirical_submodularity_gap_with_mode(q, pool, w, trials, seed, SimilarityMode::Clamped)
}

pub fn empirical_submodularity_gap_with_mode(
    q: &Query,
    pool: &CandidatePool,
    w: ScoreWeights,
    trials: usize,
    seed: u64,
    mode: SimilarityMode,
) -> Result<f64> {
    ScoreWeights::new(w.alpha, w.beta)?;
    check_query_dims(q, pool)?;
    let n = pool.len();
    if n < 3 {
        return Err(Error::PoolTooSmall { size: n, min: 3 });
    }
    let qs = query_sims(q, pool, mode);
    let s = sim_matrix(pool, mode);

    if n <= EXHAUSTIVE_GAP_LIMIT {
        // For each outside chunk x, walk every subset of the remaining chunks
        // by bitmask, tracking gain(x | subset) and the minimum gain over all
        // of the subset's own subsets; their difference is the worst
        // violation with B = subset.
        let mut gap: f64 = 0.0;
        for x in 0..n {
            let others: Vec<usize> = (0..n).filter(|&i| i != x).collect();
            let m = others.len();
            let full = 1usize << m;
            let mut pen = vec![0.0_f64; full];
            let mut gain = vec![0.0_f64; full];
            let mut min_gain = vec![0.0_f64; full];
            gain[0] = w.alpha * qs[x];
            min_gain[0] = gain[0];
            for mask in 1..full {
                let low = mask.trailing_zeros() as usize;
                let rest = mask & (mask - 1);
                pen[mask] = pen[rest] + s[x][others[low]];
                gain[mask] = w.alpha * qs[x] - w.beta * pen[mask];
                let mut mg = gain[mask];
                let mut bits = mask;
                while bits != 0 {
                    let j = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    mg = mg.min(min_gain[mask ^ (1 << j)]);
                }
                min_gain[mask] = mg;
                gap = gap.max(gain[mask] - min_gain[mask]);
            }
        }
        Ok(gap.max(0.0))
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gap: f64 = 0.0;
        for _ in 0..trials {
            let x = rng.random_range(0..n);
            // Random B excluding x, then a random subset A of B.
            let mut b_members: Vec<usize> = Vec::new();
            let mut a_members: Vec<usize> = Vec::new();
            for i in 0..n {
                if i != x && rng.random_bool(0.5) {
                    b_members.push(i);
                    if rng.random_bool(0.5) {
                        a_members.push(i);
                    }
                }
            }
            let pen_b: f64 = b_members.iter().map(|&i| s[x][i]).sum();
            let pen_a: f64 = a_members.iter().map(|&i| s[x][i]).sum();
            let gain_b = w.alpha * qs[x] - w.beta * pen_b;
            let gain_a = w.alpha * qs[x] - w.beta * pen_a;
            gap = gap.max(gain_b - gain_a);
        }
        Ok(gap.max(0.0))
    }
}

/// The a-priori cap on the diminishing-returns violation:
/// `epsilon = beta * k * delta` with `delta` the largest pairwise similarity
/// and `k` the most chunks that fit the budget packing shortest first.
///
/// Returns `(epsilon, delta_max, k_max)`. `delta` always uses clamped
/// similarity — the cap presumes non-negative pairwise terms.
pub fn epsilon_bound(pool: &CandidatePool, beta: f64, token_budget: u64) -> (f64, f64, usize) {
    let chunks = pool.chunks();
    let n = chunks.len();
    let mut delta: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            delta = delta.max(dot(&chunks[i].embedding, &chunks[j].embedding).max(0.0));
        }
    }
    let mut lens: Vec<u64> = chunks.iter().map(|c| c.token_length).collect();
    lens.sort_unstable();
    let mut k = 0usize;
    let mut used = 0u64;
    for len in lens {
        if used + len > token_budget {
            break;
        }
        used += len;
        k += 1;
    }
    (beta * k as f64 * delta, delta, k)
}

/// Run greedy selection and the exhaustive oracle side by side and check
/// `greedy >= (1 - 1/e) * opt - k * epsilon / e` with the bound epsilon.
///
/// The gap measurement uses 2000 sampled triples (seed 0) when the pool is
/// too large to enumerate. Propagates the oracle's pool-size limit.
pub fn check_greedy_guarantee(
    q: &Query,
    pool: &CandidatePool,
    w: ScoreWeights,
    token_budget: u64,
) -> Result<AnalysisReport> {
    check_greedy_guarantee_with_mode(q, pool, w, token_budget, SimilarityMode::Clamped)
}

/// [`check_greedy_guarantee`] under an explicit similarity mode.
///
/// With `Raw`, the objective can reward negative pairwise similarity, the
/// measured gap may exceed `epsilon_bound` (whose `delta` stays clamped), and
/// the guarantee may fail — that failure is the finding, not an error.
pub fn check_greedy_guarantee_with_mode(
    q: &Query,
    pool: &CandidatePool,
    w: ScoreWeights,
    token_budget: u64,
    mode: SimilarityMode,
) -> Result<AnalysisReport> {
    let (opt_value, opt_subset) = exact_optimum_with_mode(q, pool, w, token_budget, mode)?;
    let cfg = SelectionConfig::new(w, token_budget)?;
    let greedy = greedy_core(q, pool, &cfg, w.beta, mode)?;
    let epsilon_empirical = if pool.len() >= 3 {
        empirical_submodularity_gap_with_mode(q, pool, w, 2000, 0, mode)?
    } else {
        0.0
    };
    let (eps, delta_max, k_max) = epsilon_bound(pool, w.beta, token_budget);
    let e = std::f64::consts::E;
    let guarantee_rhs = (1.0 - 1.0 / e) * opt_value - (k_max as f64) * eps / e;
    let greedy_value = greedy.objective_value;
    Ok(AnalysisReport {
        opt_value,
        opt_subset,
        greedy_value,
        epsilon_empirical,
        epsilon_bound: eps,
        delta_max,
        k_max,
        guarantee_rhs,
        guarantee_satisfied: greedy_value >= guarantee_rhs - 1e-9,
    })
}
