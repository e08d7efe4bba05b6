//! Redundancy-aware context selection for retrieval-augmented generation.
//!
//! Given a query embedding and a pool of candidate chunks, this crate picks a
//! subset that maximizes `alpha * relevance - beta * redundancy` under a hard
//! token budget: relevance is the summed query similarity of the selected
//! chunks, redundancy the summed pairwise similarity among them. Selection is
//! greedy by marginal gain with O(1) incremental updates per accepted chunk.
//!
//! Around that core sit:
//!
//! - [`calibration`]: a closed-form adaptive choice of `beta` from pool
//!   statistics (mean query similarity, mean pairwise similarity, and the
//!   budget-implied selection size), so the redundancy penalty tracks the
//!   pool instead of requiring manual tuning.
//! - [`analysis`]: exhaustive oracles that verify the greedy result against
//!   the true optimum and measure how far the objective strays from
//!   diminishing returns, with the `beta * k * delta` cap on that deviation
//!   and the resulting `(1 - 1/e)`-style guarantee check.
//! - [`evaluation`]: a paired comparison harness (greedy vs. plain top-k at
//!   the same k), chunk-level IOU against gold references, synthetic
//!   clustered pools with tunable redundancy, and CSV reporting.
//! - [`io`]: line-delimited JSON ingestion for chunks, queries, and gold
//!   sets.
//!
//! Similarity is clamped cosine (`max(0, dot)`) on unit-normalized
//! embeddings; under it the redundancy penalty only ever shrinks a
//! candidate's gain as the selected set grows, which is what makes the greedy
//! guarantee meaningful. A raw signed mode exists for analysis probes.
//!
//! Everything is deterministic: one seed drives all sampling, and equal
//! inputs produce byte-identical outputs.

pub mod analysis;
pub mod calibration;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod pool;
pub mod scoring;
pub mod selection;

pub use analysis::{
    check_greedy_guarantee, check_greedy_guarantee_with_mode, empirical_submodularity_gap,
    empirical_submodularity_gap_with_mode, epsilon_bound, exact_optimum, exact_optimum_with_mode,
    AnalysisReport, EXHAUSTIVE_POOL_LIMIT,
};
pub use calibration::{
    beta_star, beta_star_with, calibrate, pool_stats, pool_stats_with, BetaCalibration,
    PairwiseEstimation, PoolStats, StatsOptions,
};
pub use embedding::{
    normalize, normalize_with_context, raw_sim, sim, sim_with_mode, Embedding, SimilarityMode,
};
pub use error::{Error, Result};
pub use evaluation::{
    aggregate, generate_synthetic, iou, run_comparison, write_report, AggregateRow,
    ComparisonOutput, EvalRecord, GoldReference, Method, QueryFailure, ReportSummary,
    SyntheticPoolSpec, REPORT_HEADER,
};
pub use io::{
    read_chunks, read_gold, read_queries, write_chunks, write_gold, write_queries, LoadedChunks,
};
pub use pool::{CandidatePool, Chunk, Query};
pub use scoring::{
    marginal_gain, marginal_gain_with_mode, objective, objective_with_mode, redundancy_sum,
    redundancy_sum_with_mode, relevance_sum, relevance_sum_with_mode, ScoreBreakdown, ScoreWeights,
};
pub use selection::{
    greedy_select, select_with_policy, topk_select, BetaClip, BetaPolicy, BoundaryConvention,
    SelectedChunk, SelectionConfig, SelectionResult, StopReason,
};
