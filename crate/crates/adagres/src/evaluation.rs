//! Evaluation harness: chunk-level IOU against gold references, the paired
//! greedy-vs-top-k comparison at matched k, synthetic clustered pool
//! generation, and CSV report emission with per-β aggregates.

use crate::calibration::BetaCalibration;
use crate::embedding::{dot, normalize, Embedding};
use crate::error::{Error, Result};
use crate::pool::{CandidatePool, Chunk, Query};
use crate::scoring::{redundancy_sum, relevance_sum};
use crate::selection::{select_with_policy, topk_select, BetaPolicy, SelectionConfig};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

/// The reference ids a query's selection is scored against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldReference {
    pub query_id: String,
    pub gold_ids: BTreeSet<String>,
}

impl GoldReference {
    /// Reject empty gold sets up front — IOU against nothing is undefined.
    pub fn new(query_id: impl Into<String>, gold_ids: BTreeSet<String>) -> Result<Self> {
        let query_id = query_id.into();
        if gold_ids.is_empty() {
            return Err(Error::EmptyGold { query_id });
        }
        Ok(GoldReference { query_id, gold_ids })
    }
}

/// Which selector produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Adagres,
    /// Plain top-k by query similarity, with k taken from the paired
    /// adagres run so the two rows are directly comparable.
    TopkSameK,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Adagres => "adagres",
            Method::TopkSameK => "topk_same_k",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One method's outcome on one query.
///
/// `beta_label` groups rows for aggregation: the numeric beta for fixed runs,
/// the policy name otherwise — per-query adaptive betas would otherwise each
/// land in their own group. `skipped` marks queries where greedy selected
/// nothing, so no same-k baseline exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub query_id: String,
    pub method: Method,
    pub k_used: usize,
    pub beta_used: f64,
    pub beta_label: String,
    pub iou: f64,
    pub relevance_sum: f64,
    pub redundancy_sum: f64,
    pub total_tokens: u64,
    pub skipped: bool,
}

/// A query the comparison had to abandon, and why; the run continues past it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryFailure {
    pub query_id: String,
    pub reason: String,
}

/// Everything a comparison run produced: paired records sorted by
/// `(query_id, method)` and the per-query failures that did not stop the run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComparisonOutput {
    pub records: Vec<EvalRecord>,
    pub failures: Vec<QueryFailure>,
}

/// Chunk-level intersection-over-union.
///
/// An empty selection scores 0 against any (non-empty) gold set; an empty
/// gold set is rejected rather than scored.
pub fn iou(selected: &BTreeSet<String>, gold: &BTreeSet<String>) -> Result<f64> {
    if gold.is_empty() {
        return Err(Error::EmptyGoldSet);
    }
    if selected.is_empty() {
        return Ok(0.0);
    }
    let inter = selected.intersection(gold).count();
    let union = selected.union(gold).count();
    Ok(inter as f64 / union as f64)
}

fn beta_label(cfg: &SelectionConfig) -> String {
    match cfg.beta_policy {
        BetaPolicy::Fixed => format!("{}", cfg.weights.beta),
        BetaPolicy::Adaptive => "adaptive".to_string(),
        BetaPolicy::AdaptiveScaled { .. } => "adaptive_scaled".to_string(),
    }
}

fn record_for(
    q: &Query,
    pool: &CandidatePool,
    method: Method,
    ids: &[&str],
    k_used: usize,
    beta_used: f64,
    label: &str,
    gold: &GoldReference,
    total_tokens: u64,
) -> Result<EvalRecord> {
    let selected: BTreeSet<String> = ids.iter().map(|s| s.to_string()).collect();
    Ok(EvalRecord {
        query_id: q.id.clone(),
        method,
        k_used,
        beta_used,
        beta_label: label.to_string(),
        iou: iou(&selected, &gold.gold_ids)?,
        relevance_sum: relevance_sum(q, pool, ids)?,
        redundancy_sum: redundancy_sum(pool, ids)?,
        total_tokens,
        skipped: false,
    })
}

fn skipped_record(q: &Query, method: Method, beta_used: f64, label: &str) -> EvalRecord {
    EvalRecord {
        query_id: q.id.clone(),
        method,
        k_used: 0,
        beta_used,
        beta_label: label.to_string(),
        iou: 0.0,
        relevance_sum: 0.0,
        redundancy_sum: 0.0,
        total_tokens: 0,
        skipped: true,
    }
}

/// Run greedy selection per query, read off its k, and run top-k at that same
/// k, emitting one record per method per query.
///
/// All queries share `pool`. A query with no gold entry or a failing
/// selection becomes a [`QueryFailure`] and the run continues; a query where
/// greedy selects nothing emits a skipped pair instead of a baseline run.
/// Records come back sorted by `(query_id, method)` whatever the input order.
pub fn run_comparison(
    queries: &[Query],
    pool: &CandidatePool,
    golds: &HashMap<String, GoldReference>,
    cfg: &SelectionConfig,
) -> Result<ComparisonOutput> {
    cfg.validate()?;
    let label = beta_label(cfg);
    let mut out = ComparisonOutput::default();
    for q in queries {
        match evaluate_query(q, pool, golds, cfg, &label) {
            Ok(mut records) => out.records.append(&mut records),
            Err(err) => out.failures.push(QueryFailure {
                query_id: q.id.clone(),
                reason: err.to_string(),
            }),
        }
    }
    out.records
        .sort_by(|a, b| (a.query_id.as_str(), a.method.as_str())
            .cmp(&(b.query_id.as_str(), b.method.as_str())));
    out.failures.sort_by(|a, b| a.query_id.cmp(&b.query_id));
    Ok(out)
}

fn evaluate_query(
    q: &Query,
    pool: &CandidatePool,
    golds: &HashMap<String, GoldReference>,
    cfg: &SelectionConfig,
    label: &str,
) -> Result<Vec<EvalRecord>> {
    let gold = golds.get(&q.id).ok_or_else(|| Error::EmptyGold {
        query_id: q.id.clone(),
    })?;
    let (selection, _calibration): (_, Option<BetaCalibration>) =
        select_with_policy(q, pool, cfg)?;
    let beta_used = selection.beta_used;
    let k = selection.len();
    if k == 0 {
        return Ok(vec![
            skipped_record(q, Method::Adagres, beta_used, label),
            skipped_record(q, Method::TopkSameK, beta_used, label),
        ]);
    }
    let baseline = topk_select(q, pool, k, cfg.token_budget)?;
    Ok(vec![
        record_for(
            q,
            pool,
            Method::Adagres,
            &selection.ids(),
            k,
            beta_used,
            label,
            gold,
            selection.total_tokens,
        )?,
        record_for(
            q,
            pool,
            Method::TopkSameK,
            &baseline.ids(),
            k,
            beta_used,
            label,
            gold,
            baseline.total_tokens,
        )?,
    ])
}

/// Recipe for a clustered synthetic pool with tunable redundancy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPoolSpec {
    pub n_chunks: usize,
    pub dimension: usize,
    pub n_clusters: usize,
    /// Desired mean pairwise similarity within a cluster; the generator must
    /// land within 0.05 of it or refuse.
    pub intra_cluster_sim_target: f64,
    /// Inclusive `(min, max)` token lengths drawn uniformly per chunk.
    pub token_length_range: (u64, u64),
    pub seed: u64,
}

impl SyntheticPoolSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_chunks == 0 {
            return Err(Error::InvalidConfig {
                detail: "n_chunks must be at least 1".into(),
            });
        }
        if self.dimension == 0 {
            return Err(Error::InvalidConfig {
                detail: "dimension must be at least 1".into(),
            });
        }
        if self.n_clusters == 0 || self.n_clusters > self.n_chunks {
            return Err(Error::InvalidConfig {
                detail: format!(
                    "n_clusters must be in 1..={}, got {}",
                    self.n_chunks, self.n_clusters
                ),
            });
        }
        let t = self.intra_cluster_sim_target;
        if !t.is_finite() || !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidConfig {
                detail: format!("intra_cluster_sim_target must be in [0, 1], got {t}"),
            });
        }
        let (lo, hi) = self.token_length_range;
        if lo == 0 || lo > hi {
            return Err(Error::InvalidConfig {
                detail: format!("token_length_range must satisfy 1 <= min <= max, got ({lo}, {hi})"),
            });
        }
        Ok(())
    }
}

/// Members never sit exactly on their cluster center — the mixing weight is
/// capped below 1 so a target of 1.0 is unreachable and reported as such.
const MAX_CENTER_WEIGHT: f64 = 0.97;

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Embedding {
    loop {
        let raw: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        if let Ok(e) = normalize(&raw) {
            return e;
        }
    }
}

fn mix(center: &Embedding, noise: &Embedding, rho: f64) -> Embedding {
    let spread = (1.0 - rho * rho).max(0.0).sqrt();
    let raw: Vec<f64> = center
        .values()
        .iter()
        .zip(noise.values())
        .map(|(c, n)| rho * c + spread * n)
        .collect();
    // rho and spread never vanish together, so the mix cannot be all-zero
    // unless center and noise are exactly antipodal at rho = spread.
    normalize(&raw).expect("mixed cluster member must have nonzero norm")
}

fn mean_intra_cluster_sim(members: &[Embedding], assignment: &[usize]) -> Option<f64> {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..members.len() {
        for j in i + 1..members.len() {
            if assignment[i] == assignment[j] {
                total += dot(&members[i], &members[j]).max(0.0);
                pairs += 1;
            }
        }
    }
    (pairs > 0).then(|| total / pairs as f64)
}

/// Build a clustered pool, a query drawn toward every cluster, and a gold set
/// holding the most query-similar member of each cluster.
///
/// Deterministic in the seed: every random draw happens once, up front, and
/// the center-mixing weight is then bisected against the realized mean
/// intra-cluster similarity. A realized mean further than 0.05 from the
/// target fails with what was achievable.
pub fn generate_synthetic(spec: &SyntheticPoolSpec) -> Result<(CandidatePool, Query, GoldReference)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers: Vec<Embedding> = (0..spec.n_clusters)
        .map(|_| random_unit(&mut rng, spec.dimension))
        .collect();
    let noises: Vec<Embedding> = (0..spec.n_chunks)
        .map(|_| random_unit(&mut rng, spec.dimension))
        .collect();
    let (lo, hi) = spec.token_length_range;
    let lengths: Vec<u64> = (0..spec.n_chunks).map(|_| rng.random_range(lo..=hi)).collect();
    let center_weights: Vec<f64> = (0..spec.n_clusters)
        .map(|_| 0.75 + 0.5 * rng.random::<f64>())
        .collect();
    // Contiguous, balanced assignment: chunk i belongs to cluster
    // floor(i * n_clusters / n_chunks).
    let assignment: Vec<usize> = (0..spec.n_chunks)
        .map(|i| i * spec.n_clusters / spec.n_chunks)
        .collect();

    let members_at = |rho: f64| -> Vec<Embedding> {
        (0..spec.n_chunks)
            .map(|i| mix(&centers[assignment[i]], &noises[i], rho))
            .collect()
    };

    let members = if spec.n_chunks == spec.n_clusters {
        // Every cluster is a singleton: no intra-cluster pairs exist, so the
        // target constrains nothing and members sit on their own centers.
        (0..spec.n_chunks)
            .map(|i| centers[assignment[i]].clone())
            .collect()
    } else {
        let mut lo_w = 0.0_f64;
        let mut hi_w = MAX_CENTER_WEIGHT;
        for _ in 0..60 {
            let mid = 0.5 * (lo_w + hi_w);
            let realized = mean_intra_cluster_sim(&members_at(mid), &assignment)
                .expect("intra-cluster pairs exist on this branch");
            if realized < spec.intra_cluster_sim_target {
                lo_w = mid;
            } else {
                hi_w = mid;
            }
        }
        let rho = 0.5 * (lo_w + hi_w);
        let members = members_at(rho);
        let achieved = mean_intra_cluster_sim(&members, &assignment)
            .expect("intra-cluster pairs exist on this branch");
        if (achieved - spec.intra_cluster_sim_target).abs() > 0.05 {
            return Err(Error::InfeasibleTarget {
                target: spec.intra_cluster_sim_target,
                achieved,
            });
        }
        members
    };

    let chunks: Vec<Chunk> = members
        .iter()
        .enumerate()
        .map(|(i, e)| Chunk::new(format!("c{i:03}"), e.clone(), lengths[i], None))
        .collect::<Result<_>>()?;
    let pool = CandidatePool::new(chunks)?;

    let query_raw: Vec<f64> = (0..spec.dimension)
        .map(|d| {
            centers
                .iter()
                .zip(&center_weights)
                .map(|(c, w)| w * c.values()[d])
                .sum()
        })
        .collect();
    let query = Query::new("q000", normalize(&query_raw)?, None);

    let mut gold_ids = BTreeSet::new();
    for cluster in 0..spec.n_clusters {
        let representative = (0..spec.n_chunks)
            .filter(|&i| assignment[i] == cluster)
            .max_by(|&a, &b| {
                let sa = dot(&query.embedding, &members[a]).max(0.0);
                let sb = dot(&query.embedding, &members[b]).max(0.0);
                sa.partial_cmp(&sb)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(b.cmp(&a))
            })
            .expect("every cluster owns at least one chunk");
        gold_ids.insert(format!("c{representative:03}"));
    }
    let gold = GoldReference::new(query.id.clone(), gold_ids)?;
    Ok((pool, query, gold))
}

/// One `(beta_label, method)` group's aggregate statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub beta_label: String,
    pub method: Method,
    pub n: usize,
    pub mean_iou: f64,
    pub mean_relevance_sum: f64,
    pub mean_redundancy_sum: f64,
    pub mean_total_tokens: f64,
    pub iou_p50: f64,
    pub iou_p90: f64,
}

/// What [`write_report`] produced: the aggregate rows and where both CSV
/// files landed.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub rows: Vec<AggregateRow>,
    pub report_path: PathBuf,
    pub summary_path: PathBuf,
}

fn nearest_rank(sorted: &[f64], quantile: f64) -> f64 {
    let n = sorted.len();
    let rank = (quantile * n as f64).ceil().max(1.0) as usize;
    sorted[rank.min(n) - 1]
}

/// Group records by `(beta_label, method)` and average each group; skipped
/// records count (their zeros are real outcomes, not missing data).
pub fn aggregate(records: &[EvalRecord]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(String, &'static str), Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.beta_label.clone(), r.method.as_str()))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((label, _), rows)| {
            let n = rows.len() as f64;
            let mut ious: Vec<f64> = rows.iter().map(|r| r.iou).collect();
            ious.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            AggregateRow {
                beta_label: label,
                method: rows[0].method,
                n: rows.len(),
                mean_iou: rows.iter().map(|r| r.iou).sum::<f64>() / n,
                mean_relevance_sum: rows.iter().map(|r| r.relevance_sum).sum::<f64>() / n,
                mean_redundancy_sum: rows.iter().map(|r| r.redundancy_sum).sum::<f64>() / n,
                mean_total_tokens: rows.iter().map(|r| r.total_tokens as f64).sum::<f64>() / n,
                iou_p50: nearest_rank(&ious, 0.5),
                iou_p90: nearest_rank(&ious, 0.9),
            }
        })
        .collect()
}

pub const REPORT_HEADER: [&str; 8] = [
    "query_id",
    "method",
    "beta",
    "k",
    "iou",
    "relevance_sum",
    "redundancy_sum",
    "total_tokens",
];

const SUMMARY_HEADER: [&str; 9] = [
    "beta",
    "method",
    "n",
    "mean_iou",
    "mean_relevance_sum",
    "mean_redundancy_sum",
    "mean_total_tokens",
    "iou_p50",
    "iou_p90",
];

/// Write the per-record CSV to `path` and the aggregate table next to it
/// (extension swapped for `summary.csv`). Empty input still writes both
/// headers, so downstream consumers always find well-formed files.
pub fn write_report(records: &[EvalRecord], path: &Path) -> Result<ReportSummary> {
    let csv_err = |source| Error::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    writer.write_record(REPORT_HEADER).map_err(csv_err)?;
    for r in records {
        writer
            .write_record([
                r.query_id.as_str(),
                r.method.as_str(),
                &r.beta_used.to_string(),
                &r.k_used.to_string(),
                &r.iou.to_string(),
                &r.relevance_sum.to_string(),
                &r.redundancy_sum.to_string(),
                &r.total_tokens.to_string(),
            ])
            .map_err(csv_err)?;
    }
    writer.flush().map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;

    let mut summary_path = path.to_path_buf();
    summary_path.set_extension("summary.csv");
    let sum_err = |source| Error::Csv {
        path: summary_path.display().to_string(),
        source,
    };
    let rows = aggregate(records);
    let mut writer = csv::Writer::from_path(&summary_path).map_err(sum_err)?;
    writer.write_record(SUMMARY_HEADER).map_err(sum_err)?;
    for row in &rows {
        writer
            .write_record([
                row.beta_label.as_str(),
                row.method.as_str(),
                &row.n.to_string(),
                &row.mean_iou.to_string(),
                &row.mean_relevance_sum.to_string(),
                &row.mean_redundancy_sum.to_string(),
                &row.mean_total_tokens.to_string(),
                &row.iou_p50.to_string(),
                &row.iou_p90.to_string(),
            ])
            .map_err(sum_err)?;
    }
    writer.flush().map_err(|source| Error::Io {
        path: summary_path.display().to_string(),
        source,
    })?;
    Ok(ReportSummary {
        rows,
        report_path: path.to_path_buf(),
        summary_path,
    })
}
