//! Unit-norm embedding vectors and the similarity primitive everything else
//! builds on.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// L2-normalized dense vector. Construction goes through [`normalize`], so
/// every live `Embedding` has unit Euclidean norm (within f64 rounding).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    values: Vec<f64>,
}

impl Embedding {
    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Scale a raw vector to unit Euclidean norm, preserving direction.
///
/// Fails on empty input and on vectors with norm below `1e-12`, which have no
/// meaningful direction to preserve.
pub fn normalize(raw: &[f64]) -> Result<Embedding> {
    normalize_with_context(raw, "input vector")
}

/// Like [`normalize`], but a failure names `context` (e.g. a chunk id) so the
/// offending vector can be located in a larger ingest.
pub fn normalize_with_context(raw: &[f64], context: &str) -> Result<Embedding> {
    if raw.is_empty() {
        return Err(Error::EmptyVector);
    }
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm >= 1e-12) {
        return Err(Error::ZeroNormVector {
            context: context.to_string(),
        });
    }
    Ok(Embedding {
        values: raw.iter().map(|v| v / norm).collect(),
    })
}

/// Whether a raw cosine score enters the objective clamped at zero or signed.
///
/// `Clamped` is what selection and calibration always use; `Raw` exists so the
/// analysis module can probe what clamping hides (negative-similarity pairs
/// break the diminishing-returns structure).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMode {
    Clamped,
    Raw,
}

impl SimilarityMode {
    #[inline]
    pub(crate) fn apply(self, dot: f64) -> f64 {
        match self {
            SimilarityMode::Clamped => dot.max(0.0),
            SimilarityMode::Raw => dot,
        }
    }
}

#[inline]
pub(crate) fn dot(a: &Embedding, b: &Embedding) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| x * y)
        .sum::<f64>()
}

fn check_dims(a: &Embedding, b: &Embedding) -> Result<()> {
    if a.dimension() != b.dimension() {
        return Err(Error::DimensionMismatch {
            left: a.dimension(),
            right: b.dimension(),
        });
    }
    Ok(())
}

/// Non-negative cosine similarity `max(0, a·b)`, in `[0, 1]` for unit vectors.
pub fn sim(a: &Embedding, b: &Embedding) -> Result<f64> {
    check_dims(a, b)?;
    Ok(dot(a, b).max(0.0))
}

/// Signed cosine similarity `a·b`, in `[-1, 1]` for unit vectors.
pub fn raw_sim(a: &Embedding, b: &Embedding) -> Result<f64> {
    check_dims(a, b)?;
    Ok(dot(a, b))
}

/// [`sim`] or [`raw_sim`] according to `mode`.
pub fn sim_with_mode(a: &Embedding, b: &Embedding, mode: SimilarityMode) -> Result<f64> {
    check_dims(a, b)?;
    Ok(mode.apply(dot(a, b)))
}
