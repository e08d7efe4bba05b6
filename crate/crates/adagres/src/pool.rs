//! Chunks, queries, and the candidate pool selection operates over.

use crate::embedding::Embedding;
use crate::error::{Error, Result};
use std::collections::HashMap;

/// One candidate passage: an id, its unit-norm embedding, and a token count.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub id: String,
    pub embedding: Embedding,
    pub token_length: u64,
    pub text: Option<String>,
}

impl Chunk {
    pub fn new(
        id: impl Into<String>,
        embedding: Embedding,
        token_length: u64,
        text: Option<String>,
    ) -> Result<Self> {
        let id = id.into();
        if token_length == 0 {
            return Err(Error::InvalidTokenLength { id });
        }
        Ok(Chunk {
            id,
            embedding,
            token_length,
            text,
        })
    }
}

/// The query side of a selection run.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub id: String,
    pub embedding: Embedding,
    pub text: Option<String>,
}

impl Query {
    pub fn new(id: impl Into<String>, embedding: Embedding, text: Option<String>) -> Self {
        Query {
            id: id.into(),
            embedding,
            text,
        }
    }
}

/// Ordered, non-empty collection of chunks with a shared embedding dimension
/// and pairwise-distinct ids. Immutable once built.
#[derive(Debug, Clone)]
pub struct CandidatePool {
    chunks: Vec<Chunk>,
    dimension: usize,
    by_id: HashMap<String, usize>,
}

impl CandidatePool {
    pub fn new(chunks: Vec<Chunk>) -> Result<Self> {
        let dimension = match chunks.first() {
            Some(c) => c.embedding.dimension(),
            None => return Err(Error::EmptyPool),
        };
        let mut by_id = HashMap::with_capacity(chunks.len());
        for (i, chunk) in chunks.iter().enumerate() {
            if chunk.embedding.dimension() != dimension {
                return Err(Error::DimensionMismatch {
                    left: dimension,
                    right: chunk.embedding.dimension(),
                });
            }
            if by_id.insert(chunk.id.clone(), i).is_some() {
                return Err(Error::DuplicateChunkId {
                    id: chunk.id.clone(),
                });
            }
        }
        Ok(CandidatePool {
            chunks,
            dimension,
            by_id,
        })
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    /// Always false — pools reject empty construction — but callers holding a
    /// generic collection interface expect the pair.
    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn get(&self, id: &str) -> Option<&Chunk> {
        self.by_id.get(id).map(|&i| &self.chunks[i])
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    /// Map distinct ids to pool indices; unknown or repeated ids are errors.
    pub(crate) fn resolve(&self, ids: &[&str]) -> Result<Vec<usize>> {
        let mut seen = vec![false; self.chunks.len()];
        let mut out = Vec::with_capacity(ids.len());
        for &id in ids {
            let i = self
                .index_of(id)
                .ok_or_else(|| Error::UnknownChunkId { id: id.to_string() })?;
            if seen[i] {
                return Err(Error::DuplicateInSubset { id: id.to_string() });
            }
            seen[i] = true;
            out.push(i);
        }
        Ok(out)
    }
}
