//! Line-delimited JSON ingestion and emission for chunks, queries, and gold
//! references, plus the whitespace-token fallback for chunk records that
//! arrive without a token count.

use crate::embedding::normalize_with_context;
use crate::error::{Error, Result};
use crate::evaluation::GoldReference;
use crate::pool::{CandidatePool, Chunk, Query};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

#[derive(Serialize, Deserialize)]
struct ChunkRecord {
    id: String,
    embedding: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tokens: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    text: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct QueryRecord {
    id: String,
    embedding: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    text: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct GoldRecord {
    query_id: String,
    gold_ids: Vec<String>,
}

/// A parsed chunk file: the pool plus how many records needed the
/// whitespace-count token fallback (so callers can warn once per file).
#[derive(Debug)]
pub struct LoadedChunks {
    pub pool: CandidatePool,
    pub token_fallbacks: usize,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = (usize, std::io::Result<String>)>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    // Line numbers are 1-based so they match what editors and error messages
    // show.
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line)))
}

fn parse_line<T: for<'de> Deserialize<'de>>(path: &Path, line_no: usize, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|source| Error::MalformedRecord {
        path: path.display().to_string(),
        line: line_no,
        source,
    })
}

/// Read one chunk per line, normalizing embeddings and falling back to a
/// whitespace word count when a record has `text` but no `tokens`. A record
/// with neither is unusable and fails with its line number; blank lines are
/// skipped.
pub fn read_chunks(path: &Path) -> Result<LoadedChunks> {
    let mut chunks = Vec::new();
    let mut token_fallbacks = 0usize;
    for (line_no, line) in open_lines(path)? {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ChunkRecord = parse_line(path, line_no, &line)?;
        let tokens = match record.tokens {
            Some(t) => t,
            None => {
                let words = record
                    .text
                    .as_deref()
                    .map(|t| t.split_whitespace().count() as u64)
                    .unwrap_or(0);
                if words == 0 {
                    return Err(Error::MissingTokenSource {
                        path: path.display().to_string(),
                        line: line_no,
                    });
                }
                token_fallbacks += 1;
                words
            }
        };
        let embedding = normalize_with_context(&record.embedding, &record.id)?;
        chunks.push(Chunk::new(record.id, embedding, tokens, record.text)?);
    }
    Ok(LoadedChunks {
        pool: CandidatePool::new(chunks)?,
        token_fallbacks,
    })
}

/// Read one query per line, normalizing embeddings.
pub fn read_queries(path: &Path) -> Result<Vec<Query>> {
    let mut queries = Vec::new();
    for (line_no, line) in open_lines(path)? {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: QueryRecord = parse_line(path, line_no, &line)?;
        let embedding = normalize_with_context(&record.embedding, &record.id)?;
        queries.push(Query::new(record.id, embedding, record.text));
    }
    Ok(queries)
}

/// Read gold references keyed by query id; a query id appearing on two lines
/// is ambiguous and fails with the second line's number.
pub fn read_gold(path: &Path) -> Result<HashMap<String, GoldReference>> {
    let mut golds = HashMap::new();
    for (line_no, line) in open_lines(path)? {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: GoldRecord = parse_line(path, line_no, &line)?;
        let ids: BTreeSet<String> = record.gold_ids.into_iter().collect();
        let gold = GoldReference::new(record.query_id, ids)?;
        if golds.contains_key(&gold.query_id) {
            return Err(Error::DuplicateGold {
                path: path.display().to_string(),
                line: line_no,
                query_id: gold.query_id,
            });
        }
        golds.insert(gold.query_id.clone(), gold);
    }
    Ok(golds)
}

fn write_lines<T: Serialize>(path: &Path, records: impl Iterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    for record in records {
        let json = serde_json::to_string(&record)
            .expect("serializing a plain record cannot fail");
        writeln!(out, "{json}").map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// Write the pool back out in the chunk-file format, token counts included.
pub fn write_chunks(path: &Path, pool: &CandidatePool) -> Result<()> {
    write_lines(
        path,
        pool.chunks().iter().map(|c| ChunkRecord {
            id: c.id.clone(),
            embedding: c.embedding.values().to_vec(),
            tokens: Some(c.token_length),
            text: c.text.clone(),
        }),
    )
}

pub fn write_queries(path: &Path, queries: &[Query]) -> Result<()> {
    write_lines(
        path,
        queries.iter().map(|q| QueryRecord {
            id: q.id.clone(),
            embedding: q.embedding.values().to_vec(),
            text: q.text.clone(),
        }),
    )
}

pub fn write_gold(path: &Path, golds: &[GoldReference]) -> Result<()> {
    write_lines(
        path,
        golds.iter().map(|g| GoldRecord {
            query_id: g.query_id.clone(),
            gold_ids: g.gold_ids.iter().cloned().collect(),
        }),
    )
}
