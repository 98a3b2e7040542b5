use serde::Serialize;

use super::PipelineError;
use crate::corpus::TableId;
use crate::indexing::DenseIndex;
use crate::services::{Embedder, EmbeddingVector};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub table_id: TableId,
    pub rs: f64,
}

/// Top-K tables for one query, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub query: String,
    pub query_vector: EmbeddingVector,
    pub ranked: Vec<Candidate>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    pub fn ids(&self) -> Vec<TableId> {
        self.ranked.iter().map(|c| c.table_id.clone()).collect()
    }

    pub fn position(&self, id: &TableId) -> Option<usize> {
        self.ranked.iter().position(|c| &c.table_id == id)
    }

    pub fn contains(&self, id: &TableId) -> bool {
        self.position(id).is_some()
    }
}

pub fn retrieve_topk(
    query: &str,
    embedder: &dyn Embedder,
    index: &DenseIndex,
    k: usize,
) -> Result<CandidateSet, PipelineError> {
    let query_vector = embedder.embed(query)?;
    let ranked = index
        .search(&query_vector, k)?
        .into_iter()
        .map(|(table_id, rs)| Candidate { table_id, rs })
        .collect();
    Ok(CandidateSet {
        query: query.to_string(),
        query_vector,
        ranked,
    })
}
