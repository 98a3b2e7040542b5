use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EnrichmentStore, IndexError};
use crate::corpus::{TableCorpus, TableId};
use crate::services::EmbeddingVector;

pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub table_id: TableId,
    pub vector: EmbeddingVector,
}

/// Exhaustive cosine index over table vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseIndex {
    pub version: u32,
    pub backend_id: String,
    pub dimension: usize,
    entries: Vec<IndexEntry>,
}

impl DenseIndex {
    pub fn new(backend_id: impl Into<String>, dimension: usize) -> Self {
        Self {
            version: INDEX_VERSION,
            backend_id: backend_id.into(),
            dimension,
            entries: Vec::new(),
        }
    }

    pub fn insert(&mut self, table_id: TableId, vector: EmbeddingVector) -> Result<(), IndexError> {
        if vector.dimension() != self.dimension {
            return Err(IndexError::DimensionMismatch {
                table: table_id.to_string(),
                expected: self.dimension,
                found: vector.dimension(),
            });
        }
        self.entries.push(IndexEntry { table_id, vector });
        Ok(())
    }

    /// One entry per corpus table, in corpus order.
    pub fn build(corpus: &TableCorpus, store: &EnrichmentStore, dimension: usize) -> Result<Self, IndexError> {
        let mut index = Self::new(store.backend_id.clone(), dimension);
        for table in corpus.tables() {
            let enriched = store
                .get(&table.id)
                .ok_or_else(|| IndexError::MissingEnrichment(table.id.clone()))?;
            index.insert(table.id.clone(), enriched.vector.clone())?;
        }
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn vector(&self, id: &TableId) -> Option<&EmbeddingVector> {
        self.entries.iter().find(|e| &e.table_id == id).map(|e| &e.vector)
    }

    /// The `k` best tables by cosine, score descending, ties by id ascending.
    pub fn search(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<(TableId, f64)>, IndexError> {
        if query.dimension() != self.dimension {
            return Err(IndexError::DimensionMismatch {
                table: "<query>".into(),
                expected: self.dimension,
                found: query.dimension(),
            });
        }
        let mut scored: Vec<(TableId, f64)> = self
            .entries
            .iter()
            .map(|e| (e.table_id.clone(), query.cosine(&e.vector)))
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored)
    }

    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        let body = serde_json::to_string(self).expect("index serializes");
        fs::write(path, body).map_err(|e| IndexError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    /// Loads an index, refusing a version or backend other than expected.
    pub fn load(path: &Path, expected_backend: &str) -> Result<Self, IndexError> {
        let label = path.display().to_string();
        let body = fs::read_to_string(path).map_err(|e| IndexError::Io {
            path: label.clone(),
            message: e.to_string(),
        })?;
        let index: Self = serde_json::from_str(&body).map_err(|e| IndexError::Format {
            path: label.clone(),
            message: e.to_string(),
        })?;
        if index.version != INDEX_VERSION {
            return Err(IndexError::Format {
                path: label,
                message: format!("index version {}", index.version),
            });
        }
        if index.backend_id != expected_backend {
            return Err(IndexError::BackendMismatch {
                expected: expected_backend.to_string(),
                found: index.backend_id,
            });
        }
        if let Some(bad) = index.entries.iter().find(|e| e.vector.dimension() != index.dimension) {
            return Err(IndexError::DimensionMismatch {
                table: bad.table_id.to_string(),
                expected: index.dimension,
                found: bad.vector.dimension(),
            });
        }
        Ok(index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::services::stub_embedding;

    fn index_of(names: &[&str]) -> DenseIndex {
        let mut idx = DenseIndex::new("stub", 32);
        for n in names {
            idx.insert(TableId::new(*n), stub_embedding(n, 32)).unwrap();
        }
        idx
    }

    #[test]
    fn k_larger_than_corpus_returns_all() {
        let idx = index_of(&["a", "b", "c"]);
        let hits = idx.search(&stub_embedding("a", 32), 10).unwrap();
        assert_eq!(hits.len(), 3);
        assert_eq!(hits[0].0.as_str(), "a");
        assert!((hits[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_index_yields_nothing() {
        let idx = DenseIndex::new("stub", 8);
        assert!(idx.search(&stub_embedding("q", 8), 10).unwrap().is_empty());
    }

    #[test]
    fn ties_break_by_id() {
        let mut idx = DenseIndex::new("stub", 8);
        let v = stub_embedding("same", 8);
        idx.insert("z".into(), v.clone()).unwrap();
        idx.insert("a".into(), v.clone()).unwrap();
        let ids: Vec<_> = idx.search(&v, 2).unwrap().into_iter().map(|(id, _)| id.0).collect();
        assert_eq!(ids, vec!["a", "z"]);
    }

    #[test]
    fn dimension_checked_on_insert_and_query() {
        let mut idx = DenseIndex::new("stub", 8);
        assert!(idx.insert("x".into(), stub_embedding("x", 4)).is_err());
        assert!(idx.search(&stub_embedding("x", 4), 1).is_err());
    }

    #[test]
    fn reload_refuses_other_backend() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.json");
        index_of(&["a"]).save(&path).unwrap();
        assert!(matches!(DenseIndex::load(&path, "other"), Err(IndexError::BackendMismatch { .. })));
        assert_eq!(DenseIndex::load(&path, "stub").unwrap(), index_of(&["a"]));
    }
}
