use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::IndexError;
use crate::corpus::{sample_rows, serialize_markdown, Table, TableCorpus, TableId, DEFAULT_SAMPLE_ROWS};
use crate::services::{Embedder, EmbeddingVector, GenerationRequest, Generator, ServiceError};

const PURPOSE_TEMPLATE: &str = "Given the following table, describe the purpose of this table in layman's terms in one paragraph. If you do not think the text is semantically meaningful, output None.\n{table}";

pub const PURPOSE_MAX_TOKENS: u32 = 256;

const STORE_VERSION: u32 = 1;

pub fn purpose_prompt(markdown: &str) -> String {
    PURPOSE_TEMPLATE.replace("{table}", markdown)
}

/// Asks the generator for a purpose paragraph. A bare `None` answer is
/// stored as the empty string.
pub fn generate_purpose(markdown: &str, generator: &dyn Generator, seed: u64) -> Result<String, ServiceError> {
    let mut request = GenerationRequest::new(purpose_prompt(markdown), PURPOSE_MAX_TOKENS);
    request.seed = seed;
    let reply = generator.generate(&request)?;
    let text = reply.text.trim();
    Ok(if text == "None" { String::new() } else { text.to_string() })
}

/// Text handed to the table embedder: name, purpose (when present), content.
pub fn encode_table_text(name: &str, purpose: &str, markdown: &str) -> String {
    let mut out = format!("Table name: {name}\n");
    if !purpose.is_empty() {
        out.push_str(&format!("Table purpose: {purpose}\n"));
    }
    out.push_str(&format!("Table content: {markdown}"));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableDescription {
    pub table_id: TableId,
    pub name: String,
    /// Empty when the generator answered `None`.
    pub purpose: String,
    pub markdown: String,
}

impl TableDescription {
    pub fn encoded_text(&self) -> String {
        encode_table_text(&self.name, &self.purpose, &self.markdown)
    }
}

pub fn build_table_vector(description: &TableDescription, embedder: &dyn Embedder) -> Result<EmbeddingVector, ServiceError> {
    embedder.embed(&description.encoded_text())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichedTable {
    #[serde(flatten)]
    pub description: TableDescription,
    pub vector: EmbeddingVector,
}

/// Persisted enrichment results keyed by table id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentStore {
    pub version: u32,
    pub backend_id: String,
    pub seed: u64,
    pub tables: BTreeMap<TableId, EnrichedTable>,
}

impl EnrichmentStore {
    pub fn new(backend_id: impl Into<String>, seed: u64) -> Self {
        Self {
            version: STORE_VERSION,
            backend_id: backend_id.into(),
            seed,
            tables: BTreeMap::new(),
        }
    }

    pub fn get(&self, id: &TableId) -> Option<&EnrichedTable> {
        self.tables.get(id)
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        let body = serde_json::to_string_pretty(self).expect("store serializes");
        fs::write(path, body + "\n").map_err(|e| IndexError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    /// Loads a store, refusing one built under a different embedding backend.
    pub fn load(path: &Path, expected_backend: &str) -> Result<Self, IndexError> {
        let body = fs::read_to_string(path).map_err(|e| IndexError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let store: Self = serde_json::from_str(&body).map_err(|e| IndexError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if store.version != STORE_VERSION {
            return Err(IndexError::Format {
                path: path.display().to_string(),
                message: format!("enrichment store version {}", store.version),
            });
        }
        if store.backend_id != expected_backend {
            return Err(IndexError::BackendMismatch {
                expected: expected_backend.to_string(),
                found: store.backend_id,
            });
        }
        Ok(store)
    }

    /// Opens `path` if it exists, else starts an empty store.
    pub fn open_or_new(path: &Path, backend_id: &str, seed: u64) -> Result<Self, IndexError> {
        if path.exists() {
            Self::load(path, backend_id)
        } else {
            Ok(Self::new(backend_id, seed))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EnrichReport {
    pub generated: usize,
    pub reused: usize,
    pub failed: Vec<(TableId, String)>,
}

impl EnrichReport {
    pub fn is_complete(&self) -> bool {
        self.failed.is_empty()
    }
}

fn enrich_one(
    table: &Table,
    markdown: String,
    generator: &dyn Generator,
    embedder: &dyn Embedder,
    seed: u64,
) -> Result<EnrichedTable, ServiceError> {
    let purpose = generate_purpose(&markdown, generator, seed)?;
    let description = TableDescription {
        table_id: table.id.clone(),
        name: table.name.clone(),
        purpose,
        markdown,
    };
    let vector = build_table_vector(&description, embedder)?;
    Ok(EnrichedTable { description, vector })
}

/// Enriches every table that the store does not already hold with the
/// current Markdown snapshot. Failures leave the table out of the store so
/// a later run retries it.
pub fn enrich_corpus(
    corpus: &TableCorpus,
    generator: &dyn Generator,
    embedder: &dyn Embedder,
    store: &mut EnrichmentStore,
) -> EnrichReport {
    let seed = store.seed;
    let mut report = EnrichReport::default();
    let mut todo = Vec::new();
    for table in corpus.tables() {
        let markdown = serialize_markdown(table, &sample_rows(table, DEFAULT_SAMPLE_ROWS, seed));
        match store.tables.get(&table.id) {
            Some(done) if done.description.markdown == markdown && done.description.name == table.name => {
                report.reused += 1
            }
            _ => todo.push((table, markdown)),
        }
    }
    let results: Vec<_> = todo
        .into_par_iter()
        .map(|(table, markdown)| (table.id.clone(), enrich_one(table, markdown, generator, embedder, seed)))
        .collect();
    for (id, result) in results {
        match result {
            Ok(enriched) => {
                store.tables.insert(id, enriched);
                report.generated += 1;
            }
            Err(e) => {
                log::warn!("enrichment of {id} failed: {e}");
                report.failed.push((id, e.to_string()));
            }
        }
    }
    let live: std::collections::BTreeSet<_> = corpus.tables().iter().map(|t| &t.id).collect();
    store.tables.retain(|id, _| live.contains(id));
    report
}
