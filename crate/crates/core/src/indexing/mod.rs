//! Offline table enrichment and the exact dense table index.

mod enrich;
mod index;

pub use enrich::{
    build_table_vector, encode_table_text, enrich_corpus, generate_purpose, purpose_prompt, EnrichReport,
    EnrichedTable, EnrichmentStore, TableDescription, PURPOSE_MAX_TOKENS,
};
pub use index::{DenseIndex, IndexEntry, INDEX_VERSION};

use crate::corpus::TableId;
use crate::services::ServiceError;

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("table {0} has no enrichment")]
    MissingEnrichment(TableId),
    #[error("vector for {table} has dimension {found}, index expects {expected}")]
    DimensionMismatch {
        table: String,
        expected: usize,
        found: usize,
    },
    #[error("artifact built with backend {found:?}, current backend is {expected:?}")]
    BackendMismatch { expected: String, found: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: unsupported format: {message}")]
    Format { path: String, message: String },
    #[error(transparent)]
    Service(#[from] ServiceError),
}
