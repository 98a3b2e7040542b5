//! Online stages: dense top-K retrieval, one LLM selection call, and the
//! additive compatibility restoration, with the DR@K fallback.

mod adjust;
mod parse;
mod prompt;
mod retrieve;
mod run;

pub use adjust::adjust;
pub use parse::{extract_json_object, parse_selection, Group, ParsedSelection, SelectionError};
pub use prompt::{build_selection_prompt, SELECTION_MAX_TOKENS};
pub use retrieve::{retrieve_topk, Candidate, CandidateSet};
pub use run::{Pipeline, PipelineConfig, QueryRecord, SelectionResult, DEFAULT_K, DEFAULT_TAU};

use crate::corpus::TableId;
use crate::indexing::IndexError;
use crate::services::ServiceError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("embedding failed: {0}")]
    Embedding(#[from] ServiceError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("candidate {0} has no enrichment")]
    MissingEnrichment(TableId),
}
