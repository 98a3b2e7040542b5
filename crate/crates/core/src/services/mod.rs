//! Clients for the embedding and text-generation services.
//!
//! Both services sit behind small traits ([`Embedder`], [`Generator`]) so the
//! offline and online stages can run against HTTP backends or the
//! deterministic in-process stubs used by the tests.

mod embed;
mod generate;
mod http;
mod retry;

pub use embed::{cosine, stub_embedding, CachedEmbedder, Embedder, EmbeddingVector, StubEmbedder};
pub use generate::{
    stub_token_count, GenerationRequest, GenerationResponse, Generator, Metered, ScriptRule, ScriptRules,
    ScriptedGenerator, TokenLedger, TokenUsage,
};
pub use http::{HttpEmbedder, HttpGenerator, HttpSettings};
pub use retry::RetryPolicy;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ServiceError {
    #[error("input text is empty")]
    EmptyInput,
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("request timed out")]
    Timeout,
    #[error("malformed backend reply: {0}")]
    Malformed(String),
    #[error("quota exhausted: {0}")]
    Quota(String),
    #[error("embedding dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("embedding cache: {0}")]
    Cache(String),
}

impl ServiceError {
    /// Errors worth retrying.
    pub fn is_transient(&self) -> bool {
        matches!(
            self,
            ServiceError::Unavailable(_) | ServiceError::Timeout | ServiceError::Quota(_)
        )
    }
}
