//! Join-aware multi-table retrieval for open-book text-to-SQL.
//!
//! Offline, tables are enriched with a purpose paragraph and indexed densely,
//! and a table-pair compatibility cache is computed from column signals.
//! Online, a query goes through dense top-K retrieval, one LLM selection
//! call, and an additive compatibility-based restoration pass.

pub mod corpus;
pub mod services;
pub mod compatibility;
pub mod indexing;
pub mod pipeline;
pub mod evaluation;
