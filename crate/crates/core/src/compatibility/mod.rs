//! Table–table compatibility from column signals.
//!
//! A cross-table column pair is scored only when it looks like a
//! key/foreign-key pair: at least one side is unique over its non-NULL values
//! and one side's distinct values are contained in the other's. Valid pairs
//! score `½·jac + ½·name` with `name = ½·sem + ½·ex`; a table pair's
//! compatibility is its best valid column pair. Value signals use the full
//! column, not the Markdown sample.

mod cache;
mod eval;
mod score;
mod signals;

pub use cache::{build_cache, build_cache_from_signals, CacheConfig, CacheEntry, CompatibilityCache, PairCompat, CACHE_VERSION};
pub use eval::{evaluate_cache, CompatEvalReport, GoldJoin, DEFAULT_JOIN_THRESHOLD};
pub use score::{column_pair_score, header_name_score, table_compatibility, ColumnPairScore, HeaderScore, JoinSide, TableJoin};
pub use signals::{
    column_uniqueness, jaccard, normalize_header, subset_relation, ColumnSignals, TableSignals, ValueProfile,
};

use crate::corpus::TableId;
use crate::services::ServiceError;

#[derive(Debug, thiserror::Error)]
pub enum CompatError {
    #[error("columns {left} and {right} belong to the same table")]
    SameTable { left: String, right: String },
    #[error("unknown table {0:?}")]
    UnknownTable(String),
    #[error("table {table:?} has no column {column:?}")]
    UnknownColumn { table: String, column: String },
    #[error("cache built with backend {found:?}, current backend is {expected:?}")]
    BackendMismatch { expected: String, found: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: malformed cache: {message}")]
    Format { path: String, message: String },
    #[error(transparent)]
    Service(#[from] ServiceError),
}

impl CompatError {
    pub(crate) fn unknown_table(id: &TableId) -> Self {
        CompatError::UnknownTable(id.to_string())
    }
}
