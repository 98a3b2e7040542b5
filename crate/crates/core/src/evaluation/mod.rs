//! Selection metrics, execution match against an SQLite database, and token
//! cost accounting.

mod cost;
mod exec;
mod gold;
mod metrics;
mod sqlgen;

pub use cost::{cost_estimate, CostLedger, Rates};
pub use exec::{execution_match, stratified_em, EmReport, ExecOutcome, DEFAULT_EXEC_TIMEOUT};
pub use gold::{read_jsonl, write_jsonl, GoldQuery};
pub use metrics::{
    aggregate_metrics, evaluate_predictions, selection_metrics, AggregateReport, EvalRecord, SelectionMetrics,
};
pub use sqlgen::{extract_sql, generate_sql, sql_generation_prompt, SQL_MAX_TOKENS};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}:{line}: {message}")]
    Format { path: String, line: usize, message: String },
    #[error("gold set is empty")]
    EmptyGold,
    #[error("no records to aggregate")]
    EmptyInput,
    #[error("no prediction for query {0}")]
    MissingPrediction(String),
    #[error("gold SQL failed: {0}")]
    GoldQuery(String),
    #[error("database {path}: {message}")]
    Database { path: String, message: String },
}
