use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adjust::adjust;
use super::parse::{parse_selection, Group};
use super::prompt::build_selection_prompt;
use super::retrieve::{retrieve_topk, CandidateSet};
use super::PipelineError;
use crate::compatibility::CompatibilityCache;
use crate::corpus::TableId;
use crate::indexing::{DenseIndex, EnrichmentStore};
use crate::services::{Embedder, Generator, TokenLedger};

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_TAU: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub k: usize,
    pub tau: f64,
    pub strict_json: bool,
    /// Skip the LLM and return the dense top-K (DR@K).
    pub fallback_only: bool,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            tau: DEFAULT_TAU,
            strict_json: false,
            fallback_only: false,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub candidates: CandidateSet,
    /// `T_K'`, in rank order. Empty on fallback.
    pub selected: Vec<TableId>,
    pub restored: Vec<TableId>,
    pub final_tables: Vec<TableId>,
    pub tau: f64,
    pub fallback_used: bool,
    /// Why the fallback fired, if it did.
    pub fallback_reason: Option<String>,
    pub groups: Vec<Group>,
    pub selected_group_index: Option<i64>,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

/// One line of `results.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub query_id: String,
    pub topk: Vec<TableId>,
    pub selected: Vec<TableId>,
    pub restored: Vec<TableId>,
    #[serde(rename = "final")]
    pub final_tables: Vec<TableId>,
    pub fallback_used: bool,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl QueryRecord {
    pub fn new(query_id: impl Into<String>, result: &SelectionResult) -> Self {
        Self {
            query_id: query_id.into(),
            topk: result.candidates.ids(),
            selected: result.selected.clone(),
            restored: result.restored.clone(),
            final_tables: result.final_tables.clone(),
            fallback_used: result.fallback_used,
            input_tokens: result.input_tokens,
            output_tokens: result.output_tokens,
        }
    }
}

/// Online retrieval over immutable offline artifacts. Apart from the token
/// ledger nothing is mutated, so queries may run concurrently.
pub struct Pipeline {
    pub embedder: Arc<dyn Embedder>,
    pub generator: Arc<dyn Generator>,
    pub index: DenseIndex,
    pub cache: CompatibilityCache,
    pub store: EnrichmentStore,
    pub config: PipelineConfig,
    pub ledger: Arc<TokenLedger>,
}

impl Pipeline {
    pub fn new(
        embedder: Arc<dyn Embedder>,
        generator: Arc<dyn Generator>,
        index: DenseIndex,
        cache: CompatibilityCache,
        store: EnrichmentStore,
        config: PipelineConfig,
    ) -> Self {
        Self {
            embedder,
            generator,
            index,
            cache,
            store,
            config,
            ledger: Arc::new(TokenLedger::new()),
        }
    }

    fn fallback(&self, candidates: CandidateSet, reason: Option<String>, tokens: (u64, u64)) -> SelectionResult {
        let final_tables = candidates.ids();
        SelectionResult {
            candidates,
            selected: Vec::new(),
            restored: Vec::new(),
            final_tables,
            tau: self.config.tau,
            fallback_used: reason.is_some(),
            fallback_reason: reason,
            groups: Vec::new(),
            selected_group_index: None,
            input_tokens: tokens.0,
            output_tokens: tokens.1,
        }
    }

    /// Retrieval, one selection call, then restoration. Selection or parse
    /// failures yield the unmodified top-K with `fallback_used` set.
    pub fn run_query(&self, query: &str) -> Result<SelectionResult, PipelineError> {
        let candidates = retrieve_topk(query, self.embedder.as_ref(), &self.index, self.config.k)?;
        if candidates.is_empty() {
            return Ok(self.fallback(candidates, None, (0, 0)));
        }
        if self.config.fallback_only {
            return Ok(self.fallback(candidates, Some("fallback-only mode".into()), (0, 0)));
        }

        let mut request = build_selection_prompt(query, &candidates, &self.store, &self.cache)?;
        request.seed = self.config.seed;
        let response = match self.generator.generate(&request) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("selection call failed, using top-{}: {e}", candidates.len());
                return Ok(self.fallback(candidates, Some(format!("generation: {e}")), (0, 0)));
            }
        };
        self.ledger.record(&response);
        let tokens = (response.input_tokens, response.output_tokens);

        let parsed = match parse_selection(&response.text, &candidates, self.config.strict_json) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("selection response rejected, using top-{}: {e}", candidates.len());
                return Ok(self.fallback(candidates, Some(format!("parse: {e}")), tokens));
            }
        };
        let restored = adjust(&parsed.selected, &candidates, &self.cache, self.config.tau);
        let final_tables = candidates
            .ranked
            .iter()
            .map(|c| &c.table_id)
            .filter(|id| parsed.selected.contains(id) || restored.contains(id))
            .cloned()
            .collect();
        Ok(SelectionResult {
            candidates,
            selected: parsed.selected,
            restored,
            final_tables,
            tau: self.config.tau,
            fallback_used: false,
            fallback_reason: None,
            groups: parsed.groups,
            selected_group_index: Some(parsed.selected_group_index),
            input_tokens: tokens.0,
            output_tokens: tokens.1,
        })
    }

    /// Runs queries in parallel; results keep input order.
    pub fn run_queries(&self, queries: &[String]) -> Vec<Result<SelectionResult, PipelineError>> {
        queries.par_iter().map(|q| self.run_query(q)).collect()
    }
}
