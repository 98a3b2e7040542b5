use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::services::TokenUsage;

/// Dollars per million tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub input_per_million: f64,
    pub output_per_million: f64,
}

impl Default for Rates {
    fn default() -> Self {
        Self {
            input_per_million: 0.15,
            output_per_million: 0.60,
        }
    }
}

/// Token counts per pipeline stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    pub stages: BTreeMap<String, TokenUsage>,
    pub rates: Rates,
}

impl CostLedger {
    pub fn new(rates: Rates) -> Self {
        Self {
            stages: BTreeMap::new(),
            rates,
        }
    }

    pub fn add(&mut self, stage: &str, usage: TokenUsage) {
        let e = self.stages.entry(stage.to_string()).or_default();
        e.calls += usage.calls;
        e.input_tokens += usage.input_tokens;
        e.output_tokens += usage.output_tokens;
    }

    pub fn input_tokens(&self) -> u64 {
        self.stages.values().map(|u| u.input_tokens).sum()
    }

    pub fn output_tokens(&self) -> u64 {
        self.stages.values().map(|u| u.output_tokens).sum()
    }
}

pub fn cost_estimate(ledger: &CostLedger) -> f64 {
    ledger.input_tokens() as f64 / 1e6 * ledger.rates.input_per_million
        + ledger.output_tokens() as f64 / 1e6 * ledger.rates.output_per_million
}
