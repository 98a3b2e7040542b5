use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::gold::GoldQuery;
use super::EvalError;
use crate::corpus::TableId;
use crate::pipeline::QueryRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub perfect_recall: bool,
}

/// Set-based P/R/F1 and the perfect-recall indicator `G ⊆ S`.
pub fn selection_metrics(predicted: &[TableId], gold: &[TableId]) -> Result<SelectionMetrics, EvalError> {
    let s: BTreeSet<&TableId> = predicted.iter().collect();
    let g: BTreeSet<&TableId> = gold.iter().collect();
    if g.is_empty() {
        return Err(EvalError::EmptyGold);
    }
    let hits = s.intersection(&g).count() as f64;
    let precision = if s.is_empty() { 0.0 } else { hits / s.len() as f64 };
    let recall = hits / g.len() as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(SelectionMetrics {
        precision,
        recall,
        f1,
        perfect_recall: g.is_subset(&s),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub query_id: String,
    pub gold: Vec<TableId>,
    pub predicted: Vec<TableId>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub perfect_recall: bool,
}

impl EvalRecord {
    pub fn new(query_id: impl Into<String>, predicted: Vec<TableId>, gold: Vec<TableId>) -> Result<Self, EvalError> {
        let m = selection_metrics(&predicted, &gold)?;
        Ok(Self {
            query_id: query_id.into(),
            gold,
            predicted,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            perfect_recall: m.perfect_recall,
        })
    }
}

/// Macro averages. Rates are fractions; `render` shows percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub method: String,
    pub queries: usize,
    pub avg_tables: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub perfect_recall: f64,
}

impl AggregateReport {
    pub fn header() -> &'static str {
        "| Method | Avg #tab. | P | R | F1 | PR |\n|---|---:|---:|---:|---:|---:|\n"
    }

    pub fn row(&self) -> String {
        format!(
            "| {} | {:.1} | {:.1} | {:.1} | {:.1} | {:.1} |\n",
            self.method,
            self.avg_tables,
            self.precision * 100.0,
            self.recall * 100.0,
            self.f1 * 100.0,
            self.perfect_recall * 100.0
        )
    }

    pub fn render(&self) -> String {
        format!("{}{}", Self::header(), self.row())
    }
}

pub fn aggregate_metrics(method: &str, records: &[EvalRecord]) -> Result<AggregateReport, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = records.len() as f64;
    let mean = |f: &dyn Fn(&EvalRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
    Ok(AggregateReport {
        method: method.to_string(),
        queries: records.len(),
        avg_tables: mean(&|r| r.predicted.iter().collect::<BTreeSet<_>>().len() as f64),
        precision: mean(&|r| r.precision),
        recall: mean(&|r| r.recall),
        f1: mean(&|r| r.f1),
        perfect_recall: mean(&|r| if r.perfect_recall { 1.0 } else { 0.0 }),
    })
}

/// Scores predicted `final` sets against gold, in gold order. Gold queries
/// without tables are skipped; a gold query without a prediction is an error.
pub fn evaluate_predictions(gold: &[GoldQuery], predictions: &[QueryRecord]) -> Result<Vec<EvalRecord>, EvalError> {
    let by_id: BTreeMap<&str, &QueryRecord> = predictions.iter().map(|p| (p.query_id.as_str(), p)).collect();
    let mut out = Vec::new();
    for g in gold {
        if g.gold_tables.is_empty() {
            log::warn!("query {} has no gold tables; skipped", g.query_id);
            continue;
        }
        let p = by_id
            .get(g.query_id.as_str())
            .ok_or_else(|| EvalError::MissingPrediction(g.query_id.clone()))?;
        out.push(EvalRecord::new(&g.query_id, p.final_tables.clone(), g.gold_table_ids())?);
    }
    Ok(out)
}
