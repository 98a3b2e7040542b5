use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::cache::CompatibilityCache;
use super::CompatError;
use crate::corpus::{TableCorpus, TableId};

pub const DEFAULT_JOIN_THRESHOLD: f64 = 0.5;

/// One annotated table pair. `gold_columns`, when present, is
/// `[column of table_a, column of table_b]`; a `"table."` prefix is accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldJoin {
    pub table_a: String,
    pub table_b: String,
    pub joinable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_columns: Option<[String; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatEvalReport {
    pub pairs: usize,
    pub threshold: f64,
    pub joinability_accuracy: f64,
    /// Gold-joinable pairs that carry gold columns.
    pub column_pairs: usize,
    pub column_pair_accuracy: f64,
    pub avg_abs_diff: f64,
}

impl CompatEvalReport {
    pub fn render(&self) -> String {
        format!(
            "| Join. Acc. | Col.-Pair Acc. | Avg |s-g| |\n|---:|---:|---:|\n| {:.1}% | {:.1}% | {:.3} |\n",
            self.joinability_accuracy * 100.0,
            self.column_pair_accuracy * 100.0,
            self.avg_abs_diff
        )
    }
}

fn strip_table<'a>(table: &str, column: &'a str) -> &'a str {
    column.strip_prefix(table).and_then(|c| c.strip_prefix('.')).unwrap_or(column)
}

/// Joinability accuracy at `cs > threshold`, column-pair accuracy over
/// gold-joinable pairs (orderless), and mean `|cs - g|` with missing pairs
/// read as `cs = 0`.
pub fn evaluate_cache(
    cache: &CompatibilityCache,
    gold: &[GoldJoin],
    corpus: &TableCorpus,
    threshold: f64,
) -> Result<CompatEvalReport, CompatError> {
    let mut correct = 0usize;
    let mut col_total = 0usize;
    let mut col_correct = 0usize;
    let mut abs_diff = 0.0;
    for g in gold {
        let a = TableId::new(g.table_a.clone());
        let b = TableId::new(g.table_b.clone());
        let ta = corpus.get(&a).ok_or_else(|| CompatError::unknown_table(&a))?;
        let tb = corpus.get(&b).ok_or_else(|| CompatError::unknown_table(&b))?;
        let found = cache.get(&a, &b);
        let cs = found.as_ref().map_or(0.0, |p| p.cs);
        let label = if g.joinable { 1.0 } else { 0.0 };
        if (cs > threshold) == g.joinable {
            correct += 1;
        }
        abs_diff += (cs - label).abs();

        if let Some([ca, cb]) = &g.gold_columns {
            let ca = strip_table(&g.table_a, ca);
            let cb = strip_table(&g.table_b, cb);
            for (t, c) in [(ta, ca), (tb, cb)] {
                if t.column(c).is_none() {
                    return Err(CompatError::UnknownColumn {
                        table: t.name.clone(),
                        column: c.to_string(),
                    });
                }
            }
            if g.joinable {
                col_total += 1;
                let expected: BTreeSet<(&str, &str)> = [(a.as_str(), ca), (b.as_str(), cb)].into();
                if let Some(p) = &found {
                    let predicted: BTreeSet<(&str, &str)> =
                        [(a.as_str(), p.first_column.as_str()), (b.as_str(), p.second_column.as_str())].into();
                    if predicted == expected {
                        col_correct += 1;
                    }
                }
            }
        }
    }
    let n = gold.len();
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Ok(CompatEvalReport {
        pairs: n,
        threshold,
        joinability_accuracy: ratio(correct, n),
        column_pairs: col_total,
        column_pair_accuracy: ratio(col_correct, col_total),
        avg_abs_diff: if n == 0 { 0.0 } else { abs_diff / n as f64 },
    })
}
