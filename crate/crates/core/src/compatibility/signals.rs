use std::collections::HashSet;

use super::CompatError;
use crate::corpus::{Column, Table, TableId};
use crate::services::{Embedder, EmbeddingVector};

/// Distinct normalized non-NULL values of a column plus its key-likeness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueProfile {
    pub unique: bool,
    pub distinct: HashSet<String>,
}

impl ValueProfile {
    pub fn of(col: &Column) -> Self {
        let mut distinct = HashSet::new();
        let mut non_null = 0usize;
        for v in col.normalized_values() {
            non_null += 1;
            distinct.insert(v);
        }
        Self {
            unique: non_null > 0 && distinct.len() == non_null,
            distinct,
        }
    }

    /// Profile of literal values (already normalized); `None` entries are NULLs.
    pub fn from_values<'a>(values: impl IntoIterator<Item = Option<&'a str>>) -> Self {
        let mut distinct = HashSet::new();
        let mut non_null = 0usize;
        for v in values.into_iter().flatten() {
            non_null += 1;
            distinct.insert(crate::corpus::normalize_value(v));
        }
        Self {
            unique: non_null > 0 && distinct.len() == non_null,
            distinct,
        }
    }
}

/// 1 iff the non-NULL values are pairwise distinct; all-NULL columns are not unique.
pub fn column_uniqueness(col: &Column) -> bool {
    ValueProfile::of(col).unique
}

/// Containment in either direction. A side with no values never qualifies.
pub fn subset_relation(a: &ValueProfile, b: &ValueProfile) -> bool {
    if a.distinct.is_empty() || b.distinct.is_empty() {
        return false;
    }
    let (small, large) = if a.distinct.len() <= b.distinct.len() {
        (&a.distinct, &b.distinct)
    } else {
        (&b.distinct, &a.distinct)
    };
    small.iter().all(|v| large.contains(v))
}

pub fn jaccard(a: &ValueProfile, b: &ValueProfile) -> f64 {
    let (small, large) = if a.distinct.len() <= b.distinct.len() {
        (&a.distinct, &b.distinct)
    } else {
        (&b.distinct, &a.distinct)
    };
    let inter = small.iter().filter(|v| large.contains(*v)).count();
    let union = small.len() + large.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Header form for exact matching: trimmed, case-folded, `-` and spaces as `_`.
pub fn normalize_header(name: &str) -> String {
    name.trim()
        .to_lowercase()
        .chars()
        .map(|c| if c == '-' || c == ' ' { '_' } else { c })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSignals {
    pub table_id: TableId,
    pub name: String,
    pub position: usize,
    pub normalized_name: String,
    pub values: ValueProfile,
    pub header_embedding: EmbeddingVector,
}

impl ColumnSignals {
    pub fn compute(table_id: &TableId, col: &Column, embedder: &dyn Embedder) -> Result<Self, CompatError> {
        Ok(Self {
            table_id: table_id.clone(),
            name: col.name.clone(),
            position: col.position,
            normalized_name: normalize_header(&col.name),
            values: ValueProfile::of(col),
            header_embedding: embedder.embed(&col.header_text())?,
        })
    }

    pub fn unique(&self) -> bool {
        self.values.unique
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableSignals {
    pub table_id: TableId,
    pub columns: Vec<ColumnSignals>,
}

impl TableSignals {
    pub fn compute(table: &Table, embedder: &dyn Embedder) -> Result<Self, CompatError> {
        let columns = table
            .columns
            .iter()
            .map(|c| ColumnSignals::compute(&table.id, c, embedder))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            table_id: table.id.clone(),
            columns,
        })
    }

    /// Whether any column could take part in a valid pair.
    pub(crate) fn has_key_candidate(&self) -> bool {
        self.columns.iter().any(|c| c.values.unique)
    }
}
