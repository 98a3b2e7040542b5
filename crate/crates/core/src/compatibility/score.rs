use std::cmp::Ordering;

use super::signals::{jaccard, subset_relation, ColumnSignals, TableSignals};
use super::CompatError;
use crate::corpus::TableId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeaderScore {
    pub ex: f64,
    pub sem: f64,
    pub name: f64,
}

/// Exact match of normalized names plus clamped cosine of header embeddings.
pub fn header_name_score(a: &ColumnSignals, b: &ColumnSignals) -> HeaderScore {
    let ex = if a.normalized_name == b.normalized_name { 1.0 } else { 0.0 };
    let sem = a.header_embedding.cosine(&b.header_embedding).max(0.0);
    HeaderScore {
        ex,
        sem,
        name: 0.5 * sem + 0.5 * ex,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnPairScore {
    pub jac: f64,
    pub ex: f64,
    pub sem: f64,
    pub name: f64,
    pub sub: bool,
    pub valid: bool,
    pub s: f64,
}

impl ColumnPairScore {
    /// Combines raw signals; `valid` requires a unique side and containment.
    pub fn combine(any_unique: bool, sub: bool, jac: f64, ex: f64, sem: f64) -> Self {
        let name = 0.5 * sem + 0.5 * ex;
        let valid = any_unique && sub;
        let s = if valid { 0.5 * jac + 0.5 * name } else { 0.0 };
        Self {
            jac,
            ex,
            sem,
            name,
            sub,
            valid,
            s,
        }
    }
}

/// Full signal breakdown for one cross-table column pair.
pub fn column_pair_score(a: &ColumnSignals, b: &ColumnSignals) -> Result<ColumnPairScore, CompatError> {
    if a.table_id == b.table_id {
        return Err(CompatError::SameTable {
            left: format!("{}.{}", a.table_id, a.name),
            right: format!("{}.{}", b.table_id, b.name),
        });
    }
    let header = header_name_score(a, b);
    Ok(ColumnPairScore::combine(
        a.values.unique || b.values.unique,
        subset_relation(&a.values, &b.values),
        jaccard(&a.values, &b.values),
        header.ex,
        header.sem,
    ))
}

/// `s(c, c')` for valid pairs, evaluated cheapest check first; `None` for
/// invalid pairs.
fn valid_pair_score(a: &ColumnSignals, b: &ColumnSignals) -> Option<f64> {
    if !(a.values.unique || b.values.unique) {
        return None;
    }
    if !subset_relation(&a.values, &b.values) {
        return None;
    }
    let jac = jaccard(&a.values, &b.values);
    let header = header_name_score(a, b);
    Some(ColumnPairScore::combine(true, true, jac, header.ex, header.sem).s)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinSide {
    pub table_id: TableId,
    pub column: String,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableJoin {
    pub cs: f64,
    /// Column of the first argument's table.
    pub left: JoinSide,
    /// Column of the second argument's table.
    pub right: JoinSide,
}

impl TableJoin {
    pub fn swapped(self) -> Self {
        Self {
            cs: self.cs,
            left: self.right,
            right: self.left,
        }
    }
}

/// Best valid column pair between two tables, or `None` when no pair is valid.
///
/// Evaluated with the lower table id on the left so the result is symmetric;
/// equal scores keep the lowest (left position, right position).
pub fn table_compatibility(a: &TableSignals, b: &TableSignals) -> Option<TableJoin> {
    if a.table_id == b.table_id {
        return None;
    }
    if a.table_id > b.table_id {
        return table_compatibility(b, a).map(TableJoin::swapped);
    }
    if !a.has_key_candidate() && !b.has_key_candidate() {
        return None;
    }
    let mut best: Option<(f64, &ColumnSignals, &ColumnSignals)> = None;
    for ca in &a.columns {
        for cb in &b.columns {
            let Some(s) = valid_pair_score(ca, cb) else { continue };
            let better = match best {
                None => true,
                Some((top, _, _)) => s.partial_cmp(&top) == Some(Ordering::Greater),
            };
            if better {
                best = Some((s, ca, cb));
            }
        }
    }
    best.filter(|(s, _, _)| *s > 0.0).map(|(cs, ca, cb)| TableJoin {
        cs,
        left: JoinSide {
            table_id: a.table_id.clone(),
            column: ca.name.clone(),
            position: ca.position,
        },
        right: JoinSide {
            table_id: b.table_id.clone(),
            column: cb.name.clone(),
            position: cb.position,
        },
    })
}
