//! Random fixtures and brute-force reference implementations shared by the
//! integration tests. Nothing here calls the library's scoring code.

#![allow(dead_code)]

use std::collections::BTreeSet;

use coret::corpus::{pool_corpora, Cell, Table, TableCorpus};
use coret::services::stub_embedding;
use rand::seq::SliceRandom;
use rand::Rng;

pub const HEADERS: &[&str] = &[
    "id", "ID", "user_id", "User ID", "user-id", "name", "city", "code", "ref", "value", "Value ", "museum_id",
    "country", "amount", "kind", "visitor_id",
];

const WORDS: &[&str] = &["alpha", "beta", "Gamma", " gamma ", "delta", "eps", "zeta", "eta", "theta", "iota"];

fn random_column<R: Rng>(rng: &mut R, rows: usize) -> Vec<Cell> {
    let null_rate = if rng.gen_bool(0.3) { rng.gen_range(0.0..0.4) } else { 0.0 };
    let kind = rng.gen_range(0..5);
    let offset = rng.gen_range(0..20);
    let span = rng.gen_range(1..=rows.max(1) * 2);
    let mut perm: Vec<usize> = (0..rows).collect();
    perm.shuffle(rng);
    (0..rows)
        .map(|r| {
            if rng.gen_bool(null_rate) {
                return None;
            }
            Some(match kind {
                // Unique integer keys.
                0 => (perm[r] + offset).to_string(),
                // Small integer domain, often a subset of some key column.
                1 => rng.gen_range(offset..offset + span).to_string(),
                2 => WORDS[rng.gen_range(0..WORDS.len())].to_string(),
                3 => format!("w{}", rng.gen_range(0..1000)),
                _ => format!("{}", rng.gen_range(0..4)),
            })
        })
        .collect()
}

pub fn random_table<R: Rng>(rng: &mut R, name: &str, max_cols: usize, max_rows: usize) -> Table {
    let cols = rng.gen_range(1..=max_cols);
    let rows = rng.gen_range(0..=max_rows);
    let mut headers: Vec<&str> = HEADERS.to_vec();
    headers.shuffle(rng);
    let columns = headers[..cols]
        .iter()
        .map(|h| (h.to_string(), random_column(rng, rows)))
        .collect();
    Table::from_columns(name, name, columns).unwrap()
}

pub fn random_corpus<R: Rng>(rng: &mut R, max_tables: usize, max_cols: usize, max_rows: usize) -> TableCorpus {
    let n = rng.gen_range(2..=max_tables);
    let tables = (0..n)
        .map(|i| random_table(rng, &format!("t{i}"), max_cols, max_rows))
        .collect();
    pool_corpora(vec![("synthetic".into(), tables)])
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

struct OracleColumn {
    name: String,
    header: String,
    values: BTreeSet<String>,
    unique: bool,
    embedding: Vec<f64>,
}

fn oracle_column(table: &Table, index: usize, dim: usize) -> OracleColumn {
    let col = &table.columns[index];
    let present: Vec<String> = col.values.iter().flatten().map(|v| v.trim().to_lowercase()).collect();
    let values: BTreeSet<String> = present.iter().cloned().collect();
    let header: String = col
        .name
        .trim()
        .to_lowercase()
        .replace(['-', ' '], "_");
    OracleColumn {
        name: col.name.clone(),
        header,
        unique: !present.is_empty() && values.len() == present.len(),
        values,
        embedding: stub_embedding(&format!("{}.{}", table.name, col.name), dim).as_slice().to_vec(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleJoin {
    pub cs: f64,
    /// Column of the table with the lower id.
    pub low_column: String,
    pub high_column: String,
}

/// Every cross-table column pair with its score, as `(s, i, j)`; `valid` is
/// reported separately so tests can check the gate.
pub fn all_pair_scores(a: &Table, b: &Table, dim: usize) -> Vec<(f64, bool, usize, usize)> {
    let ca: Vec<_> = (0..a.columns.len()).map(|i| oracle_column(a, i, dim)).collect();
    let cb: Vec<_> = (0..b.columns.len()).map(|j| oracle_column(b, j, dim)).collect();
    let mut out = Vec::new();
    for (i, x) in ca.iter().enumerate() {
        for (j, y) in cb.iter().enumerate() {
            let sub = !x.values.is_empty()
                && !y.values.is_empty()
                && (x.values.is_subset(&y.values) || y.values.is_subset(&x.values));
            let valid = (x.unique || y.unique) && sub;
            let inter = x.values.intersection(&y.values).count() as f64;
            let union = x.values.union(&y.values).count() as f64;
            let jac = if union == 0.0 { 0.0 } else { inter / union };
            let ex = if x.header == y.header { 1.0 } else { 0.0 };
            let sem = cosine(&x.embedding, &y.embedding).max(0.0);
            let name = 0.5 * sem + 0.5 * ex;
            let s = if valid { 0.5 * jac + 0.5 * name } else { 0.0 };
            out.push((s, valid, i, j));
        }
    }
    out
}

/// Best valid pair by brute force: highest score, then lowest positions.
pub fn oracle_join(a: &Table, b: &Table, dim: usize) -> Option<OracleJoin> {
    let (low, high) = if a.id <= b.id { (a, b) } else { (b, a) };
    let mut scored: Vec<_> = all_pair_scores(low, high, dim)
        .into_iter()
        .filter(|(s, valid, _, _)| *valid && *s > 0.0)
        .collect();
    scored.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.2, x.3).cmp(&(y.2, y.3))));
    scored.first().map(|&(cs, _, i, j)| OracleJoin {
        cs,
        low_column: low.columns[i].name.clone(),
        high_column: high.columns[j].name.clone(),
    })
}

pub fn recall(predicted: &[String], gold: &BTreeSet<String>) -> f64 {
    if gold.is_empty() {
        return 1.0;
    }
    gold.iter().filter(|g| predicted.contains(g)).count() as f64 / gold.len() as f64
}
