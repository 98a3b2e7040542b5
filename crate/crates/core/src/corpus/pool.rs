use std::collections::{BTreeMap, HashSet};

use super::{Provenance, Table, TableCorpus};

/// Merges per-source table lists into one open-book corpus.
///
/// Sources are visited in sorted label order, tables in input order. The first
/// table to claim a name keeps it; every later claimant is renamed with the
/// lowest free `__k` suffix (k >= 2). The pooled name becomes the table id.
pub fn pool_corpora(corpora: Vec<(String, Vec<Table>)>) -> TableCorpus {
    let mut corpora = corpora;
    corpora.sort_by(|a, b| a.0.cmp(&b.0));

    let mut taken: HashSet<String> = HashSet::new();
    let mut tables = Vec::new();
    let mut provenance = BTreeMap::new();
    for (label, source_tables) in corpora {
        for mut table in source_tables {
            let original_name = table.name.clone();
            let mut name = original_name.clone();
            let mut k = 2;
            while taken.contains(&name) {
                name = format!("{original_name}__{k}");
                k += 1;
            }
            taken.insert(name.clone());
            table.rename(name.clone(), name);
            provenance.insert(
                table.id.clone(),
                Provenance {
                    source_label: label.clone(),
                    original_name,
                },
            );
            tables.push(table);
        }
    }
    TableCorpus::from_parts(tables, provenance)
}
