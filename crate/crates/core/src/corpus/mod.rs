//! Table model, ingestion, open-book pooling and Markdown serialization.
//!
//! Tables are kept as string cells. A missing cell is `None` and is distinct
//! from the empty string. Comparison semantics (trim + case-fold) are applied
//! by [`normalize_value`] at the point of comparison; the stored cell keeps
//! its original spelling for display.

mod load;
mod markdown;
mod pool;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use load::{load_corpus_dir, load_tables, write_corpus_dir, ManifestEntry, SourceFormat, MANIFEST_FILE};
pub use markdown::{sample_rows, serialize_markdown, DEFAULT_SAMPLE_ROWS, DEFAULT_SEED};
pub use pool::pool_corpora;
pub(crate) use load::render_sqlite_value;

/// A single cell. `None` is SQL NULL.
pub type Cell = Option<String>;

/// Corpus-unique table identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TableId(pub String);

impl TableId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TableId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: expected {expected} fields, found {found}")]
    Arity {
        file: String,
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("{file}: malformed CSV: {message}")]
    Csv { file: String, message: String },
    #[error("table {table}: duplicate column name {column:?}")]
    DuplicateColumn { table: String, column: String },
    #[error("table {table}: column {column:?} has {found} values, expected {expected}")]
    RaggedColumn {
        table: String,
        column: String,
        expected: usize,
        found: usize,
    },
    #[error("{path}: sqlite error: {message}")]
    Sqlite { path: String, message: String },
    #[error("manifest {path}: {message}")]
    Manifest { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub table_name: String,
    pub name: String,
    pub position: usize,
    pub values: Vec<Cell>,
}

impl Column {
    /// Normalized non-NULL values, in row order.
    pub fn normalized_values(&self) -> impl Iterator<Item = String> + '_ {
        self.values.iter().flatten().map(|v| normalize_value(v))
    }

    /// Number of non-NULL cells.
    pub fn non_null_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// Text embedded as this column's header.
    pub fn header_text(&self) -> String {
        format!("{}.{}", self.table_name, self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub id: TableId,
    pub name: String,
    pub columns: Vec<Column>,
    pub row_count: usize,
}

impl Table {
    /// Builds a table from a header and row-major cells.
    pub fn from_rows(
        id: impl Into<String>,
        name: impl Into<String>,
        headers: Vec<String>,
        rows: Vec<Vec<Cell>>,
    ) -> Result<Self, CorpusError> {
        let name = name.into();
        let mut seen = HashSet::new();
        for h in &headers {
            if !seen.insert(h.as_str()) {
                return Err(CorpusError::DuplicateColumn {
                    table: name.clone(),
                    column: h.clone(),
                });
            }
        }
        let row_count = rows.len();
        let mut columns: Vec<Column> = headers
            .into_iter()
            .enumerate()
            .map(|(position, col)| Column {
                table_name: name.clone(),
                name: col,
                position,
                values: Vec::with_capacity(row_count),
            })
            .collect();
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != columns.len() {
                return Err(CorpusError::Arity {
                    file: name.clone(),
                    line: i as u64 + 2,
                    expected: columns.len(),
                    found: row.len(),
                });
            }
            for (col, cell) in columns.iter_mut().zip(row) {
                col.values.push(cell);
            }
        }
        Ok(Self {
            id: TableId::new(id),
            name,
            columns,
            row_count,
        })
    }

    /// Builds a table from column-major values.
    pub fn from_columns(
        id: impl Into<String>,
        name: impl Into<String>,
        columns: Vec<(String, Vec<Cell>)>,
    ) -> Result<Self, CorpusError> {
        let name = name.into();
        let row_count = columns.first().map_or(0, |(_, v)| v.len());
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(columns.len());
        for (position, (col, values)) in columns.into_iter().enumerate() {
            if !seen.insert(col.clone()) {
                return Err(CorpusError::DuplicateColumn { table: name, column: col });
            }
            if values.len() != row_count {
                return Err(CorpusError::RaggedColumn {
                    table: name,
                    column: col,
                    expected: row_count,
                    found: values.len(),
                });
            }
            out.push(Column {
                table_name: name.clone(),
                name: col,
                position,
                values,
            });
        }
        Ok(Self {
            id: TableId::new(id),
            name,
            columns: out,
            row_count,
        })
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Row `i` as a list of cells in column order.
    pub fn row(&self, i: usize) -> Vec<&Cell> {
        self.columns.iter().map(|c| &c.values[i]).collect()
    }

    /// Renames the table, keeping `Column::table_name` in sync.
    pub fn rename(&mut self, id: impl Into<String>, name: impl Into<String>) {
        self.id = TableId::new(id);
        self.name = name.into();
        for c in &mut self.columns {
            c.table_name = self.name.clone();
        }
    }
}

/// Where a pooled table came from. Audit only; never rendered into
/// retrieval-facing text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_label: String,
    pub original_name: String,
}

/// The pooled open-book corpus. Immutable after pooling.
#[derive(Debug, Clone, Default)]
pub struct TableCorpus {
    tables: Vec<Table>,
    by_id: BTreeMap<TableId, usize>,
    provenance: BTreeMap<TableId, Provenance>,
}

impl TableCorpus {
    pub(crate) fn from_parts(tables: Vec<Table>, provenance: BTreeMap<TableId, Provenance>) -> Self {
        let by_id = tables.iter().enumerate().map(|(i, t)| (t.id.clone(), i)).collect();
        Self {
            tables,
            by_id,
            provenance,
        }
    }

    pub fn tables(&self) -> &[Table] {
        &self.tables
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn get(&self, id: &TableId) -> Option<&Table> {
        self.by_id.get(id).map(|&i| &self.tables[i])
    }

    pub fn provenance(&self, id: &TableId) -> Option<&Provenance> {
        self.provenance.get(id)
    }

    pub fn provenance_map(&self) -> &BTreeMap<TableId, Provenance> {
        &self.provenance
    }
}

/// Comparison form of a cell value: surrounding whitespace trimmed, case-folded.
pub fn normalize_value(v: &str) -> String {
    v.trim().to_lowercase()
}
