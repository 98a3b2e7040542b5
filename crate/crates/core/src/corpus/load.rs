use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};
use serde::{Deserialize, Serialize};

use super::{Cell, CorpusError, Provenance, Table, TableCorpus, TableId};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFormat {
    CsvDir,
    SqliteFile,
}

impl SourceFormat {
    /// Directories are CSV collections, anything else is treated as a database file.
    pub fn detect(path: &Path) -> Self {
        if path.is_dir() {
            SourceFormat::CsvDir
        } else {
            SourceFormat::SqliteFile
        }
    }
}

/// One line of a pooled corpus manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub table_name: String,
    pub source_label: String,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn load_tables(path: &Path, format: SourceFormat) -> Result<Vec<Table>, CorpusError> {
    if !path.exists() {
        return Err(CorpusError::Io {
            path: path.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
        });
    }
    match format {
        SourceFormat::CsvDir => load_csv_dir(path),
        SourceFormat::SqliteFile => load_sqlite(path),
    }
}

fn load_csv_dir(dir: &Path) -> Result<Vec<Table>, CorpusError> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext.eq_ignore_ascii_case("csv")))
        .collect();
    files.sort();
    files
        .iter()
        .map(|f| {
            let stem = f.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            load_csv_file(f, &stem)
        })
        .collect()
}

pub(crate) fn load_csv_file(path: &Path, name: &str) -> Result<Table, CorpusError> {
    let file_label = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CorpusError::Csv {
            file: file_label.clone(),
            message: e.to_string(),
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CorpusError::Csv {
            file: file_label.clone(),
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CorpusError::Csv {
            file: file_label.clone(),
            message: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(CorpusError::Arity {
                file: file_label,
                line: record.position().map_or(0, |p| p.line()),
                expected: headers.len(),
                found: record.len(),
            });
        }
        rows.push(
            record
                .iter()
                .map(|v| if v.is_empty() { None } else { Some(v.to_string()) })
                .collect::<Vec<Cell>>(),
        );
    }
    Table::from_rows(name, name, headers, rows)
}

fn load_sqlite(path: &Path) -> Result<Vec<Table>, CorpusError> {
    let label = path.display().to_string();
    let sql_err = |e: rusqlite::Error| CorpusError::Sqlite {
        path: label.clone(),
        message: e.to_string(),
    };
    let conn = Connection::open_with_flags(path, OpenFlags::SQLITE_OPEN_READ_ONLY).map_err(sql_err)?;
    let names: Vec<String> = {
        let mut stmt = conn
            .prepare("SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY name")
            .map_err(sql_err)?;
        let rows = stmt.query_map([], |r| r.get::<_, String>(0)).map_err(sql_err)?;
        rows.collect::<Result<_, _>>().map_err(sql_err)?
    };
    let mut tables = Vec::with_capacity(names.len());
    for name in names {
        let quoted = format!("\"{}\"", name.replace('"', "\"\""));
        let mut stmt = conn.prepare(&format!("SELECT * FROM {quoted}")).map_err(sql_err)?;
        let headers: Vec<String> = stmt.column_names().into_iter().map(str::to_string).collect();
        let width = headers.len();
        let mut rows = Vec::new();
        let mut cursor = stmt.query([]).map_err(sql_err)?;
        while let Some(row) = cursor.next().map_err(sql_err)? {
            let mut cells = Vec::with_capacity(width);
            for i in 0..width {
                cells.push(render_sqlite_value(row.get_ref(i).map_err(sql_err)?));
            }
            rows.push(cells);
        }
        tables.push(Table::from_rows(name.clone(), name, headers, rows)?);
    }
    Ok(tables)
}

/// String form of an SQLite value; shared with the execution harness.
pub(crate) fn render_sqlite_value(v: ValueRef<'_>) -> Cell {
    match v {
        ValueRef::Null => None,
        ValueRef::Integer(i) => Some(i.to_string()),
        ValueRef::Real(f) => Some(f.to_string()),
        ValueRef::Text(t) => Some(String::from_utf8_lossy(t).into_owned()),
        ValueRef::Blob(b) => Some(hex::encode(b)),
    }
}

fn file_stem_for(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

/// Writes the pooled corpus as one CSV per table plus [`MANIFEST_FILE`].
pub fn write_corpus_dir(corpus: &TableCorpus, dir: &Path) -> Result<Vec<ManifestEntry>, CorpusError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut used = HashSet::new();
    let mut manifest = Vec::with_capacity(corpus.len());
    for table in corpus.tables() {
        let stem = file_stem_for(&table.name);
        let mut file = format!("{stem}.csv");
        let mut k = 2;
        while !used.insert(file.to_lowercase()) {
            file = format!("{stem}_{k}.csv");
            k += 1;
        }
        let path = dir.join(&file);
        let mut w = csv::Writer::from_path(&path).map_err(|e| CorpusError::Csv {
            file: path.display().to_string(),
            message: e.to_string(),
        })?;
        let csv_err = |e: csv::Error| CorpusError::Csv {
            file: path.display().to_string(),
            message: e.to_string(),
        };
        w.write_record(table.column_names()).map_err(csv_err)?;
        for i in 0..table.row_count {
            w.write_record(table.row(i).into_iter().map(|c| c.as_deref().unwrap_or("")))
                .map_err(csv_err)?;
        }
        w.flush().map_err(io_err(&path))?;
        let source_label = corpus
            .provenance(&table.id)
            .map(|p| p.source_label.clone())
            .unwrap_or_default();
        manifest.push(ManifestEntry {
            file,
            table_name: table.name.clone(),
            source_label,
        });
    }
    let manifest_path = dir.join(MANIFEST_FILE);
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, body + "\n").map_err(io_err(&manifest_path))?;
    Ok(manifest)
}

/// Loads a pooled corpus written by [`write_corpus_dir`].
pub fn load_corpus_dir(dir: &Path) -> Result<TableCorpus, CorpusError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let body = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let entries: Vec<ManifestEntry> = serde_json::from_str(&body).map_err(|e| CorpusError::Manifest {
        path: manifest_path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut tables = Vec::with_capacity(entries.len());
    let mut provenance = BTreeMap::new();
    for entry in entries {
        let id = TableId::new(entry.table_name.clone());
        if provenance.contains_key(&id) {
            return Err(CorpusError::Manifest {
                path: manifest_path.display().to_string(),
                message: format!("duplicate table name {:?}", entry.table_name),
            });
        }
        let table = load_csv_file(&dir.join(&entry.file), &entry.table_name)?;
        provenance.insert(
            id,
            Provenance {
                source_label: entry.source_label,
                original_name: entry.table_name,
            },
        );
        tables.push(table);
    }
    Ok(TableCorpus::from_parts(tables, provenance))
}
