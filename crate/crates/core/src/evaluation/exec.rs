use std::path::Path;
use std::sync::mpsc::{self, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use rusqlite::{Connection, OpenFlags};
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::render_sqlite_value;

pub const DEFAULT_EXEC_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecOutcome {
    Match,
    Mismatch,
    Error(String),
    Timeout,
}

impl ExecOutcome {
    pub fn is_match(&self) -> bool {
        matches!(self, ExecOutcome::Match)
    }
}

enum RunFailure {
    Sql(String),
    Timeout,
}

/// Rows rendered to strings, sorted. NULL is a lone NUL byte; cells are
/// separated by the unit separator so column order matters.
fn query_rows(conn: &Connection, sql: &str) -> Result<Vec<String>, rusqlite::Error> {
    let mut stmt = conn.prepare(sql)?;
    let width = stmt.column_count();
    let mut rows = stmt.query([])?;
    let mut out = Vec::new();
    while let Some(row) = rows.next()? {
        let mut cells = Vec::with_capacity(width);
        for i in 0..width {
            cells.push(render_sqlite_value(row.get_ref(i)?).unwrap_or_else(|| "\0".into()));
        }
        out.push(cells.join("\u{1f}"));
    }
    out.sort_unstable();
    Ok(out)
}

fn open_read_only(db: &Path) -> Result<Connection, EvalError> {
    Connection::open_with_flags(db, OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX).map_err(|e| {
        EvalError::Database {
            path: db.display().to_string(),
            message: e.to_string(),
        }
    })
}

/// Runs `sql` on a worker thread with its own read-only connection and
/// interrupts it once `timeout` has elapsed.
fn run_bounded(db: &Path, sql: &str, timeout: Duration) -> Result<Result<Vec<String>, RunFailure>, EvalError> {
    let conn = open_read_only(db)?;
    let interrupt = conn.get_interrupt_handle();
    let (tx, rx) = mpsc::channel();
    let sql = sql.to_string();
    let worker = thread::spawn(move || {
        let _ = tx.send(query_rows(&conn, &sql));
    });
    let outcome = match rx.recv_timeout(timeout) {
        Ok(r) => r.map_err(|e| RunFailure::Sql(e.to_string())),
        Err(RecvTimeoutError::Disconnected) => Err(RunFailure::Sql("worker exited".into())),
        Err(RecvTimeoutError::Timeout) => {
            // An interrupt between statement steps is a no-op, so keep asking.
            loop {
                interrupt.interrupt();
                match rx.recv_timeout(Duration::from_millis(10)) {
                    Err(RecvTimeoutError::Timeout) => continue,
                    _ => break,
                }
            }
            Err(RunFailure::Timeout)
        }
    };
    let _ = worker.join();
    Ok(outcome)
}

/// Compares result multisets of the predicted and gold statements. A failing
/// or timed-out gold statement is a dataset error.
pub fn execution_match(pred_sql: &str, gold_sql: &str, db: &Path, timeout: Duration) -> Result<ExecOutcome, EvalError> {
    let gold = match run_bounded(db, gold_sql, timeout)? {
        Ok(rows) => rows,
        Err(RunFailure::Sql(e)) => return Err(EvalError::GoldQuery(e)),
        Err(RunFailure::Timeout) => return Err(EvalError::GoldQuery("timed out".into())),
    };
    Ok(match run_bounded(db, pred_sql, timeout)? {
        Ok(rows) if rows == gold => ExecOutcome::Match,
        Ok(_) => ExecOutcome::Mismatch,
        Err(RunFailure::Sql(e)) => ExecOutcome::Error(e),
        Err(RunFailure::Timeout) => ExecOutcome::Timeout,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmReport {
    pub queries: usize,
    pub em: f64,
    pub single_table_queries: usize,
    pub em_single: f64,
    pub multi_table_queries: usize,
    pub em_multi: f64,
}

impl EmReport {
    pub fn render(&self) -> String {
        format!(
            "| EM | EM=1T | EM>=2T |\n|---:|---:|---:|\n| {:.1} | {:.1} | {:.1} |\n",
            self.em * 100.0,
            self.em_single * 100.0,
            self.em_multi * 100.0
        )
    }
}

/// EM overall and split by gold-table count (=1, >=2). Input pairs are
/// `(gold table count, outcome)`.
pub fn stratified_em(outcomes: &[(usize, ExecOutcome)]) -> EmReport {
    let rate = |filter: &dyn Fn(usize) -> bool| {
        let picked: Vec<_> = outcomes.iter().filter(|(n, _)| filter(*n)).collect();
        let hits = picked.iter().filter(|(_, o)| o.is_match()).count();
        let rate = if picked.is_empty() { 0.0 } else { hits as f64 / picked.len() as f64 };
        (picked.len(), rate)
    };
    let (queries, em) = rate(&|_| true);
    let (single_table_queries, em_single) = rate(&|n| n == 1);
    let (multi_table_queries, em_multi) = rate(&|n| n >= 2);
    EmReport {
        queries,
        em,
        single_table_queries,
        em_single,
        multi_table_queries,
        em_multi,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn db() -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.sqlite");
        let conn = Connection::open(&path).unwrap();
        conn.execute_batch(
            "CREATE TABLE t (id INTEGER, name TEXT);
             INSERT INTO t VALUES (1, 'a'), (2, 'b'), (3, NULL);",
        )
        .unwrap();
        (dir, path)
    }

    const T: Duration = Duration::from_secs(5);

    #[test]
    fn identical_and_permuted_results_match() {
        let (_d, p) = db();
        let g = "SELECT id, name FROM t";
        assert_eq!(execution_match(g, g, &p, T).unwrap(), ExecOutcome::Match);
        assert_eq!(
            execution_match("SELECT id, name FROM t ORDER BY id DESC", g, &p, T).unwrap(),
            ExecOutcome::Match
        );
    }

    #[test]
    fn column_order_and_multiplicity_matter() {
        let (_d, p) = db();
        let g = "SELECT id, name FROM t";
        assert_eq!(execution_match("SELECT name, id FROM t", g, &p, T).unwrap(), ExecOutcome::Mismatch);
        assert_eq!(
            execution_match("SELECT id, name FROM t UNION ALL SELECT 1, 'a'", g, &p, T).unwrap(),
            ExecOutcome::Mismatch
        );
        assert_eq!(
            execution_match("SELECT id, '' FROM t WHERE id = 3", "SELECT id, name FROM t WHERE id = 3", &p, T).unwrap(),
            ExecOutcome::Mismatch
        );
    }

    #[test]
    fn errors_and_read_only() {
        let (_d, p) = db();
        let g = "SELECT id FROM t";
        assert!(matches!(
            execution_match("SELECT broken FROM nowhere", g, &p, T).unwrap(),
            ExecOutcome::Error(_)
        ));
        assert!(matches!(execution_match("DELETE FROM t", g, &p, T).unwrap(), ExecOutcome::Error(_)));
        assert_eq!(execution_match(g, g, &p, T).unwrap(), ExecOutcome::Match);
        assert!(matches!(execution_match(g, "SELECT nope", &p, T), Err(EvalError::GoldQuery(_))));
    }

    #[test]
    fn runaway_prediction_times_out() {
        let (_d, p) = db();
        let forever = "WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM c) SELECT count(*) FROM c";
        let start = std::time::Instant::now();
        let out = execution_match(forever, "SELECT 1", &p, Duration::from_millis(200)).unwrap();
        assert_eq!(out, ExecOutcome::Timeout);
        assert!(start.elapsed() < Duration::from_secs(5));
    }

    #[test]
    fn strata() {
        let r = stratified_em(&[
            (1, ExecOutcome::Match),
            (1, ExecOutcome::Mismatch),
            (2, ExecOutcome::Match),
            (3, ExecOutcome::Timeout),
        ]);
        assert_eq!((r.queries, r.single_table_queries, r.multi_table_queries), (4, 2, 2));
        assert_eq!((r.em, r.em_single, r.em_multi), (0.5, 0.5, 0.5));
    }
}
