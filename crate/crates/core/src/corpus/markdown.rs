use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::Table;

pub const DEFAULT_SAMPLE_ROWS: usize = 5;
pub const DEFAULT_SEED: u64 = 42;

/// Draws `min(n, row_count)` distinct row indices uniformly without
/// replacement, returned ascending. The generator is seeded from the table id
/// and `seed`, so the result depends on nothing else.
pub fn sample_rows(table: &Table, n: usize, seed: u64) -> Vec<usize> {
    let amount = n.min(table.row_count);
    if amount == 0 {
        return Vec::new();
    }
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(table.id.as_str().as_bytes());
    let mut rng = ChaCha8Rng::from_seed(hasher.finalize().into());
    let mut picked = rand::seq::index::sample(&mut rng, table.row_count, amount).into_vec();
    picked.sort_unstable();
    picked
}

fn escape_cell(v: &str) -> String {
    v.replace('|', "\\|").replace(['\r', '\n'], " ")
}

fn pipe_row<'a>(cells: impl Iterator<Item = &'a str>) -> String {
    let parts: Vec<String> = cells.map(escape_cell).collect();
    format!("| {} |", parts.join(" | "))
}

/// Renders the Markdown snapshot: name line, content line, header, alignment
/// row and one row per sampled index. NULL renders as an empty cell.
pub fn serialize_markdown(table: &Table, sample: &[usize]) -> String {
    let mut lines = Vec::with_capacity(4 + sample.len());
    lines.push(format!("Table name: {}", table.name));
    lines.push("Example table content:".to_string());
    lines.push(pipe_row(table.columns.iter().map(|c| c.name.as_str())));
    lines.push(format!(
        "|{}|",
        table.columns.iter().map(|_| "-------:").collect::<Vec<_>>().join("|")
    ));
    for &i in sample {
        lines.push(pipe_row(table.columns.iter().map(|c| c.values[i].as_deref().unwrap_or(""))));
    }
    lines.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Cell;

    fn numbered(id: &str, rows: usize) -> Table {
        Table::from_columns(
            id,
            id,
            vec![("n".into(), (0..rows).map(|i| Some(i.to_string())).collect())],
        )
        .unwrap()
    }

    #[test]
    fn fewer_rows_than_n_returns_all() {
        assert_eq!(sample_rows(&numbered("t", 3), 5, 42), vec![0, 1, 2]);
    }

    #[test]
    fn empty_table_samples_nothing() {
        assert!(sample_rows(&numbered("t", 0), 5, 42).is_empty());
    }

    #[test]
    fn sampling_is_deterministic_and_sorted() {
        let t = numbered("big", 1000);
        let a = sample_rows(&t, 5, 42);
        let b = sample_rows(&t, 5, 42);
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(a.iter().all(|&i| i < 1000));
    }

    #[test]
    fn sampling_depends_on_table_id() {
        let a = sample_rows(&numbered("one", 1000), 5, 42);
        let b = sample_rows(&numbered("two", 1000), 5, 42);
        assert_ne!(a, b);
    }

    fn satscores() -> Table {
        let cols = ["cds", "rtype", "sname"];
        let rows: Vec<Vec<Cell>> = vec![
            vec![Some("1100170000000".into()), Some("D".into()), None],
            vec![Some("1100170109835".into()), Some("S".into()), Some("FAME Public Charter".into())],
        ];
        Table::from_rows("satscores", "satscores", cols.iter().map(|s| s.to_string()).collect(), rows).unwrap()
    }

    #[test]
    fn layout_matches_listing() {
        let md = serialize_markdown(&satscores(), &[0, 1]);
        let expected = "Table name: satscores\n\
                        Example table content:\n\
                        | cds | rtype | sname |\n\
                        |-------:|-------:|-------:|\n\
                        | 1100170000000 | D |  |\n\
                        | 1100170109835 | S | FAME Public Charter |";
        assert_eq!(md, expected);
    }

    #[test]
    fn zero_rows_gives_header_and_alignment_only() {
        let t = Table::from_columns("e", "e", vec![("a".into(), vec![]), ("b".into(), vec![])]).unwrap();
        let md = serialize_markdown(&t, &[]);
        assert_eq!(md.lines().count(), 4);
        assert!(md.ends_with("|-------:|-------:|"));
    }

    #[test]
    fn one_sampled_row_line_count() {
        let t = Table::from_columns(
            "two",
            "two",
            vec![("a".into(), vec![Some("1".into())]), ("b".into(), vec![Some("2".into())])],
        )
        .unwrap();
        let md = serialize_markdown(&t, &[0]);
        let from_content: Vec<_> = md
            .lines()
            .skip_while(|l| *l != "Example table content:")
            .filter(|l| !l.trim().is_empty())
            .collect();
        assert_eq!(from_content.len(), 4);
        assert_eq!(from_content.iter().filter(|l| l.starts_with('|')).count(), 3);
    }

    #[test]
    fn pipes_are_escaped() {
        let t = Table::from_columns("p", "p", vec![("a".into(), vec![Some("x|y".into())])]).unwrap();
        assert!(serialize_markdown(&t, &[0]).ends_with("| x\\|y |"));
    }
}
