use std::collections::BTreeSet;

use serde_json::Value;

use super::CandidateSet;
use crate::corpus::TableId;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SelectionError {
    #[error("no JSON object in response")]
    NoJson,
    #[error("invalid JSON: {0}")]
    InvalidJson(String),
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("malformed group: {0}")]
    MalformedGroup(String),
    #[error("group index {0} appears more than once")]
    DuplicateGroup(i64),
    #[error("selected group {0} is not among the formed groups")]
    UnknownGroup(i64),
    #[error("table index {index} is outside 0..{k}")]
    IndexOutOfRange { index: i64, k: usize },
    #[error("selected group has no tables")]
    EmptySelection,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub group_index: i64,
    pub table_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSelection {
    pub groups: Vec<Group>,
    pub selected_group_index: i64,
    /// Tables of the selected group, in candidate rank order.
    pub selected: Vec<TableId>,
}

/// Byte ranges of balanced top-level `{...}` spans, skipping braces inside
/// string literals.
fn object_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let bytes = text.as_bytes();
    let mut start = None;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate() {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' if depth > 0 => in_string = true,
            b'{' => {
                if depth == 0 {
                    start = Some(i);
                }
                depth += 1;
            }
            b'}' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    spans.push((start.take().unwrap_or(0), i + 1));
                }
            }
            _ => {}
        }
    }
    spans
}

/// First balanced object in `text` that parses as JSON. Code fences and
/// surrounding prose are ignored.
pub fn extract_json_object(text: &str) -> Result<Value, SelectionError> {
    let spans = object_spans(text);
    if spans.is_empty() {
        return Err(SelectionError::NoJson);
    }
    let mut first_err = None;
    for (s, e) in spans {
        match serde_json::from_str::<Value>(&text[s..e]) {
            Ok(v) if v.is_object() => return Ok(v),
            Ok(_) => {}
            Err(err) => {
                first_err.get_or_insert_with(|| err.to_string());
            }
        }
    }
    Err(SelectionError::InvalidJson(first_err.unwrap_or_else(|| "not an object".into())))
}

fn lookup<'a>(root: &'a Value, section: &str, field: &'static str) -> Result<&'a Value, SelectionError> {
    root.get(section)
        .and_then(|s| s.get(field))
        .or_else(|| root.get(field))
        .ok_or(SelectionError::MissingField(field))
}

fn parse_group(v: &Value, k: usize) -> Result<Group, SelectionError> {
    let group_index = v
        .get("group_index")
        .and_then(Value::as_i64)
        .ok_or_else(|| SelectionError::MalformedGroup(format!("bad group_index in {v}")))?;
    let raw = v
        .get("table_indices")
        .and_then(Value::as_array)
        .ok_or_else(|| SelectionError::MalformedGroup(format!("group {group_index} lacks table_indices")))?;
    let mut seen = BTreeSet::new();
    let mut table_indices = Vec::with_capacity(raw.len());
    for t in raw {
        let index = t.as_i64()
            .ok_or_else(|| SelectionError::MalformedGroup(format!("group {group_index} has index {t}")))?;
        if index < 0 || index as usize >= k {
            return Err(SelectionError::IndexOutOfRange { index, k });
        }
        if seen.insert(index as usize) {
            table_indices.push(index as usize);
        }
    }
    Ok(Group {
        group_index,
        table_indices,
    })
}

/// Validates a selector response against the candidate list. Any violation is
/// an error; the caller decides whether to fall back. With `strict`, the whole
/// response must be one JSON object.
pub fn parse_selection(text: &str, candidates: &CandidateSet, strict: bool) -> Result<ParsedSelection, SelectionError> {
    let root = if strict {
        match serde_json::from_str::<Value>(text.trim()) {
            Ok(v) if v.is_object() => v,
            Ok(_) => return Err(SelectionError::NoJson),
            Err(e) => return Err(SelectionError::InvalidJson(e.to_string())),
        }
    } else {
        extract_json_object(text)?
    };
    let k = candidates.len();
    let groups = lookup(&root, "group_formation", "groups_formed")?
        .as_array()
        .ok_or_else(|| SelectionError::MalformedGroup("groups_formed is not an array".into()))?
        .iter()
        .map(|g| parse_group(g, k))
        .collect::<Result<Vec<_>, _>>()?;

    let mut ids = BTreeSet::new();
    for g in &groups {
        if !ids.insert(g.group_index) {
            return Err(SelectionError::DuplicateGroup(g.group_index));
        }
    }

    let selected_value = lookup(&root, "group_selection", "selected_group_index")?;
    let selected_group_index = selected_value.as_i64()
        .ok_or_else(|| SelectionError::MalformedGroup(format!("selected_group_index is {selected_value}")))?;
    let group = groups
        .iter()
        .find(|g| g.group_index == selected_group_index)
        .ok_or(SelectionError::UnknownGroup(selected_group_index))?;
    if group.table_indices.is_empty() {
        return Err(SelectionError::EmptySelection);
    }
    let mut positions = group.table_indices.clone();
    positions.sort_unstable();
    let selected = positions
        .into_iter()
        .map(|i| candidates.ranked[i].table_id.clone())
        .collect();
    Ok(ParsedSelection {
        groups,
        selected_group_index,
        selected,
    })
}
