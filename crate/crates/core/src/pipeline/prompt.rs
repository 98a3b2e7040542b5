use super::{CandidateSet, PipelineError};
use crate::compatibility::CompatibilityCache;
use crate::indexing::EnrichmentStore;
use crate::services::GenerationRequest;

const SELECTION_TEMPLATE: &str = include_str!("selection_prompt.txt");

pub const SELECTION_MAX_TOKENS: u32 = 2048;

/// Substitutes `{query}`, `{tables_content}` and `{compatibility_analysis}` in
/// one left-to-right pass so inserted text is never re-scanned.
fn render(template: &str, query: &str, tables: &str, compat: &str) -> String {
    const SLOTS: [&str; 3] = ["{query}", "{tables_content}", "{compatibility_analysis}"];
    let mut out = String::with_capacity(template.len() + tables.len() + compat.len());
    let mut rest = template;
    loop {
        let next = SLOTS
            .iter()
            .enumerate()
            .filter_map(|(i, s)| rest.find(s).map(|at| (at, i)))
            .min();
        let Some((at, slot)) = next else {
            out.push_str(rest);
            return out;
        };
        out.push_str(&rest[..at]);
        out.push_str([query, tables, compat][slot]);
        rest = &rest[at + SLOTS[slot].len()..];
    }
}

/// Candidate `i` as the selector sees it: index line, name line, purpose
/// line (if any), then the Markdown snapshot body.
fn table_block(i: usize, markdown: &str, purpose: &str) -> String {
    let (name_line, body) = markdown.split_once('\n').unwrap_or((markdown, ""));
    let mut block = format!("Table {i}:\n{name_line}\n");
    if !purpose.is_empty() {
        block.push_str(&format!("Table purpose: {purpose}\n"));
    }
    block.push_str(body);
    block
}

pub fn build_selection_prompt(
    query: &str,
    candidates: &CandidateSet,
    store: &EnrichmentStore,
    cache: &CompatibilityCache,
) -> Result<GenerationRequest, PipelineError> {
    let mut blocks = Vec::with_capacity(candidates.len());
    for (i, c) in candidates.ranked.iter().enumerate() {
        let enriched = store
            .get(&c.table_id)
            .ok_or_else(|| PipelineError::MissingEnrichment(c.table_id.clone()))?;
        blocks.push(table_block(i, &enriched.description.markdown, &enriched.description.purpose));
    }

    let mut pairs = Vec::new();
    for (i, a) in candidates.ranked.iter().enumerate() {
        for (j, b) in candidates.ranked.iter().enumerate().skip(i + 1) {
            if let Some(p) = cache.get(&a.table_id, &b.table_id) {
                pairs.push(format!(
                    "Pair (Table {i} <-> Table {j}):\n  overall_compatibility: {:.2}\n  best_join_columns: \"{} <-> {}\"",
                    p.cs, p.first_column, p.second_column
                ));
            }
        }
    }

    let tables = format!("\n{}\n", blocks.join("\n\n"));
    let compat = if pairs.is_empty() {
        String::new()
    } else {
        format!("\n{}\n", pairs.join("\n"))
    };
    let prompt = render(SELECTION_TEMPLATE, query, &tables, &compat);
    Ok(GenerationRequest::new(prompt, SELECTION_MAX_TOKENS))
}
