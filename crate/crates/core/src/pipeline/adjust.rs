use std::collections::BTreeSet;

use super::CandidateSet;
use crate::compatibility::CompatibilityCache;
use crate::corpus::TableId;

/// Restored tables `T_comp`, in candidate rank order.
///
/// One pass over the original selection: each selected table nominates its
/// most compatible unselected candidate, kept when `cs >= tau` and `cs > 0`.
/// Ties prefer higher `rs`, then lower table id.
pub fn adjust(selected: &[TableId], candidates: &CandidateSet, cache: &CompatibilityCache, tau: f64) -> Vec<TableId> {
    let chosen: BTreeSet<&TableId> = selected.iter().collect();
    let unchosen: Vec<_> = candidates.ranked.iter().filter(|c| !chosen.contains(&c.table_id)).collect();
    let mut restored = BTreeSet::new();
    for t in &chosen {
        let best = unchosen
            .iter()
            .map(|c| (cache.cs(t, &c.table_id), *c))
            .max_by(|(cs_a, a), (cs_b, b)| {
                cs_a.total_cmp(cs_b)
                    .then(a.rs.total_cmp(&b.rs))
                    .then_with(|| b.table_id.cmp(&a.table_id))
            });
        if let Some((cs, c)) = best {
            if cs > 0.0 && cs >= tau {
                restored.insert(&c.table_id);
            }
        }
    }
    candidates
        .ranked
        .iter()
        .filter(|c| restored.contains(&c.table_id))
        .map(|c| c.table_id.clone())
        .collect()
}
