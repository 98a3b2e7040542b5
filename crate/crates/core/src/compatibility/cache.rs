use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::score::table_compatibility;
use super::signals::TableSignals;
use super::CompatError;
use crate::corpus::{TableCorpus, TableId};
use crate::services::Embedder;

pub const CACHE_VERSION: u32 = 1;

/// Build settings recorded alongside the scores.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheConfig {
    pub header_template: String,
    pub normalization: String,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            header_template: "<table_name>.<column_name>".into(),
            normalization: "trim+lowercase/v1".into(),
        }
    }
}

/// Stored form: `join` holds `"<tableA>.<col>"` and `"<tableB>.<col>"` with
/// tableA the lower id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub cs: f64,
    pub join: [String; 2],
}

/// Lookup result oriented to the caller's argument order.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCompat {
    pub cs: f64,
    pub first_column: String,
    pub second_column: String,
}

/// Symmetric table-pair scores. Pairs with no valid join are absent and read
/// back as `cs = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityCache {
    pub backend_id: String,
    pub config: CacheConfig,
    pairs: BTreeMap<String, CacheEntry>,
    pub version: u32,
}

fn ordered<'a>(a: &'a TableId, b: &'a TableId) -> (&'a TableId, &'a TableId, bool) {
    if a <= b {
        (a, b, false)
    } else {
        (b, a, true)
    }
}

impl CompatibilityCache {
    pub fn new(backend_id: impl Into<String>) -> Self {
        Self {
            backend_id: backend_id.into(),
            config: CacheConfig::default(),
            pairs: BTreeMap::new(),
            version: CACHE_VERSION,
        }
    }

    pub fn pair_key(a: &TableId, b: &TableId) -> String {
        let (lo, hi, _) = ordered(a, b);
        format!("{lo}|{hi}")
    }

    /// Adds or replaces a pair. Non-positive scores are not stored.
    pub fn insert(&mut self, a: &TableId, a_column: &str, b: &TableId, b_column: &str, cs: f64) {
        let key = Self::pair_key(a, b);
        if cs <= 0.0 || a == b {
            self.pairs.remove(&key);
            return;
        }
        let join = if a <= b {
            [format!("{a}.{a_column}"), format!("{b}.{b_column}")]
        } else {
            [format!("{b}.{b_column}"), format!("{a}.{a_column}")]
        };
        self.pairs.insert(key, CacheEntry { cs, join });
    }

    pub fn get(&self, a: &TableId, b: &TableId) -> Option<PairCompat> {
        let (lo, hi, flipped) = ordered(a, b);
        let entry = self.pairs.get(&Self::pair_key(a, b))?;
        let lo_col = entry.join[0].strip_prefix(&format!("{lo}.")).unwrap_or(&entry.join[0]);
        let hi_col = entry.join[1].strip_prefix(&format!("{hi}.")).unwrap_or(&entry.join[1]);
        let (first, second) = if flipped { (hi_col, lo_col) } else { (lo_col, hi_col) };
        Some(PairCompat {
            cs: entry.cs,
            first_column: first.to_string(),
            second_column: second.to_string(),
        })
    }

    pub fn cs(&self, a: &TableId, b: &TableId) -> f64 {
        self.pairs.get(&Self::pair_key(a, b)).map_or(0.0, |e| e.cs)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&String, &CacheEntry)> {
        self.pairs.iter()
    }

    /// Canonical JSON: keys sorted, pairs ordered by key.
    pub fn to_canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("cache serializes");
        serde_json::to_string_pretty(&value).expect("cache serializes") + "\n"
    }

    pub fn save(&self, path: &Path) -> Result<(), CompatError> {
        fs::write(path, self.to_canonical_json()).map_err(|e| CompatError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path, expected_backend: Option<&str>) -> Result<Self, CompatError> {
        let label = path.display().to_string();
        let body = fs::read_to_string(path).map_err(|e| CompatError::Io {
            path: label.clone(),
            message: e.to_string(),
        })?;
        let cache: Self = serde_json::from_str(&body).map_err(|e| CompatError::Format {
            path: label.clone(),
            message: e.to_string(),
        })?;
        if cache.version != CACHE_VERSION {
            return Err(CompatError::Format {
                path: label,
                message: format!("cache version {}", cache.version),
            });
        }
        if let Some(expected) = expected_backend {
            if cache.backend_id != expected {
                return Err(CompatError::BackendMismatch {
                    expected: expected.to_string(),
                    found: cache.backend_id,
                });
            }
        }
        if let Some((key, _)) = cache.pairs.iter().find(|(_, e)| !(e.cs > 0.0 && e.cs <= 1.0)) {
            return Err(CompatError::Format {
                path: label,
                message: format!("pair {key} has cs outside (0, 1]"),
            });
        }
        Ok(cache)
    }
}

/// Scores every unordered table pair from precomputed signals.
pub fn build_cache_from_signals(signals: &[TableSignals], backend_id: &str) -> CompatibilityCache {
    let pairs: Vec<(usize, usize)> = (0..signals.len())
        .flat_map(|i| (i + 1..signals.len()).map(move |j| (i, j)))
        .collect();
    let joins: Vec<_> = pairs
        .par_iter()
        .filter_map(|&(i, j)| table_compatibility(&signals[i], &signals[j]))
        .collect();
    let mut cache = CompatibilityCache::new(backend_id);
    for join in joins {
        cache.insert(
            &join.left.table_id,
            &join.left.column,
            &join.right.table_id,
            &join.right.column,
            join.cs,
        );
    }
    cache
}

/// Computes column signals for the whole corpus and scores all table pairs.
pub fn build_cache(corpus: &TableCorpus, embedder: &dyn Embedder) -> Result<CompatibilityCache, CompatError> {
    let signals = corpus
        .tables()
        .par_iter()
        .map(|t| TableSignals::compute(t, embedder))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(build_cache_from_signals(&signals, &embedder.backend_id()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{pool_corpora, Table};
    use crate::services::StubEmbedder;

    fn col(name: &str, vals: &[&str]) -> (String, Vec<Option<String>>) {
        (name.to_string(), vals.iter().map(|v| Some(v.to_string())).collect())
    }

    fn corpus() -> TableCorpus {
        let museum = Table::from_columns(
            "museum",
            "museum",
            vec![col("museum_id", &["1", "2", "3", "4"]), col("name", &["a", "b", "c", "d"])],
        )
        .unwrap();
        let visit = Table::from_columns(
            "visit",
            "visit",
            vec![col("museum_id", &["1", "2", "2", "3"]), col("visitor_id", &["7", "8", "9", "7"])],
        )
        .unwrap();
        let visitor = Table::from_columns(
            "visitor",
            "visitor",
            vec![col("id", &["7", "8", "9"]), col("age", &["30", "30", "41"])],
        )
        .unwrap();
        let tax = Table::from_columns("tax", "tax", vec![col("rate", &["0.1", "0.1"])]).unwrap();
        pool_corpora(vec![("museums".into(), vec![museum, visit, visitor, tax])])
    }

    #[test]
    fn finds_planted_joins_and_bounds_pair_count() {
        let cache = build_cache(&corpus(), &StubEmbedder::new(64)).unwrap();
        assert!(cache.len() <= 6);
        let mv = cache.get(&"museum".into(), &"visit".into()).unwrap();
        assert_eq!((mv.first_column.as_str(), mv.second_column.as_str()), ("museum_id", "museum_id"));
        let vv = cache.get(&"visitor".into(), &"visit".into()).unwrap();
        assert_eq!((vv.first_column.as_str(), vv.second_column.as_str()), ("id", "visitor_id"));
        assert_eq!(cache.cs(&"tax".into(), &"museum".into()), 0.0);
        assert!(cache.get(&"tax".into(), &"visit".into()).is_none());
    }

    #[test]
    fn single_table_corpus_has_empty_cache() {
        let t = Table::from_columns("t", "t", vec![col("id", &["1", "2"])]).unwrap();
        let c = pool_corpora(vec![("s".into(), vec![t])]);
        assert!(build_cache(&c, &StubEmbedder::new(16)).unwrap().is_empty());
    }

    #[test]
    fn rebuild_is_byte_identical_and_round_trips() {
        let e = StubEmbedder::new(64);
        let a = build_cache(&corpus(), &e).unwrap();
        let b = build_cache(&corpus(), &e).unwrap();
        assert_eq!(a.to_canonical_json(), b.to_canonical_json());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.json");
        a.save(&path).unwrap();
        let back = CompatibilityCache::load(&path, Some(&e.backend_id())).unwrap();
        assert_eq!(back, a);
        assert!(matches!(
            CompatibilityCache::load(&path, Some("other")),
            Err(CompatError::BackendMismatch { .. })
        ));
    }

    #[test]
    fn file_layout() {
        let mut cache = CompatibilityCache::new("stub");
        cache.insert(&"b".into(), "x", &"a".into(), "y", 0.5);
        let json: serde_json::Value = serde_json::from_str(&cache.to_canonical_json()).unwrap();
        assert_eq!(json["pairs"]["a|b"]["cs"], 0.5);
        assert_eq!(json["pairs"]["a|b"]["join"], serde_json::json!(["a.y", "b.x"]));
        assert_eq!(json["version"], 1);
        assert_eq!(json["backend_id"], "stub");
        let keys: Vec<_> = json.as_object().unwrap().keys().cloned().collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn lookup_is_oriented_to_arguments() {
        let mut cache = CompatibilityCache::new("stub");
        cache.insert(&"b".into(), "x", &"a".into(), "y", 0.5);
        let ab = cache.get(&"a".into(), &"b".into()).unwrap();
        assert_eq!((ab.first_column.as_str(), ab.second_column.as_str()), ("y", "x"));
        let ba = cache.get(&"b".into(), &"a".into()).unwrap();
        assert_eq!((ba.first_column.as_str(), ba.second_column.as_str()), ("x", "y"));
    }

    #[test]
    fn zero_scores_are_not_stored() {
        let mut cache = CompatibilityCache::new("stub");
        cache.insert(&"a".into(), "x", &"b".into(), "y", 0.0);
        assert!(cache.is_empty());
    }
}
