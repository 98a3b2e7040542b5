mod support;

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Duration;

use coret::compatibility::{
    build_cache, column_pair_score, table_compatibility, ColumnPairScore, CompatibilityCache, TableSignals,
};
use coret::corpus::{pool_corpora, sample_rows, serialize_markdown, Table, TableId};
use coret::evaluation::{execution_match, selection_metrics, ExecOutcome};
use coret::indexing::{encode_table_text, enrich_corpus, DenseIndex, EnrichmentStore};
use coret::pipeline::{Pipeline, PipelineConfig};
use coret::services::{
    stub_embedding, Embedder, EmbeddingVector, GenerationResponse, ScriptedGenerator, StubEmbedder, TokenLedger,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use support::{cosine, random_corpus, random_table, recall};

const DIM: usize = 32;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn id_set(ids: &[&str]) -> Vec<TableId> {
    ids.iter().map(|s| TableId::new(*s)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn markdown_keeps_columns_and_row_budget(seed in any::<u64>()) {
        let t = random_table(&mut rng(seed), "t", 8, 12);
        let sample = sample_rows(&t, 5, 42);
        prop_assert_eq!(sample.len(), t.row_count.min(5));
        prop_assert_eq!(&sample, &sample_rows(&t, 5, 42));
        prop_assert!(sample.iter().collect::<BTreeSet<_>>().len() == sample.len());
        let md = serialize_markdown(&t, &sample);
        let lines: Vec<&str> = md.lines().collect();
        prop_assert_eq!(lines.len(), 4 + sample.len());
        let header: Vec<&str> = lines[2].trim_matches('|').split('|').map(str::trim).collect();
        let names: Vec<&str> = t.columns.iter().map(|c| c.name.trim()).collect();
        prop_assert_eq!(header, names);
    }

    #[test]
    fn pooling_yields_distinct_names_without_labels(seed in any::<u64>(), sources in 1usize..4) {
        let mut r = rng(seed);
        let corpora: Vec<(String, Vec<Table>)> = (0..sources)
            .map(|s| {
                let n = r.gen_range(1..4);
                let tables = (0..n).map(|i| random_table(&mut r, &format!("tab{}", i % 2), 3, 4)).collect();
                (format!("SOURCELABEL{s}"), tables)
            })
            .collect();
        let pooled = pool_corpora(corpora);
        let names: BTreeSet<&str> = pooled.tables().iter().map(|t| t.name.as_str()).collect();
        prop_assert_eq!(names.len(), pooled.tables().len());
        for t in pooled.tables() {
            let text = encode_table_text(&t.name, "purpose", &serialize_markdown(t, &sample_rows(t, 5, 42)));
            prop_assert!(!text.contains("SOURCELABEL"));
        }
        let again = pool_corpora(vec![("x".into(), pooled.tables().to_vec())]);
        let renamed: Vec<&str> = again.tables().iter().map(|t| t.name.as_str()).collect();
        let original: Vec<&str> = pooled.tables().iter().map(|t| t.name.as_str()).collect();
        prop_assert_eq!(renamed, original);
    }

    #[test]
    fn stub_cosine_is_symmetric_and_bounded(a in ".{0,24}", b in ".{0,24}") {
        let va = stub_embedding(&a, DIM);
        let vb = stub_embedding(&b, DIM);
        prop_assert_eq!(&va, &stub_embedding(&a, DIM));
        let ab = va.cosine(&vb);
        prop_assert!((ab - vb.cosine(&va)).abs() < 1e-12);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&ab));
    }

    #[test]
    fn token_ledger_sums_calls(calls in prop::collection::vec((0u64..10_000, 0u64..1_000), 0..20)) {
        let ledger = TokenLedger::new();
        let mut last = (0, 0);
        for &(i, o) in &calls {
            ledger.record(&GenerationResponse { text: String::new(), input_tokens: i, output_tokens: o });
            let u = ledger.usage();
            prop_assert!(u.input_tokens >= last.0 && u.output_tokens >= last.1);
            last = (u.input_tokens, u.output_tokens);
        }
        let u = ledger.usage();
        prop_assert_eq!(u.calls, calls.len() as u64);
        prop_assert_eq!(u.input_tokens, calls.iter().map(|c| c.0).sum::<u64>());
        prop_assert_eq!(u.output_tokens, calls.iter().map(|c| c.1).sum::<u64>());
    }

    #[test]
    fn index_search_equals_brute_force(
        vectors in prop::collection::vec(prop::collection::vec(-2i8..3, 4), 1..40),
        query in prop::collection::vec(-2i8..3, 4),
        k in 1usize..12,
    ) {
        let to_f = |v: &[i8]| v.iter().map(|&x| x as f64).collect::<Vec<_>>();
        let mut index = DenseIndex::new("test", 4);
        for (i, v) in vectors.iter().enumerate() {
            let mut c = to_f(v);
            if c.iter().all(|&x| x == 0.0) {
                c[0] = 1.0;
            }
            index.insert(TableId::new(format!("t{i:02}")), EmbeddingVector::new(c).unwrap()).unwrap();
        }
        let mut q = to_f(&query);
        if q.iter().all(|&x| x == 0.0) {
            q[1] = 1.0;
        }
        let got = index.search(&EmbeddingVector::new(q.clone()).unwrap(), k).unwrap();
        let mut scan: Vec<(f64, TableId)> = index
            .entries()
            .iter()
            .map(|e| (cosine(&q, e.vector.as_slice()), e.table_id.clone()))
            .collect();
        scan.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let expected: Vec<TableId> = scan.into_iter().take(k).map(|(_, id)| id).collect();
        let got_ids: Vec<TableId> = got.iter().map(|(id, _)| id.clone()).collect();
        prop_assert_eq!(got_ids, expected);
        prop_assert!(got.windows(2).all(|w| w[0].1 >= w[1].1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn compatibility_is_symmetric_and_bounded(seed in any::<u64>()) {
        let embedder = StubEmbedder::new(DIM);
        let corpus = random_corpus(&mut rng(seed), 4, 6, 30);
        let signals: Vec<TableSignals> =
            corpus.tables().iter().map(|t| TableSignals::compute(t, &embedder).unwrap()).collect();
        for (i, a) in signals.iter().enumerate() {
            for b in &signals[i + 1..] {
                let ab = table_compatibility(a, b);
                let ba = table_compatibility(b, a);
                prop_assert_eq!(ab.clone(), ba.map(|j| j.swapped()));
                if let Some(j) = ab {
                    prop_assert!(j.cs > 0.0 && j.cs <= 1.0);
                }
                for ca in &a.columns {
                    for cb in &b.columns {
                        let p = column_pair_score(ca, cb).unwrap();
                        prop_assert!((0.0..=1.0).contains(&p.s));
                        prop_assert_eq!(p.s == 0.0, !p.valid || (p.jac == 0.0 && p.name == 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn cache_round_trips(seed in any::<u64>()) {
        let corpus = random_corpus(&mut rng(seed), 5, 5, 20);
        let cache = build_cache(&corpus, &StubEmbedder::new(DIM)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.json");
        cache.save(&path).unwrap();
        let loaded = CompatibilityCache::load(&path, Some(&StubEmbedder::new(DIM).backend_id())).unwrap();
        prop_assert_eq!(loaded.to_canonical_json(), cache.to_canonical_json());
        for (key, entry) in cache.entries() {
            prop_assert!(entry.cs > 0.0);
            let (lo, hi) = key.split_once('|').unwrap();
            prop_assert_eq!(loaded.cs(&TableId::new(hi), &TableId::new(lo)), entry.cs);
        }
    }

    #[test]
    fn score_is_monotone_in_jac_and_name(
        jac in 0.0f64..=1.0, djac in 0.0f64..=1.0, sem in 0.0f64..=1.0, dsem in 0.0f64..=1.0, ex in any::<bool>(),
    ) {
        let ex = if ex { 1.0 } else { 0.0 };
        let base = ColumnPairScore::combine(true, true, jac, ex, sem);
        let more_jac = ColumnPairScore::combine(true, true, (jac + djac).min(1.0), ex, sem);
        let more_sem = ColumnPairScore::combine(true, true, jac, ex, (sem + dsem).min(1.0));
        let with_ex = ColumnPairScore::combine(true, true, jac, 1.0, sem);
        prop_assert!(more_jac.s >= base.s && more_sem.s >= base.s && with_ex.s >= base.s);
        prop_assert_eq!(ColumnPairScore::combine(false, true, jac, ex, sem).s, 0.0);
        prop_assert_eq!(ColumnPairScore::combine(true, false, jac, ex, sem).s, 0.0);
    }

    #[test]
    fn metrics_satisfy_f1_identity_and_ignore_order(
        pred in prop::collection::vec(0u8..8, 0..8),
        gold in prop::collection::vec(0u8..8, 1..6),
    ) {
        let ids = |v: &[u8]| v.iter().map(|x| TableId::new(format!("t{x}"))).collect::<Vec<_>>();
        let m = selection_metrics(&ids(&pred), &ids(&gold)).unwrap();
        if m.precision + m.recall > 0.0 {
            prop_assert!((m.f1 - 2.0 * m.precision * m.recall / (m.precision + m.recall)).abs() < 1e-12);
        } else {
            prop_assert_eq!(m.f1, 0.0);
        }
        let mut rp = pred.clone();
        rp.reverse();
        let mut rg = gold.clone();
        rg.reverse();
        prop_assert_eq!(m, selection_metrics(&ids(&rp), &ids(&rg)).unwrap());
        let gs: BTreeSet<u8> = gold.iter().copied().collect();
        prop_assert_eq!(m.perfect_recall, gs.iter().all(|g| pred.contains(g)));
    }

    #[test]
    fn perfect_recall_rate_bounds_perfect_f1_rate(
        cases in prop::collection::vec((prop::collection::vec(0u8..5, 0..5), prop::collection::vec(0u8..5, 1..4)), 1..30),
    ) {
        let ids = |v: &[u8]| v.iter().map(|x| TableId::new(format!("t{x}"))).collect::<Vec<_>>();
        let ms: Vec<_> = cases.iter().map(|(p, g)| selection_metrics(&ids(p), &ids(g)).unwrap()).collect();
        let pr = ms.iter().filter(|m| m.perfect_recall).count();
        let exact = ms.iter().filter(|m| m.f1 == 1.0).count();
        prop_assert!(pr >= exact);
    }
}

fn selection_reply(group: &[usize], other: &[usize]) -> String {
    serde_json::json!({
        "group_formation": {"groups_formed": [
            {"group_index": 0, "table_indices": group},
            {"group_index": 1, "table_indices": other},
        ]},
        "group_selection": {"selected_group_index": 0},
    })
    .to_string()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pipeline_output_stays_within_top_k(
        seed in any::<u64>(),
        group in prop::collection::vec(0usize..12, 0..4),
        k in 1usize..8,
        tau in 0.0f64..0.6,
        gold_bits in any::<u16>(),
    ) {
        let embedder = Arc::new(StubEmbedder::new(DIM));
        let corpus = random_corpus(&mut rng(seed), 8, 4, 12);
        let mut store = EnrichmentStore::new(embedder.backend_id(), 42);
        enrich_corpus(&corpus, &ScriptedGenerator::constant("None"), embedder.as_ref(), &mut store);
        let index = DenseIndex::build(&corpus, &store, DIM).unwrap();
        let cache = build_cache(&corpus, embedder.as_ref()).unwrap();
        let reply = selection_reply(&group, &[]);
        let p = Pipeline::new(
            embedder,
            Arc::new(ScriptedGenerator::constant(reply)),
            index,
            cache,
            store,
            PipelineConfig { k, tau, ..PipelineConfig::default() },
        );
        let r = p.run_query("which ids match the city").unwrap();
        let topk = r.candidates.ids();
        prop_assert!(topk.len() <= k);
        prop_assert!(r.final_tables.len() <= k);
        prop_assert!(r.final_tables.iter().all(|t| topk.contains(t)));
        if r.fallback_used {
            prop_assert_eq!(&r.final_tables, &topk);
        } else {
            prop_assert!(r.selected.iter().all(|t| topk.contains(t)));
            prop_assert!(r.restored.iter().all(|t| !r.selected.contains(t)));
            let gold: BTreeSet<String> = corpus
                .tables()
                .iter()
                .enumerate()
                .filter(|(i, _)| gold_bits & (1 << i) != 0)
                .map(|(_, t)| t.id.to_string())
                .collect();
            let strings = |v: &[TableId]| v.iter().map(|t| t.to_string()).collect::<Vec<_>>();
            prop_assert!(recall(&strings(&r.final_tables), &gold) >= recall(&strings(&r.selected), &gold));
        }
    }

    #[test]
    fn execution_match_is_symmetric(rows in prop::collection::vec((0i64..5, 0i64..3), 0..12), cut in 0i64..5) {
        let dir = tempfile::tempdir().unwrap();
        let db = dir.path().join("t.sqlite");
        let conn = rusqlite::Connection::open(&db).unwrap();
        conn.execute("CREATE TABLE t (a INTEGER, b INTEGER)", []).unwrap();
        for (a, b) in &rows {
            conn.execute("INSERT INTO t VALUES (?1, ?2)", [a, b]).unwrap();
        }
        drop(conn);
        let t = Duration::from_secs(5);
        let statements = [
            "SELECT a, b FROM t".to_string(),
            "SELECT a, b FROM t ORDER BY b DESC, a".to_string(),
            format!("SELECT a, b FROM t WHERE a < {cut}"),
            "SELECT DISTINCT a, b FROM t".to_string(),
        ];
        for x in &statements {
            for y in &statements {
                let xy = execution_match(x, y, &db, t).unwrap();
                let yx = execution_match(y, x, &db, t).unwrap();
                prop_assert!(matches!(xy, ExecOutcome::Match | ExecOutcome::Mismatch));
                prop_assert_eq!(xy, yx);
            }
        }
        prop_assert_eq!(execution_match(&statements[0], &statements[1], &db, t).unwrap(), ExecOutcome::Match);
    }
}

#[test]
fn fixed_metric_example() {
    let m = selection_metrics(&id_set(&["A", "B", "C"]), &id_set(&["A", "B"])).unwrap();
    assert!((m.f1 - 0.8).abs() < 1e-12);
}
