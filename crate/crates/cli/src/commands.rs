use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use coret::compatibility::{build_cache, evaluate_cache, CompatibilityCache, GoldJoin};
use coret::corpus::{load_corpus_dir, load_tables, pool_corpora, write_corpus_dir, SourceFormat, TableCorpus};
use coret::evaluation::{
    aggregate_metrics, cost_estimate, evaluate_predictions, execution_match, generate_sql, read_jsonl,
    stratified_em, write_jsonl, CostLedger, EvalError, ExecOutcome, GoldQuery,
};
use coret::indexing::{enrich_corpus, DenseIndex, EnrichmentStore};
use coret::pipeline::{Pipeline, QueryRecord};
use coret::services::{CachedEmbedder, Embedder, Generator, ScriptedGenerator, ServiceError, TokenUsage};

use crate::config::RunConfig;
use crate::error::CliError;

/// Artifact locations inside the work directory.
pub struct Workspace {
    pub root: PathBuf,
}

impl Workspace {
    pub fn new(root: PathBuf) -> Self {
        Self { root }
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.root.join("corpus")
    }
    pub fn enrichment(&self) -> PathBuf {
        self.root.join("enrichment.json")
    }
    pub fn embeddings(&self) -> PathBuf {
        self.root.join("embeddings.json")
    }
    pub fn index(&self) -> PathBuf {
        self.root.join("index.json")
    }
    pub fn cache(&self) -> PathBuf {
        self.root.join("compat_cache.json")
    }
    pub fn results(&self) -> PathBuf {
        self.root.join("results.jsonl")
    }

    fn ensure(&self) -> Result<(), CliError> {
        fs::create_dir_all(&self.root).map_err(|e| CliError::input(format!("{}: {e}", self.root.display())))
    }

    fn corpus(&self) -> Result<TableCorpus, CliError> {
        let dir = self.corpus_dir();
        if !dir.exists() {
            return Err(CliError::input(format!("{} not found; run `ingest` first", dir.display())));
        }
        Ok(load_corpus_dir(&dir)?)
    }
}

fn write_text(path: &Path, body: &str) -> Result<(), CliError> {
    fs::write(path, body).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    write_text(path, &(serde_json::to_string_pretty(value).expect("report serializes") + "\n"))
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::input(format!("{what} {} not found", path.display())))
    }
}

/// `label=path` or a bare path labelled by its file stem.
fn parse_source(arg: &str) -> (String, PathBuf) {
    match arg.split_once('=') {
        Some((label, path)) if !label.is_empty() => (label.to_string(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(arg);
            let label = path
                .file_stem()
                .map_or_else(|| arg.to_string(), |s| s.to_string_lossy().into_owned());
            (label, path)
        }
    }
}

pub fn ingest(ws: &Workspace, sources: &[String]) -> Result<(), CliError> {
    if sources.is_empty() {
        return Err(CliError::config("ingest needs at least one source"));
    }
    let mut corpora = Vec::new();
    for arg in sources {
        let (label, path) = parse_source(arg);
        if !path.exists() {
            return Err(CliError::input(format!("source {} does not exist", path.display())));
        }
        let tables = load_tables(&path, SourceFormat::detect(&path))?;
        log::info!("{label}: {} tables from {}", tables.len(), path.display());
        corpora.push((label, tables));
    }
    let corpus = pool_corpora(corpora);
    ws.ensure()?;
    let dir = ws.corpus_dir();
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    }
    let manifest = write_corpus_dir(&corpus, &dir)?;
    let renamed = manifest
        .iter()
        .filter(|m| corpus.provenance(&m.table_name.as_str().into()).is_some_and(|p| p.original_name != m.table_name))
        .count();
    println!("ingested {} tables from {} sources ({renamed} renamed)", manifest.len(), sources.len());
    Ok(())
}

fn cached_embedder(ws: &Workspace, cfg: &RunConfig) -> Result<CachedEmbedder<Box<dyn Embedder>>, CliError> {
    Ok(CachedEmbedder::open(cfg.build_embedder()?, &ws.embeddings())?)
}

pub fn enrich(ws: &Workspace, cfg: &RunConfig) -> Result<(), CliError> {
    let corpus = ws.corpus()?;
    let embedder = cached_embedder(ws, cfg)?;
    let generator = cfg.build_generator()?;
    let backend = embedder.backend_id();
    let mut store = EnrichmentStore::open_or_new(&ws.enrichment(), &backend, cfg.seed)?;
    if store.seed != cfg.seed {
        return Err(CliError::config(format!(
            "{} was built with seed {}, current seed is {}",
            ws.enrichment().display(),
            store.seed,
            cfg.seed
        )));
    }
    let report = enrich_corpus(&corpus, generator.as_ref(), &embedder, &mut store);
    store.save(&ws.enrichment())?;
    embedder.save()?;
    write_json(&ws.root.join("enrich_report.json"), &report)?;
    println!(
        "enriched {} tables: {} generated, {} reused, {} failed",
        corpus.len(),
        report.generated,
        report.reused,
        report.failed.len()
    );
    if !report.is_complete() {
        return Err(CliError::backend(format!(
            "{} tables could not be enriched; rerun to retry them",
            report.failed.len()
        )));
    }
    let index = DenseIndex::build(&corpus, &store, cfg.embed_dim)?;
    index.save(&ws.index())?;
    Ok(())
}

pub fn cache(ws: &Workspace, cfg: &RunConfig) -> Result<(), CliError> {
    let corpus = ws.corpus()?;
    let embedder = cached_embedder(ws, cfg)?;
    let cache = build_cache(&corpus, &embedder)?;
    embedder.save()?;
    cache.save(&ws.cache())?;
    println!("compatibility cache: {} joinable pairs over {} tables", cache.len(), corpus.len());
    Ok(())
}

#[derive(Debug, Deserialize)]
struct QueryInput {
    query_id: String,
    question: String,
}

fn usage_report(cfg: &RunConfig, stages: &[(&str, TokenUsage)]) -> serde_json::Value {
    let mut ledger = CostLedger::new(cfg.rates);
    for (name, usage) in stages {
        ledger.add(name, *usage);
    }
    json!({
        "stages": ledger.stages,
        "rates": ledger.rates,
        "input_tokens": ledger.input_tokens(),
        "output_tokens": ledger.output_tokens(),
        "cost_usd": cost_estimate(&ledger),
    })
}

pub fn retrieve(
    ws: &Workspace,
    cfg: &RunConfig,
    queries: &Path,
    output: Option<&Path>,
    fallback_only: bool,
) -> Result<(), CliError> {
    require_file(queries, "queries file")?;
    let inputs: Vec<QueryInput> = read_jsonl(queries)?;
    let embedder = cfg.build_embedder()?;
    let backend = embedder.backend_id();
    for (path, what) in [(ws.index(), "index"), (ws.enrichment(), "enrichment store"), (ws.cache(), "cache")] {
        if !path.exists() {
            return Err(CliError::input(format!("{what} {} not found; build it first", path.display())));
        }
    }
    let index = DenseIndex::load(&ws.index(), &backend)?;
    let store = EnrichmentStore::load(&ws.enrichment(), &backend)?;
    let cache = CompatibilityCache::load(&ws.cache(), Some(&backend))?;
    // Fallback-only never calls the generator, so it needs no backend settings.
    let generator: Arc<dyn Generator> = if fallback_only {
        Arc::new(ScriptedGenerator::failing(ServiceError::Unavailable("fallback-only".into())))
    } else {
        cfg.build_generator()?
    };
    let pipeline = Pipeline::new(
        Arc::from(embedder),
        generator,
        index,
        cache,
        store,
        cfg.pipeline(fallback_only),
    );
    let questions: Vec<String> = inputs.iter().map(|q| q.question.clone()).collect();
    let mut records = Vec::with_capacity(inputs.len());
    for (q, result) in inputs.iter().zip(pipeline.run_queries(&questions)) {
        let result = result.map_err(CliError::from)?;
        records.push(QueryRecord::new(&q.query_id, &result));
    }
    let out = output.map_or_else(|| ws.results(), Path::to_path_buf);
    write_jsonl(&out, &records)?;
    let usage = pipeline.ledger.usage();
    let report = usage_report(cfg, &[("selection", usage)]);
    write_json(&ws.root.join("usage.json"), &report)?;
    let fallbacks = records.iter().filter(|r| r.fallback_used).count();
    println!(
        "{} queries, {fallbacks} fallbacks, {} input / {} output tokens, ${:.2}",
        records.len(),
        usage.input_tokens,
        usage.output_tokens,
        report["cost_usd"].as_f64().unwrap_or(0.0)
    );
    Ok(())
}

fn read_gold_joins(path: &Path) -> Result<Vec<GoldJoin>, CliError> {
    require_file(path, "gold joins file")?;
    let body = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    if body.trim_start().starts_with('[') {
        serde_json::from_str(&body).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    } else {
        Ok(read_jsonl(path)?)
    }
}

pub struct EvalArgs<'a> {
    pub gold: Option<&'a Path>,
    pub results: Option<&'a Path>,
    pub gold_joins: Option<&'a Path>,
    pub method: &'a str,
}

pub fn eval(ws: &Workspace, cfg: &RunConfig, args: EvalArgs<'_>) -> Result<(), CliError> {
    if args.gold.is_none() && args.gold_joins.is_none() {
        return Err(CliError::config("eval needs --gold and/or --gold-joins"));
    }
    let mut report = serde_json::Map::new();
    let mut text = String::new();
    if let Some(gold_path) = args.gold {
        require_file(gold_path, "gold file")?;
        let gold: Vec<GoldQuery> = read_jsonl(gold_path)?;
        let results_path = args.results.map_or_else(|| ws.results(), Path::to_path_buf);
        require_file(&results_path, "results file")?;
        let predictions: Vec<QueryRecord> = read_jsonl(&results_path)?;
        let records = evaluate_predictions(&gold, &predictions)?;
        let aggregate = aggregate_metrics(args.method, &records)?;
        text.push_str(&aggregate.render());
        report.insert("selection".into(), serde_json::to_value(&aggregate).unwrap());
        write_jsonl(&ws.root.join("eval_records.jsonl"), &records)?;
    }
    if let Some(joins_path) = args.gold_joins {
        let gold = read_gold_joins(joins_path)?;
        require_file(&ws.cache(), "cache")?;
        let cache = CompatibilityCache::load(&ws.cache(), None)?;
        let corpus = ws.corpus()?;
        let compat = evaluate_cache(&cache, &gold, &corpus, cfg.threshold)?;
        if !text.is_empty() {
            text.push('\n');
        }
        text.push_str(&compat.render());
        report.insert("compatibility".into(), serde_json::to_value(&compat).unwrap());
    }
    ws.ensure()?;
    write_json(&ws.root.join("report.json"), &report)?;
    write_text(&ws.root.join("report.txt"), &text)?;
    print!("{text}");
    Ok(())
}

#[derive(Debug, Serialize)]
struct E2eRecord {
    query_id: String,
    gold_tables: usize,
    predicted_sql: String,
    outcome: ExecOutcome,
}

pub fn e2e(ws: &Workspace, cfg: &RunConfig, gold: &Path, db: &Path, results: Option<&Path>) -> Result<(), CliError> {
    require_file(gold, "gold file")?;
    require_file(db, "database")?;
    let gold: Vec<GoldQuery> = read_jsonl(gold)?;
    let results_path = results.map_or_else(|| ws.results(), Path::to_path_buf);
    require_file(&results_path, "results file")?;
    let predictions: Vec<QueryRecord> = read_jsonl(&results_path)?;
    let embedder = cfg.build_embedder()?;
    let store = EnrichmentStore::load(&ws.enrichment(), &embedder.backend_id())?;
    let generator = cfg.build_generator()?;

    let mut usage = TokenUsage::default();
    let mut outcomes = Vec::new();
    let mut rows = Vec::new();
    let mut excluded = 0usize;
    for g in &gold {
        let Some(gold_sql) = &g.gold_sql else { continue };
        let Some(pred) = predictions.iter().find(|p| p.query_id == g.query_id) else {
            return Err(EvalError::MissingPrediction(g.query_id.clone()).into());
        };
        let schema: Vec<String> = pred
            .final_tables
            .iter()
            .filter_map(|id| store.get(id).map(|e| e.description.markdown.clone()))
            .collect();
        let (sql, outcome) = match generate_sql(&g.question, &schema, generator.as_ref(), cfg.seed) {
            Ok((sql, resp)) => {
                usage.calls += 1;
                usage.input_tokens += resp.input_tokens;
                usage.output_tokens += resp.output_tokens;
                match execution_match(&sql, gold_sql, db, cfg.exec_timeout) {
                    Ok(o) => (sql, o),
                    Err(EvalError::GoldQuery(e)) => {
                        log::warn!("gold SQL for {} failed ({e}); excluded", g.query_id);
                        excluded += 1;
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            Err(e) => (String::new(), ExecOutcome::Error(format!("generation: {e}"))),
        };
        outcomes.push((g.gold_tables.len(), outcome.clone()));
        rows.push(E2eRecord {
            query_id: g.query_id.clone(),
            gold_tables: g.gold_tables.len(),
            predicted_sql: sql,
            outcome,
        });
    }
    let em = stratified_em(&outcomes);
    write_jsonl(&ws.root.join("e2e_records.jsonl"), &rows)?;
    write_json(
        &ws.root.join("e2e_report.json"),
        &json!({ "em": em, "excluded_gold_errors": excluded, "usage": usage_report(cfg, &[("sql_generation", usage)]) }),
    )?;
    print!("{}", em.render());
    Ok(())
}
