//! `coret`: offline artifact builds, batch retrieval and evaluation.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{EvalArgs, Workspace};
use config::{RunConfig, Settings};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "coret", version, about = "Join-aware multi-table retrieval for open-book text-to-SQL")]
struct Cli {
    /// Directory holding all artifacts.
    #[arg(long, global = true, default_value = "work")]
    work_dir: PathBuf,
    /// JSON file with default settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pool CSV directories or SQLite files into one corpus.
    Ingest {
        /// `label=path` or `path`; the label defaults to the file stem.
        #[arg(required = true)]
        sources: Vec<String>,
    },
    /// Generate table purposes, embed tables and build the dense index.
    Enrich,
    /// Build the table compatibility cache.
    Cache,
    /// Run retrieval for a JSONL file of `{query_id, question}`.
    Retrieve {
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Skip the LLM and output the dense top-K.
        #[arg(long)]
        fallback_only: bool,
    },
    /// Score results against gold tables and/or the cache against gold joins.
    Eval {
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long)]
        results: Option<PathBuf>,
        #[arg(long)]
        gold_joins: Option<PathBuf>,
        #[arg(long, default_value = "CORE-T")]
        method: String,
    },
    /// Generate SQL from the retrieved schema and check execution match.
    E2e {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        results: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(&cli.settings, cli.config.as_deref())?;
    log::debug!("configuration: {cfg:?}");
    let ws = Workspace::new(cli.work_dir);
    match &cli.command {
        Command::Ingest { sources } => commands::ingest(&ws, sources),
        Command::Enrich => commands::enrich(&ws, &cfg),
        Command::Cache => commands::cache(&ws, &cfg),
        Command::Retrieve {
            queries,
            output,
            fallback_only,
        } => commands::retrieve(&ws, &cfg, queries, output.as_deref(), *fallback_only),
        Command::Eval {
            gold,
            results,
            gold_joins,
            method,
        } => commands::eval(
            &ws,
            &cfg,
            EvalArgs {
                gold: gold.as_deref(),
                results: results.as_deref(),
                gold_joins: gold_joins.as_deref(),
                method,
            },
        ),
        Command::E2e { gold, db, results } => commands::e2e(&ws, &cfg, gold, db, results.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
