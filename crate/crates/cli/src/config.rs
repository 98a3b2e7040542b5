use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use coret::compatibility::DEFAULT_JOIN_THRESHOLD;
use coret::evaluation::{Rates, DEFAULT_EXEC_TIMEOUT};
use coret::pipeline::{PipelineConfig, DEFAULT_K, DEFAULT_TAU};
use coret::services::{
    Embedder, Generator, HttpEmbedder, HttpGenerator, HttpSettings, ScriptRules, ScriptedGenerator, StubEmbedder,
};

use crate::error::CliError;

pub const DEFAULT_EMBED_DIM: usize = 256;
pub const DEFAULT_API_KEY_ENV: &str = "OPENAI_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    Stub,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    /// Answers "None" to everything.
    Stub,
    /// Replies from a rules file (`--script`).
    Scripted,
    Http,
}

/// Settings shared by all commands. Each may also come from `--config`.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Candidate count for dense retrieval.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Restoration threshold on table compatibility.
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Joinability threshold for the compatibility report.
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub embedder: Option<EmbedderKind>,
    #[arg(long, global = true)]
    pub embed_dim: Option<usize>,
    #[arg(long, global = true)]
    pub embed_url: Option<String>,
    #[arg(long, global = true)]
    pub embed_model: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub generator: Option<GeneratorKind>,
    #[arg(long, global = true)]
    pub script: Option<PathBuf>,
    #[arg(long, global = true)]
    pub llm_url: Option<String>,
    #[arg(long, global = true)]
    pub llm_model: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long, global = true)]
    pub api_key_env: Option<String>,
    /// Dollars per million input tokens.
    #[arg(long, global = true)]
    pub rate_input: Option<f64>,
    /// Dollars per million output tokens.
    #[arg(long, global = true)]
    pub rate_output: Option<f64>,
    #[arg(long, global = true)]
    pub exec_timeout_secs: Option<u64>,
    /// Require the selection reply to be bare JSON.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub strict_json: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub k: usize,
    pub tau: f64,
    pub seed: u64,
    pub threshold: f64,
    pub embedder: EmbedderKind,
    pub embed_dim: usize,
    pub embed_url: Option<String>,
    pub embed_model: Option<String>,
    pub generator: GeneratorKind,
    pub script: Option<PathBuf>,
    pub llm_url: Option<String>,
    pub llm_model: Option<String>,
    pub api_key_env: String,
    pub rates: Rates,
    pub exec_timeout: Duration,
    pub strict_json: bool,
}

impl RunConfig {
    /// Flags win over the config file, which wins over built-in defaults.
    pub fn resolve(flags: &Settings, file: Option<&Path>) -> Result<Self, CliError> {
        let file = match file {
            Some(p) => {
                let body = fs::read_to_string(p).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
                serde_json::from_str::<Settings>(&body)
                    .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
            }
            None => Settings::default(),
        };
        macro_rules! pick {
            ($field:ident) => {
                flags.$field.clone().or(file.$field.clone())
            };
        }
        let cfg = Self {
            k: pick!(k).unwrap_or(DEFAULT_K),
            tau: pick!(tau).unwrap_or(DEFAULT_TAU),
            seed: pick!(seed).unwrap_or(42),
            threshold: pick!(threshold).unwrap_or(DEFAULT_JOIN_THRESHOLD),
            embedder: pick!(embedder).unwrap_or(EmbedderKind::Stub),
            embed_dim: pick!(embed_dim).unwrap_or(DEFAULT_EMBED_DIM),
            embed_url: pick!(embed_url),
            embed_model: pick!(embed_model),
            generator: pick!(generator).unwrap_or(GeneratorKind::Stub),
            script: pick!(script),
            llm_url: pick!(llm_url),
            llm_model: pick!(llm_model),
            api_key_env: pick!(api_key_env).unwrap_or_else(|| DEFAULT_API_KEY_ENV.into()),
            rates: Rates {
                input_per_million: pick!(rate_input).unwrap_or(Rates::default().input_per_million),
                output_per_million: pick!(rate_output).unwrap_or(Rates::default().output_per_million),
            },
            exec_timeout: pick!(exec_timeout_secs).map_or(DEFAULT_EXEC_TIMEOUT, Duration::from_secs),
            strict_json: flags.strict_json,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(CliError::config(format!("tau must lie in [0, 1], got {}", self.tau)));
        }
        if self.k < 1 {
            return Err(CliError::config("k must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(CliError::config(format!("threshold must lie in [0, 1], got {}", self.threshold)));
        }
        if self.embed_dim < 1 {
            return Err(CliError::config("embed-dim must be at least 1"));
        }
        if self.rates.input_per_million < 0.0 || self.rates.output_per_million < 0.0 {
            return Err(CliError::config("token rates must be nonnegative"));
        }
        Ok(())
    }

    pub fn pipeline(&self, fallback_only: bool) -> PipelineConfig {
        PipelineConfig {
            k: self.k,
            tau: self.tau,
            strict_json: self.strict_json,
            fallback_only,
            seed: self.seed,
        }
    }

    fn http_settings(&self, url: &Option<String>, model: &Option<String>, what: &str) -> Result<HttpSettings, CliError> {
        let (Some(url), Some(model)) = (url, model) else {
            return Err(CliError::config(format!("the http {what} needs both a URL and a model name")));
        };
        let mut s = HttpSettings::new(url.clone(), model.clone());
        s.api_key_env = Some(self.api_key_env.clone());
        Ok(s)
    }

    pub fn build_embedder(&self) -> Result<Box<dyn Embedder>, CliError> {
        Ok(match self.embedder {
            EmbedderKind::Stub => Box::new(StubEmbedder::new(self.embed_dim)),
            EmbedderKind::Http => Box::new(HttpEmbedder::new(
                self.http_settings(&self.embed_url, &self.embed_model, "embedder")?,
                self.embed_dim,
            )),
        })
    }

    pub fn build_generator(&self) -> Result<Arc<dyn Generator>, CliError> {
        Ok(match self.generator {
            GeneratorKind::Stub => Arc::new(ScriptedGenerator::from_rules(ScriptRules {
                rules: Vec::new(),
                default: Some("None".into()),
            })),
            GeneratorKind::Scripted => {
                let path = self
                    .script
                    .as_ref()
                    .ok_or_else(|| CliError::config("the scripted generator needs --script"))?;
                let body = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
                let rules: ScriptRules = serde_json::from_str(&body)
                    .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
                Arc::new(ScriptedGenerator::from_rules(rules))
            }
            GeneratorKind::Http => Arc::new(HttpGenerator::new(self.http_settings(
                &self.llm_url,
                &self.llm_model,
                "generator",
            )?)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"k": 5, "tau": 0.6}"#).unwrap();
        let flags = Settings {
            tau: Some(0.4),
            ..Settings::default()
        };
        let cfg = RunConfig::resolve(&flags, Some(&path)).unwrap();
        assert_eq!((cfg.k, cfg.tau, cfg.seed), (5, 0.4, 42));
        let cfg = RunConfig::resolve(&Settings::default(), None).unwrap();
        assert_eq!((cfg.k, cfg.tau, cfg.threshold), (10, 0.3, 0.5));
        assert_eq!(cfg.exec_timeout, Duration::from_secs(60));
    }

    #[test]
    fn out_of_range_is_rejected() {
        let bad_tau = Settings {
            tau: Some(1.5),
            ..Settings::default()
        };
        assert!(RunConfig::resolve(&bad_tau, None).is_err());
        let bad_k = Settings {
            k: Some(0),
            ..Settings::default()
        };
        assert!(RunConfig::resolve(&bad_k, None).is_err());
    }
}
