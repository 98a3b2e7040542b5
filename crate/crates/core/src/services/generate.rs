use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ServiceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub seed: u64,
}

impl GenerationRequest {
    /// Greedy decoding, seed 42.
    pub fn new(prompt: impl Into<String>, max_tokens: u32) -> Self {
        Self {
            prompt: prompt.into(),
            max_tokens,
            temperature: 0.0,
            seed: 42,
        }
    }

    pub(crate) fn prompt_hash(&self) -> String {
        hex::encode(&Sha256::digest(self.prompt.as_bytes())[..8])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

pub trait Generator: Send + Sync {
    fn model_id(&self) -> String;

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, ServiceError>;
}

impl<G: Generator + ?Sized> Generator for &G {
    fn model_id(&self) -> String {
        (**self).model_id()
    }
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, ServiceError> {
        (**self).generate(request)
    }
}

impl<G: Generator + ?Sized> Generator for Arc<G> {
    fn model_id(&self) -> String {
        (**self).model_id()
    }
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, ServiceError> {
        (**self).generate(request)
    }
}

impl<G: Generator + ?Sized> Generator for Box<G> {
    fn model_id(&self) -> String {
        (**self).model_id()
    }
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, ServiceError> {
        (**self).generate(request)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub calls: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

/// Running token totals, safe to share between threads.
#[derive(Debug, Default)]
pub struct TokenLedger {
    calls: AtomicU64,
    input: AtomicU64,
    output: AtomicU64,
}

impl TokenLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, response: &GenerationResponse) {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.input.fetch_add(response.input_tokens, Ordering::SeqCst);
        self.output.fetch_add(response.output_tokens, Ordering::SeqCst);
    }

    pub fn usage(&self) -> TokenUsage {
        TokenUsage {
            calls: self.calls.load(Ordering::SeqCst),
            input_tokens: self.input.load(Ordering::SeqCst),
            output_tokens: self.output.load(Ordering::SeqCst),
        }
    }
}

/// Records every successful response of the wrapped generator in a ledger.
pub struct Metered<G> {
    inner: G,
    ledger: Arc<TokenLedger>,
}

impl<G: Generator> Metered<G> {
    pub fn new(inner: G, ledger: Arc<TokenLedger>) -> Self {
        Self { inner, ledger }
    }

    pub fn ledger(&self) -> &Arc<TokenLedger> {
        &self.ledger
    }
}

impl<G: Generator> Generator for Metered<G> {
    fn model_id(&self) -> String {
        self.inner.model_id()
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, ServiceError> {
        let response = self.inner.generate(request)?;
        self.ledger.record(&response);
        Ok(response)
    }
}

/// Token count used by the stubs: whitespace-separated pieces.
pub fn stub_token_count(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

type Handler = dyn Fn(&GenerationRequest) -> Result<String, ServiceError> + Send + Sync;

/// A generator whose replies come from a closure. Used for tests and for
/// offline runs driven by a rules file.
pub struct ScriptedGenerator {
    handler: Box<Handler>,
    calls: AtomicU64,
    log: Mutex<Vec<String>>,
}

impl ScriptedGenerator {
    pub fn new(handler: impl Fn(&GenerationRequest) -> Result<String, ServiceError> + Send + Sync + 'static) -> Self {
        Self {
            handler: Box::new(handler),
            calls: AtomicU64::new(0),
            log: Mutex::new(Vec::new()),
        }
    }

    /// Always answers `text`.
    pub fn constant(text: impl Into<String>) -> Self {
        let text = text.into();
        Self::new(move |_| Ok(text.clone()))
    }

    /// Always fails with `error`.
    pub fn failing(error: ServiceError) -> Self {
        Self::new(move |_| Err(error.clone()))
    }

    pub fn from_rules(rules: ScriptRules) -> Self {
        Self::new(move |req| rules.respond(&req.prompt))
    }

    /// Number of `generate` calls so far, including failed ones.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    /// Prompt hashes in call order.
    pub fn call_log(&self) -> Vec<String> {
        self.log.lock().unwrap().clone()
    }
}

impl Generator for ScriptedGenerator {
    fn model_id(&self) -> String {
        "scripted".to_string()
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, ServiceError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.log.lock().unwrap().push(request.prompt_hash());
        if request.prompt.is_empty() {
            return Err(ServiceError::EmptyInput);
        }
        let text = (self.handler)(request)?;
        Ok(GenerationResponse {
            input_tokens: stub_token_count(&request.prompt),
            output_tokens: stub_token_count(&text),
            text,
        })
    }
}

/// `{"rules": [{"contains": "...", "response": "..."}], "default": "..."}`.
/// The first rule whose needle occurs in the prompt wins.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptRules {
    #[serde(default)]
    pub rules: Vec<ScriptRule>,
    #[serde(default)]
    pub default: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptRule {
    pub contains: String,
    pub response: String,
}

impl ScriptRules {
    pub fn respond(&self, prompt: &str) -> Result<String, ServiceError> {
        self.rules
            .iter()
            .find(|r| prompt.contains(&r.contains))
            .map(|r| r.response.clone())
            .or_else(|| self.default.clone())
            .ok_or_else(|| ServiceError::Unavailable("no scripted response matches the prompt".into()))
    }
}
