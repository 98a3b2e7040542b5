//! OpenAI-compatible JSON endpoints: `POST {base}/embeddings` and
//! `POST {base}/chat/completions`.

use std::time::Duration;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{EmbeddingVector, Embedder, GenerationRequest, GenerationResponse, Generator, RetryPolicy, ServiceError};

#[derive(Debug, Clone)]
pub struct HttpSettings {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: Option<String>,
    pub timeout: Duration,
    pub retry: RetryPolicy,
    /// Log full request bodies instead of only their hash.
    pub log_bodies: bool,
}

impl HttpSettings {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model: model.into(),
            api_key_env: None,
            timeout: Duration::from_secs(120),
            retry: RetryPolicy::default(),
            log_bodies: false,
        }
    }
}

struct Transport {
    settings: HttpSettings,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl Transport {
    fn new(settings: HttpSettings) -> Self {
        let api_key = settings
            .api_key_env
            .as_deref()
            .and_then(|var| std::env::var(var).ok())
            .filter(|k| !k.is_empty());
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(settings.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            settings,
            api_key,
            agent,
        }
    }

    fn post(&self, path: &str, body: &Value, digest_of: &str) -> Result<Value, ServiceError> {
        let url = format!("{}{}", self.settings.base_url, path);
        let digest = hex::encode(&Sha256::digest(digest_of.as_bytes())[..8]);
        if self.settings.log_bodies {
            log::debug!("POST {url} body={body}");
        } else {
            log::debug!("POST {url} input_sha256={digest}");
        }
        self.settings.retry.run(|| {
            let mut req = self.agent.post(&url).header("Content-Type", "application/json");
            if let Some(key) = &self.api_key {
                req = req.header("Authorization", &format!("Bearer {key}"));
            }
            let mut resp = req.send_json(body).map_err(map_transport_error)?;
            let status = resp.status().as_u16();
            let text = resp
                .body_mut()
                .read_to_string()
                .map_err(|e| ServiceError::Malformed(e.to_string()))?;
            if self.settings.log_bodies {
                log::debug!("{url} -> {status} {text}");
            } else {
                log::debug!("{url} -> {status} ({} bytes) input_sha256={digest}", text.len());
            }
            match status {
                200..=299 => serde_json::from_str(&text).map_err(|e| ServiceError::Malformed(e.to_string())),
                429 => Err(ServiceError::Quota(text)),
                408 | 504 => Err(ServiceError::Timeout),
                500..=599 => Err(ServiceError::Unavailable(format!("HTTP {status}"))),
                _ => Err(ServiceError::Malformed(format!("HTTP {status}: {text}"))),
            }
        })
    }
}

fn map_transport_error(e: ureq::Error) -> ServiceError {
    match e {
        ureq::Error::Timeout(_) => ServiceError::Timeout,
        ureq::Error::Json(e) => ServiceError::Malformed(e.to_string()),
        other => ServiceError::Unavailable(other.to_string()),
    }
}

/// Embedding client for an OpenAI-compatible `/embeddings` endpoint.
pub struct HttpEmbedder {
    transport: Transport,
    dimension: usize,
}

impl HttpEmbedder {
    pub fn new(settings: HttpSettings, dimension: usize) -> Self {
        Self {
            transport: Transport::new(settings),
            dimension,
        }
    }
}

impl Embedder for HttpEmbedder {
    fn backend_id(&self) -> String {
        format!("http:{}:d{}", self.transport.settings.model, self.dimension)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ServiceError> {
        if text.is_empty() {
            return Err(ServiceError::EmptyInput);
        }
        let body = json!({ "model": self.transport.settings.model, "input": text });
        let reply = self.transport.post("/embeddings", &body, text)?;
        let raw = reply
            .pointer("/data/0/embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| ServiceError::Malformed("missing data[0].embedding".into()))?;
        let components = raw
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| ServiceError::Malformed("non-numeric component".into())))
            .collect::<Result<Vec<_>, _>>()?;
        let v = EmbeddingVector::new(components)?;
        if v.dimension() != self.dimension {
            return Err(ServiceError::DimensionMismatch {
                expected: self.dimension,
                found: v.dimension(),
            });
        }
        Ok(v)
    }
}

/// Text-generation client for an OpenAI-compatible `/chat/completions` endpoint.
pub struct HttpGenerator {
    transport: Transport,
}

impl HttpGenerator {
    pub fn new(settings: HttpSettings) -> Self {
        Self {
            transport: Transport::new(settings),
        }
    }
}

impl Generator for HttpGenerator {
    fn model_id(&self) -> String {
        self.transport.settings.model.clone()
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, ServiceError> {
        if request.prompt.is_empty() {
            return Err(ServiceError::EmptyInput);
        }
        let body = json!({
            "model": self.transport.settings.model,
            "messages": [{ "role": "user", "content": request.prompt }],
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
            "top_p": 1.0,
            "seed": request.seed,
        });
        let reply = self.transport.post("/chat/completions", &body, &request.prompt)?;
        let text = reply
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| ServiceError::Malformed("missing choices[0].message.content".into()))?;
        let count = |p: &str| {
            reply
                .pointer(p)
                .and_then(Value::as_u64)
                .ok_or_else(|| ServiceError::Malformed(format!("missing {p}")))
        };
        Ok(GenerationResponse {
            text: text.to_string(),
            input_tokens: count("/usage/prompt_tokens")?,
            output_tokens: count("/usage/completion_tokens")?,
        })
    }
}
