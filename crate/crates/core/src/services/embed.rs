use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ServiceError;

/// Dense embedding with finite components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(components: Vec<f64>) -> Result<Self, ServiceError> {
        if components.is_empty() {
            return Err(ServiceError::Malformed("empty embedding".into()));
        }
        if components.iter().any(|x| !x.is_finite()) {
            return Err(ServiceError::Malformed("non-finite embedding component".into()));
        }
        Ok(Self(components))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        cosine(&self.0, &other.0)
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = ServiceError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(v: EmbeddingVector) -> Self {
        v.0
    }
}

/// Cosine similarity; 0 when either side has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

pub trait Embedder: Send + Sync {
    /// Identifies model + configuration; persisted artifacts record it.
    fn backend_id(&self) -> String;

    fn dimension(&self) -> usize;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ServiceError>;
}

impl<E: Embedder + ?Sized> Embedder for &E {
    fn backend_id(&self) -> String {
        (**self).backend_id()
    }
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn embed(&self, text: &str) -> Result<EmbeddingVector, ServiceError> {
        (**self).embed(text)
    }
}

impl<E: Embedder + ?Sized> Embedder for Arc<E> {
    fn backend_id(&self) -> String {
        (**self).backend_id()
    }
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn embed(&self, text: &str) -> Result<EmbeddingVector, ServiceError> {
        (**self).embed(text)
    }
}

impl<E: Embedder + ?Sized> Embedder for Box<E> {
    fn backend_id(&self) -> String {
        (**self).backend_id()
    }
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn embed(&self, text: &str) -> Result<EmbeddingVector, ServiceError> {
        (**self).embed(text)
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    bytes
        .into_iter()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Signed feature hashing of lower-cased character trigrams, L2-normalized.
///
/// The text is padded with `#` on both sides so short inputs still produce
/// features. The sign of each contribution comes from the top hash bit.
pub fn stub_embedding(text: &str, dimension: usize) -> EmbeddingVector {
    assert!(dimension > 0, "stub embedding dimension must be positive");
    let padded: Vec<char> = format!("##{}##", text.to_lowercase()).chars().collect();
    let mut v = vec![0.0f64; dimension];
    for gram in padded.windows(3) {
        let h = fnv1a(gram.iter().collect::<String>().into_bytes());
        let slot = (h % dimension as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        v[slot] += sign;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        // Every gram cancelled out; fall back to a fixed unit basis vector.
        v[0] = 1.0;
    } else {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    EmbeddingVector(v)
}

/// Network-free embedder backed by [`stub_embedding`].
#[derive(Debug, Clone, Copy)]
pub struct StubEmbedder {
    dimension: usize,
}

impl StubEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "stub embedding dimension must be positive");
        Self { dimension }
    }
}

impl Default for StubEmbedder {
    fn default() -> Self {
        Self::new(256)
    }
}

impl Embedder for StubEmbedder {
    fn backend_id(&self) -> String {
        format!("stub-trigram-v1-d{}", self.dimension)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ServiceError> {
        if text.is_empty() {
            return Err(ServiceError::EmptyInput);
        }
        Ok(stub_embedding(text, self.dimension))
    }
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    backend_id: String,
    dimension: usize,
    entries: BTreeMap<String, EmbeddingVector>,
}

/// Memoizes an embedder by SHA-256 of the input text, optionally persisted
/// to a JSON file so interrupted enrichment can resume.
pub struct CachedEmbedder<E> {
    inner: E,
    path: Option<PathBuf>,
    entries: Mutex<BTreeMap<String, EmbeddingVector>>,
}

impl<E: Embedder> CachedEmbedder<E> {
    pub fn in_memory(inner: E) -> Self {
        Self {
            inner,
            path: None,
            entries: Mutex::new(BTreeMap::new()),
        }
    }

    /// Opens (or starts) a cache file. A file written under a different
    /// backend id is refused.
    pub fn open(inner: E, path: &Path) -> Result<Self, ServiceError> {
        let mut entries = BTreeMap::new();
        if path.exists() {
            let body = fs::read_to_string(path).map_err(|e| ServiceError::Cache(e.to_string()))?;
            let file: CacheFile = serde_json::from_str(&body).map_err(|e| ServiceError::Cache(e.to_string()))?;
            if file.backend_id != inner.backend_id() {
                return Err(ServiceError::Cache(format!(
                    "cache {} was built with backend {:?}, current backend is {:?}",
                    path.display(),
                    file.backend_id,
                    inner.backend_id()
                )));
            }
            entries = file.entries;
        }
        Ok(Self {
            inner,
            path: Some(path.to_path_buf()),
            entries: Mutex::new(entries),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }

    /// Writes the cache file, if this cache has one.
    pub fn save(&self) -> Result<(), ServiceError> {
        let Some(path) = &self.path else { return Ok(()) };
        let file = CacheFile {
            backend_id: self.inner.backend_id(),
            dimension: self.inner.dimension(),
            entries: self.entries.lock().unwrap().clone(),
        };
        let body = serde_json::to_string(&file).map_err(|e| ServiceError::Cache(e.to_string()))?;
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| ServiceError::Cache(e.to_string()))?;
        }
        fs::write(path, body).map_err(|e| ServiceError::Cache(e.to_string()))
    }

    fn key(text: &str) -> String {
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

impl<E: Embedder> Embedder for CachedEmbedder<E> {
    fn backend_id(&self) -> String {
        self.inner.backend_id()
    }

    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ServiceError> {
        if text.is_empty() {
            return Err(ServiceError::EmptyInput);
        }
        let key = Self::key(text);
        if let Some(v) = self.entries.lock().unwrap().get(&key) {
            return Ok(v.clone());
        }
        let v = self.inner.embed(text)?;
        if v.dimension() != self.inner.dimension() {
            return Err(ServiceError::DimensionMismatch {
                expected: self.inner.dimension(),
                found: v.dimension(),
            });
        }
        self.entries.lock().unwrap().insert(key, v.clone());
        Ok(v)
    }
}
