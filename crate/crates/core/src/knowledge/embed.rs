use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A unit-length embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(Vec<f64>);

pub const UNIT_TOLERANCE: f64 = 1e-9;

impl Embedding {
    /// Normalizes `raw`; `None` for a zero or non-finite vector.
    pub fn normalized(raw: Vec<f64>) -> Option<Self> {
        let norm = l2(&raw);
        if !norm.is_finite() || norm == 0.0 {
            return None;
        }
        Some(Embedding(raw.into_iter().map(|x| x / norm).collect()))
    }

    /// Wraps an already-normalized vector, checking its norm.
    pub fn from_unit(values: Vec<f64>) -> Result<Self, f64> {
        let norm = l2(&values);
        if (norm - 1.0).abs() <= UNIT_TOLERANCE {
            Ok(Embedding(values))
        } else {
            Err(norm)
        }
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        l2(&self.0)
    }

    /// Cosine similarity; both vectors are unit length so this is the dot product.
    pub fn cosine(&self, other: &Embedding) -> f64 {
        let dot: f64 = self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum();
        dot.clamp(-1.0, 1.0)
    }

    pub fn distance(&self, other: &Embedding) -> f64 {
        1.0 - self.cosine(other)
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("embedding provider failed (retryable: {retryable}): {message}")]
    Provider { retryable: bool, message: String },
    #[error("embedding provider returned dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
}

impl EmbedError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, EmbedError::Provider { retryable: true, .. })
    }
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn provider(&self) -> &str;
    fn embed(&self, text: &str) -> Result<Embedding, EmbedError>;
}

/// Deterministic signed feature hashing of word tokens and their character
/// trigrams.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
}

const WORD_WEIGHT: f64 = 1.0;
const TRIGRAM_WEIGHT: f64 = 0.25;

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    fn add(&self, acc: &mut [f64], feature: &str, weight: f64) {
        let h = fnv1a(feature.as_bytes());
        let idx = (h % self.dim as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        acc[idx] += sign * weight;
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(256)
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric() && c != '_')
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl Embedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn provider(&self) -> &str {
        "hash"
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        let mut acc = vec![0.0; self.dim];
        let tokens = tokenize(text);
        for token in &tokens {
            self.add(&mut acc, &format!("w:{token}"), WORD_WEIGHT);
            let padded: Vec<char> = format!("^{token}$").chars().collect();
            for tri in padded.windows(3) {
                let tri: String = tri.iter().collect();
                self.add(&mut acc, &format!("c:{tri}"), TRIGRAM_WEIGHT);
            }
        }
        if let Some(e) = Embedding::normalized(acc) {
            return Ok(e);
        }
        // No usable tokens (or an exact cancellation): fall back to a sentinel.
        let mut acc = vec![0.0; self.dim];
        self.add(&mut acc, "w:<empty>", 1.0);
        Ok(Embedding::normalized(acc).expect("sentinel is non-zero"))
    }
}

/// Embeddings from an OpenAI-compatible `/embeddings` endpoint.
pub struct RemoteEmbedder {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    dim: usize,
    http: reqwest::blocking::Client,
}

impl RemoteEmbedder {
    pub fn new(endpoint: &str, model: &str, api_key: Option<String>, dim: usize, timeout: Duration) -> Self {
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .expect("http client builds");
        Self {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key,
            dim,
            http,
        }
    }
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

impl Embedder for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn provider(&self) -> &str {
        "remote"
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        let mut req = self
            .http
            .post(format!("{}/embeddings", self.endpoint))
            .json(&serde_json::json!({ "model": self.model, "input": text }));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| EmbedError::Provider {
            retryable: e.is_timeout() || e.is_connect(),
            message: e.to_string(),
        })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(EmbedError::Provider {
                retryable: status.as_u16() == 429 || status.is_server_error(),
                message: format!("HTTP {status}"),
            });
        }
        let body: EmbeddingResponse = resp.json().map_err(|e| EmbedError::Provider {
            retryable: false,
            message: e.to_string(),
        })?;
        let raw = body
            .data
            .into_iter()
            .next()
            .ok_or_else(|| EmbedError::Provider {
                retryable: false,
                message: "empty embedding list".into(),
            })?
            .embedding;
        if raw.len() != self.dim {
            return Err(EmbedError::Dimension {
                expected: self.dim,
                got: raw.len(),
            });
        }
        Embedding::normalized(raw).ok_or_else(|| EmbedError::Provider {
            retryable: false,
            message: "zero embedding".into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_unit_length() {
        let e = HashEmbedder::default();
        for s in ["", "MinMaxNorm", "LSTM hidden size", "ünïcödé text 42", "   "] {
            let a = e.embed(s).unwrap();
            assert_eq!(a, e.embed(s).unwrap());
            assert_eq!(a.dim(), 256);
            assert!((a.norm() - 1.0).abs() <= UNIT_TOLERANCE);
        }
    }

    #[test]
    fn shared_terms_are_closer() {
        let e = HashEmbedder::default();
        let q = e.embed("MinMaxNorm").unwrap();
        let near = q.cosine(&e.embed("MinMaxNorm normalization").unwrap());
        let far = q.cosine(&e.embed("LSTM hidden size").unwrap());
        assert!(near > far, "{near} vs {far}");
    }

    #[test]
    fn from_unit_rejects_unnormalized() {
        assert!(Embedding::from_unit(vec![0.6, 0.8]).is_ok());
        assert_eq!(Embedding::from_unit(vec![1.0, 1.0]).unwrap_err(), 2f64.sqrt());
    }
}
