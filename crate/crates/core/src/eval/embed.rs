use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::oracle::provider::extract_json_path;

pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;

    /// Whether identical text always maps to the identical vector.
    fn deterministic(&self) -> bool;

    fn embed(&self, text: &str) -> Vec<f64>;
}

/// Token counts hashed into a fixed number of buckets, L2-normalized.
/// Text without tokens embeds to the zero vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedBagOfTokens {
    dim: usize,
}

impl HashedBagOfTokens {
    pub const DEFAULT_DIMENSION: usize = 256;

    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }
}

impl Default for HashedBagOfTokens {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIMENSION)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

impl Embedder for HashedBagOfTokens {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for t in tokenize(text) {
            v[(fnv1a(t.as_bytes()) % self.dim as u64) as usize] += 1.0;
        }
        normalize(v)
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpEmbedderConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub response_path: String,
    pub dimension: usize,
    pub timeout_secs: u64,
}

impl Default for HttpEmbedderConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model: String::new(),
            api_key: None,
            response_path: "data.0.embedding".into(),
            dimension: HashedBagOfTokens::DEFAULT_DIMENSION,
            timeout_secs: 60,
        }
    }
}

/// Remote embedding endpoint. Any failure, including a vector of the wrong
/// dimension, falls back to [`HashedBagOfTokens`] of the same dimension.
pub struct HttpEmbedder {
    config: HttpEmbedderConfig,
    agent: ureq::Agent,
    fallback: HashedBagOfTokens,
}

impl HttpEmbedder {
    pub fn new(config: HttpEmbedderConfig) -> Self {
        let agent = ureq::Agent::new_with_config(
            ureq::Agent::config_builder()
                .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
                .http_status_as_error(false)
                .build(),
        );
        let fallback = HashedBagOfTokens::new(config.dimension.max(1));
        Self {
            config,
            agent,
            fallback,
        }
    }

    fn remote(&self, text: &str) -> Result<Vec<f64>, String> {
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let body = serde_json::json!({ "model": self.config.model, "input": text });
        let mut response = req.send_json(&body).map_err(|e| e.to_string())?;
        if !response.status().is_success() {
            return Err(format!("status {}", response.status()));
        }
        let text = response.body_mut().read_to_string().map_err(|e| e.to_string())?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        let arr = extract_json_path(&value, &self.config.response_path)
            .and_then(|v| v.as_array())
            .ok_or("no embedding at response path")?;
        let v: Vec<f64> = arr.iter().filter_map(|x| x.as_f64()).collect();
        if v.len() != self.config.dimension || v.len() != arr.len() {
            return Err(format!("expected {} numbers, got {}", self.config.dimension, arr.len()));
        }
        Ok(normalize(v))
    }
}

impl Embedder for HttpEmbedder {
    fn dimension(&self) -> usize {
        self.config.dimension
    }

    fn deterministic(&self) -> bool {
        false
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        match self.remote(text) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("embedding endpoint failed ({e}); using hashed bag-of-tokens");
                self.fallback.embed(text)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_and_order_invariant() {
        let e = HashedBagOfTokens::default();
        assert_eq!(e.embed("a b"), e.embed("b a"));
        assert_eq!(e.embed("FDA approval"), e.embed("FDA approval"));
        assert_eq!(e.embed("x").len(), 256);
    }

    #[test]
    fn empty_text_is_zero() {
        let e = HashedBagOfTokens::default();
        assert!(e.embed("  ...  ").iter().all(|x| *x == 0.0));
    }

    #[test]
    fn unreachable_endpoint_falls_back() {
        let e = HttpEmbedder::new(HttpEmbedderConfig {
            endpoint: "http://127.0.0.1:9/embed".into(),
            timeout_secs: 2,
            ..Default::default()
        });
        assert_eq!(e.embed("a b"), HashedBagOfTokens::default().embed("a b"));
    }

    proptest! {
        #[test]
        fn unit_norm(text in "[a-z ]{1,80}") {
            prop_assume!(text.split_whitespace().next().is_some());
            let v = HashedBagOfTokens::default().embed(&text);
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((n - 1.0).abs() < 1e-9);
        }
    }
}
