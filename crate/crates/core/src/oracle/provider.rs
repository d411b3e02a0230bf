//! Chat-completion providers.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::OracleError;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Wire request: `{model, messages, temperature}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn user(model: &str, prompt: &str, temperature: f64) -> Self {
        Self {
            model: model.to_string(),
            messages: vec![ChatMessage {
                role: "user".into(),
                content: prompt.to_string(),
            }],
            temperature,
        }
    }
}

/// Anything that turns a chat request into assistant text.
pub trait ChatProvider: Send + Sync {
    /// Stable identifier that takes part in cache keys.
    fn id(&self) -> &str;

    fn complete(&self, request: &ChatRequest) -> Result<String, OracleError>;
}

impl<P: ChatProvider + ?Sized> ChatProvider for std::sync::Arc<P> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, OracleError> {
        (**self).complete(request)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub endpoint: String,
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    /// Dotted path to the assistant text in the response body.
    #[serde(default = "default_response_path")]
    pub response_path: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Total attempts per request.
    #[serde(default = "default_attempts")]
    pub attempts: u32,
    /// First retry delay; doubled on every further retry.
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
}

fn default_response_path() -> String {
    "choices.0.message.content".into()
}
fn default_timeout() -> u64 {
    120
}
fn default_attempts() -> u32 {
    3
}
fn default_backoff() -> u64 {
    500
}

impl ProviderConfig {
    pub fn new(endpoint: &str) -> Self {
        Self {
            endpoint: endpoint.to_string(),
            api_key: None,
            response_path: default_response_path(),
            timeout_secs: default_timeout(),
            attempts: default_attempts(),
            backoff_ms: default_backoff(),
        }
    }
}

/// Looks up a dotted path such as `choices.0.message.content`; numeric
/// segments index arrays.
pub fn extract_json_path<'a>(value: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.')
        .filter(|s| !s.is_empty())
        .try_fold(value, |v, seg| match v {
            Value::Array(items) => seg.parse::<usize>().ok().and_then(|i| items.get(i)),
            Value::Object(map) => map.get(seg),
            _ => None,
        })
}

/// Runs `op` up to `attempts` times with exponential backoff.
pub fn with_retries<T>(
    attempts: u32,
    backoff_ms: u64,
    mut op: impl FnMut() -> Result<T, OracleError>,
) -> Result<T, OracleError> {
    let attempts = attempts.max(1);
    let mut delay = backoff_ms;
    let mut last = None;
    for attempt in 0..attempts {
        match op() {
            Ok(v) => return Ok(v),
            Err(e) => {
                log::warn!("attempt {}/{attempts} failed: {e}", attempt + 1);
                last = Some(e);
                if attempt + 1 < attempts && delay > 0 {
                    thread::sleep(Duration::from_millis(delay));
                    delay = delay.saturating_mul(2);
                }
            }
        }
    }
    Err(last.expect("at least one attempt"))
}

/// OpenAI-style chat-completion endpoint over blocking HTTP.
pub struct HttpChatProvider {
    config: ProviderConfig,
    agent: ureq::Agent,
    id: String,
    requests: AtomicUsize,
}

impl HttpChatProvider {
    pub fn new(config: ProviderConfig) -> Self {
        let agent = ureq::Agent::new_with_config(
            ureq::Agent::config_builder()
                .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
                .http_status_as_error(false)
                .build(),
        );
        Self {
            id: format!("http:{}", config.endpoint),
            config,
            agent,
            requests: AtomicUsize::new(0),
        }
    }

    /// HTTP requests sent so far, retries included.
    pub fn requests_sent(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    fn attempt(&self, request: &ChatRequest) -> Result<String, OracleError> {
        self.requests.fetch_add(1, Ordering::SeqCst);
        let mut builder = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.config.api_key {
            builder = builder.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = builder
            .send_json(request)
            .map_err(|e| OracleError::Provider(e.to_string()))?;
        let status = response.status();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| OracleError::Provider(e.to_string()))?;
        if !status.is_success() {
            return Err(OracleError::Provider(format!(
                "HTTP {status}: {}",
                body.chars().take(200).collect::<String>()
            )));
        }
        let value: Value = serde_json::from_str(&body)
            .map_err(|e| OracleError::Provider(format!("response is not JSON: {e}")))?;
        match extract_json_path(&value, &self.config.response_path) {
            Some(Value::String(s)) => Ok(s.clone()),
            Some(other) => Err(OracleError::Provider(format!(
                "`{}` is not a string: {other}",
                self.config.response_path
            ))),
            None => Err(OracleError::Provider(format!(
                "response has no `{}`",
                self.config.response_path
            ))),
        }
    }
}

impl ChatProvider for HttpChatProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, OracleError> {
        with_retries(self.config.attempts, self.config.backoff_ms, || {
            self.attempt(request)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn json_path_lookup() {
        let v = json!({"choices": [{"message": {"content": "hi"}}]});
        assert_eq!(
            extract_json_path(&v, "choices.0.message.content"),
            Some(&json!("hi"))
        );
        assert_eq!(extract_json_path(&v, "choices.1.message"), None);
        assert_eq!(extract_json_path(&v, "output"), None);
    }

    #[test]
    fn retries_until_success() {
        let mut n = 0;
        let r = with_retries(3, 0, || {
            n += 1;
            if n < 3 {
                Err(OracleError::Provider("flaky".into()))
            } else {
                Ok(n)
            }
        });
        assert_eq!(r.unwrap(), 3);
    }

    #[test]
    fn retries_are_bounded() {
        let mut n = 0;
        let r: Result<(), _> = with_retries(3, 0, || {
            n += 1;
            Err(OracleError::Provider("down".into()))
        });
        assert!(r.is_err());
        assert_eq!(n, 3);
    }
}
