//! HTTP-backed providers.
//!
//! Credentials come from the environment only:
//!
//! | variable                 | meaning                                         |
//! |--------------------------|-------------------------------------------------|
//! | `JOKEASY_LM_API_KEY`     | bearer token for the chat-completions endpoint  |
//! | `JOKEASY_LM_BASE_URL`    | API base, default `https://api.moonshot.cn/v1`  |
//! | `JOKEASY_LM_MODEL`       | model name, default `moonshot-v1-auto`          |
//! | `JOKEASY_SEARCH_API_KEY` | Tavily API key                                  |

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};

use super::{LmProvider, LmRequest, ProviderError, SearchHit, SearchProvider, SearchRequest};

pub const ENV_LM_API_KEY: &str = "JOKEASY_LM_API_KEY";
pub const ENV_LM_BASE_URL: &str = "JOKEASY_LM_BASE_URL";
pub const ENV_LM_MODEL: &str = "JOKEASY_LM_MODEL";
pub const ENV_SEARCH_API_KEY: &str = "JOKEASY_SEARCH_API_KEY";

pub const DEFAULT_LM_BASE_URL: &str = "https://api.moonshot.cn/v1";
pub const DEFAULT_LM_MODEL: &str = "moonshot-v1-auto";
pub const DEFAULT_SEARCH_URL: &str = "https://api.tavily.com/search";

fn client(timeout: Duration) -> Client {
    Client::builder()
        .timeout(timeout)
        .build()
        .expect("http client builds")
}

fn classify(err: reqwest::Error) -> ProviderError {
    if err.is_timeout() {
        ProviderError::Timeout
    } else {
        ProviderError::transport(err.to_string())
    }
}

fn check_status(status: StatusCode, body: &str) -> Result<(), ProviderError> {
    if status.is_success() {
        return Ok(());
    }
    Err(match status {
        StatusCode::TOO_MANY_REQUESTS | StatusCode::PAYMENT_REQUIRED => ProviderError::QuotaExceeded,
        StatusCode::REQUEST_TIMEOUT | StatusCode::GATEWAY_TIMEOUT => ProviderError::Timeout,
        s if s.is_server_error() => ProviderError::transport(format!("{s}: {body}")),
        s => ProviderError::InvalidRequest(format!("{s}: {body}")),
    })
}

/// Any OpenAI-compatible `/chat/completions` endpoint.
#[derive(Debug, Clone)]
pub struct ChatCompletionsLm {
    client: Client,
    base_url: String,
    api_key: String,
    model: String,
}

impl ChatCompletionsLm {
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            client: client(Duration::from_secs(120)),
            base_url: base_url.into().trim_end_matches('/').to_owned(),
            api_key: api_key.into(),
            model: model.into(),
        }
    }

    pub fn from_env() -> Option<Self> {
        let key = std::env::var(ENV_LM_API_KEY).ok()?;
        let base = std::env::var(ENV_LM_BASE_URL).unwrap_or_else(|_| DEFAULT_LM_BASE_URL.to_owned());
        let model = std::env::var(ENV_LM_MODEL).unwrap_or_else(|_| DEFAULT_LM_MODEL.to_owned());
        Some(Self::new(base, key, model))
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.client = client(timeout);
        self
    }

    pub fn request_body(&self, request: &LmRequest) -> Value {
        json!({
            "model": self.model,
            "temperature": request.temperature,
            "response_format": { "type": "json_object" },
            "messages": [{ "role": "user", "content": request.prompt.text }],
        })
    }
}

/// Pulls `choices[0].message.content` out of a chat-completions reply.
pub fn parse_chat_response(body: &Value) -> Result<String, ProviderError> {
    body.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| ProviderError::transport("response has no message content"))
}

impl LmProvider for ChatCompletionsLm {
    fn complete(&self, request: &LmRequest) -> Result<String, ProviderError> {
        let response = self
            .client
            .post(format!("{}/chat/completions", self.base_url))
            .bearer_auth(&self.api_key)
            .json(&self.request_body(request))
            .send()
            .map_err(classify)?;
        let status = response.status();
        let text = response.text().map_err(classify)?;
        check_status(status, &text)?;
        let body: Value = serde_json::from_str(&text).map_err(|e| ProviderError::transport(e.to_string()))?;
        parse_chat_response(&body)
    }
}

/// Tavily search API client.
#[derive(Debug, Clone)]
pub struct TavilySearch {
    client: Client,
    endpoint: String,
    api_key: String,
}

impl TavilySearch {
    pub fn new(api_key: impl Into<String>) -> Self {
        Self {
            client: client(Duration::from_secs(30)),
            endpoint: DEFAULT_SEARCH_URL.to_owned(),
            api_key: api_key.into(),
        }
    }

    pub fn from_env() -> Option<Self> {
        std::env::var(ENV_SEARCH_API_KEY).ok().map(Self::new)
    }

    pub fn with_endpoint(mut self, endpoint: impl Into<String>) -> Self {
        self.endpoint = endpoint.into();
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.client = client(timeout);
        self
    }
}

/// Maps Tavily's `results[].{url,title,content}` onto [`SearchHit`],
/// dropping every other field.
pub fn normalize_tavily(body: &Value) -> Vec<SearchHit> {
    let Some(results) = body.get("results").and_then(Value::as_array) else {
        return Vec::new();
    };
    let field = |r: &Value, k: &str| r.get(k).and_then(Value::as_str).unwrap_or_default().to_owned();
    results
        .iter()
        .map(|r| SearchHit {
            url: field(r, "url"),
            title: field(r, "title"),
            snippet: field(r, "content"),
        })
        .collect()
}

impl SearchProvider for TavilySearch {
    fn search(&self, request: &SearchRequest) -> Result<Vec<SearchHit>, ProviderError> {
        let mut body = json!({
            "api_key": self.api_key,
            "query": request.query(),
            "max_results": request.top_k,
        });
        if let Some(fresh) = request.freshness_hint {
            body["days"] = json!(fresh.as_secs().div_ceil(86_400).max(1));
        }
        let response = self.client.post(&self.endpoint).json(&body).send().map_err(classify)?;
        let status = response.status();
        let text = response.text().map_err(classify)?;
        check_status(status, &text)?;
        let body: Value = serde_json::from_str(&text).map_err(|e| ProviderError::transport(e.to_string()))?;
        Ok(normalize_tavily(&body))
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::model::{ScriptedClock, SessionId};
    use crate::prompt::RenderedPrompt;
    use crate::providers::{CallOutcome, ProviderHub};

    fn req() -> LmRequest {
        LmRequest {
            prompt: RenderedPrompt {
                template_name: "topicSumGen".into(),
                text: "hello".into(),
                bindings: Default::default(),
            },
            temperature: 0.3,
            schema_name: "topicSummary".into(),
            max_retries: 2,
        }
    }

    #[test]
    fn normalizes_tavily_results() {
        let body = json!({
            "query": "q",
            "results": [
                {"url": "https://a", "title": "A", "content": "alpha", "score": 0.9, "raw_content": null},
                {"url": "https://b", "title": "B", "content": "beta"}
            ]
        });
        let hits = normalize_tavily(&body);
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0], SearchHit { url: "https://a".into(), title: "A".into(), snippet: "alpha".into() });
        assert!(normalize_tavily(&json!({})).is_empty());
    }

    #[test]
    fn chat_body_carries_temperature() {
        let lm = ChatCompletionsLm::new("http://x/v1/", "k", "m");
        let body = lm.request_body(&req());
        assert_eq!(body["temperature"], json!(0.3));
        assert_eq!(body["messages"][0]["content"], json!("hello"));
        assert_eq!(
            parse_chat_response(&json!({"choices":[{"message":{"content":"{}"}}]})).unwrap(),
            "{}"
        );
        assert!(parse_chat_response(&json!({})).is_err());
    }

    #[test]
    fn status_mapping() {
        assert_eq!(check_status(StatusCode::TOO_MANY_REQUESTS, ""), Err(ProviderError::QuotaExceeded));
        assert!(check_status(StatusCode::BAD_GATEWAY, "").unwrap_err().is_retryable());
        assert!(!check_status(StatusCode::UNAUTHORIZED, "").unwrap_err().is_retryable());
    }

    #[test]
    fn unreachable_endpoint_is_unavailable_after_retries() {
        // Port 9 on loopback refuses connections.
        let lm = Arc::new(ChatCompletionsLm::new("http://127.0.0.1:9/v1", "k", "m").with_timeout(Duration::from_secs(2)));
        let search = Arc::new(TavilySearch::new("k").with_endpoint("http://127.0.0.1:9/search"));
        let hub = ProviderHub::new(lm, search, Arc::new(ScriptedClock::default()));
        let sid = SessionId::from("s");
        let err = hub.lm_complete(&sid, &req()).unwrap_err();
        assert_eq!(err.code(), "ProviderUnavailable");
        let log = hub.audit().records(&sid).unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].outcome, CallOutcome::Failed);
    }
}
