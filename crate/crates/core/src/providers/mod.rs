//! Language-model and web-search provider contracts.
//!
//! Providers only move text. [`ProviderHub`] wraps them with transport
//! retries, result normalization and the per-session call audit.

mod audit;
pub mod canned;
pub mod fixture;
mod hub;
pub mod live;
pub mod synthetic;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::prompt::RenderedPrompt;

pub use audit::{AuditLog, CallKind, CallOutcome, ProviderCallRecord};
pub use fixture::{FailKind, FixtureEntry, FixtureProvider, FixtureResponse, FixtureScript, Matcher};
pub use hub::ProviderHub;

#[derive(Debug, Clone, PartialEq)]
pub struct LmRequest {
    pub prompt: RenderedPrompt,
    pub temperature: f64,
    pub schema_name: String,
    /// Transport retries allowed for this call.
    pub max_retries: u32,
}

impl LmRequest {
    pub fn template_name(&self) -> &str {
        &self.prompt.template_name
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(ProviderError::InvalidRequest(format!(
                "temperature {} outside [0, 1]",
                self.temperature
            )));
        }
        Ok(())
    }

    /// Audit digest. Always names the template and the temperature.
    pub fn digest(&self) -> String {
        format!(
            "lm template={} schema={} temperature={} max_retries={} prompt_sha256={}",
            self.prompt.template_name,
            self.schema_name,
            self.temperature,
            self.max_retries,
            hex::encode(Sha256::digest(self.prompt.text.as_bytes()))
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchRequest {
    pub keywords: Vec<String>,
    pub top_k: u32,
    pub freshness_hint: Option<Duration>,
}

impl SearchRequest {
    pub fn new(keywords: Vec<String>, top_k: u32) -> Self {
        Self {
            keywords,
            top_k,
            freshness_hint: None,
        }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.keywords.iter().all(|k| k.trim().is_empty()) {
            return Err(ProviderError::InvalidRequest("no search keywords".into()));
        }
        if self.top_k == 0 {
            return Err(ProviderError::InvalidRequest("top_k must be positive".into()));
        }
        Ok(())
    }

    /// Keywords joined into a single query string.
    pub fn query(&self) -> String {
        self.keywords
            .iter()
            .map(|k| k.trim())
            .filter(|k| !k.is_empty())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn digest(&self) -> String {
        format!("search keywords={} top_k={}", self.keywords.join("|"), self.top_k)
    }
}

/// A raw search result before it is stamped with a retrieval time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub url: String,
    #[serde(default)]
    pub title: String,
    pub snippet: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnavailableDetail {
    Transport(String),
    /// A fixture had no entry for the call.
    UnmatchedCall(String),
    /// A strict fixture ran out of entries.
    ScriptExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum ProviderError {
    #[error("provider unavailable: {0:?}")]
    Unavailable(UnavailableDetail),
    #[error("provider timed out")]
    Timeout,
    #[error("provider quota exceeded")]
    QuotaExceeded,
    #[error("invalid provider request: {0}")]
    InvalidRequest(String),
}

impl ProviderError {
    pub fn transport(msg: impl Into<String>) -> Self {
        ProviderError::Unavailable(UnavailableDetail::Transport(msg.into()))
    }

    pub fn code(&self) -> &'static str {
        match self {
            ProviderError::Unavailable(UnavailableDetail::ScriptExhausted) => "ScriptExhausted",
            ProviderError::Unavailable(_) => "ProviderUnavailable",
            ProviderError::Timeout => "Timeout",
            ProviderError::QuotaExceeded => "QuotaExceeded",
            ProviderError::InvalidRequest(_) => "InvalidRequest",
        }
    }

    /// Transport failures are retried inside one provider call; everything
    /// else surfaces immediately.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            ProviderError::Timeout | ProviderError::Unavailable(UnavailableDetail::Transport(_))
        )
    }
}

pub trait LmProvider: Send + Sync {
    fn complete(&self, request: &LmRequest) -> Result<String, ProviderError>;
}

pub trait SearchProvider: Send + Sync {
    /// Returns hits in provider rank order.
    fn search(&self, request: &SearchRequest) -> Result<Vec<SearchHit>, ProviderError>;
}

impl<T: LmProvider + ?Sized> LmProvider for std::sync::Arc<T> {
    fn complete(&self, request: &LmRequest) -> Result<String, ProviderError> {
        (**self).complete(request)
    }
}

impl<T: SearchProvider + ?Sized> SearchProvider for std::sync::Arc<T> {
    fn search(&self, request: &SearchRequest) -> Result<Vec<SearchHit>, ProviderError> {
        (**self).search(request)
    }
}
