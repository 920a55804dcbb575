//! Deterministic scripted provider for both language-model and search calls.
//!
//! # File format
//!
//! A fixture is a TOML document:
//!
//! ```toml
//! strict = true                          # optional, default false
//! clock_start = "2025-03-01T09:00:00Z"   # optional scripted clock origin
//! clock_step_ms = 1000                   # optional scripted clock step
//!
//! [[entry]]
//! template = "topicSumGen"               # language-model call for this template
//! response = '''{"theme": "..."}'''
//!
//! [[entry]]
//! search = "burnout"                     # search whose joined keywords contain this
//! results = [{ url = "https://...", title = "...", snippet = "..." }]
//!
//! [[entry]]
//! search = "*"                           # any search
//! fail = "timeout"                       # or "unavailable" / "quota"
//! delay_ms = 200                         # optional, delays the reply
//! ```
//!
//! Every entry has exactly one of `template` or `search`, and exactly one of
//! `response` (template entries), `results` (search entries) or `fail`.
//! Entries are consumed at most once.
//!
//! In strict mode each call must match the first unconsumed entry; a
//! mismatch fails with `UnmatchedCall` and an empty script with
//! `ScriptExhausted`. Otherwise a call consumes the first unconsumed entry
//! that matches it; an unmatched language-model call fails with
//! `UnmatchedCall`, an unmatched search returns no results.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{LmProvider, LmRequest, ProviderError, SearchHit, SearchProvider, SearchRequest, UnavailableDetail};
use crate::model::ScriptedClock;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Matcher {
    Template(String),
    /// Case-insensitive substring of the joined keywords; `*` matches all.
    Search(String),
}

impl Matcher {
    fn matches_lm(&self, template: &str) -> bool {
        matches!(self, Matcher::Template(t) if t == template)
    }

    fn matches_search(&self, query: &str) -> bool {
        match self {
            Matcher::Search(p) if p == "*" => true,
            Matcher::Search(p) => query.to_lowercase().contains(&p.to_lowercase()),
            Matcher::Template(_) => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailKind {
    Timeout,
    Unavailable,
    Quota,
}

impl FailKind {
    fn error(self) -> ProviderError {
        match self {
            FailKind::Timeout => ProviderError::Timeout,
            FailKind::Unavailable => ProviderError::transport("scripted failure"),
            FailKind::Quota => ProviderError::QuotaExceeded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FixtureResponse {
    Text(String),
    Results(Vec<SearchHit>),
    Fail(FailKind),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureEntry {
    pub matcher: Matcher,
    pub response: FixtureResponse,
    pub delay_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FixtureScript {
    pub strict: bool,
    pub clock_start: Option<DateTime<Utc>>,
    pub clock_step_ms: Option<i64>,
    pub entries: Vec<FixtureEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureParseError {
    #[error("fixture is not valid TOML: {0}")]
    Toml(String),
    #[error("fixture entry {index}: {reason}")]
    Entry { index: usize, reason: String },
    #[error("cannot read fixture: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileRepr {
    #[serde(default)]
    strict: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    clock_start: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    clock_step_ms: Option<i64>,
    #[serde(default, rename = "entry")]
    entries: Vec<EntryRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    template: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    search: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    results: Option<Vec<SearchHit>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fail: Option<FailKind>,
    #[serde(default, skip_serializing_if = "is_zero")]
    delay_ms: u64,
}

fn is_zero(v: &u64) -> bool {
    *v == 0
}

impl FixtureScript {
    pub fn new(strict: bool) -> Self {
        Self {
            strict,
            ..Self::default()
        }
    }

    pub fn lm(mut self, template: &str, response: impl Into<String>) -> Self {
        self.entries.push(FixtureEntry {
            matcher: Matcher::Template(template.to_owned()),
            response: FixtureResponse::Text(response.into()),
            delay_ms: 0,
        });
        self
    }

    pub fn search(mut self, pattern: &str, hits: Vec<SearchHit>) -> Self {
        self.entries.push(FixtureEntry {
            matcher: Matcher::Search(pattern.to_owned()),
            response: FixtureResponse::Results(hits),
            delay_ms: 0,
        });
        self
    }

    pub fn fail(mut self, matcher: Matcher, kind: FailKind) -> Self {
        self.entries.push(FixtureEntry {
            matcher,
            response: FixtureResponse::Fail(kind),
            delay_ms: 0,
        });
        self
    }

    /// Delays the reply of the most recently added entry.
    pub fn delayed(mut self, delay_ms: u64) -> Self {
        if let Some(last) = self.entries.last_mut() {
            last.delay_ms = delay_ms;
        }
        self
    }

    pub fn load(path: &Path) -> Result<Self, FixtureParseError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(source: &str) -> Result<Self, FixtureParseError> {
        let repr: FileRepr = toml::from_str(source).map_err(|e| FixtureParseError::Toml(e.to_string()))?;
        let mut entries = Vec::with_capacity(repr.entries.len());
        for (i, e) in repr.entries.into_iter().enumerate() {
            let index = i + 1;
            let bad = |reason: &str| FixtureParseError::Entry {
                index,
                reason: reason.to_owned(),
            };
            let (matcher, response) = match (e.template, e.search) {
                (Some(t), None) => {
                    let response = match (e.response, e.fail, e.results) {
                        (Some(r), None, None) => FixtureResponse::Text(r),
                        (None, Some(f), None) => FixtureResponse::Fail(f),
                        _ => return Err(bad("template entries need exactly one of response or fail")),
                    };
                    (Matcher::Template(t), response)
                }
                (None, Some(p)) => {
                    let response = match (e.results, e.fail, e.response) {
                        (Some(r), None, None) => FixtureResponse::Results(r),
                        (None, Some(f), None) => FixtureResponse::Fail(f),
                        _ => return Err(bad("search entries need exactly one of results or fail")),
                    };
                    (Matcher::Search(p), response)
                }
                _ => return Err(bad("exactly one of template or search is required")),
            };
            entries.push(FixtureEntry {
                matcher,
                response,
                delay_ms: e.delay_ms,
            });
        }
        Ok(Self {
            strict: repr.strict,
            clock_start: repr.clock_start,
            clock_step_ms: repr.clock_step_ms,
            entries,
        })
    }

    pub fn to_toml(&self) -> String {
        let repr = FileRepr {
            strict: self.strict,
            clock_start: self.clock_start,
            clock_step_ms: self.clock_step_ms,
            entries: self
                .entries
                .iter()
                .map(|e| {
                    let (template, search) = match &e.matcher {
                        Matcher::Template(t) => (Some(t.clone()), None),
                        Matcher::Search(p) => (None, Some(p.clone())),
                    };
                    let (response, results, fail) = match &e.response {
                        FixtureResponse::Text(t) => (Some(t.clone()), None, None),
                        FixtureResponse::Results(r) => (None, Some(r.clone()), None),
                        FixtureResponse::Fail(f) => (None, None, Some(*f)),
                    };
                    EntryRepr {
                        template,
                        search,
                        response,
                        results,
                        fail,
                        delay_ms: e.delay_ms,
                    }
                })
                .collect(),
        };
        toml::to_string(&repr).expect("fixture serializes")
    }

    /// The scripted clock described by the header (defaults: 2025-01-01, 1 s).
    pub fn clock(&self) -> ScriptedClock {
        let default = ScriptedClock::default();
        let start = self.clock_start.unwrap_or_else(|| {
            DateTime::parse_from_rfc3339("2025-01-01T00:00:00Z")
                .expect("literal")
                .with_timezone(&Utc)
        });
        match self.clock_step_ms {
            Some(ms) => ScriptedClock::new(start, chrono::Duration::milliseconds(ms)),
            None if self.clock_start.is_some() => ScriptedClock::new(start, chrono::Duration::seconds(1)),
            None => default,
        }
    }
}

/// Serves a [`FixtureScript`] to both provider traits from a shared cursor.
#[derive(Debug)]
pub struct FixtureProvider {
    script: FixtureScript,
    consumed: Mutex<Vec<bool>>,
    exhausted_calls: AtomicU64,
    unmatched_calls: AtomicU64,
}

enum Call<'a> {
    Lm(&'a str),
    Search(&'a str),
}

impl FixtureProvider {
    pub fn new(script: FixtureScript) -> Self {
        let n = script.entries.len();
        Self {
            script,
            consumed: Mutex::new(vec![false; n]),
            exhausted_calls: AtomicU64::new(0),
            unmatched_calls: AtomicU64::new(0),
        }
    }

    pub fn script(&self) -> &FixtureScript {
        &self.script
    }

    pub fn remaining(&self) -> usize {
        self.consumed.lock().expect("fixture lock").iter().filter(|c| !**c).count()
    }

    /// Calls that arrived after a strict script ran out.
    pub fn exhausted_calls(&self) -> u64 {
        self.exhausted_calls.load(Ordering::SeqCst)
    }

    pub fn unmatched_calls(&self) -> u64 {
        self.unmatched_calls.load(Ordering::SeqCst)
    }

    fn take(&self, call: Call<'_>) -> Result<Option<FixtureEntry>, ProviderError> {
        let matches = |e: &FixtureEntry| match call {
            Call::Lm(t) => e.matcher.matches_lm(t),
            Call::Search(q) => e.matcher.matches_search(q),
        };
        let describe = || match call {
            Call::Lm(t) => format!("lm {t}"),
            Call::Search(q) => format!("search {q}"),
        };
        let mut consumed = self.consumed.lock().expect("fixture lock");
        let found = if self.script.strict {
            let Some(next) = consumed.iter().position(|c| !c) else {
                self.exhausted_calls.fetch_add(1, Ordering::SeqCst);
                return Err(ProviderError::Unavailable(UnavailableDetail::ScriptExhausted));
            };
            if !matches(&self.script.entries[next]) {
                self.unmatched_calls.fetch_add(1, Ordering::SeqCst);
                return Err(ProviderError::Unavailable(UnavailableDetail::UnmatchedCall(format!(
                    "{} does not match entry {}",
                    describe(),
                    next + 1
                ))));
            }
            Some(next)
        } else {
            (0..consumed.len()).find(|&i| !consumed[i] && matches(&self.script.entries[i]))
        };
        Ok(found.map(|i| {
            consumed[i] = true;
            self.script.entries[i].clone()
        }))
    }
}

fn pause(entry: &FixtureEntry) {
    if entry.delay_ms > 0 {
        thread::sleep(Duration::from_millis(entry.delay_ms));
    }
}

impl LmProvider for FixtureProvider {
    fn complete(&self, request: &LmRequest) -> Result<String, ProviderError> {
        let Some(entry) = self.take(Call::Lm(request.template_name()))? else {
            self.unmatched_calls.fetch_add(1, Ordering::SeqCst);
            return Err(ProviderError::Unavailable(UnavailableDetail::UnmatchedCall(format!(
                "lm {}",
                request.template_name()
            ))));
        };
        pause(&entry);
        match entry.response {
            FixtureResponse::Text(t) => Ok(t),
            FixtureResponse::Fail(kind) => Err(kind.error()),
            FixtureResponse::Results(_) => unreachable!("template entries never carry results"),
        }
    }
}

impl SearchProvider for FixtureProvider {
    fn search(&self, request: &SearchRequest) -> Result<Vec<SearchHit>, ProviderError> {
        let query = request.query();
        let Some(entry) = self.take(Call::Search(&query))? else {
            return Ok(Vec::new());
        };
        pause(&entry);
        match entry.response {
            FixtureResponse::Results(hits) => Ok(hits),
            FixtureResponse::Fail(kind) => Err(kind.error()),
            FixtureResponse::Text(_) => unreachable!("search entries never carry text"),
        }
    }
}
