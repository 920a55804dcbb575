//! Seeded generative providers for offline demos, benchmarks and fuzzing.
//!
//! [`SyntheticProvider`] answers any builtin template with a schema-valid
//! record and any search with generated hits. [`Faulty`] wraps a provider and
//! injects failures from a seeded schedule.

use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{LmProvider, LmRequest, ProviderError, SearchHit, SearchProvider, SearchRequest};
use crate::prompt::builtin::{BLOCKS, ECHO, JOKE_DRAFT, KEYWORDS, THEMES, TOPIC_SUMMARY};

const WORDS: &[&str] = &[
    "overtime", "deadline", "coffee", "meeting", "inbox", "commute", "rent", "landlord", "gym", "diet",
    "roommate", "boss", "intern", "weekend", "alarm", "subway", "spreadsheet", "wellness", "promotion",
    "vacation", "laundry", "takeout", "budget", "group chat",
];

struct State {
    rng: ChaCha8Rng,
    serial: u64,
}

pub struct SyntheticProvider {
    state: Mutex<State>,
    min_hits: u32,
    max_hits: u32,
}

impl SyntheticProvider {
    pub fn new(seed: u64) -> Self {
        Self {
            state: Mutex::new(State {
                rng: ChaCha8Rng::seed_from_u64(seed),
                serial: 0,
            }),
            min_hits: 1,
            max_hits: 8,
        }
    }

    /// Range of hits returned per search before `top_k` truncation.
    pub fn with_hit_range(mut self, min: u32, max: u32) -> Self {
        assert!(min <= max);
        self.min_hits = min;
        self.max_hits = max;
        self
    }

    fn phrase(state: &mut State, words: usize) -> String {
        (0..words)
            .map(|_| WORDS[state.rng.random_range(0..WORDS.len())])
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn count_binding(request: &LmRequest, key: &str) -> usize {
    request
        .prompt
        .bindings
        .get(key)
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(1)
}

impl LmProvider for SyntheticProvider {
    fn complete(&self, request: &LmRequest) -> Result<String, ProviderError> {
        let mut s = self.state.lock().expect("synthetic lock");
        s.serial += 1;
        let serial = s.serial;
        let value = match request.template_name() {
            TOPIC_SUMMARY => json!({
                "theme": Self::phrase(&mut s, 3),
                "audience": "young office workers",
                "style": "observational",
                "techniques": ["exaggeration", "callback"],
                "summary": format!("A routine about {}.", Self::phrase(&mut s, 4)),
            }),
            THEMES => {
                let n = count_binding(request, "theme_count");
                let themes: Vec<_> = (0..n)
                    .map(|i| {
                        json!({
                            "label": format!("Angle {serial}.{i}: {}", Self::phrase(&mut s, 2)),
                            "rationale": Self::phrase(&mut s, 5),
                        })
                    })
                    .collect();
                json!({ "themes": themes })
            }
            KEYWORDS => {
                let n = s.rng.random_range(1..=4);
                let kws: Vec<_> = (0..n).map(|_| Self::phrase(&mut s, 2)).collect();
                json!({ "keywords": kws })
            }
            BLOCKS => {
                let n = count_binding(request, "block_count");
                let blocks: Vec<_> = (0..n)
                    .map(|i| format!("Idea {serial}.{i}: {}", Self::phrase(&mut s, 6)))
                    .collect();
                json!({ "blocks": blocks })
            }
            ECHO => json!({ "echo": format!("Resonates because of {}.", Self::phrase(&mut s, 3)) }),
            JOKE_DRAFT => json!({
                "title": format!("Draft {serial}: {}", Self::phrase(&mut s, 2)),
                "setup": Self::phrase(&mut s, 8),
                "punchline": Self::phrase(&mut s, 6),
            }),
            other => {
                return Err(ProviderError::InvalidRequest(format!(
                    "synthetic provider has no generator for {other}"
                )))
            }
        };
        Ok(value.to_string())
    }
}

impl SearchProvider for SyntheticProvider {
    fn search(&self, request: &SearchRequest) -> Result<Vec<SearchHit>, ProviderError> {
        let mut s = self.state.lock().expect("synthetic lock");
        let n = s.rng.random_range(self.min_hits..=self.max_hits);
        let mut hits = Vec::with_capacity(n as usize);
        for _ in 0..n {
            s.serial += 1;
            let serial = s.serial;
            hits.push(SearchHit {
                url: format!("https://synthetic.example/{serial}"),
                title: format!("{} ({})", Self::phrase(&mut s, 3), request.query()),
                snippet: Self::phrase(&mut s, 10),
            });
        }
        Ok(hits)
    }
}

/// Failure schedule shared by a [`Faulty`] wrapper.
pub struct FaultPlan {
    rng: Mutex<ChaCha8Rng>,
    probability: f64,
}

impl FaultPlan {
    pub fn new(seed: u64, probability: f64) -> Self {
        Self {
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
            probability,
        }
    }

    fn draw(&self) -> Option<ProviderError> {
        let mut rng = self.rng.lock().expect("fault lock");
        if rng.random_bool(self.probability) {
            Some(match rng.random_range(0..3) {
                0 => ProviderError::Timeout,
                1 => ProviderError::QuotaExceeded,
                _ => ProviderError::transport("injected"),
            })
        } else {
            None
        }
    }
}

/// Wraps a provider; each call fails with the plan's probability.
pub struct Faulty<P> {
    inner: P,
    plan: std::sync::Arc<FaultPlan>,
}

impl<P> Faulty<P> {
    pub fn new(inner: P, plan: std::sync::Arc<FaultPlan>) -> Self {
        Self { inner, plan }
    }
}

impl<P: LmProvider> LmProvider for Faulty<P> {
    fn complete(&self, request: &LmRequest) -> Result<String, ProviderError> {
        match self.plan.draw() {
            Some(e) => Err(e),
            None => self.inner.complete(request),
        }
    }
}

impl<P: SearchProvider> SearchProvider for Faulty<P> {
    fn search(&self, request: &SearchRequest) -> Result<Vec<SearchHit>, ProviderError> {
        match self.plan.draw() {
            Some(e) => Err(e),
            None => self.inner.search(request),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::model::EngineConfig;
    use crate::prompt::{assemble_prompt, builtin_templates, validate_output};

    #[test]
    fn every_template_answer_validates() {
        let config = EngineConfig::default();
        let p = SyntheticProvider::new(7);
        for (name, (template, schema)) in builtin_templates(&config) {
            let bindings: BTreeMap<String, String> = template
                .placeholders
                .iter()
                .map(|k| {
                    let v = match k.as_str() {
                        "theme_count" => "3".to_owned(),
                        "block_count" => "4".to_owned(),
                        _ => "x".to_owned(),
                    };
                    (k.clone(), v)
                })
                .collect();
            let prompt = assemble_prompt(&template, &bindings).unwrap();
            let req = LmRequest {
                prompt,
                temperature: 0.3,
                schema_name: schema.name.clone(),
                max_retries: 0,
            };
            let raw = p.complete(&req).unwrap();
            validate_output(&raw, &schema).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn same_seed_same_output() {
        let a = SyntheticProvider::new(3);
        let b = SyntheticProvider::new(3);
        let req = SearchRequest::new(vec!["k".into()], 5);
        assert_eq!(a.search(&req).unwrap(), b.search(&req).unwrap());
    }
}
