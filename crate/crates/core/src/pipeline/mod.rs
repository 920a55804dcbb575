//! The language-model chain: summary, themes, keywords, retrieval, block
//! distillation, echo summaries and joke drafting.
//!
//! Stage functions in [`stages`] turn inputs into validated values and never
//! touch a session. The session-level operations in [`ops`] compose them,
//! log events and return new snapshots. [`enrichment`] splits block
//! enrichment into plan, run and apply so it can run detached from the
//! session lock.

pub mod enrichment;
pub mod ops;
pub mod stages;

use std::collections::BTreeMap;

use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::model::{EngineConfig, EvidenceItem, SessionId};
use crate::prompt::{assemble_prompt, validate_output, OutputSchema, Record, SchemaError};
use crate::providers::{LmRequest, SearchRequest};

pub use enrichment::{apply_enrichment, plan_enrichment, run_enrichment, ApplyOutcome, EnrichmentResult, EnrichmentTicket};
pub use ops::{
    complete_manual_map, confirm_summary, initial_generation, reenrich_block, regenerate_joke, resummarize,
    summarize_topic,
};
pub use stages::partition_evidence;

/// A stage's value plus the accounting needed to audit it.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome<T> {
    pub value: T,
    /// Schema retries used by the worst single structured call.
    pub retries_used: u32,
    /// Audit seqs of every provider call made.
    pub call_records: Vec<u64>,
}

impl<T> PipelineOutcome<T> {
    fn new(value: T) -> Self {
        Self {
            value,
            retries_used: 0,
            call_records: Vec::new(),
        }
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> PipelineOutcome<U> {
        PipelineOutcome {
            value: f(self.value),
            retries_used: self.retries_used,
            call_records: self.call_records,
        }
    }

    /// Takes over another outcome's accounting and returns its value.
    fn absorb<U>(&mut self, other: PipelineOutcome<U>) -> U {
        self.retries_used = self.retries_used.max(other.retries_used);
        self.call_records.extend(other.call_records);
        other.value
    }
}

/// Per-call context: engine, owning session and its config.
#[derive(Clone, Copy)]
pub struct Run<'a> {
    pub engine: &'a Engine,
    pub session_id: &'a SessionId,
    pub config: &'a EngineConfig,
}

impl<'a> Run<'a> {
    pub fn new(engine: &'a Engine, session_id: &'a SessionId, config: &'a EngineConfig) -> Self {
        Self {
            engine,
            session_id,
            config,
        }
    }

    /// Renders `template`, calls the model and validates the reply,
    /// re-issuing the identical prompt on schema errors up to
    /// `max_structured_retries` times. Provider errors end the loop at once.
    pub fn structured<T>(
        &self,
        template: &str,
        bindings: BTreeMap<String, String>,
        schema: &OutputSchema,
        parse: impl Fn(&Record) -> Result<T, SchemaError>,
    ) -> Result<PipelineOutcome<T>> {
        let tpl = self.engine.catalog().template(template, &self.config.content_language)?;
        let prompt = assemble_prompt(&tpl, &bindings)?;
        let request = LmRequest {
            prompt,
            temperature: self.config.lm_temperature,
            schema_name: schema.name.clone(),
            max_retries: self.config.transport_retries,
        };
        let mut calls = Vec::new();
        let mut last = None;
        for attempt in 0..=self.config.max_structured_retries {
            let (raw, seq) = self.engine.hub().lm_complete(self.session_id, &request)?;
            calls.push(seq);
            match validate_output(&raw, schema).and_then(|r| parse(&r)) {
                Ok(value) => {
                    return Ok(PipelineOutcome {
                        value,
                        retries_used: attempt,
                        call_records: calls,
                    })
                }
                Err(e) => last = Some(e),
            }
        }
        Err(Error::StructuredOutputFailed {
            template: template.to_owned(),
            attempts: self.config.max_structured_retries + 1,
            last: last.expect("at least one attempt"),
        })
    }

    pub fn search(&self, keywords: Vec<String>) -> Result<PipelineOutcome<Vec<EvidenceItem>>> {
        let request = SearchRequest::new(keywords, self.config.search_top_k);
        let (items, seq) = self
            .engine
            .hub()
            .search(self.session_id, &request, self.config.transport_retries)?;
        Ok(PipelineOutcome {
            value: items,
            retries_used: 0,
            call_records: vec![seq],
        })
    }
}

pub(crate) fn bindings<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_owned(), v)).collect()
}
