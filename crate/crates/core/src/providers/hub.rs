use std::sync::Arc;
use std::time::Instant;

use super::audit::{AuditLog, CallKind, CallOutcome, ProviderCallRecord};
use super::{LmProvider, LmRequest, ProviderError, SearchProvider, SearchRequest};
use crate::model::{Clock, EvidenceItem, SessionId};

/// Audited front door to the providers.
pub struct ProviderHub {
    lm: Arc<dyn LmProvider>,
    search: Arc<dyn SearchProvider>,
    clock: Arc<dyn Clock>,
    audit: AuditLog,
}

impl ProviderHub {
    pub fn new(lm: Arc<dyn LmProvider>, search: Arc<dyn SearchProvider>, clock: Arc<dyn Clock>) -> Self {
        Self {
            lm,
            search,
            clock,
            audit: AuditLog::default(),
        }
    }

    pub fn audit(&self) -> &AuditLog {
        &self.audit
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    /// One audited language-model call; transport failures are retried up
    /// to `request.max_retries` times. Returns the text and the audit seq.
    pub fn lm_complete(&self, session: &SessionId, request: &LmRequest) -> Result<(String, u64), ProviderError> {
        let started = Instant::now();
        let result = request
            .validate()
            .and_then(|()| with_retries(request.max_retries, || self.lm.complete(request)));
        let seq = self.record(
            session,
            CallKind::Lm,
            Some(request.template_name().to_owned()),
            request.digest(),
            &result,
            started,
        );
        result.map(|(text, _)| (text, seq))
    }

    /// One audited search. Hits lacking a url or snippet are dropped, the
    /// rest are truncated to `top_k` in provider order and stamped with one
    /// retrieval time from the engine clock.
    pub fn search(
        &self,
        session: &SessionId,
        request: &SearchRequest,
        retries: u32,
    ) -> Result<(Vec<EvidenceItem>, u64), ProviderError> {
        let started = Instant::now();
        let result = request
            .validate()
            .and_then(|()| with_retries(retries, || self.search.search(request)));
        let seq = self.record(session, CallKind::Search, None, request.digest(), &result, started);
        let (hits, _) = result?;
        let retrieved_at = self.clock.now();
        let items = hits
            .into_iter()
            .filter(|h| !h.url.trim().is_empty() && !h.snippet.trim().is_empty())
            .take(request.top_k as usize)
            .map(|h| EvidenceItem {
                url: h.url.trim().to_owned(),
                title: h.title.trim().to_owned(),
                snippet: h.snippet.trim().to_owned(),
                retrieved_at,
            })
            .collect();
        Ok((items, seq))
    }

    fn record<T>(
        &self,
        session: &SessionId,
        kind: CallKind,
        template: Option<String>,
        digest: String,
        result: &Result<(T, u32), ProviderError>,
        started: Instant,
    ) -> u64 {
        let (outcome, error) = match result {
            Ok((_, 0)) => (CallOutcome::Ok, None),
            Ok((_, n)) => (CallOutcome::Retried(*n), None),
            Err(e) => (CallOutcome::Failed, Some(e.code().to_owned())),
        };
        self.audit.append(
            session,
            ProviderCallRecord {
                seq: 0,
                kind,
                template,
                digest,
                outcome,
                error,
                latency_us: started.elapsed().as_micros() as u64,
            },
        )
    }
}

fn with_retries<T>(
    retries: u32,
    mut call: impl FnMut() -> Result<T, ProviderError>,
) -> Result<(T, u32), ProviderError> {
    let mut attempt = 0;
    loop {
        match call() {
            Ok(v) => return Ok((v, attempt)),
            Err(e) if e.is_retryable() && attempt < retries => attempt += 1,
            Err(e) => return Err(e),
        }
    }
}
