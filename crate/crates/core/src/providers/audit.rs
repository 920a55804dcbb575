use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SessionId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    Lm,
    Search,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallOutcome {
    Ok,
    /// Succeeded after this many transport retries.
    Retried(u32),
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderCallRecord {
    pub seq: u64,
    pub kind: CallKind,
    /// Template name for language-model calls.
    pub template: Option<String>,
    pub digest: String,
    pub outcome: CallOutcome,
    pub error: Option<String>,
    pub latency_us: u64,
}

/// Append-only, internally synchronized call log keyed by session.
#[derive(Debug, Default)]
pub struct AuditLog {
    sessions: Mutex<HashMap<SessionId, Vec<ProviderCallRecord>>>,
}

impl AuditLog {
    pub fn register(&self, session: &SessionId) {
        self.sessions
            .lock()
            .expect("audit lock")
            .entry(session.clone())
            .or_default();
    }

    /// Appends a record and returns its seq. Seq assignment and append happen
    /// under one lock, so seqs are gap-free and strictly increasing.
    pub(crate) fn append(&self, session: &SessionId, mut record: ProviderCallRecord) -> u64 {
        let mut guard = self.sessions.lock().expect("audit lock");
        let log = guard.entry(session.clone()).or_default();
        record.seq = log.len() as u64 + 1;
        let seq = record.seq;
        log.push(record);
        seq
    }

    pub fn records(&self, session: &SessionId) -> Result<Vec<ProviderCallRecord>> {
        self.sessions
            .lock()
            .expect("audit lock")
            .get(session)
            .cloned()
            .ok_or_else(|| Error::UnknownSession(session.clone()))
    }

    pub fn len(&self, session: &SessionId) -> usize {
        self.sessions
            .lock()
            .expect("audit lock")
            .get(session)
            .map_or(0, Vec::len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec() -> ProviderCallRecord {
        ProviderCallRecord {
            seq: 0,
            kind: CallKind::Lm,
            template: None,
            digest: String::new(),
            outcome: CallOutcome::Ok,
            error: None,
            latency_us: 0,
        }
    }

    #[test]
    fn unknown_session_and_empty_log() {
        let log = AuditLog::default();
        let id = SessionId::from("s");
        assert!(matches!(log.records(&id), Err(Error::UnknownSession(_))));
        log.register(&id);
        assert!(log.records(&id).unwrap().is_empty());
    }

    #[test]
    fn concurrent_appends_get_distinct_ordered_seqs() {
        let log = std::sync::Arc::new(AuditLog::default());
        let id = SessionId::from("s");
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let log = log.clone();
                let id = id.clone();
                std::thread::spawn(move || {
                    for _ in 0..50 {
                        log.append(&id, rec());
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        let seqs: Vec<u64> = log.records(&id).unwrap().iter().map(|r| r.seq).collect();
        assert_eq!(seqs, (1..=400).collect::<Vec<_>>());
    }
}
