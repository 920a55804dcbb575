use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use chrono::{DateTime, Utc};

use crate::error::Result;
use crate::model::{Clock, EngineConfig, Session, SessionId, TopicBrief};
use crate::prompt::Catalog;
use crate::providers::{FixtureProvider, FixtureScript, LmProvider, ProviderCallRecord, ProviderHub, SearchProvider};

enum SessionIds {
    Sequential(AtomicU64),
    Random,
}

/// Everything an operation needs besides the session snapshot itself:
/// providers, clock, template catalog and session id allocation.
pub struct Engine {
    hub: ProviderHub,
    catalog: Catalog,
    session_ids: SessionIds,
}

impl Engine {
    pub fn new(lm: Arc<dyn LmProvider>, search: Arc<dyn SearchProvider>, clock: Arc<dyn Clock>) -> Self {
        Self {
            hub: ProviderHub::new(lm, search, clock),
            catalog: Catalog::builtin(),
            session_ids: SessionIds::Sequential(AtomicU64::new(0)),
        }
    }

    /// Engine over a fixture script, using the script's scripted clock.
    pub fn with_fixture(script: FixtureScript) -> (Self, Arc<FixtureProvider>) {
        let clock = Arc::new(script.clock());
        let fixture = Arc::new(FixtureProvider::new(script));
        let engine = Self::new(fixture.clone(), fixture.clone(), clock);
        (engine, fixture)
    }

    pub fn with_catalog(mut self, catalog: Catalog) -> Self {
        self.catalog = catalog;
        self
    }

    /// Switches session ids from `sess-N` to random UUIDs.
    pub fn with_random_session_ids(mut self) -> Self {
        self.session_ids = SessionIds::Random;
        self
    }

    pub fn hub(&self) -> &ProviderHub {
        &self.hub
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.hub.clock().now()
    }

    fn next_session_id(&self) -> SessionId {
        match &self.session_ids {
            SessionIds::Sequential(n) => SessionId::new(format!("sess-{}", n.fetch_add(1, Ordering::SeqCst) + 1)),
            SessionIds::Random => SessionId::new(uuid::Uuid::new_v4().to_string()),
        }
    }

    pub fn create_session(&self, brief: TopicBrief, config: EngineConfig) -> Result<Session> {
        let id = self.next_session_id();
        if !brief.is_valid() {
            return Err(crate::Error::EmptyTopic);
        }
        config.validate()?;
        let session = Session::create(id, brief, config, self.now())?;
        self.hub.audit().register(&session.id);
        Ok(session)
    }

    /// Makes a session created elsewhere (e.g. loaded from disk) known to
    /// the audit log and keeps sequential ids from colliding with it.
    pub fn adopt(&self, session: &Session) {
        self.hub.audit().register(&session.id);
        if let SessionIds::Sequential(n) = &self.session_ids {
            if let Some(k) = session
                .id
                .as_str()
                .strip_prefix("sess-")
                .and_then(|s| s.parse::<u64>().ok())
            {
                n.fetch_max(k, Ordering::SeqCst);
            }
        }
    }

    pub fn audit_log(&self, session: &SessionId) -> Result<Vec<ProviderCallRecord>> {
        self.hub.audit().records(session)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WorkflowStage;

    #[test]
    fn create_session_and_empty_audit() {
        let (engine, _) = Engine::with_fixture(FixtureScript::new(true));
        let brief = TopicBrief::new("Troubles of Adult Life")
            .with_supplements(["exaggerated expressions", "workplace burnout"]);
        let s = engine.create_session(brief, EngineConfig::default()).unwrap();
        assert_eq!(s.id.as_str(), "sess-1");
        assert_eq!(s.stage, WorkflowStage::TopicIdeation);
        assert!(engine.audit_log(&s.id).unwrap().is_empty());
        assert!(engine.audit_log(&"nope".into()).is_err());
    }

    #[test]
    fn adopt_bumps_sequence() {
        let (engine, _) = Engine::with_fixture(FixtureScript::new(true));
        let mut s = engine.create_session(TopicBrief::new("x"), EngineConfig::default()).unwrap();
        s.id = "sess-7".into();
        engine.adopt(&s);
        let t = engine.create_session(TopicBrief::new("y"), EngineConfig::default()).unwrap();
        assert_eq!(t.id.as_str(), "sess-8");
    }
}
