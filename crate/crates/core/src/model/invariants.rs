//! Structural checks over session snapshots.
//!
//! [`check_invariants`] inspects a single snapshot; [`check_evolution`]
//! compares two consecutive snapshots for the properties that only make
//! sense over time (monotone generations, append-only prototypes and log).

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::events::{CommandEvent, EventEntry};
use super::session::Session;
use super::stage::WorkflowStage;
use super::types::{BlockOrigin, DraftState, EnrichmentState, InspirationBlock, JokeMap};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Type the rule belongs to, e.g. `InspirationBlock`.
    pub entity: &'static str,
    /// Id of the offending value, when it has one.
    pub subject: Option<String>,
    pub field: &'static str,
    pub rule: &'static str,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.subject {
            Some(id) => write!(f, "{}[{}].{}: {}", self.entity, id, self.field, self.rule),
            None => write!(f, "{}.{}: {}", self.entity, self.field, self.rule),
        }
    }
}

struct Report(Vec<Violation>);

impl Report {
    fn check(
        &mut self,
        ok: bool,
        entity: &'static str,
        subject: Option<&str>,
        field: &'static str,
        rule: &'static str,
    ) {
        if !ok {
            self.0.push(Violation {
                entity,
                subject: subject.map(str::to_owned),
                field,
                rule,
            });
        }
    }
}

/// Returns every violated rule; empty iff the snapshot is well-formed.
pub fn check_invariants(session: &Session) -> Vec<Violation> {
    let mut r = Report(Vec::new());

    r.check(
        session.brief.is_valid(),
        "TopicBrief",
        None,
        "topic",
        "nonempty after trimming",
    );
    r.check(
        session.config.validate().is_ok(),
        "EngineConfig",
        None,
        "*",
        "all bounds hold",
    );

    if session.stage != WorkflowStage::TopicIdeation {
        r.check(
            session.summary.as_ref().is_some_and(|s| s.confirmed),
            "Session",
            Some(session.id.as_str()),
            "summary",
            "confirmed summary required past topic ideation",
        );
    } else {
        r.check(
            !session.summary.as_ref().is_some_and(|s| s.confirmed),
            "TopicSummary",
            None,
            "confirmed",
            "confirming a summary advances the stage",
        );
    }

    let mut seen = HashSet::new();
    for map in &session.maps {
        r.check(
            seen.insert(map.id.as_str().to_owned()),
            "Session",
            Some(map.id.as_str()),
            "maps",
            "map and block ids unique across session",
        );
        for block in &map.pool {
            r.check(
                seen.insert(block.id.as_str().to_owned()),
                "Session",
                Some(block.id.as_str()),
                "maps.pool",
                "map and block ids unique across session",
            );
        }
        check_map(&mut r, session, map);
    }

    let final_ok = match (&session.final_map_id, session.stage) {
        (Some(id), WorkflowStage::FinalSynthesis) => session
            .maps
            .iter()
            .find(|m| &m.id == id)
            .is_some_and(|m| m.draft_state == DraftState::Fresh),
        (None, WorkflowStage::FinalSynthesis) => false,
        (Some(_), _) => false,
        (None, _) => true,
    };
    r.check(
        final_ok,
        "Session",
        Some(session.id.as_str()),
        "final_map_id",
        "set exactly in FinalSynthesis and refers to a fresh map",
    );

    check_log(&mut r, session);
    r.0
}

fn check_map(r: &mut Report, session: &Session, map: &JokeMap) {
    let id = Some(map.id.as_str());
    if let Some(theme) = &map.theme {
        r.check(
            !theme.label.trim().is_empty(),
            "InspirationTheme",
            Some(theme.id.as_str()),
            "label",
            "nonempty",
        );
    }
    let consecutive = map
        .prototypes
        .iter()
        .enumerate()
        .all(|(i, p)| p.version as usize == i + 1);
    r.check(
        consecutive,
        "JokeMap",
        id,
        "prototypes",
        "versions are 1..N consecutive",
    );
    r.check(
        map.current_version as usize == map.prototypes.len(),
        "JokeMap",
        id,
        "current_version",
        "equals the newest version",
    );
    r.check(
        map.prototypes.is_empty() == (map.draft_state == DraftState::Empty),
        "JokeMap",
        id,
        "draft_state",
        "empty exactly when no prototype exists",
    );
    if map.draft_state == DraftState::Fresh {
        let pool_ids: Vec<_> = map.pool.iter().map(|b| &b.id).collect();
        let informed: Vec<_> = map
            .current()
            .map(|p| p.informed_by.iter().collect())
            .unwrap_or_default();
        r.check(
            pool_ids == informed,
            "JokePrototype",
            id,
            "informed_by",
            "fresh draft was built from the current pool",
        );
        r.check(
            map.pool.iter().all(InspirationBlock::is_enriched),
            "JokeMap",
            id,
            "draft_state",
            "fresh draft implies every block enriched",
        );
    }
    for block in &map.pool {
        check_block(r, session, block);
    }
}

fn check_block(r: &mut Report, session: &Session, block: &InspirationBlock) {
    let id = Some(block.id.as_str());
    r.check(
        !block.text.trim().is_empty(),
        "InspirationBlock",
        id,
        "text",
        "nonempty",
    );
    if block.enrichment_state == EnrichmentState::Enriched {
        r.check(
            block.echo.is_some(),
            "InspirationBlock",
            id,
            "echo",
            "enriched block carries an echo summary",
        );
        r.check(
            !block.evidence.is_empty(),
            "InspirationBlock",
            id,
            "evidence",
            "enriched block carries evidence",
        );
        r.check(
            block
                .echo
                .as_ref()
                .is_none_or(|e| e.source_generation == block.generation),
            "EchoSummary",
            id,
            "source_generation",
            "matches block generation when enriched",
        );
    }
    if block.origin == BlockOrigin::Manual && block.enrichment_state == EnrichmentState::Pending {
        r.check(
            block.echo.is_none(),
            "InspirationBlock",
            id,
            "echo",
            "pending manual block has no echo",
        );
    }
    if let Some(echo) = &block.echo {
        r.check(
            echo.block_id == block.id,
            "EchoSummary",
            id,
            "block_id",
            "refers to owning block",
        );
    }
    let horizon = session.last_event_at();
    for item in &block.evidence {
        r.check(
            !item.url.trim().is_empty(),
            "EvidenceItem",
            id,
            "url",
            "nonempty",
        );
        r.check(
            horizon.is_some_and(|h| item.retrieved_at <= h),
            "EvidenceItem",
            id,
            "retrieved_at",
            "not in the future of the session clock",
        );
    }
}

fn check_log(r: &mut Report, session: &Session) {
    let log = &session.event_log;
    r.check(
        matches!(
            log.first().map(|e| &e.entry),
            Some(EventEntry::Command(CommandEvent::SessionCreated))
        ),
        "Session",
        None,
        "event_log",
        "starts with SessionCreated",
    );
    let seq_ok = log.iter().enumerate().all(|(i, e)| e.seq as usize == i + 1);
    r.check(seq_ok, "Session", None, "event_log", "seq is 1..N");
    let time_ok = log.windows(2).all(|w| w[0].at <= w[1].at);
    r.check(time_ok, "Session", None, "event_log", "timestamps nondecreasing");
    let tags_ok = log.iter().all(|e| match e.entry {
        EventEntry::Command(_) => e.command == e.seq,
        EventEntry::Step(_) => {
            e.command < e.seq
                && log
                    .get(e.command as usize - 1)
                    .is_some_and(|c| c.is_command())
        }
    });
    r.check(
        tags_ok,
        "Session",
        None,
        "event_log",
        "steps are tagged with an earlier command",
    );
}

/// Rules relating a snapshot to its successor.
pub fn check_evolution(before: &Session, after: &Session) -> Vec<Violation> {
    let mut r = Report(Vec::new());
    r.check(
        after.event_log.len() >= before.event_log.len()
            && after.event_log[..before.event_log.len()] == before.event_log[..],
        "Session",
        None,
        "event_log",
        "append-only",
    );
    for old in &before.maps {
        let Some(new) = after.maps.iter().find(|m| m.id == old.id) else {
            continue;
        };
        r.check(
            new.prototypes.len() >= old.prototypes.len()
                && new.prototypes[..old.prototypes.len()] == old.prototypes[..],
            "JokeMap",
            Some(old.id.as_str()),
            "prototypes",
            "append-only",
        );
        for ob in &old.pool {
            if let Some(nb) = new.block(&ob.id) {
                r.check(
                    nb.generation >= ob.generation,
                    "InspirationBlock",
                    Some(ob.id.as_str()),
                    "generation",
                    "never decreases",
                );
            }
        }
    }
    if let (Some(a), Some(b)) = (&before.summary, &after.summary) {
        if a.confirmed {
            r.check(
                a == b,
                "TopicSummary",
                None,
                "confirmed",
                "confirmed summary is immutable",
            );
        }
    }
    r.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::clock::{Clock, ScriptedClock};
    use crate::model::config::EngineConfig;
    use crate::model::ids::{BlockId, MapId};
    use crate::model::types::{EchoSummary, MapMode, TopicBrief};

    fn session() -> Session {
        let clock = ScriptedClock::default();
        Session::create(
            "sess-1".into(),
            TopicBrief::new("topic"),
            EngineConfig::default(),
            clock.now(),
        )
        .unwrap()
    }

    #[test]
    fn fresh_session_is_clean() {
        assert!(check_invariants(&session()).is_empty());
    }

    #[test]
    fn enriched_block_without_echo_is_reported() {
        let mut s = session();
        let mut map = JokeMap::empty(MapId::from("map-1"), MapMode::Manual, None);
        let mut block = InspirationBlock::manual(BlockId::from("blk-2"), "idea");
        block.enrichment_state = EnrichmentState::Enriched;
        map.pool.push(block);
        s.maps.push(map);
        let v = check_invariants(&s);
        assert!(v
            .iter()
            .any(|v| v.entity == "InspirationBlock" && v.field == "echo"));
        assert!(v.iter().any(|v| v.field == "evidence"));
    }

    #[test]
    fn duplicate_ids_are_reported() {
        let mut s = session();
        s.maps.push(JokeMap::empty("map-1".into(), MapMode::Manual, None));
        s.maps.push(JokeMap::empty("map-1".into(), MapMode::Manual, None));
        assert!(check_invariants(&s)
            .iter()
            .any(|v| v.rule.contains("unique")));
    }

    #[test]
    fn stale_echo_generation_is_reported() {
        let mut s = session();
        let mut map = JokeMap::empty("map-1".into(), MapMode::Manual, None);
        let mut block = InspirationBlock::manual("blk-2".into(), "idea");
        block.enrichment_state = EnrichmentState::Enriched;
        block.generation = 2;
        block.echo = Some(EchoSummary {
            block_id: "blk-2".into(),
            text: "e".into(),
            source_generation: 1,
        });
        block.evidence.push(crate::model::types::EvidenceItem {
            url: "https://example.org".into(),
            title: "t".into(),
            snippet: "s".into(),
            retrieved_at: s.event_log[0].at,
        });
        map.pool.push(block);
        s.maps.push(map);
        let v = check_invariants(&s);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].entity, "EchoSummary");
    }

    #[test]
    fn final_stage_without_final_map_is_reported() {
        let mut s = session();
        s.stage = WorkflowStage::FinalSynthesis;
        let v = check_invariants(&s);
        assert!(v.iter().any(|v| v.field == "final_map_id"));
        assert!(v.iter().any(|v| v.field == "summary"));
    }

    #[test]
    fn evolution_catches_rewritten_history() {
        let a = session();
        let mut b = a.clone();
        b.event_log.clear();
        assert!(!check_evolution(&a, &b).is_empty());
        assert!(check_evolution(&a, &a).is_empty());
    }
}
