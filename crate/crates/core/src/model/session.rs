use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::EngineConfig;
use super::events::{CommandEvent, Event, EventEntry, StepEvent};
use super::ids::{BlockId, IdCounter, MapId, SessionId};
use super::stage::WorkflowStage;
use super::types::{DraftState, InspirationBlock, JokeMap, TopicBrief, TopicSummary};
use crate::error::{Error, Result};

/// Root canvas state. Operations never mutate a session in place; they
/// return a new snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: SessionId,
    pub brief: TopicBrief,
    pub summary: Option<TopicSummary>,
    pub maps: Vec<JokeMap>,
    pub stage: WorkflowStage,
    pub final_map_id: Option<MapId>,
    pub event_log: Vec<Event>,
    pub config: EngineConfig,
    pub ids: IdCounter,
}

impl Session {
    /// Builds a fresh session at `TopicIdeation`.
    pub fn create(
        id: SessionId,
        brief: TopicBrief,
        config: EngineConfig,
        now: DateTime<Utc>,
    ) -> Result<Session> {
        if !brief.is_valid() {
            return Err(Error::EmptyTopic);
        }
        config.validate()?;
        let mut session = Session {
            id,
            brief,
            summary: None,
            maps: Vec::new(),
            stage: WorkflowStage::TopicIdeation,
            final_map_id: None,
            event_log: Vec::new(),
            config,
            ids: IdCounter::default(),
        };
        session.begin(now, CommandEvent::SessionCreated);
        Ok(session)
    }

    /// Appends a command event and returns its sequence number.
    pub(crate) fn begin(&mut self, at: DateTime<Utc>, command: CommandEvent) -> u64 {
        let seq = self.event_log.len() as u64 + 1;
        self.event_log.push(Event {
            seq,
            at,
            command: seq,
            entry: EventEntry::Command(command),
        });
        seq
    }

    pub(crate) fn note(&mut self, at: DateTime<Utc>, command: u64, step: StepEvent) {
        let seq = self.event_log.len() as u64 + 1;
        self.event_log.push(Event {
            seq,
            at,
            command,
            entry: EventEntry::Step(step),
        });
    }

    pub fn command_count(&self) -> usize {
        self.event_log.iter().filter(|e| e.is_command()).count()
    }

    pub fn last_event_at(&self) -> Option<DateTime<Utc>> {
        self.event_log.last().map(|e| e.at)
    }

    pub fn map(&self, id: &MapId) -> Result<&JokeMap> {
        self.maps
            .iter()
            .find(|m| &m.id == id)
            .ok_or_else(|| Error::UnknownMap(id.clone()))
    }

    pub fn map_mut(&mut self, id: &MapId) -> Result<&mut JokeMap> {
        self.maps
            .iter_mut()
            .find(|m| &m.id == id)
            .ok_or_else(|| Error::UnknownMap(id.clone()))
    }

    pub fn block(&self, map: &MapId, block: &BlockId) -> Result<&InspirationBlock> {
        self.map(map)?
            .block(block)
            .ok_or_else(|| Error::UnknownBlock(block.clone()))
    }

    pub fn confirmed_summary(&self) -> Result<&TopicSummary> {
        match &self.summary {
            Some(s) if s.confirmed => Ok(s),
            Some(_) => Err(Error::GuardUnsatisfied("summary is not confirmed".into())),
            None => Err(Error::NoSummary),
        }
    }

    pub(crate) fn require_stage(&self, operation: &'static str, stage: WorkflowStage) -> Result<()> {
        if self.stage == stage {
            Ok(())
        } else {
            Err(Error::WrongStage {
                operation,
                stage: self.stage,
            })
        }
    }

    /// Moves the stage machine one edge, logging a `StageChanged` step under `command`.
    pub(crate) fn advance(
        &mut self,
        at: DateTime<Utc>,
        command: u64,
        target: WorkflowStage,
    ) -> Result<()> {
        let from = self.stage;
        if !from.can_transition_to(target) {
            return Err(Error::IllegalTransition { from, to: target });
        }
        self.check_guard(target)?;
        self.stage = target;
        self.note(at, command, StepEvent::StageChanged { from, to: target });
        Ok(())
    }

    fn check_guard(&self, target: WorkflowStage) -> Result<()> {
        use WorkflowStage::*;
        match (self.stage, target) {
            (TopicIdeation, TopicIdeation) => {
                if self.summary.as_ref().is_some_and(|s| s.confirmed) {
                    return Err(Error::GuardUnsatisfied(
                        "summary already confirmed".into(),
                    ));
                }
            }
            (TopicIdeation, InspirationGeneration) => {
                if !self.summary.as_ref().is_some_and(|s| s.confirmed) {
                    return Err(Error::GuardUnsatisfied(
                        "a confirmed topic summary is required".into(),
                    ));
                }
            }
            (InspirationGeneration, ValidationRefinement) => {
                if !self.maps.iter().any(|m| !m.prototypes.is_empty()) {
                    return Err(Error::GuardUnsatisfied(
                        "at least one joke map with a prototype is required".into(),
                    ));
                }
            }
            (ValidationRefinement, FinalSynthesis) => {
                let Some(id) = &self.final_map_id else {
                    return Err(Error::GuardUnsatisfied("no map selected as final".into()));
                };
                let map = self.map(id)?;
                if map.draft_state != DraftState::Fresh {
                    return Err(Error::GuardUnsatisfied(
                        "final map draft must be fresh".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("session serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Applies an explicit stage transition as its own command.
pub fn transition(session: &Session, target: WorkflowStage, now: DateTime<Utc>) -> Result<Session> {
    let from = session.stage;
    if !from.can_transition_to(target) {
        return Err(Error::IllegalTransition { from, to: target });
    }
    session.check_guard(target)?;
    let mut next = session.clone();
    let cmd = next.begin(now, CommandEvent::Transition { target });
    next.advance(now, cmd, target)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::clock::{Clock, ScriptedClock};

    fn fresh() -> (Session, ScriptedClock) {
        let clock = ScriptedClock::default();
        let brief = TopicBrief::new("Troubles of Adult Life")
            .with_supplements(["exaggerated expressions", "workplace burnout"]);
        let s = Session::create("sess-1".into(), brief, EngineConfig::default(), clock.now()).unwrap();
        (s, clock)
    }

    fn summary(confirmed: bool) -> TopicSummary {
        TopicSummary {
            theme: "t".into(),
            audience: "a".into(),
            style: "s".into(),
            techniques: vec![],
            raw_text: "r".into(),
            confirmed,
        }
    }

    #[test]
    fn create_starts_in_ideation_with_one_event() {
        let (s, _) = fresh();
        assert_eq!(s.stage, WorkflowStage::TopicIdeation);
        assert!(s.maps.is_empty());
        assert_eq!(s.event_log.len(), 1);
        assert_eq!(s.event_log[0].entry, EventEntry::Command(CommandEvent::SessionCreated));
    }

    #[test]
    fn create_rejects_blank_topic_and_bad_config() {
        let clock = ScriptedClock::default();
        let err = Session::create("s".into(), TopicBrief::new("   "), EngineConfig::default(), clock.now());
        assert!(matches!(err, Err(Error::EmptyTopic)));
        let cfg = EngineConfig {
            theme_count: 0,
            ..Default::default()
        };
        let err = Session::create("s".into(), TopicBrief::new("x"), cfg, clock.now());
        assert!(matches!(err, Err(Error::InvalidConfig { .. })));
    }

    #[test]
    fn transition_requires_confirmed_summary() {
        let (mut s, clock) = fresh();
        let err = transition(&s, WorkflowStage::InspirationGeneration, clock.now()).unwrap_err();
        assert!(matches!(err, Error::GuardUnsatisfied(_)));
        s.summary = Some(summary(true));
        let next = transition(&s, WorkflowStage::InspirationGeneration, clock.now()).unwrap();
        assert_eq!(next.stage, WorkflowStage::InspirationGeneration);
        assert!(next.event_log.len() > s.event_log.len());
    }

    #[test]
    fn backward_jump_is_illegal_and_names_both_stages() {
        let (mut s, clock) = fresh();
        s.stage = WorkflowStage::FinalSynthesis;
        let err = transition(&s, WorkflowStage::TopicIdeation, clock.now()).unwrap_err();
        match err {
            Error::IllegalTransition { from, to } => {
                assert_eq!(from, WorkflowStage::FinalSynthesis);
                assert_eq!(to, WorkflowStage::TopicIdeation);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_message_names_stages());
    }

    fn err_message_names_stages() -> bool {
        let msg = Error::IllegalTransition {
            from: WorkflowStage::FinalSynthesis,
            to: WorkflowStage::TopicIdeation,
        }
        .to_string();
        msg.contains("FinalSynthesis") && msg.contains("TopicIdeation")
    }

    #[test]
    fn resummary_self_loop_blocked_after_confirm() {
        let (mut s, clock) = fresh();
        s.summary = Some(summary(false));
        assert!(transition(&s, WorkflowStage::TopicIdeation, clock.now()).is_ok());
        s.summary = Some(summary(true));
        assert!(transition(&s, WorkflowStage::TopicIdeation, clock.now()).is_err());
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let (s, _) = fresh();
        assert_eq!(s.digest(), s.clone().digest());
        let mut t = s.clone();
        t.brief.topic.push('!');
        assert_ne!(s.digest(), t.digest());
    }
}
