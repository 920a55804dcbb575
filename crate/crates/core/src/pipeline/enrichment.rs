//! Block enrichment split into plan, run and apply.
//!
//! A ticket captures the block's revision when it is planned. Running a
//! ticket needs no session, so a service can do it outside the session
//! lock. Applying compares revisions again: if the block was edited or
//! removed in the meantime the result is discarded.

use super::{stages, Run};
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::model::{
    BlockId, EchoSummary, EngineConfig, EnrichmentState, EvidenceItem, MapId, Session, SessionId, StepEvent,
    TopicSummary,
};

#[derive(Debug, Clone, PartialEq)]
pub struct EnrichmentTicket {
    pub session_id: SessionId,
    /// Seq of the command the enrichment belongs to.
    pub command: u64,
    pub map: MapId,
    pub block: BlockId,
    pub revision: u64,
    pub text: String,
    pub keywords: Vec<String>,
    pub summary: TopicSummary,
    pub config: EngineConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnrichmentResult {
    pub ticket: EnrichmentTicket,
    pub outcome: Result<(Vec<EvidenceItem>, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ApplyOutcome {
    Applied { generation: u64 },
    Failed(Error),
    /// The block changed or disappeared since the ticket was planned.
    Superseded,
}

/// Search keywords for re-enriching a block: its text, then the map theme.
fn block_keywords(session: &Session, map: &MapId, text: &str) -> Result<Vec<String>> {
    let mut keywords = vec![text.to_owned()];
    if let Some(theme) = &session.map(map)?.theme {
        if theme.label != text {
            keywords.push(theme.label.clone());
        }
    }
    Ok(keywords)
}

pub fn plan_enrichment(session: &Session, command: u64, map: &MapId, block: &BlockId) -> Result<EnrichmentTicket> {
    let b = session.block(map, block)?;
    Ok(EnrichmentTicket {
        session_id: session.id.clone(),
        command,
        map: map.clone(),
        block: block.clone(),
        revision: b.revision,
        text: b.text.clone(),
        keywords: block_keywords(session, map, &b.text)?,
        summary: session.confirmed_summary()?.clone(),
        config: session.config.clone(),
    })
}

/// Performs the ticket's search and echo calls.
pub fn run_enrichment(engine: &Engine, ticket: EnrichmentTicket) -> EnrichmentResult {
    let run = Run::new(engine, &ticket.session_id, &ticket.config);
    let outcome = stages::enrich(&run, &ticket.summary, &ticket.text, ticket.keywords.clone()).map(|o| o.value);
    EnrichmentResult { ticket, outcome }
}

/// Folds a result into `session`. A failure leaves the block stale with an
/// annotation; nothing outside the target block changes.
pub fn apply_enrichment(engine: &Engine, session: &Session, result: EnrichmentResult) -> (Session, ApplyOutcome) {
    let t = &result.ticket;
    let current = session.block(&t.map, &t.block).ok().map(|b| b.revision);
    let mut next = session.clone();
    let now = engine.now();
    if current != Some(t.revision) {
        next.note(
            now,
            t.command,
            StepEvent::EnrichmentSuperseded {
                map: t.map.clone(),
                block: t.block.clone(),
            },
        );
        return (next, ApplyOutcome::Superseded);
    }
    let block = next
        .map_mut(&t.map)
        .ok()
        .and_then(|m| m.block_mut(&t.block))
        .expect("block checked above");
    match result.outcome {
        Ok((evidence, echo)) => {
            block.generation += 1;
            let generation = block.generation;
            block.evidence = evidence;
            block.echo = Some(EchoSummary {
                block_id: block.id.clone(),
                text: echo,
                source_generation: generation,
            });
            block.enrichment_state = EnrichmentState::Enriched;
            block.annotation = None;
            next.note(
                now,
                t.command,
                StepEvent::BlockEnriched {
                    map: t.map.clone(),
                    block: t.block.clone(),
                    generation,
                },
            );
            (next, ApplyOutcome::Applied { generation })
        }
        Err(e) => {
            block.enrichment_state = EnrichmentState::Stale;
            block.annotation = Some(e.to_string());
            next.note(
                now,
                t.command,
                StepEvent::EnrichmentFailed {
                    map: t.map.clone(),
                    block: t.block.clone(),
                    reason: e.code().to_owned(),
                },
            );
            (next, ApplyOutcome::Failed(e))
        }
    }
}

/// Plan, run and apply in one go.
pub fn enrich_now(engine: &Engine, session: &Session, command: u64, map: &MapId, block: &BlockId) -> Result<(Session, ApplyOutcome)> {
    let ticket = plan_enrichment(session, command, map, block)?;
    let result = run_enrichment(engine, ticket);
    Ok(apply_enrichment(engine, session, result))
}
