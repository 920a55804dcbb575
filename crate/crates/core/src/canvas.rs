//! Canvas commands: block and map edits in AI and manual modes.
//!
//! Every command that succeeds appends exactly one command event. Edits and
//! manual adds have `_deferred` forms that return the enrichment ticket
//! instead of running it, for callers that run enrichment as a job.

use serde::{Deserialize, Serialize};

use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::model::{
    transition, BlockId, BlockOrigin, CommandEvent, EchoAssistantView, EchoSummary, EnrichmentState, InspirationBlock,
    JokeMap, MapId, MapMode, Session, StepEvent, TopicBrief, WorkflowStage,
};
use crate::pipeline::enrichment::{apply_enrichment, plan_enrichment, run_enrichment, ApplyOutcome, EnrichmentTicket};
use crate::pipeline::{ops, stages, Run};

fn require_refinement(session: &Session, op: &'static str) -> Result<()> {
    session.require_stage(op, WorkflowStage::ValidationRefinement)
}

fn clean_text(text: &str) -> Result<String> {
    let t = text.trim();
    if t.is_empty() {
        Err(Error::EmptyBlockText)
    } else {
        Ok(t.to_owned())
    }
}

/// Replaces a block's text and marks it and its map's draft stale. The
/// returned ticket re-enriches the block.
pub fn edit_block_deferred(
    engine: &Engine,
    session: &Session,
    map: &MapId,
    block: &BlockId,
    new_text: &str,
) -> Result<(Session, EnrichmentTicket)> {
    require_refinement(session, "edit_block")?;
    session.block(map, block)?;
    let text = clean_text(new_text)?;
    let mut next = session.clone();
    let cmd = next.begin(
        engine.now(),
        CommandEvent::EditBlock {
            map: map.clone(),
            block: block.clone(),
        },
    );
    let m = next.map_mut(map)?;
    let b = m.block_mut(block).expect("block checked above");
    b.text = text;
    b.revision += 1;
    b.enrichment_state = EnrichmentState::Stale;
    m.mark_pool_changed();
    let ticket = plan_enrichment(&next, cmd, map, block)?;
    Ok((next, ticket))
}

/// Edits a block and re-enriches it synchronously.
pub fn edit_block(engine: &Engine, session: &Session, map: &MapId, block: &BlockId, new_text: &str) -> Result<(Session, ApplyOutcome)> {
    let (next, ticket) = edit_block_deferred(engine, session, map, block, new_text)?;
    let result = run_enrichment(engine, ticket);
    Ok(apply_enrichment(engine, &next, result))
}

pub fn delete_block(engine: &Engine, session: &Session, map: &MapId, block: &BlockId) -> Result<Session> {
    require_refinement(session, "delete_block")?;
    session.block(map, block)?;
    let mut next = session.clone();
    next.begin(
        engine.now(),
        CommandEvent::DeleteBlock {
            map: map.clone(),
            block: block.clone(),
        },
    );
    let m = next.map_mut(map)?;
    m.pool.retain(|b| &b.id != block);
    m.mark_pool_changed();
    Ok(next)
}

/// Searches again under the map's theme and appends one enriched AI block.
pub fn add_block_ai(engine: &Engine, session: &Session, map: &MapId) -> Result<Session> {
    require_refinement(session, "add_block_ai")?;
    let m = session.map(map)?;
    let theme = m.theme.clone().ok_or_else(|| Error::ThemeMissing(map.clone()))?;
    let keywords = if m.keywords.is_empty() {
        vec![theme.label.clone()]
    } else {
        m.keywords.clone()
    };
    let summary = session.confirmed_summary()?.clone();
    let run = Run::new(engine, &session.id, &session.config);
    let evidence = run.search(keywords)?.value;
    if evidence.is_empty() {
        return Err(Error::EmptyEvidence(theme.label));
    }
    let text = stages::distill(&run, &summary, &theme, &evidence, 1)?
        .value
        .into_iter()
        .next()
        .expect("schema requires exactly one block");
    let echo = stages::echo(&run, &summary, &text, &evidence)?.value;

    let mut next = session.clone();
    let cmd = next.begin(engine.now(), CommandEvent::AddBlockAi { map: map.clone() });
    let id = next.ids.block();
    let block = InspirationBlock {
        echo: Some(EchoSummary {
            block_id: id.clone(),
            text: echo,
            source_generation: 1,
        }),
        id: id.clone(),
        text,
        origin: BlockOrigin::Ai,
        evidence,
        enrichment_state: EnrichmentState::Enriched,
        generation: 1,
        revision: 0,
        annotation: None,
    };
    let m = next.map_mut(map)?;
    m.pool.push(block);
    m.mark_pool_changed();
    let now = engine.now();
    next.note(now, cmd, StepEvent::BlockAdded { map: map.clone(), block: id.clone() });
    next.note(
        now,
        cmd,
        StepEvent::BlockEnriched {
            map: map.clone(),
            block: id,
            generation: 1,
        },
    );
    Ok(next)
}

/// Appends a writer-authored block in `pending` state and returns the
/// ticket that enriches it.
pub fn add_block_manual_deferred(
    engine: &Engine,
    session: &Session,
    map: &MapId,
    text: &str,
) -> Result<(Session, EnrichmentTicket)> {
    require_refinement(session, "add_block_manual")?;
    session.map(map)?;
    let text = clean_text(text)?;
    let mut next = session.clone();
    let cmd = next.begin(engine.now(), CommandEvent::AddBlockManual { map: map.clone() });
    let id = next.ids.block();
    let m = next.map_mut(map)?;
    m.pool.push(InspirationBlock::manual(id.clone(), text));
    m.mark_pool_changed();
    next.note(engine.now(), cmd, StepEvent::BlockAdded { map: map.clone(), block: id.clone() });
    let ticket = plan_enrichment(&next, cmd, map, &id)?;
    Ok((next, ticket))
}

pub fn add_block_manual(engine: &Engine, session: &Session, map: &MapId, text: &str) -> Result<(Session, ApplyOutcome)> {
    let (next, ticket) = add_block_manual_deferred(engine, session, map, text)?;
    let result = run_enrichment(engine, ticket);
    Ok(apply_enrichment(engine, &next, result))
}

/// Adds a map. AI mode derives one theme distinct from the existing ones and
/// runs the full pipeline for it; a failure there leaves an annotated map.
/// Manual mode adds an empty frame.
pub fn add_joke_map(engine: &Engine, session: &Session, mode: MapMode) -> Result<Session> {
    require_refinement(session, "add_joke_map")?;
    let mut next = session.clone();
    let cmd = next.begin(engine.now(), CommandEvent::AddMap { mode });
    match mode {
        MapMode::Manual => {
            let map = JokeMap::empty(next.ids.map(), MapMode::Manual, None);
            next.note(engine.now(), cmd, StepEvent::MapCreated { map: map.id.clone() });
            next.maps.push(map);
        }
        MapMode::AiGenerated => {
            // Theme derivation failing still yields a map, just an unthemed
            // annotated one.
            let mut attempt = next.clone();
            if let Err(e) = ops::generate_maps(engine, &mut attempt, cmd, 1) {
                let mut map = JokeMap::empty(next.ids.map(), MapMode::AiGenerated, None);
                map.annotation = Some(e.to_string());
                next.note(
                    engine.now(),
                    cmd,
                    StepEvent::MapFailed {
                        map: map.id.clone(),
                        reason: e.code().to_owned(),
                    },
                );
                next.maps.push(map);
            } else {
                next = attempt;
            }
        }
    }
    Ok(next)
}

pub fn remove_joke_map(engine: &Engine, session: &Session, map: &MapId) -> Result<Session> {
    if !matches!(
        session.stage,
        WorkflowStage::ValidationRefinement | WorkflowStage::FinalSynthesis
    ) {
        return Err(Error::WrongStage {
            operation: "remove_joke_map",
            stage: session.stage,
        });
    }
    session.map(map)?;
    if session.final_map_id.as_ref() == Some(map) {
        return Err(Error::MapFinalized(map.clone()));
    }
    let mut next = session.clone();
    next.begin(engine.now(), CommandEvent::RemoveMap { map: map.clone() });
    next.maps.retain(|m| &m.id != map);
    Ok(next)
}

/// Read-only Echo Assistant projection of one block.
pub fn inspect_block(session: &Session, map: &MapId, block: &BlockId) -> Result<EchoAssistantView> {
    let b = session.block(map, block)?;
    Ok(EchoAssistantView {
        block_id: b.id.clone(),
        block_text: b.text.clone(),
        echo: b.echo.as_ref().map(|e| e.text.clone()),
        evidence: b.evidence.clone(),
        enrichment_state: b.enrichment_state,
    })
}

/// Selects `map` as the final joke and moves to `FinalSynthesis`.
pub fn finalize_joke(engine: &Engine, session: &Session, map: &MapId) -> Result<Session> {
    require_refinement(session, "finalize_joke")?;
    let m = session.map(map)?;
    if m.prototypes.is_empty() {
        return Err(Error::NoPrototype(map.clone()));
    }
    if m.draft_state != crate::model::DraftState::Fresh {
        return Err(Error::DraftStale(map.clone()));
    }
    let mut next = session.clone();
    let now = engine.now();
    let cmd = next.begin(now, CommandEvent::Finalize { map: map.clone() });
    next.final_map_id = Some(map.clone());
    next.advance(now, cmd, WorkflowStage::FinalSynthesis)?;
    Ok(next)
}

/// A mutating command in serializable form, shared by trace replay and the
/// HTTP service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Command {
    Summarize,
    Resummarize { brief: TopicBrief },
    ConfirmSummary,
    Generate,
    Transition { target: WorkflowStage },
    AddMap { mode: MapMode },
    RemoveMap { map: MapId },
    AddBlockAi { map: MapId },
    AddBlockManual { map: MapId, text: String },
    EditBlock { map: MapId, block: BlockId, text: String },
    DeleteBlock { map: MapId, block: BlockId },
    ReenrichBlock { map: MapId, block: BlockId },
    Regenerate { map: MapId },
    CompleteManualMap { map: MapId },
    Finalize { map: MapId },
}

/// Result of [`execute`]: the new snapshot plus the enrichment outcome for
/// commands that enrich a single block.
#[derive(Debug, Clone, PartialEq)]
pub struct Executed {
    pub session: Session,
    pub enrichment: Option<ApplyOutcome>,
}

impl From<Session> for Executed {
    fn from(session: Session) -> Self {
        Self {
            session,
            enrichment: None,
        }
    }
}

impl From<(Session, ApplyOutcome)> for Executed {
    fn from((session, outcome): (Session, ApplyOutcome)) -> Self {
        Self {
            session,
            enrichment: Some(outcome),
        }
    }
}

/// Runs one command synchronously.
pub fn execute(engine: &Engine, session: &Session, command: &Command) -> Result<Executed> {
    use Command::*;
    Ok(match command {
        Summarize => ops::summarize_topic(engine, session)?.into(),
        Resummarize { brief } => ops::resummarize(engine, session, brief.clone())?.into(),
        ConfirmSummary => ops::confirm_summary(engine, session)?.into(),
        Generate => ops::initial_generation(engine, session)?.into(),
        Transition { target } => transition(session, *target, engine.now())?.into(),
        AddMap { mode } => add_joke_map(engine, session, *mode)?.into(),
        RemoveMap { map } => remove_joke_map(engine, session, map)?.into(),
        AddBlockAi { map } => add_block_ai(engine, session, map)?.into(),
        AddBlockManual { map, text } => add_block_manual(engine, session, map, text)?.into(),
        EditBlock { map, block, text } => edit_block(engine, session, map, block, text)?.into(),
        DeleteBlock { map, block } => delete_block(engine, session, map, block)?.into(),
        ReenrichBlock { map, block } => ops::reenrich_block(engine, session, map, block)?.into(),
        Regenerate { map } => ops::regenerate_joke(engine, session, map)?.into(),
        CompleteManualMap { map } => ops::complete_manual_map(engine, session, map)?.into(),
        Finalize { map } => finalize_joke(engine, session, map)?.into(),
    })
}
