//! Session-level pipeline operations. Each takes a snapshot and returns a
//! new one; on error the input snapshot is the state to keep.

use super::enrichment::{enrich_now, ApplyOutcome};
use super::{stages, Run};
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::model::{
    BlockId, CommandEvent, EnrichmentState, IdCounter, InspirationTheme, JokeMap, JokePrototype, MapId, MapMode,
    Session, StepEvent, TopicBrief, TopicSummary, WorkflowStage,
};

fn run_for<'a>(engine: &'a Engine, session: &'a Session) -> Run<'a> {
    Run::new(engine, &session.id, &session.config)
}

pub fn summarize_topic(engine: &Engine, session: &Session) -> Result<Session> {
    session.require_stage("summarize_topic", WorkflowStage::TopicIdeation)?;
    let summary = stages::summarize(&run_for(engine, session), &session.brief)?.value;
    let mut next = session.clone();
    let cmd = next.begin(engine.now(), CommandEvent::Summarize);
    next.summary = Some(summary);
    next.note(engine.now(), cmd, StepEvent::SummaryGenerated);
    Ok(next)
}

/// Replaces the brief and regenerates the unconfirmed summary.
pub fn resummarize(engine: &Engine, session: &Session, brief: TopicBrief) -> Result<Session> {
    if session.summary.as_ref().is_some_and(|s| s.confirmed) {
        return Err(Error::SummaryAlreadyConfirmed);
    }
    session.require_stage("resummarize", WorkflowStage::TopicIdeation)?;
    if !brief.is_valid() {
        return Err(Error::EmptyTopic);
    }
    let summary = stages::summarize(&run_for(engine, session), &brief)?.value;
    let mut next = session.clone();
    let cmd = next.begin(engine.now(), CommandEvent::Resummarize);
    next.brief = brief;
    next.summary = Some(summary);
    next.note(engine.now(), cmd, StepEvent::SummaryGenerated);
    next.advance(engine.now(), cmd, WorkflowStage::TopicIdeation)?;
    Ok(next)
}

pub fn confirm_summary(engine: &Engine, session: &Session) -> Result<Session> {
    match &session.summary {
        None => return Err(Error::NoSummary),
        Some(s) if s.confirmed => return Err(Error::SummaryAlreadyConfirmed),
        Some(_) => {}
    }
    session.require_stage("confirm_summary", WorkflowStage::TopicIdeation)?;
    let mut next = session.clone();
    let now = engine.now();
    let cmd = next.begin(now, CommandEvent::ConfirmSummary);
    if let Some(s) = next.summary.as_mut() {
        s.confirmed = true;
    }
    next.advance(now, cmd, WorkflowStage::InspirationGeneration)?;
    Ok(next)
}

/// Keywords, pool and first draft for a themed map. Stops at the first
/// failing stage, keeping what was produced and annotating the map.
fn populate_ai_map(
    engine: &Engine,
    session_id: &crate::model::SessionId,
    config: &crate::model::EngineConfig,
    summary: &TopicSummary,
    map: &mut JokeMap,
    ids: &mut IdCounter,
) -> Result<()> {
    let run = Run::new(engine, session_id, config);
    let theme = map.theme.clone().expect("ai maps are themed");
    let result = (|| -> Result<()> {
        map.keywords = stages::expand_keywords(&run, summary, &theme)?.value;
        map.pool =
            stages::build_inspiration_pool(&run, summary, &theme, &map.keywords, config.blocks_per_pool as usize, ids)?
                .value;
        let draft = stages::draft_joke(&run, summary, map)?.value;
        let prototype = JokePrototype {
            version: map.next_version(),
            title: draft.title,
            setup: draft.setup,
            punchline: draft.punchline,
            informed_by: map.pool.iter().map(|b| b.id.clone()).collect(),
            created_at: engine.now(),
        };
        map.push_prototype(prototype);
        Ok(())
    })();
    if let Err(e) = &result {
        map.annotation = Some(e.to_string());
    }
    result
}

/// Derives `count` new themes distinct from the existing map themes and
/// appends one populated map per theme. Returns the new map ids.
pub(crate) fn generate_maps(engine: &Engine, next: &mut Session, cmd: u64, count: usize) -> Result<Vec<MapId>> {
    let summary = next.confirmed_summary()?.clone();
    let exclusions: Vec<String> = next.maps.iter().filter_map(|m| m.theme.as_ref()).map(|t| t.label.clone()).collect();
    let run = Run::new(engine, &next.id, &next.config);
    let themes = stages::derive_themes(&run, &summary, &exclusions, count, &mut next.ids)?.value;
    next.note(engine.now(), cmd, StepEvent::ThemesDerived { count: themes.len() });
    let mut created = Vec::with_capacity(themes.len());
    for theme in themes {
        let mut map = JokeMap::empty(next.ids.map(), MapMode::AiGenerated, Some(theme));
        let outcome = populate_ai_map(engine, &next.id, &next.config, &summary, &mut map, &mut next.ids);
        let step = match outcome {
            Ok(()) => StepEvent::MapCreated { map: map.id.clone() },
            Err(e) => StepEvent::MapFailed {
                map: map.id.clone(),
                reason: e.code().to_owned(),
            },
        };
        created.push(map.id.clone());
        next.maps.push(map);
        next.note(engine.now(), cmd, step);
    }
    Ok(created)
}

/// Builds the initial maps, one per derived theme, then moves to
/// `ValidationRefinement`. Theme failures degrade to annotated maps; if no
/// map gets a prototype the whole operation fails.
pub fn initial_generation(engine: &Engine, session: &Session) -> Result<Session> {
    session.require_stage("initial_generation", WorkflowStage::InspirationGeneration)?;
    session.confirmed_summary()?;
    let mut next = session.clone();
    let cmd = next.begin(engine.now(), CommandEvent::Generate);
    let count = next.config.theme_count as usize;
    let created = generate_maps(engine, &mut next, cmd, count)?;
    let any_drafted = created
        .iter()
        .any(|id| next.map(id).is_ok_and(|m| !m.prototypes.is_empty()));
    if !any_drafted {
        let reasons: Vec<String> = created
            .iter()
            .filter_map(|id| next.map(id).ok().and_then(|m| m.annotation.clone()))
            .collect();
        return Err(Error::InitialGenerationFailed(reasons.join("; ")));
    }
    next.advance(engine.now(), cmd, WorkflowStage::ValidationRefinement)?;
    Ok(next)
}

/// Re-runs search and echo for a stale or pending block. Failures leave the
/// block stale and annotated and are reported through `ApplyOutcome`.
pub fn reenrich_block(engine: &Engine, session: &Session, map: &MapId, block: &BlockId) -> Result<(Session, ApplyOutcome)> {
    session.require_stage("reenrich_block", WorkflowStage::ValidationRefinement)?;
    let b = session.block(map, block)?;
    if b.enrichment_state == EnrichmentState::Enriched {
        return Err(Error::NotStale(block.clone()));
    }
    let mut next = session.clone();
    let cmd = next.begin(
        engine.now(),
        CommandEvent::ReenrichBlock {
            map: map.clone(),
            block: block.clone(),
        },
    );
    enrich_now(engine, &next, cmd, map, block)
}

fn push_draft(engine: &Engine, next: &mut Session, cmd: u64, map_id: &MapId) -> Result<u32> {
    let summary = next.confirmed_summary()?.clone();
    let draft = stages::draft_joke(&run_for(engine, next), &summary, next.map(map_id)?)?.value;
    let map = next.map_mut(map_id)?;
    let version = map.next_version();
    let prototype = JokePrototype {
        version,
        title: draft.title,
        setup: draft.setup,
        punchline: draft.punchline,
        informed_by: map.pool.iter().map(|b| b.id.clone()).collect(),
        created_at: engine.now(),
    };
    map.push_prototype(prototype);
    next.note(
        engine.now(),
        cmd,
        StepEvent::PrototypeDrafted {
            map: map_id.clone(),
            version,
        },
    );
    Ok(version)
}

/// Drafts a new prototype version from the current pool. Earlier versions
/// stay retrievable.
pub fn regenerate_joke(engine: &Engine, session: &Session, map: &MapId) -> Result<Session> {
    session.require_stage("regenerate_joke", WorkflowStage::ValidationRefinement)?;
    stages::check_draftable(session.map(map)?)?;
    let mut draft_session = session.clone();
    let cmd = draft_session.begin(engine.now(), CommandEvent::Regenerate { map: map.clone() });
    push_draft(engine, &mut draft_session, cmd, map)?;
    Ok(draft_session)
}

/// Enriches every non-enriched block of a manual map and then drafts. If
/// any enrichment fails, drafting is skipped and the map is annotated. A
/// map without theme takes the drafted title as its theme.
pub fn complete_manual_map(engine: &Engine, session: &Session, map: &MapId) -> Result<Session> {
    session.require_stage("complete_manual_map", WorkflowStage::ValidationRefinement)?;
    let m = session.map(map)?;
    if m.mode != MapMode::Manual {
        return Err(Error::GuardUnsatisfied(format!("{map} is not a manual map")));
    }
    if m.pool.is_empty() {
        return Err(Error::EmptyPool(map.clone()));
    }
    let pending: Vec<BlockId> = m.pool.iter().filter(|b| !b.is_enriched()).map(|b| b.id.clone()).collect();
    let mut next = session.clone();
    let cmd = next.begin(engine.now(), CommandEvent::CompleteManualMap { map: map.clone() });
    let mut failed = Vec::new();
    for block in &pending {
        let (after, outcome) = enrich_now(engine, &next, cmd, map, block)?;
        next = after;
        if !matches!(outcome, ApplyOutcome::Applied { .. }) {
            failed.push(block.to_string());
        }
    }
    if !failed.is_empty() {
        next.map_mut(map)?.annotation = Some(format!("enrichment failed for {}", failed.join(", ")));
        return Ok(next);
    }
    if let Err(e) = push_draft(engine, &mut next, cmd, map) {
        next.map_mut(map)?.annotation = Some(e.to_string());
        return Ok(next);
    }
    if next.map(map)?.theme.is_none() {
        let id = next.ids.theme();
        let m = next.map_mut(map)?;
        let label = m.current().map(|p| p.title.clone()).unwrap_or_default();
        m.theme = Some(InspirationTheme {
            id,
            label,
            rationale: String::new(),
        });
    }
    Ok(next)
}
