mod common;

use common::{assert_clean, brief, map, refined};
use jokeasy_core::canvas;
use jokeasy_core::pipeline::{ops, stages, ApplyOutcome, Run};
use jokeasy_core::prompt::builtin::{ECHO, KEYWORDS, TOPIC_SUMMARY};
use jokeasy_core::prompt::SchemaErrorKind;
use jokeasy_core::providers::canned::{self, ScriptBuilder};
use jokeasy_core::providers::{CallKind, FailKind};
use jokeasy_core::{
    DraftState, Engine, EngineConfig, EnrichmentState, Error, IdCounter, InspirationTheme, MapMode, ThemeId,
    TopicSummary, WorkflowStage,
};

fn summary() -> TopicSummary {
    TopicSummary {
        theme: "adult life".into(),
        audience: "office workers".into(),
        style: "exaggerated".into(),
        techniques: vec!["exaggeration".into()],
        raw_text: "stuff".into(),
        confirmed: true,
    }
}

fn theme() -> InspirationTheme {
    InspirationTheme {
        id: ThemeId::new("thm-x"),
        label: "Workplace burnout".into(),
        rationale: String::new(),
    }
}

fn with_script(b: ScriptBuilder) -> (Engine, jokeasy_core::Session) {
    let (engine, _) = Engine::with_fixture(b.build());
    let s = engine.create_session(brief(), EngineConfig::default()).unwrap();
    (engine, s)
}

#[test]
fn summary_first_attempt_uses_one_call() {
    let (engine, s) = with_script(ScriptBuilder::new(true).summary("adult life"));
    let run = Run::new(&engine, &s.id, &s.config);
    let out = stages::summarize(&run, &s.brief).unwrap();
    assert_eq!(out.retries_used, 0);
    assert_eq!(out.call_records.len(), 1);
    assert!(!out.value.confirmed);
    let next = ops::summarize_topic(&engine, &s);
    assert!(next.is_err(), "script is used up");
}

#[test]
fn summary_retries_malformed_output() {
    let b = ScriptBuilder::new(true)
        .lm(TOPIC_SUMMARY, "sorry, I cannot")
        .lm(TOPIC_SUMMARY, r#"{"theme": "x"}"#)
        .summary("adult life");
    let (engine, s) = with_script(b);
    let run = Run::new(&engine, &s.id, &s.config);
    let out = stages::summarize(&run, &s.brief).unwrap();
    assert_eq!(out.retries_used, 2);
    assert_eq!(out.call_records.len(), 3);
    assert_eq!(out.value.theme, "adult life");
}

#[test]
fn summary_gives_up_after_retry_budget() {
    let b = ScriptBuilder::new(true)
        .lm(TOPIC_SUMMARY, "no")
        .lm(TOPIC_SUMMARY, "no")
        .lm(TOPIC_SUMMARY, "no");
    let (engine, s) = with_script(b);
    let err = ops::summarize_topic(&engine, &s).unwrap_err();
    match err {
        Error::StructuredOutputFailed { attempts, last, .. } => {
            assert_eq!(attempts, 3);
            assert_eq!(last.kind, SchemaErrorKind::Unparseable);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn resummarize_replaces_summary_and_brief() {
    let b = ScriptBuilder::new(true).summary("first").summary("second");
    let (engine, s) = with_script(b);
    let s = ops::summarize_topic(&engine, &s).unwrap();
    let revised = brief().with_supplements(["campus life"]);
    let s2 = ops::resummarize(&engine, &s, revised.clone()).unwrap();
    assert_eq!(s2.summary.as_ref().unwrap().theme, "second");
    assert_eq!(s2.brief, revised);
    assert_eq!(s2.stage, WorkflowStage::TopicIdeation);
    assert_clean(&s2);
}

#[test]
fn resummarize_identical_brief_is_deterministic() {
    let b = ScriptBuilder::new(true).summary("same").summary("same");
    let (engine, s) = with_script(b);
    let s = ops::summarize_topic(&engine, &s).unwrap();
    let s2 = ops::resummarize(&engine, &s, s.brief.clone()).unwrap();
    assert_eq!(s.summary.as_ref().unwrap().raw_text, s2.summary.as_ref().unwrap().raw_text);
}

#[test]
fn confirm_rules() {
    let (engine, s) = with_script(ScriptBuilder::new(true).summary("x"));
    assert_eq!(ops::confirm_summary(&engine, &s).unwrap_err(), Error::NoSummary);
    let s = ops::summarize_topic(&engine, &s).unwrap();
    let c = ops::confirm_summary(&engine, &s).unwrap();
    assert_eq!(c.stage, WorkflowStage::InspirationGeneration);
    assert_eq!(ops::confirm_summary(&engine, &c).unwrap_err(), Error::SummaryAlreadyConfirmed);
    assert_eq!(
        ops::resummarize(&engine, &c, brief()).unwrap_err(),
        Error::SummaryAlreadyConfirmed
    );
    assert_eq!(ops::resummarize(&engine, &s, jokeasy_core::TopicBrief::new(" ")).unwrap_err(), Error::EmptyTopic);
}

#[test]
fn derive_themes_counts_and_uniqueness() {
    let b = ScriptBuilder::new(true)
        .themes(&["a", "b", "c"])
        .themes(&["solo"])
        .themes(&["dup", "dup", "x"])
        .themes(&["dup", "dup", "x"])
        .themes(&["dup", "dup", "x"]);
    let (engine, s) = with_script(b);
    let mut ids = IdCounter::default();
    let run = Run::new(&engine, &s.id, &s.config);
    let three = stages::derive_themes(&run, &summary(), &[], 3, &mut ids).unwrap().value;
    assert_eq!(three.len(), 3);
    let one = stages::derive_themes(&run, &summary(), &[], 1, &mut ids).unwrap().value;
    assert_eq!(one.len(), 1);
    let err = stages::derive_themes(&run, &summary(), &[], 3, &mut ids).unwrap_err();
    assert_eq!(err.code(), "StructuredOutputFailed");
}

#[test]
fn derive_themes_rejects_excluded_labels() {
    let b = ScriptBuilder::new(true).themes(&["Old"]).themes(&["New"]);
    let (engine, s) = with_script(b);
    let run = Run::new(&engine, &s.id, &s.config);
    let out = stages::derive_themes(&run, &summary(), &["old".into()], 1, &mut IdCounter::default()).unwrap();
    assert_eq!(out.value[0].label, "New");
    assert_eq!(out.retries_used, 1);
}

#[test]
fn keywords_dedup_and_nonempty() {
    let b = ScriptBuilder::new(true)
        .lm(KEYWORDS, canned::keywords_json(&["burnout", "overtime", "burnout"]))
        .lm(KEYWORDS, canned::keywords_json::<&str>(&[]))
        .lm(KEYWORDS, canned::keywords_json::<&str>(&[]))
        .lm(KEYWORDS, canned::keywords_json::<&str>(&[]));
    let (engine, s) = with_script(b);
    let run = Run::new(&engine, &s.id, &s.config);
    let kws = stages::expand_keywords(&run, &summary(), &theme()).unwrap().value;
    assert_eq!(kws, vec!["burnout", "overtime"]);
    assert_eq!(
        stages::expand_keywords(&run, &summary(), &theme()).unwrap_err().code(),
        "StructuredOutputFailed"
    );
}

#[test]
fn pool_partitions_evidence_over_blocks() {
    let b = ScriptBuilder::new(true).theme_pipeline("Burnout", 4, 5, "t");
    let (engine, s) = with_script(b);
    let run = Run::new(&engine, &s.id, &s.config);
    // Skip the keyword entry by consuming it through expand_keywords.
    let kws = stages::expand_keywords(&run, &summary(), &theme()).unwrap().value;
    let pool = stages::build_inspiration_pool(&run, &summary(), &theme(), &kws, 4, &mut IdCounter::default())
        .unwrap()
        .value;
    assert_eq!(pool.len(), 4);
    let sizes: Vec<_> = pool.iter().map(|b| b.evidence.len()).collect();
    assert_eq!(sizes, vec![2, 1, 1, 1]);
    for block in &pool {
        assert!(block.is_enriched());
        assert_eq!(block.generation, 1);
        assert_eq!(block.echo.as_ref().unwrap().source_generation, 1);
    }
}

#[test]
fn pool_with_one_block_keeps_all_evidence() {
    let b = ScriptBuilder::new(true).theme_pipeline("Burnout", 1, 5, "t");
    let (engine, s) = with_script(b);
    let run = Run::new(&engine, &s.id, &s.config);
    let kws = stages::expand_keywords(&run, &summary(), &theme()).unwrap().value;
    let pool = stages::build_inspiration_pool(&run, &summary(), &theme(), &kws, 1, &mut IdCounter::default())
        .unwrap()
        .value;
    assert_eq!(pool.len(), 1);
    assert_eq!(pool[0].evidence.len(), 5);
}

#[test]
fn pool_without_evidence_fails() {
    let b = ScriptBuilder::new(true).search(vec![]);
    let (engine, s) = with_script(b);
    let run = Run::new(&engine, &s.id, &s.config);
    let err = stages::build_inspiration_pool(&run, &summary(), &theme(), &["x".into()], 4, &mut IdCounter::default())
        .unwrap_err();
    assert_eq!(err.code(), "EmptyEvidence");
}

#[test]
fn default_generation_builds_three_complete_maps() {
    let (engine, _, s) = refined(EngineConfig::default(), |b| b);
    assert_eq!(s.stage, WorkflowStage::ValidationRefinement);
    assert_eq!(s.maps.len(), 3);
    for m in &s.maps {
        assert_eq!(m.pool.len(), 4);
        assert_eq!(m.current_version, 1);
        let ids: Vec<_> = m.pool.iter().map(|b| b.id.clone()).collect();
        assert_eq!(m.current().unwrap().informed_by, ids);
        assert_eq!(m.draft_state, DraftState::Fresh);
    }
    let labels: Vec<_> = s.maps.iter().map(|m| m.theme.as_ref().unwrap().label.as_str()).collect();
    assert_eq!(labels, vec!["Angle 1", "Angle 2", "Angle 3"]);
    let audit = engine.audit_log(&s.id).unwrap();
    assert_eq!(audit.iter().filter(|r| r.kind == CallKind::Lm).count(), 1 + 22);
}

#[test]
fn failing_theme_degrades_to_annotated_map() {
    let config = EngineConfig::default();
    let b = ScriptBuilder::new(true)
        .summary("x")
        .themes(&["A", "B", "C"])
        .theme_pipeline("A", 4, 5, "a")
        .lm(KEYWORDS, canned::keywords_json(&["b"]))
        .search(vec![])
        .theme_pipeline("C", 4, 5, "c");
    let (engine, _) = Engine::with_fixture(b.build());
    let s = engine.create_session(brief(), config).unwrap();
    let s = ops::summarize_topic(&engine, &s).unwrap();
    let s = ops::confirm_summary(&engine, &s).unwrap();
    let s = ops::initial_generation(&engine, &s).unwrap();
    assert_eq!(s.maps.len(), 3);
    assert_eq!(s.maps[0].current_version, 1);
    assert_eq!(s.maps[2].current_version, 1);
    let failed = &s.maps[1];
    assert_eq!(failed.mode, MapMode::AiGenerated);
    assert_eq!(failed.draft_state, DraftState::Empty);
    assert!(failed.annotation.as_ref().unwrap().contains("evidence"));
    assert_clean(&s);
}

#[test]
fn total_failure_keeps_stage() {
    let b = ScriptBuilder::new(false)
        .summary("x")
        .themes(&["A", "B", "C"])
        .fail_lm(KEYWORDS, FailKind::Quota)
        .fail_lm(KEYWORDS, FailKind::Quota)
        .fail_lm(KEYWORDS, FailKind::Quota);
    let (engine, _) = Engine::with_fixture(b.build());
    let s = engine.create_session(brief(), EngineConfig::default()).unwrap();
    let s = ops::summarize_topic(&engine, &s).unwrap();
    let s = ops::confirm_summary(&engine, &s).unwrap();
    let err = ops::initial_generation(&engine, &s).unwrap_err();
    assert_eq!(err.code(), "InitialGenerationFailed");
    assert_eq!(s.stage, WorkflowStage::InspirationGeneration);
    assert!(s.maps.is_empty());
}

#[test]
fn draft_requires_enriched_pool() {
    let (engine, _, s) = refined(EngineConfig::default(), |b| b.fail_search(FailKind::Quota));
    let m = map(&s, 0);
    let (s2, _) = canvas::add_block_manual(&engine, &s, &m, "pending idea").unwrap();
    let pending = s2.maps[0].pool.last().unwrap().id.clone();
    assert_eq!(ops::regenerate_joke(&engine, &s2, &m).unwrap_err(), Error::BlocksPending(pending));
    let mut empty = s.clone();
    empty.maps[0].pool.clear();
    assert_eq!(ops::regenerate_joke(&engine, &empty, &m).unwrap_err(), Error::EmptyPool(m));
}

#[test]
fn regenerate_three_times_reaches_version_four() {
    let (engine, _, s) = refined(EngineConfig::default(), |b| b.draft("v2").draft("v3").draft("v4"));
    let m = map(&s, 2);
    let mut s = s;
    for _ in 0..3 {
        s = ops::regenerate_joke(&engine, &s, &m).unwrap();
    }
    let versions: Vec<_> = s.maps[2].prototypes.iter().map(|p| p.version).collect();
    assert_eq!(versions, vec![1, 2, 3, 4]);
    assert_eq!(s.maps[2].current_version, 4);
    assert_eq!(s.maps[2].current().unwrap().title, "v4");
    assert_clean(&s);
}

#[test]
fn regenerate_after_delete_excludes_block() {
    let (engine, _, s) = refined(EngineConfig::default(), |b| b.draft("v2"));
    let m = map(&s, 0);
    let gone = s.maps[0].pool[1].id.clone();
    let s = canvas::delete_block(&engine, &s, &m, &gone).unwrap();
    assert_eq!(s.maps[0].draft_state, DraftState::Stale);
    let s = ops::regenerate_joke(&engine, &s, &m).unwrap();
    let p = s.maps[0].current().unwrap();
    assert_eq!(p.informed_by.len(), 3);
    assert!(!p.informed_by.contains(&gone));
}

#[test]
fn reenrich_after_edit_failure_then_success() {
    let (engine, _, s) = refined(EngineConfig::default(), |b| b.fail_search(FailKind::Quota).enrichment(3));
    let m = map(&s, 0);
    let blk = s.maps[0].pool[0].id.clone();
    assert_eq!(ops::reenrich_block(&engine, &s, &m, &blk).unwrap_err(), Error::NotStale(blk.clone()));

    let (s, outcome) = canvas::edit_block(&engine, &s, &m, &blk, "a sharper idea").unwrap();
    assert!(matches!(outcome, ApplyOutcome::Failed(_)));
    let b = s.block(&m, &blk).unwrap();
    assert_eq!(b.enrichment_state, EnrichmentState::Stale);
    assert_eq!(b.generation, 1);
    assert!(b.annotation.is_some());
    assert_clean(&s);

    let before = s.maps[0].pool[0].evidence[0].retrieved_at;
    let (s, outcome) = ops::reenrich_block(&engine, &s, &m, &blk).unwrap();
    assert_eq!(outcome, ApplyOutcome::Applied { generation: 2 });
    let b = s.block(&m, &blk).unwrap();
    assert_eq!(b.echo.as_ref().unwrap().source_generation, 2);
    assert_eq!(b.evidence.len(), 3);
    assert!(b.evidence[0].retrieved_at > before);
    assert!(b.annotation.is_none());
    assert_clean(&s);
}

#[test]
fn complete_manual_map_enriches_then_drafts() {
    let (engine, _, s) = refined(EngineConfig::default(), |b| b.enrichment(2).enrichment(2).draft("Mine"));
    let s = canvas::add_joke_map(&engine, &s, MapMode::Manual).unwrap();
    let m = map(&s, 3);
    let deferred = |s, t| canvas::add_block_manual_deferred(&engine, s, &m, t).unwrap().0;
    let s = deferred(&s, "one");
    let s = deferred(&s, "two");
    let calls = engine.audit_log(&s.id).unwrap().len();
    let s = ops::complete_manual_map(&engine, &s, &m).unwrap();
    let audit = engine.audit_log(&s.id).unwrap();
    let new = &audit[calls..];
    assert_eq!(new.iter().filter(|r| r.kind == CallKind::Search).count(), 2);
    assert_eq!(new.iter().filter(|r| r.template.as_deref() == Some(ECHO)).count(), 2);
    let mm = &s.maps[3];
    assert_eq!(mm.current_version, 1);
    assert_eq!(mm.theme.as_ref().unwrap().label, "Mine");
    assert!(mm.pool.iter().all(|b| b.is_enriched()));
    assert_clean(&s);
}

#[test]
fn complete_manual_map_guards() {
    let (engine, _, s) =
        refined(EngineConfig::default(), |b| b.enrichment(2).fail_search(FailKind::Quota));
    let s = canvas::add_joke_map(&engine, &s, MapMode::Manual).unwrap();
    let m = map(&s, 3);
    assert_eq!(ops::complete_manual_map(&engine, &s, &m).unwrap_err(), Error::EmptyPool(m.clone()));
    let s = canvas::add_block_manual_deferred(&engine, &s, &m, "one").unwrap().0;
    let s = canvas::add_block_manual_deferred(&engine, &s, &m, "two").unwrap().0;
    let s = ops::complete_manual_map(&engine, &s, &m).unwrap();
    let mm = &s.maps[3];
    assert!(mm.prototypes.is_empty());
    assert_eq!(mm.pool[0].enrichment_state, EnrichmentState::Enriched);
    assert_eq!(mm.pool[1].enrichment_state, EnrichmentState::Stale);
    assert!(mm.annotation.is_some());
    assert_clean(&s);
}

#[test]
fn every_lm_call_carries_configured_temperature() {
    let (engine, _, s) = refined(EngineConfig::default(), |b| b);
    for r in engine.audit_log(&s.id).unwrap() {
        if r.kind == CallKind::Lm {
            assert!(r.digest.contains("temperature=0.3"), "{}", r.digest);
        }
    }
}
