#![allow(dead_code)]

use std::sync::Arc;

use jokeasy_core::pipeline::ops;
use jokeasy_core::providers::canned::ScriptBuilder;
use jokeasy_core::providers::FixtureProvider;
use jokeasy_core::{check_invariants, EngineConfig, Engine, MapId, Session, TopicBrief};

pub fn brief() -> TopicBrief {
    TopicBrief::new("Troubles of Adult Life").with_supplements(["exaggerated expressions", "workplace burnout"])
}

/// Entries that take a fresh session to `ValidationRefinement`.
pub fn to_refinement(config: &EngineConfig) -> ScriptBuilder {
    ScriptBuilder::new(true).summary("adult life").initial_generation(config)
}

pub fn engine(script: ScriptBuilder) -> (Engine, Arc<FixtureProvider>) {
    Engine::with_fixture(script.build())
}

/// Runs summary, confirmation and initial generation; `extra` is appended
/// to the script for the test's own calls.
pub fn refined(config: EngineConfig, extra: impl FnOnce(ScriptBuilder) -> ScriptBuilder) -> (Engine, Arc<FixtureProvider>, Session) {
    let (engine, fixture) = engine(extra(to_refinement(&config)));
    let s = engine.create_session(brief(), config).unwrap();
    let s = ops::summarize_topic(&engine, &s).unwrap();
    let s = ops::confirm_summary(&engine, &s).unwrap();
    let s = ops::initial_generation(&engine, &s).unwrap();
    assert_clean(&s);
    (engine, fixture, s)
}

pub fn assert_clean(s: &Session) {
    let v = check_invariants(s);
    assert!(v.is_empty(), "invariant violations: {v:#?}");
}

pub fn map(s: &Session, i: usize) -> MapId {
    s.maps[i].id.clone()
}
