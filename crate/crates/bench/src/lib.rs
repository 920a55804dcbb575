//! Setup shared by the benchmarks.

use jokeasy_core::pipeline::ops;
use jokeasy_core::sim::synthetic_engine;
use jokeasy_core::{Engine, EngineConfig, Session, TopicBrief};

/// A synthetic engine and a session with a confirmed summary.
pub fn ready_for_generation(seed: u64, config: EngineConfig) -> (Engine, Session) {
    let engine = synthetic_engine(seed, 0.0);
    let brief = TopicBrief::new("Troubles of Adult Life").with_supplements(["workplace burnout"]);
    let s = engine.create_session(brief, config).expect("valid brief");
    let s = ops::summarize_topic(&engine, &s).expect("synthetic summary");
    let s = ops::confirm_summary(&engine, &s).expect("summary present");
    (engine, s)
}

/// A session after initial generation.
pub fn refined(seed: u64, config: EngineConfig) -> Session {
    let (engine, s) = ready_for_generation(seed, config);
    ops::initial_generation(&engine, &s).expect("synthetic generation")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn setup_reaches_refinement() {
        let s = refined(1, EngineConfig::default());
        assert_eq!(s.maps.len(), 3);
    }
}
