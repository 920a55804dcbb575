//! Random legal command sequences against synthetic, fault-injected
//! providers. Used by property tests, the acceptance suite and benchmarks.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::canvas::{execute, Command};
use crate::engine::Engine;
use crate::model::{
    check_evolution, check_invariants, BlockId, DraftState, EngineConfig, MapId, MapMode, ScriptedClock, Session,
    TopicBrief, Violation, WorkflowStage,
};
use crate::providers::synthetic::{FaultPlan, Faulty, SyntheticProvider};

/// Engine over seeded synthetic providers failing with probability `fault_p`.
pub fn synthetic_engine(seed: u64, fault_p: f64) -> Engine {
    let inner = Arc::new(SyntheticProvider::new(seed));
    let plan = Arc::new(FaultPlan::new(seed ^ 0x5eed, fault_p));
    let lm = Arc::new(Faulty::new(inner.clone(), plan.clone()));
    let search = Arc::new(Faulty::new(inner, plan));
    Engine::new(lm, search, Arc::new(ScriptedClock::default()))
}

fn pick_map(rng: &mut impl Rng, s: &Session) -> Option<MapId> {
    s.maps.choose(rng).map(|m| m.id.clone())
}

fn pick_block(rng: &mut impl Rng, s: &Session) -> Option<(MapId, BlockId)> {
    let maps: Vec<_> = s.maps.iter().filter(|m| !m.pool.is_empty()).collect();
    let m = maps.choose(rng)?;
    let b = m.pool.choose(rng)?;
    Some((m.id.clone(), b.id.clone()))
}

const TEXTS: &[&str] = &[
    "the subtle dynamics between colleagues",
    "a standup meeting that sits down",
    "rent day as a horror movie",
    "inbox zero is a myth",
];

/// A command that is well-formed for the session's stage and entities.
/// Guards may still reject it; that is part of what gets exercised.
pub fn random_command(rng: &mut impl Rng, s: &Session) -> Option<Command> {
    use WorkflowStage::*;
    match s.stage {
        TopicIdeation => Some(match (s.summary.is_some(), rng.random_range(0..4)) {
            (false, _) => Command::Summarize,
            (true, 0) => Command::Resummarize {
                brief: TopicBrief::new("Troubles of Adult Life").with_supplements([TEXTS[rng.random_range(0..TEXTS.len())]]),
            },
            (true, _) => Command::ConfirmSummary,
        }),
        InspirationGeneration => Some(Command::Generate),
        ValidationRefinement => {
            let fresh: Vec<_> = s.maps.iter().filter(|m| m.draft_state == DraftState::Fresh).collect();
            let roll = rng.random_range(0..100);
            let cmd = match roll {
                0..=14 => pick_block(rng, s).map(|(map, block)| Command::EditBlock {
                    map,
                    block,
                    text: TEXTS[rng.random_range(0..TEXTS.len())].to_owned(),
                }),
                15..=24 => pick_block(rng, s).map(|(map, block)| Command::DeleteBlock { map, block }),
                25..=34 => pick_map(rng, s).map(|map| Command::AddBlockAi { map }),
                35..=46 => pick_map(rng, s).map(|map| Command::AddBlockManual {
                    map,
                    text: TEXTS[rng.random_range(0..TEXTS.len())].to_owned(),
                }),
                47..=54 => pick_block(rng, s).map(|(map, block)| Command::ReenrichBlock { map, block }),
                55..=69 => pick_map(rng, s).map(|map| Command::Regenerate { map }),
                70..=75 => Some(Command::AddMap {
                    mode: if rng.random_bool(0.5) { MapMode::AiGenerated } else { MapMode::Manual },
                }),
                76..=81 => pick_map(rng, s).map(|map| Command::CompleteManualMap { map }),
                82..=87 if s.maps.len() > 1 => pick_map(rng, s).map(|map| Command::RemoveMap { map }),
                88..=91 => fresh.choose(rng).map(|m| Command::Finalize { map: m.id.clone() }),
                _ => pick_map(rng, s).map(|map| Command::Regenerate { map }),
            };
            cmd.or(Some(Command::AddMap { mode: MapMode::Manual }))
        }
        FinalSynthesis => s
            .maps
            .iter()
            .find(|m| Some(&m.id) != s.final_map_id.as_ref())
            .map(|m| Command::RemoveMap { map: m.id.clone() }),
    }
}

/// Entities a command may change.
fn target(cmd: &Command) -> (Option<&MapId>, Option<&BlockId>) {
    use Command::*;
    match cmd {
        EditBlock { map, block, .. } | DeleteBlock { map, block } | ReenrichBlock { map, block } => (Some(map), Some(block)),
        AddBlockAi { map } | AddBlockManual { map, .. } | Regenerate { map } | CompleteManualMap { map } => {
            (Some(map), None)
        }
        _ => (None, None),
    }
}

/// Describes changes to entities the command did not target.
pub fn isolation_breaches(before: &Session, after: &Session, cmd: &Command) -> Vec<String> {
    let mut out = Vec::new();
    let (tmap, tblock) = target(cmd);
    let untouched_prior = |out: &mut Vec<String>, skip: Option<&MapId>| {
        for m in &before.maps {
            if Some(&m.id) == skip {
                continue;
            }
            match after.maps.iter().find(|a| a.id == m.id) {
                Some(a) if a == m => {}
                Some(_) => out.push(format!("{} changed", m.id)),
                None if matches!(cmd, Command::RemoveMap { map } if map == &m.id) => {}
                None => out.push(format!("{} vanished", m.id)),
            }
        }
    };
    match cmd {
        Command::AddMap { .. } | Command::RemoveMap { .. } | Command::Finalize { .. } => untouched_prior(&mut out, None),
        _ if tmap.is_some() => {
            untouched_prior(&mut out, tmap);
            if let (Some(map), Some(block)) = (tmap, tblock) {
                if let (Ok(bm), Ok(am)) = (before.map(map), after.map(map)) {
                    for b in bm.pool.iter().filter(|b| &b.id != block) {
                        if am.block(&b.id) != Some(b) {
                            out.push(format!("sibling {} changed", b.id));
                        }
                    }
                }
            }
        }
        _ => {}
    }
    out
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct SequenceReport {
    pub commands: usize,
    pub rejected: usize,
    pub violations: Vec<Violation>,
    pub breaches: Vec<String>,
    pub panics: usize,
    pub final_session: Option<Session>,
}

impl SequenceReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty() && self.breaches.is_empty() && self.panics == 0
    }
}

/// Runs up to `steps` random commands from a fresh session, checking
/// invariants, evolution rules and failure isolation after each one.
pub fn run_sequence(seed: u64, steps: usize, fault_p: f64, config: EngineConfig) -> SequenceReport {
    let engine = synthetic_engine(seed, fault_p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SequenceReport::default();
    let brief = TopicBrief::new("Troubles of Adult Life").with_supplements(["exaggerated expressions", "workplace burnout"]);
    let mut session = engine.create_session(brief, config).expect("valid brief");
    for _ in 0..steps {
        let Some(cmd) = random_command(&mut rng, &session) else { break };
        report.commands += 1;
        let result = catch_unwind(AssertUnwindSafe(|| execute(&engine, &session, &cmd)));
        let next = match result {
            Err(_) => {
                report.panics += 1;
                continue;
            }
            Ok(Err(_)) => {
                report.rejected += 1;
                continue;
            }
            Ok(Ok(done)) => done.session,
        };
        report.violations.extend(check_invariants(&next));
        report.violations.extend(check_evolution(&session, &next));
        report.breaches.extend(isolation_breaches(&session, &next, &cmd));
        session = next;
    }
    report.final_session = Some(session);
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_runs_reach_later_stages() {
        let r = run_sequence(1, 40, 0.0, EngineConfig::default());
        assert!(r.is_clean(), "{r:#?}");
        assert!(r.final_session.unwrap().stage >= WorkflowStage::ValidationRefinement);
    }

    #[test]
    fn faulty_runs_stay_clean() {
        for seed in 0..20 {
            let r = run_sequence(seed, 30, 0.2, EngineConfig::default());
            assert!(r.is_clean(), "seed {seed}: {r:#?}");
        }
    }
}
