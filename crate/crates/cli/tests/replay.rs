use std::process::Command as Process;

use jokeasy_cli::replay::{replay, Direct, ReplayError, BUNDLED_FIXTURE, BUNDLED_TRACE};
use jokeasy_cli::trace::parse_trace;
use jokeasy_core::providers::FixtureScript;
use jokeasy_core::{Engine, EngineConfig};

fn run(trace: &str, script: FixtureScript) -> Result<jokeasy_cli::replay::ReplayReport, ReplayError> {
    let trace = parse_trace(trace).unwrap();
    let (engine, _) = Engine::with_fixture(script);
    replay(&trace, &EngineConfig::default(), &mut Direct { engine: &engine })
}

#[test]
fn truncated_fixture_reports_script_exhausted() {
    let mut script = FixtureScript::parse(BUNDLED_FIXTURE).unwrap();
    script.entries.truncate(script.entries.len() - 2);
    match run(BUNDLED_TRACE, script) {
        Err(ReplayError::ScriptExhausted { line }) => assert_eq!(line, 11),
        other => panic!("{other:?}"),
    }
}

#[test]
fn rejected_command_names_its_line() {
    let trace = "new topic=\"Rent\"\nconfirm\n";
    match run(trace, FixtureScript::new(true)) {
        Err(ReplayError::Command { line, code, .. }) => assert_eq!((line, code.as_str()), (2, "NoSummary")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn dangling_reference_is_a_resolve_error() {
    let trace = "new topic=\"Rent\"\nregenerate map=2\n";
    assert!(matches!(
        run(trace, FixtureScript::new(true)),
        Err(ReplayError::Resolve { line: 2, .. })
    ));
}

#[test]
fn replay_is_deterministic() {
    let a = run(BUNDLED_TRACE, FixtureScript::parse(BUNDLED_FIXTURE).unwrap()).unwrap();
    let b = run(BUNDLED_TRACE, FixtureScript::parse(BUNDLED_FIXTURE).unwrap()).unwrap();
    assert_eq!(a.digest, b.digest);
    assert_eq!(a.inspections.len(), 1);
    assert_eq!(a.inspections[0].block_text, "the subtle dynamics between colleagues");
    assert!(!a.inspections[0].evidence.is_empty());
}

#[test]
fn binary_rejects_malformed_trace() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.trace");
    std::fs::write(&path, "new topic=x\nsummarize\nteleport map=1\n").unwrap();
    let out = Process::new(env!("CARGO_BIN_EXE_jokeasy"))
        .args(["replay", "--trace"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("TraceParseError: line 3"), "{err}");
}

#[test]
fn binary_new_then_export_refuses_unfinished() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_jokeasy");
    let out = Process::new(bin)
        .args(["new", "--topic", "Rent", "--supplement", "landlords", "--data-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let id = String::from_utf8(out.stdout).unwrap().trim().to_owned();
    assert_eq!(id, "sess-1");
    let out = Process::new(bin).args(["new", "--topic", "Rent", "--data-dir"]).arg(dir.path()).output().unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "sess-2");
    let out = Process::new(bin)
        .args(["export", "--session", &id, "--data-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not finalized"));
}
