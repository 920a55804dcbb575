mod common;

use std::fs;

use common::{map, refined};
use jokeasy_core::canvas;
use jokeasy_core::pipeline::regenerate_joke;
use jokeasy_core::sim::run_sequence;
use jokeasy_core::store::FORMAT_VERSION;
use jokeasy_core::{export_final, EngineConfig, Error, SessionId, Store};
use proptest::prelude::*;

#[test]
fn save_then_load_is_identity() {
    let (_, _, s) = refined(EngineConfig::default(), |b| b);
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let path = store.save(&s).unwrap();
    assert!(path.ends_with("sessions/sess-1.json"));
    assert_eq!(store.load(&s.id).unwrap(), s);
    store.save(&s).unwrap();
    assert_eq!(fs::read_dir(dir.path().join("sessions")).unwrap().count(), 1);
    assert_eq!(store.list().unwrap(), vec![s.id.clone()]);
}

#[test]
fn refuses_to_persist_violations() {
    let (_, _, mut s) = refined(EngineConfig::default(), |b| b);
    s.maps[0].current_version = 9;
    let store = Store::open(tempfile::tempdir().unwrap().path()).unwrap();
    assert_eq!(store.save(&s).unwrap_err().code(), "InvariantViolation");
}

#[test]
fn load_errors() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let missing = SessionId::new("nope");
    assert_eq!(store.load(&missing).unwrap_err(), Error::UnknownSession(missing));

    let (_, _, s) = refined(EngineConfig::default(), |b| b);
    let path = store.save(&s).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, &text[..text.len() / 2]).unwrap();
    assert_eq!(store.load(&s.id).unwrap_err().code(), "CorruptEnvelope");

    let bumped = text.replacen(
        &format!("\"format_version\": {FORMAT_VERSION}"),
        &format!("\"format_version\": {}", FORMAT_VERSION + 1),
        1,
    );
    fs::write(&path, bumped).unwrap();
    assert_eq!(store.load(&s.id).unwrap_err(), Error::UnsupportedVersion(FORMAT_VERSION + 1));
}

#[test]
fn crash_between_write_and_rename_keeps_prior_envelope() {
    let (engine, _, s) = refined(EngineConfig::default(), |b| b.draft("v2"));
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    store.save(&s).unwrap();
    let newer = regenerate_joke(&engine, &s, &map(&s, 0)).unwrap();

    // Staged but never committed: the process "dies" here.
    let staged = store.stage(&newer).unwrap();
    let temp = staged.temp_path().to_owned();
    fs::write(&temp, b"{\"format_version\": 1, \"sess").unwrap();
    std::mem::forget(staged);
    assert_eq!(store.load(&s.id).unwrap(), s);
    assert_eq!(store.list().unwrap(), vec![s.id.clone()]);

    store.save(&newer).unwrap();
    assert_eq!(store.load(&s.id).unwrap(), newer);
}

#[test]
fn export_lists_final_prototype_and_sources() {
    let (engine, _, s) = refined(EngineConfig::default(), |b| b);
    assert_eq!(export_final(&s).unwrap_err(), Error::NotFinalized);
    let m = map(&s, 2);
    let done = canvas::finalize_joke(&engine, &s, &m).unwrap();
    let text = export_final(&done).unwrap();
    assert!(text.starts_with("TITLE\nAngle 3 draft\n"));
    assert!(text.contains("VERSION\n1 of 1\n"));
    for b in &done.maps[2].pool {
        assert!(text.contains(&b.text));
        assert!(text.contains(&b.evidence[0].url));
    }
    assert_eq!(export_final(&done).unwrap(), text);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn round_trip_over_random_sessions(seed in any::<u64>(), steps in 0usize..40, faults in 0.0f64..0.3) {
        let report = run_sequence(seed, steps, faults, EngineConfig::default());
        let session = report.final_session.unwrap();
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        store.save(&session).unwrap();
        let loaded = store.load(&session.id).unwrap();
        prop_assert_eq!(loaded.digest(), session.digest());
        prop_assert_eq!(loaded, session);
    }
}
