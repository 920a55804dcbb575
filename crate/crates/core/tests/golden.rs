//! Rendered builtin templates against checked-in snapshots.
//! Set `UPDATE_SNAPSHOTS=1` to rewrite them.

use std::path::PathBuf;

use jokeasy_core::prompt::builtin::{sample_bindings, TEMPLATE_NAMES};
use jokeasy_core::prompt::{assemble_prompt, Catalog, Section};
use jokeasy_core::LanguageTag;

fn render(name: &str, lang: &str) -> String {
    let t = Catalog::builtin().template(name, &LanguageTag::new(lang)).unwrap();
    assemble_prompt(&t, &sample_bindings(&t)).unwrap().text
}

fn snapshot_path(name: &str, lang: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("tests/snapshots/{lang}/{name}.txt"))
}

#[test]
fn builtin_templates_match_snapshots() {
    let update = std::env::var_os("UPDATE_SNAPSHOTS").is_some();
    for lang in ["en", "zh"] {
        for name in TEMPLATE_NAMES {
            let text = render(name, lang);
            assert_eq!(text, render(name, lang), "{name} renders unstably");
            let path = snapshot_path(name, lang);
            if update {
                std::fs::create_dir_all(path.parent().unwrap()).unwrap();
                std::fs::write(&path, &text).unwrap();
                continue;
            }
            let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(text, want, "{lang}/{name} drifted from its snapshot");
        }
    }
}

#[test]
fn sections_appear_once_in_canonical_order() {
    for name in TEMPLATE_NAMES {
        let text = render(name, "en");
        let mut last = 0;
        for section in Section::ORDER {
            let header = section.header();
            assert_eq!(text.matches(&header).count(), 1, "{name}: {header}");
            let at = text.find(&header).unwrap();
            assert!(at >= last, "{name}: {header} out of order");
            last = at;
        }
        assert!(text.starts_with("[Role]\n"));
    }
}
