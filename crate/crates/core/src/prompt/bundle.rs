//! Plain-text template bundles.
//!
//! A bundle is a directory holding one `<templateName>.txt` file per
//! template. Each file contains the six sections in canonical order, each
//! introduced by a line consisting solely of its bracketed name
//! (`[Role]`, `[Input Context]`, `[Overall Rules]`, `[Output Formatting]`,
//! `[Workflow]`, `[Example]`). Only blank lines may precede `[Role]`. Section
//! bodies are trimmed. Placeholders use `{{name}}` and may appear only in
//! `[Input Context]`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::template::{scan_placeholders, PromptTemplate, Section};
use super::PromptError;

/// Parses one template file. The declared placeholder set is the set found
/// in the input context.
pub fn parse_template(name: &str, source: &str) -> Result<PromptTemplate, PromptError> {
    let bundle_err = |line: usize, reason: String| PromptError::Bundle {
        template: name.to_owned(),
        line,
        reason,
    };

    let mut bodies: Vec<Vec<&str>> = Vec::new();
    let mut expected = Section::ORDER.iter();
    for (idx, raw_line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim_end();
        if let Some(section) = Section::from_header(line) {
            match expected.next() {
                Some(want) if *want == section => bodies.push(Vec::new()),
                Some(want) => {
                    return Err(bundle_err(
                        line_no,
                        format!("expected {} but found {}", want.header(), section.header()),
                    ))
                }
                None => return Err(bundle_err(line_no, format!("duplicate {}", section.header()))),
            }
            continue;
        }
        match bodies.last_mut() {
            Some(body) => body.push(raw_line),
            None if line.trim().is_empty() => {}
            None => return Err(bundle_err(line_no, "text before [Role]".into())),
        }
    }
    if let Some(missing) = expected.next() {
        return Err(bundle_err(
            source.lines().count(),
            format!("missing {}", missing.header()),
        ));
    }

    let joined: Vec<String> = bodies.iter().map(|b| b.join("\n")).collect();
    let input = &joined[1];
    let mut declared: Vec<&str> = scan_placeholders(input).into_iter().map(|(_, n)| n).collect();
    declared.sort_unstable();
    declared.dedup();
    let sections: [&str; 6] = std::array::from_fn(|i| joined[i].as_str());
    PromptTemplate::new(name, sections, &declared)
}

/// Loads every `*.txt` file in `dir` as a template keyed by file stem.
pub fn load_bundle(dir: &Path) -> Result<BTreeMap<String, PromptTemplate>, PromptError> {
    let io = |e: std::io::Error| PromptError::Bundle {
        template: dir.display().to_string(),
        line: 0,
        reason: e.to_string(),
    };
    let mut out = BTreeMap::new();
    let mut entries: Vec<_> = fs::read_dir(dir).map_err(io)?.collect::<Result<_, _>>().map_err(io)?;
    entries.sort_by_key(|e| e.path());
    for entry in entries {
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let text = fs::read_to_string(&path).map_err(io)?;
        out.insert(stem.to_owned(), parse_template(stem, &text)?);
    }
    Ok(out)
}

/// Writes a template back into bundle format. `parse_template` inverts it.
pub fn format_template(template: &PromptTemplate) -> String {
    let mut out = String::new();
    for (i, section) in Section::ORDER.into_iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&section.header());
        out.push('\n');
        out.push_str(template.section(section));
        out.push('\n');
    }
    out
}
