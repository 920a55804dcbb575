//! Extraction of the structured object from a raw model response.
//!
//! Rules, applied in order; the first rule that yields a JSON object wins:
//!
//! 1. Fenced blocks. A fence opens on a line whose first non-blank
//!    characters are three backticks (an info string such as `json` may
//!    follow) and closes on the next line that is exactly three backticks
//!    after trimming surrounding whitespace. An unclosed fence runs to the end
//!    of the text. Fences are tried in order of appearance; a fence wins if
//!    its content, trimmed, parses completely as a JSON object.
//! 2. The whole response, trimmed, parses completely as a JSON object.
//! 3. Scanning left to right, the first `{` at which a JSON object parses
//!    (trailing text after the object is ignored).
//!
//! Line endings `\r\n` are treated as `\n`. Anything else is unparseable.

use serde_json::{Map, Value};

pub fn extract_object(raw: &str) -> Option<Map<String, Value>> {
    for fence in fenced_blocks(raw) {
        if let Some(obj) = parse_whole(&fence) {
            return Some(obj);
        }
    }
    if let Some(obj) = parse_whole(raw) {
        return Some(obj);
    }
    for (i, _) in raw.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&raw[i..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(obj))) = stream.next() {
            return Some(obj);
        }
    }
    None
}

fn parse_whole(text: &str) -> Option<Map<String, Value>> {
    match serde_json::from_str::<Value>(text.trim()) {
        Ok(Value::Object(obj)) => Some(obj),
        _ => None,
    }
}

fn fenced_blocks(raw: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in raw.split('\n') {
        let line = line.strip_suffix('\r').unwrap_or(line);
        match current.as_mut() {
            None => {
                if line.trim_start().starts_with("```") {
                    current = Some(Vec::new());
                }
            }
            Some(lines) => {
                if line.trim() == "```" {
                    blocks.push(lines.join("\n"));
                    current = None;
                } else {
                    lines.push(line);
                }
            }
        }
    }
    if let Some(lines) = current {
        blocks.push(lines.join("\n"));
    }
    blocks
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(raw: &str) -> Option<String> {
        extract_object(raw).map(|o| o.keys().next().cloned().unwrap_or_default())
    }

    #[test]
    fn bare_object() {
        assert_eq!(key(r#"  {"a":1} "#).as_deref(), Some("a"));
    }

    #[test]
    fn first_well_formed_fence_wins() {
        let raw = "```json\n{broken\n```\ntext\n```\n{\"b\":1}\n```\n```\n{\"c\":1}\n```";
        assert_eq!(key(raw).as_deref(), Some("b"));
    }

    #[test]
    fn fence_beats_earlier_inline_object() {
        let raw = "prefix {\"a\":1}\n```json\n{\"b\":2}\n```";
        assert_eq!(key(raw).as_deref(), Some("b"));
    }

    #[test]
    fn unclosed_fence_runs_to_end() {
        assert_eq!(key("```json\r\n{\"a\":1}\r\n").as_deref(), Some("a"));
    }

    #[test]
    fn embedded_object_in_prose() {
        assert_eq!(key("Here you go: {\"a\": [1, 2]} hope it helps").as_deref(), Some("a"));
    }

    #[test]
    fn arrays_and_garbage_are_unparseable() {
        assert!(extract_object("[1,2]").is_none());
        assert!(extract_object("no json here").is_none());
        assert!(extract_object("").is_none());
    }
}
