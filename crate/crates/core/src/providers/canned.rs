//! Builders for fixture scripts that follow the pipeline's call order.
//!
//! Each method appends the entries one operation consumes, in the order the
//! pipeline makes the calls, so the result also works as a strict script.
//! Response texts carry a running serial to keep them distinct.

use serde_json::json;

use super::fixture::{FailKind, FixtureEntry, FixtureScript, Matcher};
use super::SearchHit;
use crate::model::EngineConfig;
use crate::prompt::builtin::{BLOCKS, ECHO, JOKE_DRAFT, KEYWORDS, THEMES, TOPIC_SUMMARY};

pub fn summary_json(theme: &str) -> String {
    json!({
        "theme": theme,
        "audience": "young office workers",
        "style": "exaggerated observational",
        "techniques": ["exaggeration", "callback"],
        "summary": format!("A routine about {theme}, told through exaggerated everyday moments."),
    })
    .to_string()
}

pub fn themes_json<S: AsRef<str>>(labels: &[S]) -> String {
    let themes: Vec<_> = labels
        .iter()
        .map(|l| json!({"label": l.as_ref(), "rationale": format!("Why {} is funny", l.as_ref())}))
        .collect();
    json!({ "themes": themes }).to_string()
}

pub fn keywords_json<S: AsRef<str>>(keywords: &[S]) -> String {
    json!({ "keywords": keywords.iter().map(AsRef::as_ref).collect::<Vec<_>>() }).to_string()
}

pub fn blocks_json<S: AsRef<str>>(texts: &[S]) -> String {
    json!({ "blocks": texts.iter().map(AsRef::as_ref).collect::<Vec<_>>() }).to_string()
}

pub fn echo_json(text: &str) -> String {
    json!({ "echo": text }).to_string()
}

pub fn draft_json(title: &str, setup: &str, punchline: &str) -> String {
    json!({ "title": title, "setup": setup, "punchline": punchline }).to_string()
}

pub fn hits(tag: &str, n: usize) -> Vec<SearchHit> {
    (1..=n)
        .map(|i| SearchHit {
            url: format!("https://example.com/{tag}/{i}"),
            title: format!("{tag} story {i}"),
            snippet: format!("What people say about {tag}, part {i}."),
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ScriptBuilder {
    script: FixtureScript,
    serial: u32,
}

impl ScriptBuilder {
    pub fn new(strict: bool) -> Self {
        Self {
            script: FixtureScript::new(strict),
            serial: 0,
        }
    }

    fn next(&mut self) -> u32 {
        self.serial += 1;
        self.serial
    }

    pub fn lm(mut self, template: &str, response: impl Into<String>) -> Self {
        self.script = self.script.lm(template, response);
        self
    }

    pub fn search(mut self, hits: Vec<SearchHit>) -> Self {
        self.script = self.script.search("*", hits);
        self
    }

    pub fn fail_lm(mut self, template: &str, kind: FailKind) -> Self {
        self.script = self.script.fail(Matcher::Template(template.into()), kind);
        self
    }

    pub fn fail_search(mut self, kind: FailKind) -> Self {
        self.script = self.script.fail(Matcher::Search("*".into()), kind);
        self
    }

    pub fn push(mut self, entry: FixtureEntry) -> Self {
        self.script.entries.push(entry);
        self
    }

    pub fn summary(self, theme: &str) -> Self {
        self.lm(TOPIC_SUMMARY, summary_json(theme))
    }

    pub fn themes<S: AsRef<str>>(self, labels: &[S]) -> Self {
        self.lm(THEMES, themes_json(labels))
    }

    pub fn echo(mut self) -> Self {
        let n = self.next();
        self.lm(ECHO, echo_json(&format!("Echo {n}: this lands because everyone has lived it.")))
    }

    pub fn draft(mut self, title: &str) -> Self {
        let n = self.next();
        self.lm(
            JOKE_DRAFT,
            draft_json(title, &format!("Setup {n} about {title}."), &format!("Punchline {n}.")),
        )
    }

    /// Keywords, search, distillation, one echo per block and a draft.
    pub fn theme_pipeline(mut self, label: &str, blocks: usize, results: usize, title: &str) -> Self {
        let n = self.next();
        let texts: Vec<String> = (1..=blocks).map(|i| format!("{label} idea {n}.{i}")).collect();
        self = self
            .lm(KEYWORDS, keywords_json(&[label.to_lowercase(), format!("{label} memes")]))
            .search(hits(&format!("t{n}"), results))
            .lm(BLOCKS, blocks_json(&texts));
        for _ in 0..blocks {
            self = self.echo();
        }
        self.draft(title)
    }

    /// A complete successful `initial_generation` under `config`.
    pub fn initial_generation(mut self, config: &EngineConfig) -> Self {
        let labels: Vec<String> = (1..=config.theme_count).map(|i| format!("Angle {i}")).collect();
        self = self.themes(&labels);
        for label in &labels {
            let title = format!("{label} draft");
            self = self.theme_pipeline(label, config.blocks_per_pool as usize, config.search_top_k as usize, &title);
        }
        self
    }

    /// Search plus echo for one block enrichment.
    pub fn enrichment(mut self, results: usize) -> Self {
        let n = self.next();
        self.search(hits(&format!("e{n}"), results)).echo()
    }

    /// Search, single-block distillation and echo for AI Add.
    pub fn ai_block(mut self, results: usize) -> Self {
        let n = self.next();
        self.search(hits(&format!("a{n}"), results))
            .lm(BLOCKS, blocks_json(&[format!("Fresh idea {n}")]))
            .echo()
    }

    /// Theme derivation for one new map plus its pipeline.
    pub fn ai_map(self, label: &str, config: &EngineConfig) -> Self {
        let title = format!("{label} draft");
        self.themes(&[label])
            .theme_pipeline(label, config.blocks_per_pool as usize, config.search_top_k as usize, &title)
    }

    pub fn with_clock(mut self, start: chrono::DateTime<chrono::Utc>, step_ms: i64) -> Self {
        self.script.clock_start = Some(start);
        self.script.clock_step_ms = Some(step_ms);
        self
    }

    pub fn build(self) -> FixtureScript {
        self.script
    }

    pub fn len(&self) -> usize {
        self.script.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.script.entries.is_empty()
    }

    /// Marks the last entry with a reply delay.
    pub fn delayed(mut self, delay_ms: u64) -> Self {
        self.script = self.script.delayed(delay_ms);
        self
    }
}

/// Number of `(lm, search)` entries in a script.
pub fn count_entries(script: &FixtureScript) -> (usize, usize) {
    let lm = script
        .entries
        .iter()
        .filter(|e| matches!(e.matcher, Matcher::Template(_)))
        .count();
    (lm, script.entries.len() - lm)
}
