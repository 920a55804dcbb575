//! The six pipeline templates and the schemas their responses must satisfy.

use std::collections::BTreeMap;
use std::path::Path;

use super::bundle::{load_bundle, parse_template};
use super::schema::{Constraint, FieldSpec, OutputSchema};
use super::template::PromptTemplate;
use super::PromptError;
use crate::model::{EngineConfig, LanguageTag};

pub const TOPIC_SUMMARY: &str = "topicSumGen";
pub const THEMES: &str = "themeGen";
pub const KEYWORDS: &str = "keywordGen";
pub const BLOCKS: &str = "blockDistillGen";
pub const ECHO: &str = "inspirationPopupGen";
pub const JOKE_DRAFT: &str = "jokeDraftGen";

pub const TEMPLATE_NAMES: [&str; 6] = [TOPIC_SUMMARY, THEMES, KEYWORDS, BLOCKS, ECHO, JOKE_DRAFT];

/// Placeholders each builtin template must declare. Bundle overrides are held
/// to the same sets so the pipeline's bindings keep matching.
pub fn placeholders(name: &str) -> Option<&'static [&'static str]> {
    Some(match name {
        TOPIC_SUMMARY => &["supplements", "topic"],
        THEMES => &["exclusions", "summary", "theme_count"],
        KEYWORDS => &["summary", "theme"],
        BLOCKS => &["block_count", "evidence", "summary", "theme"],
        ECHO => &["audience", "block", "evidence"],
        JOKE_DRAFT => &["blocks", "summary", "theme"],
        _ => return None,
    })
}

const EN: [(&str, &str); 6] = [
    (TOPIC_SUMMARY, include_str!("../../templates/en/topicSumGen.txt")),
    (THEMES, include_str!("../../templates/en/themeGen.txt")),
    (KEYWORDS, include_str!("../../templates/en/keywordGen.txt")),
    (BLOCKS, include_str!("../../templates/en/blockDistillGen.txt")),
    (ECHO, include_str!("../../templates/en/inspirationPopupGen.txt")),
    (JOKE_DRAFT, include_str!("../../templates/en/jokeDraftGen.txt")),
];

const ZH: [(&str, &str); 6] = [
    (TOPIC_SUMMARY, include_str!("../../templates/zh/topicSumGen.txt")),
    (THEMES, include_str!("../../templates/zh/themeGen.txt")),
    (KEYWORDS, include_str!("../../templates/zh/keywordGen.txt")),
    (BLOCKS, include_str!("../../templates/zh/blockDistillGen.txt")),
    (ECHO, include_str!("../../templates/zh/inspirationPopupGen.txt")),
    (JOKE_DRAFT, include_str!("../../templates/zh/jokeDraftGen.txt")),
];

pub fn topic_summary_schema() -> OutputSchema {
    OutputSchema::new(
        "topicSummary",
        vec![
            FieldSpec::text("theme"),
            FieldSpec::text("audience"),
            FieldSpec::text("style"),
            FieldSpec::text_list("techniques").with(Constraint::NoBlankItems),
            FieldSpec::text("summary"),
        ],
    )
}

pub fn themes_schema(count: usize) -> OutputSchema {
    OutputSchema::new(
        "themes",
        vec![FieldSpec::records(
            "themes",
            vec![FieldSpec::text("label"), FieldSpec::text("rationale").allow_blank()],
        )
        .with(Constraint::ExactCount(count))
        .with(Constraint::UniqueBy("label".into()))],
    )
}

pub fn keywords_schema() -> OutputSchema {
    OutputSchema::new(
        "keywords",
        vec![FieldSpec::text_list("keywords")
            .with(Constraint::NonEmpty)
            .with(Constraint::NoBlankItems)],
    )
}

pub fn blocks_schema(count: usize) -> OutputSchema {
    OutputSchema::new(
        "blockTexts",
        vec![FieldSpec::text_list("blocks")
            .with(Constraint::ExactCount(count))
            .with(Constraint::NoBlankItems)],
    )
}

pub fn echo_schema() -> OutputSchema {
    OutputSchema::new("echoSummary", vec![FieldSpec::text("echo")])
}

pub fn joke_draft_schema() -> OutputSchema {
    OutputSchema::new(
        "jokeDraft",
        vec![
            FieldSpec::text("title"),
            FieldSpec::text("setup"),
            FieldSpec::text("punchline"),
        ],
    )
}

/// Schema for `name` under `config`'s counts.
pub fn schema_for(name: &str, config: &EngineConfig) -> Option<OutputSchema> {
    Some(match name {
        TOPIC_SUMMARY => topic_summary_schema(),
        THEMES => themes_schema(config.theme_count as usize),
        KEYWORDS => keywords_schema(),
        BLOCKS => blocks_schema(config.blocks_per_pool as usize),
        ECHO => echo_schema(),
        JOKE_DRAFT => joke_draft_schema(),
        _ => return None,
    })
}

fn language_sources(lang: &LanguageTag) -> &'static [(&'static str, &'static str); 6] {
    if lang.is_chinese() {
        &ZH
    } else {
        &EN
    }
}

fn builtin_template(name: &str, lang: &LanguageTag) -> Option<PromptTemplate> {
    let (_, src) = language_sources(lang).iter().find(|(n, _)| *n == name)?;
    Some(parse_template(name, src).expect("builtin templates are well-formed"))
}

/// All six builtin templates with their schemas, in the configured language.
pub fn builtin_templates(config: &EngineConfig) -> BTreeMap<&'static str, (PromptTemplate, OutputSchema)> {
    TEMPLATE_NAMES
        .into_iter()
        .map(|name| {
            let template = builtin_template(name, &config.content_language).expect("known name");
            let schema = schema_for(name, config).expect("known name");
            (name, (template, schema))
        })
        .collect()
}

/// Fixed bindings for every builtin placeholder; used for snapshot tests
/// and benchmarks.
pub fn sample_binding(key: &str) -> Option<&'static str> {
    Some(match key {
        "topic" => "Troubles of Adult Life",
        "supplements" => "- exaggerated expressions\n- workplace burnout",
        "summary" => "Theme: adult life\nAudience: young office workers\nStyle: exaggerated\nTechniques: exaggeration\nSummary: Overtime, rent and tiny rebellions.",
        "theme_count" => "3",
        "exclusions" => "(none)",
        "theme" => "Self-Rescue Under Work Pressure",
        "evidence" => "[1] Overtime culture (https://example.com/a)\nWorkers describe 10pm stand-ups.",
        "block_count" => "4",
        "audience" => "young office workers; exaggerated",
        "block" => "the subtle dynamics between colleagues",
        "blocks" => "- the subtle dynamics between colleagues\n- coffee as a performance review",
        _ => return None,
    })
}

/// [`sample_binding`] for each placeholder of `template`.
pub fn sample_bindings(template: &PromptTemplate) -> BTreeMap<String, String> {
    template
        .placeholders
        .iter()
        .map(|k| (k.clone(), sample_binding(k).expect("every builtin placeholder has a sample").to_owned()))
        .collect()
}

/// Template lookup with optional per-name overrides loaded from a bundle.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    overrides: BTreeMap<String, PromptTemplate>,
}

impl Catalog {
    pub fn builtin() -> Self {
        Self::default()
    }

    /// Overrides builtin texts with the templates found in `dir`. Unknown
    /// names and placeholder sets that differ from the builtin are rejected.
    pub fn with_bundle(dir: &Path) -> Result<Self, PromptError> {
        let loaded = load_bundle(dir)?;
        for (name, template) in &loaded {
            let Some(expected) = placeholders(name) else {
                return Err(PromptError::UnknownTemplate(name.clone()));
            };
            let declared: Vec<&str> = template.placeholders.iter().map(String::as_str).collect();
            if declared != expected {
                return Err(PromptError::Bundle {
                    template: name.clone(),
                    line: 0,
                    reason: format!("placeholders {declared:?} differ from required {expected:?}"),
                });
            }
        }
        Ok(Self { overrides: loaded })
    }

    pub fn template(&self, name: &str, lang: &LanguageTag) -> Result<PromptTemplate, PromptError> {
        if let Some(t) = self.overrides.get(name) {
            return Ok(t.clone());
        }
        builtin_template(name, lang).ok_or_else(|| PromptError::UnknownTemplate(name.to_owned()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::template::assemble_prompt;

    #[test]
    fn six_entries_in_both_languages() {
        for lang in ["en", "zh"] {
            let config = EngineConfig {
                content_language: LanguageTag::new(lang),
                ..Default::default()
            };
            let all = builtin_templates(&config);
            assert_eq!(all.len(), 6);
            for (name, (template, _)) in &all {
                let declared: Vec<&str> = template.placeholders.iter().map(String::as_str).collect();
                assert_eq!(declared, placeholders(name).unwrap(), "{lang}/{name}");
            }
        }
    }

    #[test]
    fn theme_schema_follows_config() {
        let all = builtin_templates(&EngineConfig::default());
        let (_, schema) = &all[THEMES];
        let spec = schema.field("themes").unwrap();
        assert!(spec.constraints.contains(&Constraint::ExactCount(3)));
        assert!(!all.contains_key("nope"));
    }

    #[test]
    fn topic_summary_renders_campus_example() {
        let all = builtin_templates(&EngineConfig::default());
        let (template, _) = &all[TOPIC_SUMMARY];
        let bindings = BTreeMap::from([
            ("topic".to_owned(), "Funny Campus Life".to_owned()),
            ("supplements".to_owned(), "inverted daily routines".to_owned()),
        ]);
        let rendered = assemble_prompt(template, &bindings).unwrap();
        let start = rendered.text.find("[Input Context]").unwrap();
        let end = rendered.text.find("[Overall Rules]").unwrap();
        let ctx = &rendered.text[start..end];
        assert!(ctx.contains("Funny Campus Life"));
        assert!(ctx.contains("inverted daily routines"));
    }

    #[test]
    fn bundle_overrides_checked() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("keywordGen.txt"),
            "[Role]\nr\n[Input Context]\n{{summary}} {{theme}}\n[Overall Rules]\no\n[Output Formatting]\nf\n[Workflow]\nw\n[Example]\ne\n",
        )
        .unwrap();
        let catalog = Catalog::with_bundle(dir.path()).unwrap();
        assert_eq!(catalog.template(KEYWORDS, &LanguageTag::default()).unwrap().role, "r");
        assert_ne!(catalog.template(ECHO, &LanguageTag::default()).unwrap().role, "r");

        std::fs::write(
            dir.path().join("keywordGen.txt"),
            "[Role]\nr\n[Input Context]\n{{summary}}\n[Overall Rules]\no\n[Output Formatting]\nf\n[Workflow]\nw\n[Example]\ne\n",
        )
        .unwrap();
        assert!(Catalog::with_bundle(dir.path()).is_err());
    }
}
