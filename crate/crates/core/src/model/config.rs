use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// BCP-47-ish content language tag. Only the primary subtag matters for
/// template selection.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LanguageTag(String);

impl LanguageTag {
    pub fn new(tag: impl Into<String>) -> Self {
        Self(tag.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn primary(&self) -> &str {
        self.0.split(['-', '_']).next().unwrap_or("")
    }

    pub fn is_chinese(&self) -> bool {
        self.primary().eq_ignore_ascii_case("zh")
    }
}

impl Default for LanguageTag {
    fn default() -> Self {
        Self("en".to_owned())
    }
}

impl fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Tunables for one session. Every field has a default so partial config
/// files deserialize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Number of inspiration themes (and therefore joke maps) derived from a summary.
    pub theme_count: u32,
    pub blocks_per_pool: u32,
    pub search_top_k: u32,
    pub lm_temperature: f64,
    /// How many times a schema-invalid language-model response is re-requested.
    pub max_structured_retries: u32,
    /// How many times a transport failure is retried inside one provider call.
    pub transport_retries: u32,
    pub content_language: LanguageTag,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            theme_count: 3,
            blocks_per_pool: 4,
            search_top_k: 5,
            lm_temperature: 0.3,
            max_structured_retries: 2,
            transport_retries: 2,
            content_language: LanguageTag::default(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, rule: &str| {
            Err(Error::InvalidConfig {
                field: field.to_owned(),
                rule: rule.to_owned(),
            })
        };
        if self.theme_count == 0 {
            return fail("theme_count", "must be positive");
        }
        if self.blocks_per_pool == 0 {
            return fail("blocks_per_pool", "must be positive");
        }
        if self.search_top_k == 0 {
            return fail("search_top_k", "must be positive");
        }
        if !(0.0..=1.0).contains(&self.lm_temperature) {
            return fail("lm_temperature", "must lie in [0, 1]");
        }
        if self.content_language.as_str().trim().is_empty() {
            return fail("content_language", "must be nonempty");
        }
        Ok(())
    }
}
