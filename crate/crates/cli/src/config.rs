//! Engine configuration from flags and an optional TOML file.
//!
//! The file uses the field names of [`EngineConfig`]; any field it sets
//! overrides the corresponding flag.
//!
//! ```toml
//! theme_count = 3
//! blocks_per_pool = 4
//! search_top_k = 5
//! lm_temperature = 0.3
//! max_structured_retries = 2
//! transport_retries = 2
//! content_language = "en"
//! ```

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context};
use jokeasy_core::providers::live::{ChatCompletionsLm, TavilySearch, ENV_LM_API_KEY, ENV_SEARCH_API_KEY};
use jokeasy_core::providers::{FixtureProvider, FixtureScript};
use jokeasy_core::{Engine, EngineConfig, LanguageTag, SystemClock};

#[derive(Debug, Clone, Default, clap::Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub theme_count: Option<u32>,
    #[arg(long)]
    pub blocks_per_pool: Option<u32>,
    #[arg(long)]
    pub top_k: Option<u32>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_retries: Option<u32>,
    #[arg(long)]
    pub transport_retries: Option<u32>,
    #[arg(long)]
    pub lang: Option<String>,
    /// TOML file whose fields override the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> anyhow::Result<EngineConfig> {
        let mut c = EngineConfig::default();
        if let Some(v) = self.theme_count {
            c.theme_count = v;
        }
        if let Some(v) = self.blocks_per_pool {
            c.blocks_per_pool = v;
        }
        if let Some(v) = self.top_k {
            c.search_top_k = v;
        }
        if let Some(v) = self.temperature {
            c.lm_temperature = v;
        }
        if let Some(v) = self.max_retries {
            c.max_structured_retries = v;
        }
        if let Some(v) = self.transport_retries {
            c.transport_retries = v;
        }
        if let Some(v) = &self.lang {
            c.content_language = LanguageTag::new(v.clone());
        }
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            c = overlay(c, &text).with_context(|| format!("parsing {}", path.display()))?;
        }
        c.validate()?;
        Ok(c)
    }
}

/// `base` with every field present in the TOML `text` replaced.
pub fn overlay(base: EngineConfig, text: &str) -> anyhow::Result<EngineConfig> {
    let file: toml::Table = toml::from_str(text)?;
    let mut merged = toml::Table::try_from(&base)?;
    merged.extend(file);
    Ok(merged.try_into()?)
}

/// Fixture-backed engine when `fixture` is given, live providers otherwise.
pub fn build_engine(fixture: Option<&PathBuf>) -> anyhow::Result<(Engine, Option<Arc<FixtureProvider>>)> {
    if let Some(path) = fixture {
        let script = FixtureScript::load(path).with_context(|| format!("loading fixture {}", path.display()))?;
        let (engine, provider) = Engine::with_fixture(script);
        return Ok((engine, Some(provider)));
    }
    let (Some(lm), Some(search)) = (ChatCompletionsLm::from_env(), TavilySearch::from_env()) else {
        bail!("ConfigError: pass --fixture or set {ENV_LM_API_KEY} and {ENV_SEARCH_API_KEY}");
    };
    Ok((Engine::new(Arc::new(lm), Arc::new(search), Arc::new(SystemClock)), None))
}
