use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::config::LanguageTag;
use super::ids::{BlockId, MapId, ThemeId};

/// What the writer typed into the topic panel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicBrief {
    pub topic: String,
    /// Expected scenarios, preferred styles, comedic techniques; free text each.
    #[serde(default)]
    pub supplements: Vec<String>,
    #[serde(default)]
    pub audience_hint: Option<String>,
    #[serde(default)]
    pub content_language: LanguageTag,
}

impl TopicBrief {
    pub fn new(topic: impl Into<String>) -> Self {
        Self {
            topic: topic.into(),
            supplements: Vec::new(),
            audience_hint: None,
            content_language: LanguageTag::default(),
        }
    }

    pub fn with_supplements<I, S>(mut self, supplements: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.supplements = supplements.into_iter().map(Into::into).collect();
        self
    }

    pub fn is_valid(&self) -> bool {
        !self.topic.trim().is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicSummary {
    pub theme: String,
    pub audience: String,
    pub style: String,
    pub techniques: Vec<String>,
    pub raw_text: String,
    pub confirmed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InspirationTheme {
    pub id: ThemeId,
    pub label: String,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub url: String,
    pub title: String,
    pub snippet: String,
    pub retrieved_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockOrigin {
    Ai,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnrichmentState {
    Pending,
    Enriched,
    Stale,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EchoSummary {
    pub block_id: BlockId,
    pub text: String,
    pub source_generation: u64,
}

/// One editable idea unit together with the web evidence that backs it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InspirationBlock {
    pub id: BlockId,
    pub text: String,
    pub origin: BlockOrigin,
    pub evidence: Vec<EvidenceItem>,
    pub echo: Option<EchoSummary>,
    pub enrichment_state: EnrichmentState,
    /// Number of successful enrichment runs.
    pub generation: u64,
    /// Number of text edits. Enrichment results computed for an older
    /// revision are discarded.
    pub revision: u64,
    /// Last enrichment failure, cleared by the next successful run.
    pub annotation: Option<String>,
}

impl InspirationBlock {
    pub fn manual(id: BlockId, text: impl Into<String>) -> Self {
        Self {
            id,
            text: text.into(),
            origin: BlockOrigin::Manual,
            evidence: Vec::new(),
            echo: None,
            enrichment_state: EnrichmentState::Pending,
            generation: 0,
            revision: 0,
            annotation: None,
        }
    }

    pub fn is_enriched(&self) -> bool {
        self.enrichment_state == EnrichmentState::Enriched
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JokePrototype {
    pub version: u32,
    pub title: String,
    pub setup: String,
    pub punchline: String,
    pub informed_by: Vec<BlockId>,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapMode {
    AiGenerated,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DraftState {
    Fresh,
    Stale,
    Empty,
}

/// One theme's inspiration pool with its versioned joke prototype.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JokeMap {
    pub id: MapId,
    pub theme: Option<InspirationTheme>,
    /// Search keywords expanded for the theme; reused by AI Add.
    pub keywords: Vec<String>,
    pub pool: Vec<InspirationBlock>,
    pub prototypes: Vec<JokePrototype>,
    pub current_version: u32,
    pub mode: MapMode,
    pub draft_state: DraftState,
    /// Why the pipeline could not populate this map, if it could not.
    pub annotation: Option<String>,
}

impl JokeMap {
    pub fn empty(id: MapId, mode: MapMode, theme: Option<InspirationTheme>) -> Self {
        Self {
            id,
            theme,
            keywords: Vec::new(),
            pool: Vec::new(),
            prototypes: Vec::new(),
            current_version: 0,
            mode,
            draft_state: DraftState::Empty,
            annotation: None,
        }
    }

    pub fn block(&self, id: &BlockId) -> Option<&InspirationBlock> {
        self.pool.iter().find(|b| &b.id == id)
    }

    pub fn block_mut(&mut self, id: &BlockId) -> Option<&mut InspirationBlock> {
        self.pool.iter_mut().find(|b| &b.id == id)
    }

    pub fn current(&self) -> Option<&JokePrototype> {
        self.prototypes.last()
    }

    /// Marks the draft stale after a pool mutation. Maps without a draft stay empty.
    pub fn mark_pool_changed(&mut self) {
        if !self.prototypes.is_empty() {
            self.draft_state = DraftState::Stale;
        }
    }

    pub fn push_prototype(&mut self, prototype: JokePrototype) {
        self.current_version = prototype.version;
        self.prototypes.push(prototype);
        self.draft_state = DraftState::Fresh;
        self.annotation = None;
    }

    pub fn next_version(&self) -> u32 {
        self.prototypes.last().map_or(1, |p| p.version + 1)
    }
}

/// Read-only projection shown when a block is selected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EchoAssistantView {
    pub block_id: BlockId,
    pub block_text: String,
    pub echo: Option<String>,
    pub evidence: Vec<EvidenceItem>,
    pub enrichment_state: EnrichmentState,
}
