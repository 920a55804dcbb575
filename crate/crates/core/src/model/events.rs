use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::ids::{BlockId, MapId};
use super::stage::WorkflowStage;
use super::types::MapMode;

/// One entry of the append-only session log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub at: DateTime<Utc>,
    /// Sequence number of the command event this entry belongs to. Equal to
    /// `seq` for command events themselves.
    pub command: u64,
    pub entry: EventEntry,
}

impl Event {
    pub fn is_command(&self) -> bool {
        matches!(self.entry, EventEntry::Command(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "data", rename_all = "snake_case")]
pub enum EventEntry {
    Command(CommandEvent),
    Step(StepEvent),
}

/// Top-level operations; exactly one is logged per executed command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum CommandEvent {
    SessionCreated,
    Transition { target: WorkflowStage },
    Summarize,
    Resummarize,
    ConfirmSummary,
    Generate,
    AddMap { mode: MapMode },
    RemoveMap { map: MapId },
    AddBlockAi { map: MapId },
    AddBlockManual { map: MapId },
    EditBlock { map: MapId, block: BlockId },
    DeleteBlock { map: MapId, block: BlockId },
    ReenrichBlock { map: MapId, block: BlockId },
    Regenerate { map: MapId },
    CompleteManualMap { map: MapId },
    Finalize { map: MapId },
}

/// Pipeline sub-events, tagged with the owning command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum StepEvent {
    StageChanged { from: WorkflowStage, to: WorkflowStage },
    SummaryGenerated,
    ThemesDerived { count: usize },
    MapCreated { map: MapId },
    MapFailed { map: MapId, reason: String },
    BlockAdded { map: MapId, block: BlockId },
    BlockEnriched { map: MapId, block: BlockId, generation: u64 },
    EnrichmentFailed { map: MapId, block: BlockId, reason: String },
    EnrichmentSuperseded { map: MapId, block: BlockId },
    PrototypeDrafted { map: MapId, version: u32 },
}
