//! Domain types, identifiers and the four-stage workflow machine.

pub mod clock;
pub mod config;
pub mod events;
pub mod ids;
pub mod invariants;
pub mod session;
pub mod stage;
pub mod types;

pub use clock::{Clock, ScriptedClock, SystemClock};
pub use config::{EngineConfig, LanguageTag};
pub use events::{CommandEvent, Event, EventEntry, StepEvent};
pub use ids::{BlockId, IdCounter, MapId, SessionId, ThemeId};
pub use invariants::{check_evolution, check_invariants, Violation};
pub use session::{transition, Session};
pub use stage::WorkflowStage;
pub use types::*;
