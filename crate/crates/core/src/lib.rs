//! Search-grounded co-writing engine for thematic jokes.
//!
//! A [`Session`] moves through four stages: topic ideation, inspiration
//! generation, validation and refinement, final synthesis. Sessions are
//! immutable snapshots; every operation in [`pipeline`] and [`canvas`] takes
//! one and returns the next. Provider access, the clock and the template
//! catalog live in an [`Engine`].

pub mod canvas;
pub mod engine;
pub mod error;
pub mod model;
pub mod pipeline;
pub mod prompt;
pub mod providers;
pub mod sim;
pub mod store;

pub use canvas::{execute, Command, Executed};
pub use engine::Engine;
pub use error::{Error, Result};
pub use model::*;
pub use pipeline::{ApplyOutcome, EnrichmentTicket, PipelineOutcome};
pub use store::{export_final, SessionEnvelope, Store};
