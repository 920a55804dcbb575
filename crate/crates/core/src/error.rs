use thiserror::Error;

use crate::model::{BlockId, MapId, SessionId, Violation, WorkflowStage};
use crate::prompt::{PromptError, SchemaError};
use crate::providers::ProviderError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("topic is blank")]
    EmptyTopic,
    #[error("invalid config: {field} {rule}")]
    InvalidConfig { field: String, rule: String },
    #[error("illegal transition {from} -> {to}")]
    IllegalTransition {
        from: WorkflowStage,
        to: WorkflowStage,
    },
    #[error("guard unsatisfied: {0}")]
    GuardUnsatisfied(String),
    #[error("{operation} is not allowed during {stage}")]
    WrongStage {
        operation: &'static str,
        stage: WorkflowStage,
    },

    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("{template} produced no valid output after {attempts} attempts: {last}")]
    StructuredOutputFailed {
        template: String,
        attempts: u32,
        last: SchemaError,
    },

    #[error("summary already confirmed")]
    SummaryAlreadyConfirmed,
    #[error("no topic summary")]
    NoSummary,
    #[error("search returned no evidence for {0}")]
    EmptyEvidence(String),
    #[error("map {0} has an empty inspiration pool")]
    EmptyPool(MapId),
    #[error("block {0} is not enriched yet")]
    BlocksPending(BlockId),
    #[error("initial generation produced no usable map: {0}")]
    InitialGenerationFailed(String),
    #[error("block {0} is already enriched")]
    NotStale(BlockId),

    #[error("unknown session {0}")]
    UnknownSession(SessionId),
    #[error("unknown map {0}")]
    UnknownMap(MapId),
    #[error("unknown block {0}")]
    UnknownBlock(BlockId),
    #[error("block text is blank")]
    EmptyBlockText,
    #[error("map {0} has no theme")]
    ThemeMissing(MapId),
    #[error("map {0} holds the final joke")]
    MapFinalized(MapId),
    #[error("map {0} changed since its last draft")]
    DraftStale(MapId),
    #[error("map {0} has no prototype")]
    NoPrototype(MapId),
    #[error("session is not finalized")]
    NotFinalized,

    #[error("refusing to persist a session with {} invariant violation(s)", .0.len())]
    InvariantViolation(Vec<Violation>),
    #[error("io failure: {0}")]
    IoFailure(String),
    #[error("unsupported envelope format version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt session envelope: {0}")]
    CorruptEnvelope(String),
}

impl Error {
    /// Stable machine-readable code shared by the HTTP service and tests.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyTopic => "EmptyTopic",
            Error::InvalidConfig { .. } => "InvalidConfig",
            Error::IllegalTransition { .. } => "IllegalTransition",
            Error::GuardUnsatisfied(_) => "GuardUnsatisfied",
            Error::WrongStage { .. } => "WrongStage",
            Error::Prompt(e) => e.code(),
            Error::Provider(e) => e.code(),
            Error::StructuredOutputFailed { .. } => "StructuredOutputFailed",
            Error::SummaryAlreadyConfirmed => "SummaryAlreadyConfirmed",
            Error::NoSummary => "NoSummary",
            Error::EmptyEvidence(_) => "EmptyEvidence",
            Error::EmptyPool(_) => "EmptyPool",
            Error::BlocksPending(_) => "BlocksPending",
            Error::InitialGenerationFailed(_) => "InitialGenerationFailed",
            Error::NotStale(_) => "NotStale",
            Error::UnknownSession(_) => "UnknownSession",
            Error::UnknownMap(_) => "UnknownMap",
            Error::UnknownBlock(_) => "UnknownBlock",
            Error::EmptyBlockText => "EmptyBlockText",
            Error::ThemeMissing(_) => "ThemeMissing",
            Error::MapFinalized(_) => "MapFinalized",
            Error::DraftStale(_) => "DraftStale",
            Error::NoPrototype(_) => "NoPrototype",
            Error::NotFinalized => "NotFinalized",
            Error::InvariantViolation(_) => "InvariantViolation",
            Error::IoFailure(_) => "IoFailure",
            Error::UnsupportedVersion(_) => "UnsupportedVersion",
            Error::CorruptEnvelope(_) => "CorruptEnvelope",
        }
    }

    /// True for failures that originate at the provider boundary.
    pub fn is_provider_side(&self) -> bool {
        matches!(
            self,
            Error::Provider(_) | Error::StructuredOutputFailed { .. } | Error::EmptyEvidence(_)
        )
    }
}
