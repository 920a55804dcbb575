//! Six-section prompt templates, the builtin pipeline catalog and
//! structured-output validation.

pub mod builtin;
pub mod bundle;
pub mod schema;
pub mod template;
pub mod wire;

use thiserror::Error;

pub use builtin::{builtin_templates, Catalog};
pub use schema::{
    serialize_record, validate_output, Constraint, FieldKind, FieldSpec, FieldValue, OutputSchema, Record,
    SchemaError, SchemaErrorKind,
};
pub use template::{assemble_prompt, PromptTemplate, RenderedPrompt, Section};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("missing binding for placeholder {0}")]
    MissingBinding(String),
    #[error("binding {0} is not a declared placeholder")]
    UnknownBinding(String),
    #[error("template {template}: section {section} is empty")]
    EmptySection { template: String, section: &'static str },
    #[error("template {template}: placeholder {name} is not declared")]
    UndeclaredPlaceholder { template: String, name: String },
    #[error("template {template}: declared placeholder {name} never appears")]
    UnusedPlaceholder { template: String, name: String },
    #[error("unknown template {0}")]
    UnknownTemplate(String),
    #[error("bundle {template}:{line}: {reason}")]
    Bundle {
        template: String,
        line: usize,
        reason: String,
    },
}

impl PromptError {
    pub fn code(&self) -> &'static str {
        match self {
            PromptError::MissingBinding(_) => "MissingBinding",
            PromptError::UnknownBinding(_) => "UnknownBinding",
            PromptError::EmptySection { .. } => "EmptySection",
            PromptError::UndeclaredPlaceholder { .. } => "UndeclaredPlaceholder",
            PromptError::UnusedPlaceholder { .. } => "UnusedPlaceholder",
            PromptError::UnknownTemplate(_) => "UnknownTemplate",
            PromptError::Bundle { .. } => "BundleParseError",
        }
    }
}
