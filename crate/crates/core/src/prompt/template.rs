use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::PromptError;

/// The six preamble sections in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Section {
    Role,
    InputContext,
    OverallRules,
    OutputFormatting,
    Workflow,
    Example,
}

impl Section {
    pub const ORDER: [Section; 6] = [
        Section::Role,
        Section::InputContext,
        Section::OverallRules,
        Section::OutputFormatting,
        Section::Workflow,
        Section::Example,
    ];

    pub fn title(self) -> &'static str {
        match self {
            Section::Role => "Role",
            Section::InputContext => "Input Context",
            Section::OverallRules => "Overall Rules",
            Section::OutputFormatting => "Output Formatting",
            Section::Workflow => "Workflow",
            Section::Example => "Example",
        }
    }

    /// Bracketed header line, e.g. `[Input Context]`.
    pub fn header(self) -> String {
        format!("[{}]", self.title())
    }

    pub fn from_header(line: &str) -> Option<Section> {
        let inner = line.strip_prefix('[')?.strip_suffix(']')?;
        Section::ORDER.into_iter().find(|s| s.title() == inner)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub name: String,
    pub role: String,
    pub input_context: String,
    pub overall_rules: String,
    pub output_formatting: String,
    pub workflow: String,
    pub example: String,
    pub placeholders: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub template_name: String,
    pub text: String,
    pub bindings: BTreeMap<String, String>,
}

impl PromptTemplate {
    /// Builds a template and checks that `{{placeholders}}` in the input
    /// context are exactly `declared`, and that no other section uses any.
    pub fn new(
        name: impl Into<String>,
        sections: [&str; 6],
        declared: &[&str],
    ) -> Result<Self, PromptError> {
        let name = name.into();
        let [role, input_context, overall_rules, output_formatting, workflow, example] =
            sections.map(|s| s.trim().to_owned());
        let template = PromptTemplate {
            name,
            role,
            input_context,
            overall_rules,
            output_formatting,
            workflow,
            example,
            placeholders: declared.iter().map(|s| (*s).to_owned()).collect(),
        };
        template.validate()?;
        Ok(template)
    }

    pub fn section(&self, section: Section) -> &str {
        match section {
            Section::Role => &self.role,
            Section::InputContext => &self.input_context,
            Section::OverallRules => &self.overall_rules,
            Section::OutputFormatting => &self.output_formatting,
            Section::Workflow => &self.workflow,
            Section::Example => &self.example,
        }
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        for section in Section::ORDER {
            if self.section(section).trim().is_empty() {
                return Err(PromptError::EmptySection {
                    template: self.name.clone(),
                    section: section.title(),
                });
            }
        }
        let found: BTreeSet<String> = scan_placeholders(&self.input_context)
            .into_iter()
            .map(|(_, name)| name.to_owned())
            .collect();
        if let Some(extra) = found.difference(&self.placeholders).next() {
            return Err(PromptError::UndeclaredPlaceholder {
                template: self.name.clone(),
                name: extra.clone(),
            });
        }
        if let Some(unused) = self.placeholders.difference(&found).next() {
            return Err(PromptError::UnusedPlaceholder {
                template: self.name.clone(),
                name: unused.clone(),
            });
        }
        for section in Section::ORDER {
            if section == Section::InputContext {
                continue;
            }
            if let Some((_, name)) = scan_placeholders(self.section(section)).first() {
                return Err(PromptError::UndeclaredPlaceholder {
                    template: self.name.clone(),
                    name: (*name).to_owned(),
                });
            }
        }
        Ok(())
    }
}

/// Renders `template` with `bindings`. The result is a pure function of its
/// inputs, so equal inputs give byte-identical text.
pub fn assemble_prompt(
    template: &PromptTemplate,
    bindings: &BTreeMap<String, String>,
) -> Result<RenderedPrompt, PromptError> {
    if let Some(missing) = template
        .placeholders
        .iter()
        .find(|p| !bindings.contains_key(*p))
    {
        return Err(PromptError::MissingBinding(missing.clone()));
    }
    if let Some(unknown) = bindings
        .keys()
        .find(|k| !template.placeholders.contains(*k))
    {
        return Err(PromptError::UnknownBinding(unknown.clone()));
    }

    let mut text = String::new();
    for (i, section) in Section::ORDER.into_iter().enumerate() {
        if i > 0 {
            text.push('\n');
        }
        text.push_str(&section.header());
        text.push('\n');
        let body = if section == Section::InputContext {
            substitute(&template.input_context, bindings)
        } else {
            template.section(section).to_owned()
        };
        text.push_str(body.trim_end());
        text.push('\n');
    }
    Ok(RenderedPrompt {
        template_name: template.name.clone(),
        text,
        bindings: bindings.clone(),
    })
}

/// Single left-to-right pass; substituted values are never rescanned.
fn substitute(source: &str, bindings: &BTreeMap<String, String>) -> String {
    let mut out = String::with_capacity(source.len());
    let mut cursor = 0;
    for (start, name) in scan_placeholders(source) {
        out.push_str(&source[cursor..start]);
        out.push_str(&bindings[name]);
        cursor = start + name.len() + 4;
    }
    out.push_str(&source[cursor..]);
    out
}

/// Finds `{{name}}` occurrences where name is `[a-z_][a-z0-9_]*`.
pub(crate) fn scan_placeholders(source: &str) -> Vec<(usize, &str)> {
    let bytes = source.as_bytes();
    let mut found = Vec::new();
    let mut i = 0;
    while i + 1 < bytes.len() {
        if bytes[i] == b'{' && bytes[i + 1] == b'{' {
            let start = i + 2;
            let mut j = start;
            while j < bytes.len() && (bytes[j].is_ascii_lowercase() || bytes[j] == b'_' || (j > start && bytes[j].is_ascii_digit())) {
                j += 1;
            }
            if j > start && j + 1 < bytes.len() && bytes[j] == b'}' && bytes[j + 1] == b'}' {
                found.push((i, &source[start..j]));
                i = j + 2;
                continue;
            }
        }
        i += 1;
    }
    found
}
