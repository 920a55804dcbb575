use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use super::wire::extract_object;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    Text,
    TextList,
    RecordList(Vec<FieldSpec>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    /// Text must not be blank; lists must have at least one item.
    NonEmpty,
    /// List length must equal the given count.
    ExactCount(usize),
    /// No text-list item may be blank.
    NoBlankItems,
    /// Record-list items must differ in the named text field (case-insensitive).
    UniqueBy(String),
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::NonEmpty => f.write_str("nonempty"),
            Constraint::ExactCount(n) => write!(f, "exactly {n} items"),
            Constraint::NoBlankItems => f.write_str("no blank items"),
            Constraint::UniqueBy(field) => write!(f, "unique by {field}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub kind: FieldKind,
    pub required: bool,
    pub constraints: Vec<Constraint>,
}

impl FieldSpec {
    pub fn text(name: &str) -> Self {
        Self {
            name: name.to_owned(),
            kind: FieldKind::Text,
            required: true,
            constraints: vec![Constraint::NonEmpty],
        }
    }

    pub fn text_list(name: &str) -> Self {
        Self {
            name: name.to_owned(),
            kind: FieldKind::TextList,
            required: true,
            constraints: Vec::new(),
        }
    }

    pub fn records(name: &str, fields: Vec<FieldSpec>) -> Self {
        Self {
            name: name.to_owned(),
            kind: FieldKind::RecordList(fields),
            required: true,
            constraints: Vec::new(),
        }
    }

    pub fn optional(mut self) -> Self {
        self.required = false;
        self
    }

    pub fn allow_blank(mut self) -> Self {
        self.constraints.retain(|c| *c != Constraint::NonEmpty);
        self
    }

    pub fn with(mut self, constraint: Constraint) -> Self {
        self.constraints.push(constraint);
        self
    }
}

/// Engine-side description of a structured record expected from the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputSchema {
    pub name: String,
    pub fields: Vec<FieldSpec>,
}

impl OutputSchema {
    /// Panics on duplicate field names; schemas are built from code.
    pub fn new(name: &str, fields: Vec<FieldSpec>) -> Self {
        let mut seen = HashSet::new();
        for f in &fields {
            assert!(seen.insert(f.name.clone()), "duplicate field {} in {name}", f.name);
        }
        Self {
            name: name.to_owned(),
            fields,
        }
    }

    pub fn field(&self, name: &str) -> Option<&FieldSpec> {
        self.fields.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldValue {
    Text(String),
    TextList(Vec<String>),
    Records(Vec<Record>),
}

/// A validated structured record.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record(pub BTreeMap<String, FieldValue>);

impl Record {
    pub fn text(&self, name: &str) -> Option<&str> {
        match self.0.get(name) {
            Some(FieldValue::Text(s)) => Some(s),
            _ => None,
        }
    }

    pub fn text_list(&self, name: &str) -> Option<&[String]> {
        match self.0.get(name) {
            Some(FieldValue::TextList(v)) => Some(v),
            _ => None,
        }
    }

    pub fn records(&self, name: &str) -> Option<&[Record]> {
        match self.0.get(name) {
            Some(FieldValue::Records(v)) => Some(v),
            _ => None,
        }
    }

    fn to_json(&self) -> Value {
        let map: Map<String, Value> = self
            .0
            .iter()
            .map(|(k, v)| {
                let v = match v {
                    FieldValue::Text(s) => Value::String(s.clone()),
                    FieldValue::TextList(items) => {
                        Value::Array(items.iter().cloned().map(Value::String).collect())
                    }
                    FieldValue::Records(rs) => Value::Array(rs.iter().map(Record::to_json).collect()),
                };
                (k.clone(), v)
            })
            .collect();
        Value::Object(map)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemaErrorKind {
    Unparseable,
    MissingField(String),
    ConstraintViolated { field: String, rule: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{schema}: {}", describe(.kind))]
pub struct SchemaError {
    pub schema: String,
    pub kind: SchemaErrorKind,
}

fn describe(kind: &SchemaErrorKind) -> String {
    match kind {
        SchemaErrorKind::Unparseable => "no structured object found".to_owned(),
        SchemaErrorKind::MissingField(name) => format!("missing field {name}"),
        SchemaErrorKind::ConstraintViolated { field, rule } => format!("{field} violates {rule}"),
    }
}

impl SchemaError {
    pub fn violated(schema: &str, field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            schema: schema.to_owned(),
            kind: SchemaErrorKind::ConstraintViolated {
                field: field.into(),
                rule: rule.into(),
            },
        }
    }
}

/// Extracts the structured object from a raw model response and checks it
/// against `schema`. Fields are checked in schema order and the first
/// violation is reported. Fields not named by the schema are dropped.
pub fn validate_output(raw: &str, schema: &OutputSchema) -> Result<Record, SchemaError> {
    let Some(object) = extract_object(raw) else {
        return Err(SchemaError {
            schema: schema.name.clone(),
            kind: SchemaErrorKind::Unparseable,
        });
    };
    validate_object(&object, &schema.fields, "").map_err(|kind| SchemaError {
        schema: schema.name.clone(),
        kind,
    })
}

/// Encodes a record in the wire grammar accepted by [`validate_output`].
pub fn serialize_record(record: &Record) -> String {
    serde_json::to_string(&record.to_json()).expect("record serializes")
}

fn violated(path: &str, rule: impl fmt::Display) -> SchemaErrorKind {
    SchemaErrorKind::ConstraintViolated {
        field: path.to_owned(),
        rule: rule.to_string(),
    }
}

fn validate_object(
    object: &Map<String, Value>,
    fields: &[FieldSpec],
    prefix: &str,
) -> Result<Record, SchemaErrorKind> {
    let mut record = Record::default();
    for spec in fields {
        let path = format!("{prefix}{}", spec.name);
        let value = match object.get(&spec.name) {
            None | Some(Value::Null) => {
                if spec.required {
                    return Err(SchemaErrorKind::MissingField(path));
                }
                continue;
            }
            Some(v) => v,
        };
        let parsed = match &spec.kind {
            FieldKind::Text => {
                let Value::String(s) = value else {
                    return Err(violated(&path, "kind text"));
                };
                FieldValue::Text(s.trim().to_owned())
            }
            FieldKind::TextList => {
                let Value::Array(items) = value else {
                    return Err(violated(&path, "kind text-list"));
                };
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    let Value::String(s) = item else {
                        return Err(violated(&path, "kind text-list"));
                    };
                    out.push(s.trim().to_owned());
                }
                FieldValue::TextList(out)
            }
            FieldKind::RecordList(sub) => {
                let Value::Array(items) = value else {
                    return Err(violated(&path, "kind record-list"));
                };
                let mut out = Vec::with_capacity(items.len());
                for (i, item) in items.iter().enumerate() {
                    let Value::Object(obj) = item else {
                        return Err(violated(&path, "kind record-list"));
                    };
                    out.push(validate_object(obj, sub, &format!("{path}[{i}]."))?);
                }
                FieldValue::Records(out)
            }
        };
        for constraint in &spec.constraints {
            check_constraint(&parsed, constraint, &path)?;
        }
        record.0.insert(spec.name.clone(), parsed);
    }
    Ok(record)
}

fn check_constraint(value: &FieldValue, constraint: &Constraint, path: &str) -> Result<(), SchemaErrorKind> {
    let len = match value {
        FieldValue::Text(s) => s.chars().count(),
        FieldValue::TextList(v) => v.len(),
        FieldValue::Records(v) => v.len(),
    };
    let ok = match (constraint, value) {
        (Constraint::NonEmpty, FieldValue::Text(s)) => !s.is_empty(),
        (Constraint::NonEmpty, _) => len > 0,
        (Constraint::ExactCount(n), FieldValue::Text(_)) => len == *n,
        (Constraint::ExactCount(n), _) => len == *n,
        (Constraint::NoBlankItems, FieldValue::TextList(v)) => v.iter().all(|s| !s.is_empty()),
        (Constraint::NoBlankItems, _) => true,
        (Constraint::UniqueBy(field), FieldValue::Records(rs)) => {
            let mut seen = HashSet::new();
            rs.iter()
                .all(|r| seen.insert(r.text(field).unwrap_or_default().to_lowercase()))
        }
        (Constraint::UniqueBy(_), FieldValue::TextList(v)) => {
            let mut seen = HashSet::new();
            v.iter().all(|s| seen.insert(s.to_lowercase()))
        }
        (Constraint::UniqueBy(_), FieldValue::Text(_)) => true,
    };
    if ok {
        Ok(())
    } else {
        Err(violated(path, constraint))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn joke() -> OutputSchema {
        OutputSchema::new(
            "jokeDraft",
            vec![
                FieldSpec::text("title"),
                FieldSpec::text("setup"),
                FieldSpec::text("punchline"),
            ],
        )
    }

    fn themes(n: usize) -> OutputSchema {
        OutputSchema::new(
            "themes",
            vec![FieldSpec::records(
                "themes",
                vec![FieldSpec::text("label"), FieldSpec::text("rationale").allow_blank()],
            )
            .with(Constraint::ExactCount(n))
            .with(Constraint::UniqueBy("label".into()))],
        )
    }

    #[test]
    fn empty_text_is_unparseable() {
        let err = validate_output("", &joke()).unwrap_err();
        assert_eq!(err.kind, SchemaErrorKind::Unparseable);
    }

    #[test]
    fn first_missing_field_is_named() {
        let err = validate_output(r#"{"title":"t","setup":"s"}"#, &joke()).unwrap_err();
        assert_eq!(err.kind, SchemaErrorKind::MissingField("punchline".into()));
    }

    #[test]
    fn nested_constraints_carry_paths() {
        let raw = r#"{"themes":[{"label":"A","rationale":""},{"label":" ","rationale":"x"}]}"#;
        let err = validate_output(raw, &themes(2)).unwrap_err();
        assert_eq!(
            err.kind,
            SchemaErrorKind::ConstraintViolated {
                field: "themes[1].label".into(),
                rule: "nonempty".into()
            }
        );
    }

    #[test]
    fn duplicate_labels_and_wrong_counts() {
        let dup = r#"{"themes":[{"label":"A","rationale":""},{"label":"a","rationale":""}]}"#;
        let err = validate_output(dup, &themes(2)).unwrap_err();
        assert!(matches!(err.kind, SchemaErrorKind::ConstraintViolated { rule, .. } if rule == "unique by label"));
        let one = r#"{"themes":[{"label":"A","rationale":""}]}"#;
        let err = validate_output(one, &themes(3)).unwrap_err();
        assert!(matches!(err.kind, SchemaErrorKind::ConstraintViolated { rule, .. } if rule == "exactly 3 items"));
    }

    #[test]
    fn wrong_kind_is_a_violation() {
        let err = validate_output(r#"{"title":1,"setup":"s","punchline":"p"}"#, &joke()).unwrap_err();
        assert!(matches!(err.kind, SchemaErrorKind::ConstraintViolated { rule, .. } if rule == "kind text"));
    }

    #[test]
    fn fenced_record_validates_and_round_trips() {
        let raw = "Sure!\n```json\n{\"title\":\"T\",\"setup\":\"S\",\"punchline\":\"P\",\"extra\":1}\n```\n";
        let rec = validate_output(raw, &joke()).unwrap();
        assert_eq!(rec.text("title"), Some("T"));
        assert!(!rec.0.contains_key("extra"));
        assert_eq!(validate_output(&serialize_record(&rec), &joke()).unwrap(), rec);
    }
}
