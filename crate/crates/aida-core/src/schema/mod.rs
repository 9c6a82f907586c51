//! Document type definitions: generic definitions, compiled schemas, and
//! instance validation.
//!
//! A *generic* definition is the simple form anyone can write — root name,
//! namespace, prefix, and an ordered field list with one of seven primitive
//! field types. Compiling it yields a *document type definition*: a type id
//! plus a schema restricted to exactly the constructs the compiler emits
//! (one root element declaration holding a sequence of element references,
//! a named `shortString` simple type, and per-field string restrictions or
//! primitive type references). The same restricted subset is enforced when
//! reading definitions back in: anything richer is rejected as
//! [`SchemaError::SchemaTooRich`] rather than half-validated.
//!
//! Instance validation checks an element subtree against a compiled
//! definition: right root, the declared fields exactly once each in declared
//! order, text-only field content, and per-type lexical rules. Findings are
//! reported, never thrown.

mod codec;

pub use codec::{
    emit_type_definition, parse_generic, parse_generic_element, parse_type_definition,
    parse_type_definition_element,
};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::xml::{XmlElement, XmlError, XmlName};

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("malformed definition: {0}")]
    MalformedDefinition(String),
    #[error("schema outside the supported subset: {0}")]
    SchemaTooRich(String),
    #[error(transparent)]
    Xml(#[from] XmlError),
}

pub(crate) fn malformed(msg: impl Into<String>) -> SchemaError {
    SchemaError::MalformedDefinition(msg.into())
}

/// Longest value a `shortString` may hold.
pub const SHORT_STRING_LIMIT: u32 = 250;

/// The primitive field types.
///
/// `ShortString` may narrow the 250-character ceiling; `None` means the full
/// 250. The other types carry fixed lexical rules: `Date` is `YYYY-MM-DD`
/// (real calendar dates), `Time` is `HH:MM:SS.SSS`, `Int` is a canonical
/// signed 32-bit decimal, `Double` a plain decimal-with-optional-exponent
/// float, `Boolean` exactly `true` or `false`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldType {
    String,
    ShortString { max_length: Option<u32> },
    Date,
    Time,
    Int,
    Double,
    Boolean,
}

impl FieldType {
    pub(crate) fn short_string(max_length: Option<u32>) -> Result<FieldType, SchemaError> {
        if let Some(m) = max_length {
            if m == 0 || m > SHORT_STRING_LIMIT {
                return Err(malformed(format!(
                    "shortString max {m} outside 1..={SHORT_STRING_LIMIT}"
                )));
            }
        }
        Ok(FieldType::ShortString { max_length })
    }

    /// Checks one trimmed value against the type's lexical rule.
    fn check_value(&self, value: &str) -> Result<(), String> {
        match self {
            FieldType::String => Ok(()),
            FieldType::ShortString { max_length } => {
                let limit = max_length.unwrap_or(SHORT_STRING_LIMIT) as usize;
                let len = value.chars().count();
                if len > limit {
                    Err(format!("length {len} exceeds the limit {limit}"))
                } else {
                    Ok(())
                }
            }
            FieldType::Date => {
                if is_calendar_date(value) {
                    Ok(())
                } else {
                    Err(format!("{value:?} is not a date of the form YYYY-MM-DD"))
                }
            }
            FieldType::Time => {
                if is_clock_time(value) {
                    Ok(())
                } else {
                    Err(format!("{value:?} is not a time of the form HH:MM:SS.SSS"))
                }
            }
            FieldType::Int => {
                if is_canonical_int(value) {
                    Ok(())
                } else {
                    Err(format!("{value:?} is not a canonical 32-bit integer"))
                }
            }
            FieldType::Double => {
                if is_canonical_double(value) {
                    Ok(())
                } else {
                    Err(format!("{value:?} is not a canonical double"))
                }
            }
            FieldType::Boolean => {
                if value == "true" || value == "false" {
                    Ok(())
                } else {
                    Err(format!("{value:?} is neither \"true\" nor \"false\""))
                }
            }
        }
    }
}

fn is_calendar_date(s: &str) -> bool {
    let b = s.as_bytes();
    if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
        return false;
    }
    let digits = |range: std::ops::Range<usize>| -> Option<u32> {
        if b[range.clone()].iter().all(u8::is_ascii_digit) {
            s[range].parse().ok()
        } else {
            None
        }
    };
    let (Some(y), Some(m), Some(d)) = (digits(0..4), digits(5..7), digits(8..10)) else {
        return false;
    };
    if !(1..=12).contains(&m) {
        return false;
    }
    let leap = y % 4 == 0 && (y % 100 != 0 || y % 400 == 0);
    let max_day = match m {
        2 if leap => 29,
        2 => 28,
        4 | 6 | 9 | 11 => 30,
        _ => 31,
    };
    (1..=max_day).contains(&d)
}

fn is_clock_time(s: &str) -> bool {
    let b = s.as_bytes();
    if b.len() != 12 || b[2] != b':' || b[5] != b':' || b[8] != b'.' {
        return false;
    }
    let num = |range: std::ops::Range<usize>| -> Option<u32> {
        if b[range.clone()].iter().all(u8::is_ascii_digit) {
            s[range].parse().ok()
        } else {
            None
        }
    };
    match (num(0..2), num(3..5), num(6..8), num(9..12)) {
        (Some(h), Some(m), Some(sec), Some(_)) => h < 24 && m < 60 && sec < 60,
        _ => false,
    }
}

fn is_canonical_int(s: &str) -> bool {
    let unsigned = s.strip_prefix('-').unwrap_or(s);
    if unsigned.is_empty() || !unsigned.bytes().all(|b| b.is_ascii_digit()) {
        return false;
    }
    if unsigned.len() > 1 && unsigned.starts_with('0') {
        return false;
    }
    if s.starts_with('-') && unsigned == "0" {
        return false;
    }
    matches!(s.parse::<i64>(), Ok(v) if i64::from(i32::MIN) <= v && v <= i64::from(i32::MAX))
}

/// `[sign] digits [ "." digits ] [ ("e"|"E") [sign] digits ]`, and the value
/// must fit a finite 64-bit float.
fn is_canonical_double(s: &str) -> bool {
    let rest = s.strip_prefix(['+', '-']).unwrap_or(s);
    let (mantissa, exponent) = match rest.split_once(['e', 'E']) {
        Some((m, e)) => (m, Some(e)),
        None => (rest, None),
    };
    let mantissa_ok = match mantissa.split_once('.') {
        Some((int, frac)) => {
            !int.is_empty()
                && !frac.is_empty()
                && int.bytes().all(|b| b.is_ascii_digit())
                && frac.bytes().all(|b| b.is_ascii_digit())
        }
        None => !mantissa.is_empty() && mantissa.bytes().all(|b| b.is_ascii_digit()),
    };
    let exponent_ok = match exponent {
        Some(e) => {
            let e = e.strip_prefix(['+', '-']).unwrap_or(e);
            !e.is_empty() && e.bytes().all(|b| b.is_ascii_digit())
        }
        None => true,
    };
    mantissa_ok && exponent_ok && matches!(s.parse::<f64>(), Ok(v) if v.is_finite())
}

/// One field of a generic definition. `searchable` is carried through
/// faithfully but has no effect on validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDef {
    pub name: String,
    pub field_type: FieldType,
    pub searchable: bool,
}

/// Checks a string is usable as an XML local name or prefix.
pub(crate) fn check_xml_name(value: &str, what: &str) -> Result<(), SchemaError> {
    XmlName::try_new("", "", value)
        .map(|_| ())
        .map_err(|_| malformed(format!("{what} {value:?} is not a valid XML name")))
}

/// The simple, hand-writable definition form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenericTypeDefinition {
    pub document_root: String,
    pub document_namespace: String,
    pub namespace_prefix: String,
    pub fields: Vec<FieldDef>,
}

impl GenericTypeDefinition {
    /// Validates the construction invariants: names usable, namespace
    /// present, fields non-empty with unique names, and a prefix that
    /// cannot collide with the schema vocabulary's own.
    pub fn new(
        document_root: &str,
        document_namespace: &str,
        namespace_prefix: &str,
        fields: Vec<FieldDef>,
    ) -> Result<Self, SchemaError> {
        check_xml_name(document_root, "document root")?;
        check_xml_name(namespace_prefix, "namespace prefix")?;
        if document_namespace.is_empty() {
            return Err(malformed("document namespace must not be empty"));
        }
        if matches!(namespace_prefix, "xsd" | "xml" | "xmlns") {
            return Err(malformed(format!(
                "namespace prefix {namespace_prefix:?} is reserved"
            )));
        }
        if fields.is_empty() {
            return Err(malformed("field list must not be empty"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for field in &fields {
            check_xml_name(&field.name, "field name")?;
            if !seen.insert(field.name.clone()) {
                return Err(malformed(format!("duplicate field name {:?}", field.name)));
            }
            if let FieldType::ShortString { max_length } = field.field_type {
                FieldType::short_string(max_length)?;
            }
        }
        Ok(GenericTypeDefinition {
            document_root: document_root.to_string(),
            document_namespace: document_namespace.to_string(),
            namespace_prefix: namespace_prefix.to_string(),
            fields,
        })
    }
}

/// A repository-unique type identifier: at most 100 characters, URL-shaped
/// (`scheme://rest`), e.g. `aida://www.polito.it/tax`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DocumentTypeId {
    value: String,
}

impl DocumentTypeId {
    pub fn new(value: &str) -> Result<Self, SchemaError> {
        if value.chars().count() > 100 {
            return Err(malformed(format!(
                "type id longer than 100 characters: {value:?}"
            )));
        }
        let Some((scheme, rest)) = value.split_once("://") else {
            return Err(malformed(format!("type id {value:?} lacks a scheme://")));
        };
        let scheme_ok = scheme
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'))
            && scheme.starts_with(|c: char| c.is_ascii_alphabetic());
        if !scheme_ok || rest.is_empty() {
            return Err(malformed(format!("type id {value:?} is not URL-shaped")));
        }
        Ok(DocumentTypeId {
            value: value.to_string(),
        })
    }

    pub fn as_str(&self) -> &str {
        &self.value
    }
}

impl std::fmt::Display for DocumentTypeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.value)
    }
}

/// The validator's view of a schema: root element, namespace, field order,
/// and each field's constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledSchema {
    pub root_element: String,
    pub target_namespace: String,
    pub namespace_prefix: String,
    pub element_order: Vec<String>,
    pub constraints: BTreeMap<String, FieldType>,
}

/// A complete definition: id, compiled schema, and optionally the generic
/// source it was compiled from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentTypeDefinition {
    pub type_id: DocumentTypeId,
    pub compiled_schema: CompiledSchema,
    pub source_generic: Option<GenericTypeDefinition>,
}

impl DocumentTypeDefinition {
    /// When the generic source is carried along, the compiled schema must be
    /// exactly its compilation — a definition whose halves disagree is
    /// rejected here rather than trusted.
    pub fn new(
        type_id: DocumentTypeId,
        compiled_schema: CompiledSchema,
        source_generic: Option<GenericTypeDefinition>,
    ) -> Result<Self, SchemaError> {
        if let Some(generic) = &source_generic {
            let recompiled = compile(generic.clone(), type_id.clone());
            if recompiled.compiled_schema != compiled_schema {
                return Err(malformed(
                    "schema does not match the embedded generic definition",
                ));
            }
        }
        Ok(DocumentTypeDefinition {
            type_id,
            compiled_schema,
            source_generic,
        })
    }
}

/// Compiles a generic definition under the given id. Deterministic: equal
/// inputs give equal definitions (and byte-identical emitted documents).
pub fn compile(generic: GenericTypeDefinition, type_id: DocumentTypeId) -> DocumentTypeDefinition {
    let compiled_schema = CompiledSchema {
        root_element: generic.document_root.clone(),
        target_namespace: generic.document_namespace.clone(),
        namespace_prefix: generic.namespace_prefix.clone(),
        element_order: generic.fields.iter().map(|f| f.name.clone()).collect(),
        constraints: generic
            .fields
            .iter()
            .map(|f| (f.name.clone(), f.field_type.clone()))
            .collect(),
    };
    DocumentTypeDefinition {
        type_id,
        compiled_schema,
        source_generic: Some(generic),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// The field name concerned, or `"structure"` for shape problems.
    pub label: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        ValidationReport {
            valid: violations.is_empty(),
            violations,
        }
    }
}

/// Validates an instance subtree against a definition. All findings land in
/// the report; nothing here throws.
pub fn validate_instance(
    instance_root: &XmlElement,
    def: &DocumentTypeDefinition,
) -> ValidationReport {
    let schema = &def.compiled_schema;
    let mut violations = Vec::new();
    let mut structure = |message: String| {
        violations.push(Violation {
            label: "structure".to_string(),
            message,
        });
    };

    if instance_root.name.local != schema.root_element
        || instance_root.name.namespace_uri != schema.target_namespace
    {
        structure(format!(
            "root must be {{{}}}{}, found {{{}}}{}",
            schema.target_namespace,
            schema.root_element,
            instance_root.name.namespace_uri,
            instance_root.name.local
        ));
        return ValidationReport::from_violations(violations);
    }

    let children = match instance_root.structural_children() {
        Ok(children) => children,
        Err(e) => {
            structure(e.to_string());
            return ValidationReport::from_violations(violations);
        }
    };

    let expected = &schema.element_order;
    for (position, pair) in children
        .iter()
        .map(Some)
        .chain(std::iter::repeat(None))
        .zip(expected.iter().map(Some).chain(std::iter::repeat(None)))
        .take(children.len().max(expected.len()))
        .enumerate()
    {
        match pair {
            (Some(child), Some(want)) => {
                if child.name.namespace_uri != schema.target_namespace {
                    violations.push(Violation {
                        label: want.clone(),
                        message: format!(
                            "field {} carries namespace {:?} instead of {:?}",
                            child.name.local, child.name.namespace_uri, schema.target_namespace
                        ),
                    });
                } else if child.name.local != *want {
                    violations.push(Violation {
                        label: want.clone(),
                        message: format!(
                            "field order: expected {} at position {}, found {}",
                            want,
                            position + 1,
                            child.name.local
                        ),
                    });
                } else {
                    check_field(child, &schema.constraints[want], &mut violations);
                }
            }
            (Some(child), None) => violations.push(Violation {
                label: "structure".to_string(),
                message: format!("unexpected extra element {}", child.name.local),
            }),
            (None, Some(want)) => violations.push(Violation {
                label: want.clone(),
                message: format!("missing field {want}"),
            }),
            (None, None) => unreachable!(),
        }
    }

    ValidationReport::from_violations(violations)
}

fn check_field(field: &XmlElement, field_type: &FieldType, violations: &mut Vec<Violation>) {
    if !field.has_only_text() {
        violations.push(Violation {
            label: field.name.local.clone(),
            message: format!("field {} must contain only text", field.name.local),
        });
        return;
    }
    let text = field.text();
    let value = text.trim();
    if let Err(message) = field_type.check_value(value) {
        violations.push(Violation {
            label: field.name.local.clone(),
            message: format!("field {}: {message}", field.name.local),
        });
    }
}
