//! Minimal XML document model.
//!
//! The model is deliberately small: elements, attributes, namespace
//! declarations and text. DTDs, CDATA sections, comments and processing
//! instructions (other than the XML declaration) are rejected at parse time;
//! all of them are hazards for deterministic canonicalization and none occur
//! in the document formats this crate handles.
//!
//! All types are immutable values after construction and safe to share across
//! threads; parsing, serialization and canonicalization are pure functions.

mod canon;
mod parse;

pub use canon::{canonicalize, serialize};
pub use parse::parse;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Errors produced by parsing, selection, and document construction.
#[derive(Debug, Error)]
pub enum XmlError {
    #[error("malformed XML: {0}")]
    Malformed(String),
    #[error("unsupported encoding {0:?} (only UTF-8 is supported)")]
    UnsupportedEncoding(String),
    #[error("unsupported construct: {0}")]
    UnsupportedConstruct(String),
    #[error("no element at path step {0:?}")]
    NodeNotFound(String),
}

/// A namespace-qualified name.
///
/// `namespace_uri` is the resolved URI ("" when the name is in no namespace),
/// `prefix` the lexical prefix ("" for unprefixed names).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct XmlName {
    pub namespace_uri: String,
    pub prefix: String,
    pub local: String,
}

/// Checks a local name or prefix: non-empty, no markup or separator
/// characters, and not starting with a digit, hyphen, or dot.
fn valid_name_part(s: &str) -> bool {
    !s.is_empty()
        && !s.starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '.')
        && !s
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, '<' | '>' | '&' | '"' | '\'' | ':' | '=' | '/'))
}

impl XmlName {
    /// A name with both prefix and namespace.
    ///
    /// Panics on names violating the naming invariants; use [`XmlName::try_new`]
    /// for untrusted input.
    pub fn new(namespace_uri: &str, prefix: &str, local: &str) -> Self {
        Self::try_new(namespace_uri, prefix, local).expect("invalid XML name")
    }

    /// An unprefixed name in no namespace.
    pub fn local(local: &str) -> Self {
        Self::new("", "", local)
    }

    pub fn try_new(namespace_uri: &str, prefix: &str, local: &str) -> Result<Self, XmlError> {
        if !valid_name_part(local) {
            return Err(XmlError::Malformed(format!("invalid local name {local:?}")));
        }
        if !prefix.is_empty() && !valid_name_part(prefix) {
            return Err(XmlError::Malformed(format!("invalid prefix {prefix:?}")));
        }
        if !prefix.is_empty() && namespace_uri.is_empty() {
            return Err(XmlError::Malformed(format!(
                "prefix {prefix:?} requires a namespace URI"
            )));
        }
        Ok(XmlName {
            namespace_uri: namespace_uri.to_string(),
            prefix: prefix.to_string(),
            local: local.to_string(),
        })
    }

    /// The lexical form, `prefix:local` or bare `local`.
    pub fn qualified(&self) -> String {
        if self.prefix.is_empty() {
            self.local.clone()
        } else {
            format!("{}:{}", self.prefix, self.local)
        }
    }

    /// True when resolved namespace and local name match.
    pub fn is(&self, namespace_uri: &str, local: &str) -> bool {
        self.namespace_uri == namespace_uri && self.local == local
    }
}

impl fmt::Display for XmlName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.qualified())
    }
}

/// A child of an element: a nested element or character data.
#[derive(Debug, Clone, PartialEq)]
pub enum XmlNode {
    Element(XmlElement),
    Text(String),
}

impl XmlNode {
    pub fn as_element(&self) -> Option<&XmlElement> {
        match self {
            XmlNode::Element(e) => Some(e),
            XmlNode::Text(_) => None,
        }
    }

    pub fn is_whitespace_text(&self) -> bool {
        matches!(self, XmlNode::Text(t) if t.chars().all(char::is_whitespace))
    }
}

/// An element with attributes (in document order), the namespace declarations
/// written on it, and its children.
#[derive(Debug, Clone, PartialEq)]
pub struct XmlElement {
    pub name: XmlName,
    pub attributes: Vec<(XmlName, String)>,
    /// prefix -> URI; "" keys the default namespace declaration.
    pub namespace_declarations: BTreeMap<String, String>,
    pub children: Vec<XmlNode>,
}

impl XmlElement {
    pub fn new(name: XmlName) -> Self {
        XmlElement {
            name,
            attributes: Vec::new(),
            namespace_declarations: BTreeMap::new(),
            children: Vec::new(),
        }
    }

    pub fn with_declaration(mut self, prefix: &str, uri: &str) -> Self {
        self.namespace_declarations
            .insert(prefix.to_string(), uri.to_string());
        self
    }

    pub fn with_attribute(mut self, name: XmlName, value: &str) -> Self {
        self.attributes.push((name, value.to_string()));
        self
    }

    pub fn with_text(mut self, text: &str) -> Self {
        self.children.push(XmlNode::Text(text.to_string()));
        self
    }

    pub fn with_child(mut self, child: XmlElement) -> Self {
        self.children.push(XmlNode::Element(child));
        self
    }

    /// Concatenated direct text children.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for child in &self.children {
            if let XmlNode::Text(t) = child {
                out.push_str(t);
            }
        }
        out
    }

    pub fn child_elements(&self) -> impl Iterator<Item = &XmlElement> {
        self.children.iter().filter_map(XmlNode::as_element)
    }

    /// First child element with the given resolved namespace and local name.
    pub fn find(&self, namespace_uri: &str, local: &str) -> Option<&XmlElement> {
        self.child_elements().find(|e| e.name.is(namespace_uri, local))
    }

    pub fn attribute(&self, namespace_uri: &str, local: &str) -> Option<&str> {
        self.attributes
            .iter()
            .find(|(n, _)| n.is(namespace_uri, local))
            .map(|(_, v)| v.as_str())
    }

    /// True when the element has no element children and no non-whitespace
    /// text.
    pub fn has_only_text(&self) -> bool {
        self.children
            .iter()
            .all(|c| matches!(c, XmlNode::Text(_)))
    }

    /// The element children of a structure-only element. Whitespace-only
    /// text between them (pretty-printing) is tolerated; any other text is
    /// an error.
    pub fn structural_children(&self) -> Result<Vec<&XmlElement>, XmlError> {
        let mut out = Vec::new();
        for child in &self.children {
            match child {
                XmlNode::Element(e) => out.push(e),
                XmlNode::Text(_) if child.is_whitespace_text() => {}
                XmlNode::Text(_) => {
                    return Err(XmlError::Malformed(format!(
                        "stray text inside {}",
                        self.name
                    )));
                }
            }
        }
        Ok(out)
    }
}

/// A well-formed document: exactly one root element.
#[derive(Debug, Clone, PartialEq)]
pub struct XmlDocument {
    pub root: XmlElement,
    pub encoding_label: String,
}

impl XmlDocument {
    pub fn new(root: XmlElement) -> Self {
        XmlDocument {
            root,
            encoding_label: "UTF-8".to_string(),
        }
    }
}

/// A chain of child-element steps from a document's root.
///
/// Steps match on the lexical `prefix:local` pair, because the serialized
/// form (`#/prefix:local/...`) carries no namespace bindings. The empty path
/// denotes the root element itself and serializes as `#/`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodePath {
    pub steps: Vec<XmlName>,
}

impl NodePath {
    pub fn root() -> Self {
        NodePath { steps: Vec::new() }
    }

    pub fn from_steps(steps: Vec<XmlName>) -> Self {
        NodePath { steps }
    }

    /// Single-step path.
    pub fn child(prefix: &str, local: &str) -> Self {
        NodePath {
            steps: vec![step_name(prefix, local)],
        }
    }

    pub fn is_root(&self) -> bool {
        self.steps.is_empty()
    }

    /// Serialized form: `#/` followed by slash-joined `prefix:local` steps.
    pub fn to_uri(&self) -> String {
        let mut out = String::from("#/");
        for (i, step) in self.steps.iter().enumerate() {
            if i > 0 {
                out.push('/');
            }
            out.push_str(&step.qualified());
        }
        out
    }

    /// Inverse of [`NodePath::to_uri`]; `None` when `s` is not a path URI.
    pub fn parse_uri(s: &str) -> Option<NodePath> {
        let rest = s.strip_prefix("#/")?;
        if rest.is_empty() {
            return Some(NodePath::root());
        }
        let mut steps = Vec::new();
        for part in rest.split('/') {
            let (prefix, local) = match part.split_once(':') {
                Some((p, l)) => (p, l),
                None => ("", part),
            };
            if local.is_empty() || local.contains(':') {
                return None;
            }
            if prefix.is_empty() && part.contains(':') {
                return None;
            }
            steps.push(step_name(prefix, local));
        }
        Some(NodePath { steps })
    }
}

/// Step names carry no namespace URI; resolution is lexical.
fn step_name(prefix: &str, local: &str) -> XmlName {
    XmlName {
        namespace_uri: String::new(),
        prefix: prefix.to_string(),
        local: local.to_string(),
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_uri())
    }
}

/// Resolves a path to the first matching element.
pub fn select<'a>(doc: &'a XmlDocument, path: &NodePath) -> Result<&'a XmlElement, XmlError> {
    Ok(select_with_scope(doc, path)?.0)
}

/// Resolves a path and also returns the namespace bindings in scope at the
/// selected element (declarations accumulated on its ancestors, the element's
/// own declarations excluded). This is the inherited context for
/// canonicalizing the selected subtree.
pub fn select_with_scope<'a>(
    doc: &'a XmlDocument,
    path: &NodePath,
) -> Result<(&'a XmlElement, BTreeMap<String, String>), XmlError> {
    let mut current = &doc.root;
    let mut scope = BTreeMap::new();
    for step in &path.steps {
        for (prefix, uri) in &current.namespace_declarations {
            scope.insert(prefix.clone(), uri.clone());
        }
        current = current
            .child_elements()
            .find(|e| e.name.prefix == step.prefix && e.name.local == step.local)
            .ok_or_else(|| XmlError::NodeNotFound(step.qualified()))?;
    }
    Ok((current, scope))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn name_invariants() {
        assert!(XmlName::try_new("", "", "ok").is_ok());
        assert!(XmlName::try_new("", "", "").is_err());
        assert!(XmlName::try_new("", "", "a b").is_err());
        assert!(XmlName::try_new("", "", "a<b").is_err());
        assert!(XmlName::try_new("", "p", "a").is_err(), "prefix without uri");
        assert!(XmlName::try_new("urn:x", "p", "a").is_ok());
    }

    #[test]
    fn path_uri_round_trip() {
        let p = NodePath::from_steps(vec![step_name("aida", "signedContent")]);
        assert_eq!(p.to_uri(), "#/aida:signedContent");
        assert_eq!(NodePath::parse_uri("#/aida:signedContent"), Some(p));
        assert_eq!(NodePath::parse_uri("#/"), Some(NodePath::root()));
        assert_eq!(NodePath::parse_uri("blob:x"), None);
        assert_eq!(NodePath::root().to_uri(), "#/");
    }

    #[test]
    fn select_root_and_child() {
        let doc = XmlDocument::new(
            XmlElement::new(XmlName::local("a"))
                .with_child(XmlElement::new(XmlName::local("b")).with_text("x")),
        );
        assert_eq!(select(&doc, &NodePath::root()).unwrap().name.local, "a");
        let found = select(&doc, &NodePath::child("", "b")).unwrap();
        assert_eq!(found.text(), "x");
        assert!(matches!(
            select(&doc, &NodePath::child("", "missing")),
            Err(XmlError::NodeNotFound(_))
        ));
    }

    #[test]
    fn select_accumulates_scope() {
        let doc = XmlDocument::new(
            XmlElement::new(XmlName::new("urn:a", "a", "root"))
                .with_declaration("a", "urn:a")
                .with_child(
                    XmlElement::new(XmlName::new("urn:a", "a", "inner"))
                        .with_declaration("b", "urn:b"),
                ),
        );
        let (el, scope) = select_with_scope(&doc, &NodePath::child("a", "inner")).unwrap();
        assert_eq!(el.name.local, "inner");
        assert_eq!(scope.get("a").map(String::as_str), Some("urn:a"));
        assert!(scope.get("b").is_none(), "own declarations are not inherited");
    }
}
