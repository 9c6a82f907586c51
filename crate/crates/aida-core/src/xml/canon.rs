//! Serialization and the canonical form.
//!
//! [`serialize`] writes a document verbatim for storage and transport.
//! [`canonicalize`] produces the byte sequence that digests and signatures
//! are computed over; two trees yield the same canonical bytes exactly when
//! they are equivalent under the rules below.
//!
//! Canonical form of an element subtree:
//!
//! * UTF-8, no XML declaration, every element written with an expanded end
//!   tag (`<a></a>`, never `<a/>`);
//! * namespace declarations first — default declaration, then the rest
//!   sorted by prefix — omitting any declaration identical to the binding
//!   already in force;
//! * attributes sorted by (namespace URI, local name);
//! * text escapes `&` `<` `>`, attribute values escape `&` `<` `"`;
//! * whitespace in character data is preserved.
//!
//! The subtree is *sealed* against its context: any prefix used inside the
//! subtree but declared only on an ancestor is re-declared on the top
//! element, with the binding taken from the caller-supplied inherited
//! context. The output is therefore self-contained — canonicalizing it again
//! under an empty context reproduces it — and a signature cannot be
//! confused by moving the subtree under ancestors that rebind its prefixes:
//! rebinding changes the sealed declarations, which changes the bytes.

use std::collections::{BTreeMap, BTreeSet};

use super::{XmlDocument, XmlElement, XmlError, XmlName, XmlNode};
use crate::ns;

/// Writes the document verbatim: declaration line, then the exact tree with
/// attributes and namespace declarations as stored. Childless elements use
/// the short form.
pub fn serialize(doc: &XmlDocument) -> Vec<u8> {
    let mut out = Vec::from(&b"<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"[..]);
    write_verbatim(&doc.root, &mut out);
    out
}

fn write_verbatim(elem: &XmlElement, out: &mut Vec<u8>) {
    out.push(b'<');
    out.extend_from_slice(elem.name.qualified().as_bytes());
    for (prefix, uri) in &elem.namespace_declarations {
        write_declaration(prefix, uri, out);
    }
    for (name, value) in &elem.attributes {
        write_attribute(name, value, out);
    }
    if elem.children.is_empty() {
        out.extend_from_slice(b"/>");
        return;
    }
    out.push(b'>');
    for child in &elem.children {
        match child {
            XmlNode::Element(e) => write_verbatim(e, out),
            XmlNode::Text(t) => escape_text_into(t, out),
        }
    }
    out.extend_from_slice(b"</");
    out.extend_from_slice(elem.name.qualified().as_bytes());
    out.push(b'>');
}

/// Renders the canonical form of `elem`. `inherited` is the namespace
/// context the element sits in — the bindings declared on its ancestors —
/// used only to seal prefixes the subtree uses without declaring.
pub fn canonicalize(
    elem: &XmlElement,
    inherited: &BTreeMap<String, String>,
) -> Result<Vec<u8>, XmlError> {
    let mut needed = BTreeSet::new();
    collect_unbound(elem, &BTreeSet::new(), &mut needed);
    let mut sealed = BTreeMap::new();
    for prefix in needed {
        let uri = inherited.get(&prefix).ok_or_else(|| {
            XmlError::Malformed(format!(
                "prefix {prefix:?} is used but bound neither in the subtree nor its context"
            ))
        })?;
        sealed.insert(prefix, uri.clone());
    }
    let mut out = Vec::new();
    render(elem, Some(&sealed), &BTreeMap::new(), &mut out)?;
    Ok(out)
}

/// Records every prefix used below `elem` that no declaration between the
/// usage and the subtree root binds. The implicit `xml` prefix never needs
/// a declaration.
fn collect_unbound(elem: &XmlElement, bound: &BTreeSet<String>, needed: &mut BTreeSet<String>) {
    let mut bound = bound.clone();
    for prefix in elem.namespace_declarations.keys() {
        bound.insert(prefix.clone());
    }
    let mut note = |prefix: &str| {
        if prefix != "xml" && !bound.contains(prefix) {
            needed.insert(prefix.to_string());
        }
    };
    if elem.name.prefix.is_empty() {
        if !elem.name.namespace_uri.is_empty() {
            note("");
        }
    } else {
        note(&elem.name.prefix);
    }
    for (name, _) in &elem.attributes {
        if !name.prefix.is_empty() {
            note(&name.prefix);
        }
    }
    for child in elem.child_elements() {
        collect_unbound(child, &bound, needed);
    }
}

/// `sealed` carries the extra declarations for the top element; `scope` the
/// bindings already rendered on enclosing output elements.
fn render(
    elem: &XmlElement,
    sealed: Option<&BTreeMap<String, String>>,
    scope: &BTreeMap<String, String>,
    out: &mut Vec<u8>,
) -> Result<(), XmlError> {
    let mut declarations = elem.namespace_declarations.clone();
    if let Some(sealed) = sealed {
        for (prefix, uri) in sealed {
            declarations.entry(prefix.clone()).or_insert_with(|| uri.clone());
        }
    }

    let mut new_scope = scope.clone();
    let mut emitted: Vec<(&String, &String)> = Vec::new();
    // BTreeMap iteration gives the required order for free: the default
    // declaration (empty prefix) sorts before every named prefix.
    for (prefix, uri) in &declarations {
        if uri.is_empty() {
            if !prefix.is_empty() {
                return Err(XmlError::Malformed(format!(
                    "prefix {prefix:?} cannot be undeclared"
                )));
            }
            if new_scope.remove(prefix).is_some() {
                emitted.push((prefix, uri));
            }
        } else {
            if new_scope.get(prefix) != Some(uri) {
                emitted.push((prefix, uri));
            }
            new_scope.insert(prefix.clone(), uri.clone());
        }
    }

    check_binding(&elem.name, &new_scope, false)?;
    for (name, _) in &elem.attributes {
        check_binding(name, &new_scope, true)?;
    }
    let mut attrs: Vec<&(XmlName, String)> = elem.attributes.iter().collect();
    attrs.sort_by(|(a, _), (b, _)| {
        (&a.namespace_uri, &a.local).cmp(&(&b.namespace_uri, &b.local))
    });

    out.push(b'<');
    out.extend_from_slice(elem.name.qualified().as_bytes());
    for (prefix, uri) in emitted {
        write_declaration(prefix, uri, out);
    }
    for (name, value) in attrs {
        write_attribute(name, value, out);
    }
    out.push(b'>');
    for child in &elem.children {
        match child {
            XmlNode::Element(e) => render(e, None, &new_scope, out)?,
            XmlNode::Text(t) => escape_text_into(t, out),
        }
    }
    out.extend_from_slice(b"</");
    out.extend_from_slice(elem.name.qualified().as_bytes());
    out.push(b'>');
    Ok(())
}

/// Confirms that the namespace URI a name carries is the one its prefix
/// resolves to at this point of the output. A mismatch means the tree is
/// inconsistent with its declarations and must not be signed over.
fn check_binding(
    name: &XmlName,
    scope: &BTreeMap<String, String>,
    is_attribute: bool,
) -> Result<(), XmlError> {
    let resolved = if name.prefix.is_empty() {
        if is_attribute {
            ""
        } else {
            scope.get("").map(String::as_str).unwrap_or("")
        }
    } else if name.prefix == "xml" {
        ns::XML
    } else {
        scope.get(&name.prefix).map(String::as_str).unwrap_or("")
    };
    if resolved != name.namespace_uri {
        return Err(XmlError::Malformed(format!(
            "name {} carries namespace {:?} but resolves to {:?} here",
            name.qualified(),
            name.namespace_uri,
            resolved
        )));
    }
    Ok(())
}

fn write_declaration(prefix: &str, uri: &str, out: &mut Vec<u8>) {
    if prefix.is_empty() {
        out.extend_from_slice(b" xmlns=\"");
    } else {
        out.extend_from_slice(b" xmlns:");
        out.extend_from_slice(prefix.as_bytes());
        out.extend_from_slice(b"=\"");
    }
    escape_attr_into(uri, out);
    out.push(b'"');
}

fn write_attribute(name: &XmlName, value: &str, out: &mut Vec<u8>) {
    out.push(b' ');
    out.extend_from_slice(name.qualified().as_bytes());
    out.extend_from_slice(b"=\"");
    escape_attr_into(value, out);
    out.push(b'"');
}

fn escape_text_into(s: &str, out: &mut Vec<u8>) {
    for b in s.bytes() {
        match b {
            b'&' => out.extend_from_slice(b"&amp;"),
            b'<' => out.extend_from_slice(b"&lt;"),
            b'>' => out.extend_from_slice(b"&gt;"),
            _ => out.push(b),
        }
    }
}

fn escape_attr_into(s: &str, out: &mut Vec<u8>) {
    for b in s.bytes() {
        match b {
            b'&' => out.extend_from_slice(b"&amp;"),
            b'<' => out.extend_from_slice(b"&lt;"),
            b'"' => out.extend_from_slice(b"&quot;"),
            _ => out.push(b),
        }
    }
}
