//! Strict, namespace-aware XML parser.
//!
//! Accepts the subset of XML 1.0 needed for the document formats handled by
//! this crate: an optional XML declaration followed by a single element tree
//! with namespace declarations, attributes, and character data (entity and
//! character references included). Everything else — DOCTYPE, CDATA sections,
//! comments, processing instructions — is rejected rather than skipped, so a
//! parsed document contains exactly what canonicalization will see.
//!
//! Character data is preserved byte-for-byte after reference expansion: no
//! attribute-value normalization and no line-ending normalization. That keeps
//! parse → serialize a faithful round trip, which signature verification
//! depends on.

use std::collections::BTreeMap;

use super::{XmlDocument, XmlElement, XmlError, XmlName, XmlNode};
use crate::ns;

/// Parses a complete document from raw bytes. Input must be UTF-8, with an
/// optional leading BOM.
pub fn parse(bytes: &[u8]) -> Result<XmlDocument, XmlError> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    let input = std::str::from_utf8(bytes)
        .map_err(|_| XmlError::UnsupportedEncoding("non-UTF-8 input".to_string()))?;
    let mut cur = Cursor { input, pos: 0 };

    let encoding_label = parse_declaration(&mut cur)?;
    skip_misc(&mut cur)?;
    if !cur.starts_with("<") {
        return Err(cur.malformed("expected root element"));
    }
    let root = parse_element(&mut cur, &BTreeMap::new())?;
    skip_misc(&mut cur)?;
    if cur.peek().is_some() {
        return Err(cur.malformed("content after root element"));
    }
    Ok(XmlDocument {
        root,
        encoding_label,
    })
}

struct Cursor<'a> {
    input: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.input[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn starts_with(&self, s: &str) -> bool {
        self.rest().starts_with(s)
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), XmlError> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.malformed(&format!("expected {s:?}")))
        }
    }

    fn skip_whitespace(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.bump();
        }
    }

    fn malformed(&self, msg: &str) -> XmlError {
        XmlError::Malformed(format!("{msg} at byte {}", self.pos))
    }
}

/// Parses the optional `<?xml ...?>` declaration, returning the declared
/// encoding label (defaulting to UTF-8). Any encoding other than UTF-8 is
/// rejected.
fn parse_declaration(cur: &mut Cursor) -> Result<String, XmlError> {
    if !cur.starts_with("<?xml") {
        return Ok("UTF-8".to_string());
    }
    // Guard against element names beginning with "xml": the declaration must
    // be followed by whitespace.
    let after = &cur.rest()[5..];
    if !after.starts_with(|c: char| c.is_ascii_whitespace()) {
        return Ok("UTF-8".to_string());
    }
    cur.pos += 5;
    let mut encoding = "UTF-8".to_string();
    let mut seen_version = false;
    loop {
        cur.skip_whitespace();
        if cur.eat("?>") {
            break;
        }
        let name = read_name_token(cur)?;
        cur.skip_whitespace();
        cur.expect("=")?;
        cur.skip_whitespace();
        let value = read_quoted(cur, false)?;
        match name.as_str() {
            "version" => {
                if value != "1.0" {
                    return Err(cur.malformed(&format!("unsupported XML version {value:?}")));
                }
                seen_version = true;
            }
            "encoding" => {
                if !value.eq_ignore_ascii_case("utf-8") {
                    return Err(XmlError::UnsupportedEncoding(value));
                }
                encoding = value;
            }
            "standalone" => {
                if value != "yes" && value != "no" {
                    return Err(cur.malformed("invalid standalone value"));
                }
            }
            other => {
                return Err(cur.malformed(&format!("unknown declaration attribute {other:?}")));
            }
        }
    }
    if !seen_version {
        return Err(cur.malformed("XML declaration without version"));
    }
    Ok(encoding)
}

/// Consumes whitespace between the declaration, root element, and EOF, and
/// turns the constructs we refuse to handle into errors.
fn skip_misc(cur: &mut Cursor) -> Result<(), XmlError> {
    loop {
        cur.skip_whitespace();
        if cur.starts_with("<!--") {
            return Err(XmlError::UnsupportedConstruct("comment".to_string()));
        }
        if cur.starts_with("<!DOCTYPE") {
            return Err(XmlError::UnsupportedConstruct("document type declaration".to_string()));
        }
        if cur.starts_with("<?") {
            return Err(XmlError::UnsupportedConstruct("processing instruction".to_string()));
        }
        return Ok(());
    }
}

/// Parses one element, its attributes and its subtree. `scope` holds the
/// namespace bindings inherited from ancestors.
fn parse_element(
    cur: &mut Cursor,
    scope: &BTreeMap<String, String>,
) -> Result<XmlElement, XmlError> {
    cur.expect("<")?;
    let raw_name = read_name_token(cur)?;

    let mut raw_attrs: Vec<(String, String)> = Vec::new();
    let empty;
    loop {
        let had_space = matches!(cur.peek(), Some(c) if c.is_ascii_whitespace());
        cur.skip_whitespace();
        if cur.eat("/>") {
            empty = true;
            break;
        }
        if cur.eat(">") {
            empty = false;
            break;
        }
        if !had_space {
            return Err(cur.malformed("expected whitespace before attribute"));
        }
        let attr_name = read_name_token(cur)?;
        cur.skip_whitespace();
        cur.expect("=")?;
        cur.skip_whitespace();
        let value = read_quoted(cur, true)?;
        if raw_attrs.iter().any(|(n, _)| *n == attr_name) {
            return Err(cur.malformed(&format!("duplicate attribute {attr_name:?}")));
        }
        raw_attrs.push((attr_name, value));
    }

    // Namespace declarations come out of the attribute list and into the
    // element's binding map before any name is resolved.
    let mut declarations = BTreeMap::new();
    let mut plain_attrs = Vec::new();
    for (raw, value) in raw_attrs {
        if raw == "xmlns" {
            declarations.insert(String::new(), value);
        } else if let Some(prefix) = raw.strip_prefix("xmlns:") {
            if prefix.is_empty() || prefix.contains(':') {
                return Err(cur.malformed(&format!("invalid namespace declaration {raw:?}")));
            }
            if prefix == "xmlns" {
                return Err(cur.malformed("the xmlns prefix cannot be declared"));
            }
            if prefix == "xml" && value != ns::XML {
                return Err(cur.malformed("the xml prefix is bound by definition"));
            }
            if value.is_empty() {
                return Err(cur.malformed(&format!("prefix {prefix:?} undeclared to empty URI")));
            }
            declarations.insert(prefix.to_string(), value);
        } else {
            plain_attrs.push((raw, value));
        }
    }

    let mut local_scope = scope.clone();
    for (prefix, uri) in &declarations {
        if uri.is_empty() {
            local_scope.remove(prefix);
        } else {
            local_scope.insert(prefix.clone(), uri.clone());
        }
    }

    let name = resolve_name(cur, &raw_name, &local_scope, false)?;
    let mut attributes = Vec::new();
    for (raw, value) in plain_attrs {
        let attr_name = resolve_name(cur, &raw, &local_scope, true)?;
        if attributes
            .iter()
            .any(|(n, _): &(XmlName, String)| n.namespace_uri == attr_name.namespace_uri && n.local == attr_name.local)
        {
            return Err(cur.malformed(&format!(
                "duplicate attribute {{{}}}{}",
                attr_name.namespace_uri, attr_name.local
            )));
        }
        attributes.push((attr_name, value));
    }

    let mut element = XmlElement {
        name,
        attributes,
        namespace_declarations: declarations,
        children: Vec::new(),
    };
    if empty {
        return Ok(element);
    }

    // Content loop: text and child elements until the matching end tag.
    loop {
        if cur.starts_with("</") {
            cur.pos += 2;
            let end_name = read_name_token(cur)?;
            if end_name != raw_name {
                return Err(cur.malformed(&format!(
                    "end tag </{end_name}> does not match <{raw_name}>"
                )));
            }
            cur.skip_whitespace();
            cur.expect(">")?;
            return Ok(element);
        }
        if cur.starts_with("<!--") {
            return Err(XmlError::UnsupportedConstruct("comment".to_string()));
        }
        if cur.starts_with("<![CDATA[") {
            return Err(XmlError::UnsupportedConstruct("CDATA section".to_string()));
        }
        if cur.starts_with("<!") {
            return Err(XmlError::UnsupportedConstruct("declaration in content".to_string()));
        }
        if cur.starts_with("<?") {
            return Err(XmlError::UnsupportedConstruct("processing instruction".to_string()));
        }
        match cur.peek() {
            None => return Err(cur.malformed(&format!("unclosed element <{raw_name}>"))),
            Some('<') => {
                let child = parse_element(cur, &local_scope)?;
                element.children.push(XmlNode::Element(child));
            }
            Some(_) => {
                let text = read_text(cur)?;
                element.children.push(XmlNode::Text(text));
            }
        }
    }
}

/// Resolves a raw `prefix:local` token against the in-scope bindings.
/// Unprefixed attribute names stay in no namespace; unprefixed element names
/// take the default namespace.
fn resolve_name(
    cur: &Cursor,
    raw: &str,
    scope: &BTreeMap<String, String>,
    is_attribute: bool,
) -> Result<XmlName, XmlError> {
    let (prefix, local) = match raw.split_once(':') {
        Some((p, l)) => (p, l),
        None => ("", raw),
    };
    if local.is_empty() || prefix.contains(':') || local.contains(':') {
        return Err(cur.malformed(&format!("invalid name {raw:?}")));
    }
    if prefix == "xmlns" {
        return Err(cur.malformed("the xmlns prefix cannot qualify a name"));
    }
    let uri = if prefix.is_empty() {
        if is_attribute {
            String::new()
        } else {
            scope.get("").cloned().unwrap_or_default()
        }
    } else if prefix == "xml" {
        ns::XML.to_string()
    } else {
        scope
            .get(prefix)
            .cloned()
            .ok_or_else(|| cur.malformed(&format!("undeclared namespace prefix {prefix:?}")))?
    };
    XmlName::try_new(&uri, prefix, local)
}

/// Reads a name token: the longest run of characters legal in names. The
/// colon is included here and split out during resolution.
fn read_name_token(cur: &mut Cursor) -> Result<String, XmlError> {
    let start = cur.pos;
    while let Some(c) = cur.peek() {
        if c.is_ascii_whitespace() || matches!(c, '<' | '>' | '&' | '"' | '\'' | '=' | '/' | '?') {
            break;
        }
        cur.bump();
    }
    if cur.pos == start {
        return Err(cur.malformed("expected a name"));
    }
    let token = &cur.input[start..cur.pos];
    if token.starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '.') {
        return Err(cur.malformed(&format!("invalid name start in {token:?}")));
    }
    Ok(token.to_string())
}

/// Reads a quoted literal, expanding references when `expand` is set (true
/// for attribute values, false for declaration pseudo-attributes).
fn read_quoted(cur: &mut Cursor, expand: bool) -> Result<String, XmlError> {
    let quote = match cur.bump() {
        Some(c @ ('"' | '\'')) => c,
        _ => return Err(cur.malformed("expected quoted value")),
    };
    let mut out = String::new();
    loop {
        match cur.bump() {
            None => return Err(cur.malformed("unterminated attribute value")),
            Some(c) if c == quote => return Ok(out),
            Some('<') => return Err(cur.malformed("raw '<' in attribute value")),
            Some('&') if expand => out.push(read_reference(cur)?),
            Some(c) => {
                check_char(cur, c)?;
                out.push(c);
            }
        }
    }
}

/// Reads character data up to the next markup start, expanding references.
fn read_text(cur: &mut Cursor) -> Result<String, XmlError> {
    let mut out = String::new();
    while let Some(c) = cur.peek() {
        match c {
            '<' => break,
            '&' => {
                cur.bump();
                out.push(read_reference(cur)?);
            }
            ']' if cur.starts_with("]]>") => {
                return Err(cur.malformed("']]>' in character data"));
            }
            _ => {
                cur.bump();
                check_char(cur, c)?;
                out.push(c);
            }
        }
    }
    Ok(out)
}

/// Expands one reference after its `&`: the five predefined entities or a
/// decimal/hex character reference.
fn read_reference(cur: &mut Cursor) -> Result<char, XmlError> {
    let start = cur.pos;
    while let Some(c) = cur.peek() {
        if c == ';' {
            break;
        }
        if cur.pos - start > 8 {
            return Err(cur.malformed("unterminated reference"));
        }
        cur.bump();
    }
    let body = &cur.input[start..cur.pos];
    cur.expect(";")?;
    let c = match body {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        _ => {
            let code = if let Some(hex) = body.strip_prefix("#x") {
                u32::from_str_radix(hex, 16).ok()
            } else if let Some(dec) = body.strip_prefix('#') {
                dec.parse::<u32>().ok()
            } else {
                None
            };
            code.and_then(char::from_u32)
                .ok_or_else(|| cur.malformed(&format!("unknown reference &{body};")))?
        }
    };
    check_char(cur, c)?;
    Ok(c)
}

/// Rejects control characters XML 1.0 forbids in content.
fn check_char(cur: &Cursor, c: char) -> Result<(), XmlError> {
    if c < ' ' && !matches!(c, '\t' | '\n' | '\r') {
        return Err(cur.malformed(&format!("illegal character U+{:04X}", c as u32)));
    }
    Ok(())
}
