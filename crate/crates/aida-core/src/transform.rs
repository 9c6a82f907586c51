//! Restricted presentation stylesheets and their signed-transform wrapper.
//!
//! The stylesheet language is a closed subset of XSLT 1.0, parsed strictly:
//! one `xsl:output method="xml"`, one `xsl:template` matching the instance
//! root by qualified name, and a body of literal result elements and text
//! with `xsl:value-of select="prefix:field"` placeholders. Anything else —
//! iteration, conditionals, multiple templates, path expressions — is
//! rejected up front. A renderer that quietly skipped constructs it did not
//! understand would show the user something other than what gets signed.
//!
//! For the same reason, a placeholder naming a field the instance lacks is
//! an error, not empty output.
//!
//! Applying a sheet to a matching instance copies the body and replaces each
//! placeholder with the named child's text. The result is a literal XML
//! tree; for the shipped sheets that is the `aida:mhtml` vocabulary, treated
//! as plain XML with no HTML semantics.
//!
//! [`TransformData`] wraps a stylesheet with its designer-assigned metadata
//! (`aida:transformData`: id, target document type, method/language/format
//! capabilities) for signing and storage. Only the `xslt`/`mhtml`
//! method/format pair exists.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ns;
use crate::schema::{DocumentTypeId, SchemaError};
use crate::xml::{XmlDocument, XmlElement, XmlError, XmlName, XmlNode};

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("unsupported stylesheet: {0}")]
    UnsupportedStylesheet(String),
    #[error("template matches {expected}, instance root is {found}")]
    MatchFailure { expected: String, found: String },
    #[error("stylesheet references field {0} but the instance has no such child")]
    MissingField(String),
    #[error("malformed transform data: {0}")]
    MalformedTransformData(String),
    #[error(transparent)]
    Xml(#[from] XmlError),
}

fn unsupported(msg: impl Into<String>) -> TransformError {
    TransformError::UnsupportedStylesheet(msg.into())
}

fn malformed(msg: impl Into<String>) -> TransformError {
    TransformError::MalformedTransformData(msg.into())
}

/// One node of the template body.
#[derive(Debug, Clone, PartialEq)]
pub enum TemplateNode {
    /// A literal result element, copied to the output as-is.
    Element {
        name: XmlName,
        attributes: Vec<(XmlName, String)>,
        namespace_declarations: BTreeMap<String, String>,
        children: Vec<TemplateNode>,
    },
    /// Literal text, copied verbatim (whitespace included).
    Text(String),
    /// A `value-of` placeholder; `field` is the resolved name of the
    /// instance child whose text is inserted.
    ValueOf { field: XmlName },
}

/// A parsed stylesheet: the root the single template matches, and its body.
#[derive(Debug, Clone, PartialEq)]
pub struct Stylesheet {
    pub match_root: XmlName,
    pub output_method: String,
    pub body: TemplateNode,
}

/// Resolves a `prefix:local` attribute value (match and select patterns)
/// against the declarations in scope at its element.
fn resolve_qname(
    value: &str,
    scope: &BTreeMap<String, String>,
) -> Result<XmlName, TransformError> {
    let (prefix, local) = match value.split_once(':') {
        Some((p, l)) => (p, l),
        None => ("", value),
    };
    let uri = if prefix.is_empty() {
        scope.get("").cloned().unwrap_or_default()
    } else {
        scope
            .get(prefix)
            .cloned()
            .ok_or_else(|| unsupported(format!("pattern {value:?} uses an undeclared prefix")))?
    };
    XmlName::try_new(&uri, prefix, local)
        .map_err(|_| unsupported(format!("pattern {value:?} is not a plain qualified name")))
}

fn merged_scope(
    outer: &BTreeMap<String, String>,
    elem: &XmlElement,
) -> BTreeMap<String, String> {
    let mut scope = outer.clone();
    for (p, u) in &elem.namespace_declarations {
        scope.insert(p.clone(), u.clone());
    }
    scope
}

pub fn parse_stylesheet(doc: &XmlDocument) -> Result<Stylesheet, TransformError> {
    parse_stylesheet_element(&doc.root)
}

/// Reads an `xsl:stylesheet` element, admitting only the supported subset.
pub fn parse_stylesheet_element(root: &XmlElement) -> Result<Stylesheet, TransformError> {
    if !root.name.is(ns::XSL, "stylesheet") {
        return Err(unsupported(format!("expected xsl:stylesheet, found {}", root.name)));
    }
    match root.attribute("", "version") {
        Some("1.0") => {}
        Some(v) => return Err(unsupported(format!("unsupported version {v:?}"))),
        None => return Err(unsupported("stylesheet lacks a version")),
    }
    for (attr, _) in &root.attributes {
        if !attr.is("", "version") {
            return Err(unsupported(format!("unsupported attribute {attr} on stylesheet")));
        }
    }

    let scope = merged_scope(&BTreeMap::new(), root);
    let children = root
        .structural_children()
        .map_err(|e| unsupported(e.to_string()))?;
    let [output, template] = children.as_slice() else {
        return Err(unsupported(
            "stylesheet must hold exactly one xsl:output followed by one xsl:template",
        ));
    };

    if !output.name.is(ns::XSL, "output") {
        return Err(unsupported(format!("expected xsl:output, found {}", output.name)));
    }
    let output_method = output
        .attribute("", "method")
        .ok_or_else(|| unsupported("xsl:output lacks a method"))?;
    if output_method != "xml" {
        return Err(unsupported(format!("unsupported output method {output_method:?}")));
    }

    if !template.name.is(ns::XSL, "template") {
        return Err(unsupported(format!("expected xsl:template, found {}", template.name)));
    }
    let scope = merged_scope(&scope, template);
    let match_pattern = template
        .attribute("", "match")
        .ok_or_else(|| unsupported("xsl:template lacks a match"))?;
    let match_root = resolve_qname(match_pattern, &scope)?;

    // The template body is a single literal result element.
    let mut body = None;
    for child in &template.children {
        match child {
            XmlNode::Text(_) if child.is_whitespace_text() => {}
            XmlNode::Text(_) => {
                return Err(unsupported("text directly inside the template"));
            }
            XmlNode::Element(elem) => {
                if body.is_some() {
                    return Err(unsupported("template must produce a single root element"));
                }
                body = Some(parse_body_element(elem, &scope)?);
            }
        }
    }
    let body = body.ok_or_else(|| unsupported("template body is empty"))?;
    check_self_contained(&body)?;
    Ok(Stylesheet {
        match_root,
        output_method: output_method.to_string(),
        body,
    })
}

fn parse_body_element(
    elem: &XmlElement,
    scope: &BTreeMap<String, String>,
) -> Result<TemplateNode, TransformError> {
    let scope = merged_scope(scope, elem);
    if elem.name.namespace_uri == ns::XSL {
        return Err(unsupported(format!(
            "instruction {} is not part of the supported subset",
            elem.name
        )));
    }
    let mut children = Vec::new();
    for child in &elem.children {
        match child {
            XmlNode::Text(t) => children.push(TemplateNode::Text(t.clone())),
            XmlNode::Element(e) if e.name.is(ns::XSL, "value-of") => {
                let scope = merged_scope(&scope, e);
                let select = e
                    .attribute("", "select")
                    .ok_or_else(|| unsupported("value-of lacks a select"))?;
                for (attr, _) in &e.attributes {
                    if !attr.is("", "select") {
                        return Err(unsupported(format!("unsupported attribute {attr} on value-of")));
                    }
                }
                if !e.children.is_empty() {
                    return Err(unsupported("value-of must be empty"));
                }
                children.push(TemplateNode::ValueOf {
                    field: resolve_qname(select, &scope)?,
                });
            }
            XmlNode::Element(e) => children.push(parse_body_element(e, &scope)?),
        }
    }
    Ok(TemplateNode::Element {
        name: elem.name.clone(),
        attributes: elem.attributes.clone(),
        namespace_declarations: elem.namespace_declarations.clone(),
        children,
    })
}

/// The literal result tree must declare every namespace prefix it uses —
/// output is serialized exactly as written, so a prefix borrowed from the
/// stylesheet element would leave the rendered document ill-formed.
fn check_self_contained(body: &TemplateNode) -> Result<(), TransformError> {
    fn walk(
        node: &TemplateNode,
        bound: &BTreeMap<String, String>,
    ) -> Result<(), TransformError> {
        let TemplateNode::Element {
            name,
            attributes,
            namespace_declarations,
            children,
        } = node
        else {
            return Ok(());
        };
        let mut bound = bound.clone();
        for (p, u) in namespace_declarations {
            bound.insert(p.clone(), u.clone());
        }
        let check = |prefix: &str, uri: &str| {
            if prefix == "xml" || (prefix.is_empty() && uri.is_empty()) {
                return Ok(());
            }
            if bound.get(prefix).map(String::as_str) == Some(uri) {
                Ok(())
            } else {
                Err(unsupported(format!(
                    "literal result tree uses {} without declaring its namespace",
                    if prefix.is_empty() { "the default namespace" } else { prefix }
                )))
            }
        };
        check(&name.prefix, &name.namespace_uri)?;
        for (attr, _) in attributes {
            if !attr.prefix.is_empty() {
                check(&attr.prefix, &attr.namespace_uri)?;
            }
        }
        for child in children {
            walk(child, &bound)?;
        }
        Ok(())
    }
    walk(body, &BTreeMap::new())
}

/// Applies a stylesheet to a matching instance root. Deterministic; every
/// text node in the output is either sheet-literal or the exact text of one
/// instance field.
pub fn apply(sheet: &Stylesheet, instance_root: &XmlElement) -> Result<XmlDocument, TransformError> {
    if instance_root.name.namespace_uri != sheet.match_root.namespace_uri
        || instance_root.name.local != sheet.match_root.local
    {
        return Err(TransformError::MatchFailure {
            expected: format!(
                "{{{}}}{}",
                sheet.match_root.namespace_uri, sheet.match_root.local
            ),
            found: format!(
                "{{{}}}{}",
                instance_root.name.namespace_uri, instance_root.name.local
            ),
        });
    }
    match render(&sheet.body, instance_root)? {
        XmlNode::Element(root) => Ok(XmlDocument::new(root)),
        XmlNode::Text(_) => unreachable!("body root is always an element"),
    }
}

fn render(node: &TemplateNode, instance_root: &XmlElement) -> Result<XmlNode, TransformError> {
    Ok(match node {
        TemplateNode::Text(t) => XmlNode::Text(t.clone()),
        TemplateNode::ValueOf { field } => {
            let child = instance_root
                .find(&field.namespace_uri, &field.local)
                .ok_or_else(|| TransformError::MissingField(field.qualified()))?;
            XmlNode::Text(child.text())
        }
        TemplateNode::Element {
            name,
            attributes,
            namespace_declarations,
            children,
        } => {
            let mut out = XmlElement::new(name.clone());
            out.attributes = attributes.clone();
            out.namespace_declarations = namespace_declarations.clone();
            for child in children {
                // Merge adjacent text so the output re-parses to the same
                // tree (a parser never yields two neighbouring text nodes).
                match (render(child, instance_root)?, out.children.last_mut()) {
                    (XmlNode::Text(t), Some(XmlNode::Text(prev))) => prev.push_str(&t),
                    (node, _) => out.children.push(node),
                }
            }
            XmlNode::Element(out)
        }
    })
}

/// A stylesheet with its signing metadata, as stored in the repository.
/// `stylesheet_source` preserves the designer's `xsl:stylesheet` element
/// byte-faithfully; `stylesheet` is its parsed form.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformData {
    pub transform_id: String,
    pub document_type_id: DocumentTypeId,
    pub transform_method: String,
    pub language: String,
    pub output_format: String,
    pub stylesheet_source: XmlElement,
    pub stylesheet: Stylesheet,
}

pub const TRANSFORM_METHOD_XSLT: &str = "xslt";
pub const OUTPUT_FORMAT_MHTML: &str = "mhtml";

impl TransformData {
    /// Wraps a stylesheet element under its metadata. The method/format pair
    /// is fixed to `xslt`/`mhtml`.
    pub fn new(
        transform_id: &str,
        document_type_id: DocumentTypeId,
        language: &str,
        stylesheet_source: XmlElement,
    ) -> Result<TransformData, TransformError> {
        if transform_id.trim().is_empty() {
            return Err(malformed("transform id must not be empty"));
        }
        let stylesheet = parse_stylesheet_element(&stylesheet_source)?;
        Ok(TransformData {
            transform_id: transform_id.trim().to_string(),
            document_type_id,
            transform_method: TRANSFORM_METHOD_XSLT.to_string(),
            language: language.to_string(),
            output_format: OUTPUT_FORMAT_MHTML.to_string(),
            stylesheet_source,
            stylesheet,
        })
    }
}

fn aida_name(local: &str) -> XmlName {
    XmlName::new(ns::AIDA_ENVELOPE, "aida", local)
}

fn text_elem(local: &str, text: &str) -> XmlElement {
    XmlElement::new(aida_name(local)).with_text(text)
}

/// Serializes to the `aida:transformData` document.
pub fn emit_transform_data(data: &TransformData) -> XmlDocument {
    XmlDocument::new(emit_transform_data_element(data))
}

pub fn emit_transform_data_element(data: &TransformData) -> XmlElement {
    XmlElement::new(aida_name("transformData"))
        .with_declaration("aida", ns::AIDA_ENVELOPE)
        .with_declaration("xsi", ns::XSI)
        .with_attribute(
            XmlName::new(ns::XSI, "xsi", "schemaLocation"),
            &format!("{} aida:displayData", ns::AIDA_ENVELOPE),
        )
        .with_child(text_elem("transformDataID", &data.transform_id))
        .with_child(text_elem("documentTypeID", data.document_type_id.as_str()))
        .with_child(
            XmlElement::new(aida_name("requiredDisplayCapabilities"))
                .with_child(text_elem("transformMethod", &data.transform_method))
                .with_child(text_elem("language", &data.language))
                .with_child(text_elem("outputFormat", &data.output_format)),
        )
        .with_child(
            XmlElement::new(aida_name("transform")).with_child(
                XmlElement::new(aida_name("documentFrameXSLStylesheet"))
                    .with_child(data.stylesheet_source.clone()),
            ),
        )
}

/// The `aida` metadata vocabulary is accepted under either URI seen in the
/// wild (the transform listings use the envelope namespace).
fn expect_aida<'a>(elem: &'a XmlElement, local: &str) -> Result<&'a XmlElement, TransformError> {
    if elem.name.local == local
        && (elem.name.namespace_uri == ns::AIDA_ENVELOPE
            || elem.name.namespace_uri == ns::AIDA_DEFINITIONS)
    {
        Ok(elem)
    } else {
        Err(malformed(format!("expected aida:{local}, found {}", elem.name)))
    }
}

fn text_value(elem: &XmlElement) -> Result<String, TransformError> {
    if !elem.has_only_text() {
        return Err(malformed(format!("{} must hold only text", elem.name)));
    }
    Ok(elem.text().trim().to_string())
}

pub fn parse_transform_data(doc: &XmlDocument) -> Result<TransformData, TransformError> {
    parse_transform_data_element(&doc.root)
}

pub fn parse_transform_data_element(root: &XmlElement) -> Result<TransformData, TransformError> {
    expect_aida(root, "transformData")?;
    let children = root
        .structural_children()
        .map_err(|e| malformed(e.to_string()))?;
    let [id_elem, type_elem, capabilities, transform] = children.as_slice() else {
        return Err(malformed(
            "transformData must hold transformDataID, documentTypeID, requiredDisplayCapabilities, transform",
        ));
    };

    let transform_id = text_value(expect_aida(id_elem, "transformDataID")?)?;
    if transform_id.is_empty() {
        return Err(malformed("transformDataID must not be empty"));
    }
    let document_type_id = DocumentTypeId::new(&text_value(expect_aida(type_elem, "documentTypeID")?)?)
        .map_err(|e: SchemaError| malformed(e.to_string()))?;

    let caps = expect_aida(capabilities, "requiredDisplayCapabilities")?
        .structural_children()
        .map_err(|e| malformed(e.to_string()))?;
    let [method_elem, language_elem, format_elem] = caps.as_slice() else {
        return Err(malformed(
            "requiredDisplayCapabilities must hold transformMethod, language, outputFormat",
        ));
    };
    let transform_method = text_value(expect_aida(method_elem, "transformMethod")?)?;
    if transform_method != TRANSFORM_METHOD_XSLT {
        return Err(malformed(format!("unsupported transform method {transform_method:?}")));
    }
    let language = text_value(expect_aida(language_elem, "language")?)?;
    let output_format = text_value(expect_aida(format_elem, "outputFormat")?)?;
    if output_format != OUTPUT_FORMAT_MHTML {
        return Err(malformed(format!("unsupported output format {output_format:?}")));
    }

    let frames = expect_aida(transform, "transform")?
        .structural_children()
        .map_err(|e| malformed(e.to_string()))?;
    let [frame] = frames.as_slice() else {
        return Err(malformed("transform must hold exactly one documentFrameXSLStylesheet"));
    };
    let sheets = expect_aida(frame, "documentFrameXSLStylesheet")?
        .structural_children()
        .map_err(|e| malformed(e.to_string()))?;
    let [sheet_elem] = sheets.as_slice() else {
        return Err(malformed(
            "documentFrameXSLStylesheet must hold exactly one stylesheet",
        ));
    };
    let stylesheet_source = (*sheet_elem).clone();
    let stylesheet = parse_stylesheet_element(&stylesheet_source)?;

    Ok(TransformData {
        transform_id,
        document_type_id,
        transform_method,
        language,
        output_format,
        stylesheet_source,
        stylesheet,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xml::{parse, serialize};

    pub const TAX_STYLESHEET: &str = r#"<xsl:stylesheet
xmlns:xsl="http://www.w3.org/1999/XSL/Transform" version="1.0"
xmlns:polito="http://www.polito.it/tax">
<xsl:output method="xml"/>
<xsl:template match="polito:tax">
<aida:mhtml
xmlns:aida="http://www.polito.it"
xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance"
xsi:schemaLocation="http://www.polito.it aida:mhtml">
<aida:body>
<aida:b>
<aida:font size="+2">Tax Declaration
</aida:font>
</aida:b><aida:br/><aida:br/>
<aida:br/>
<aida:font size="+0">Fiscal Code:
</aida:font>
<aida:b><xsl:value-of
select="polito:Unique_identification_number"
/>
</aida:b>
<aida:br/><aida:font size="+0">Surname:
</aida:font>
<aida:b><xsl:value-of
select="polito:Surname"/>
</aida:b>
<aida:br/><aida:font size="+0">Name:
</aida:font>
<aida:b><xsl:value-of select="polito:Name"/>
</aida:b>
<aida:br/>
<aida:font size="+0">
Income from buildings and fields:
</aida:font>
<aida:b><xsl:value-of
select="polito:Income_from_buildings_fields"
/>
</aida:b>
<aida:br/><aida:font size="+0">Income as
employee: </aida:font>
<aida:b><xsl:value-of
select="polito:Income_as_employee"/>
</aida:b>
<aida:br/><aida:font size="+0">Other
incomes: </aida:font>
<aida:b><xsl:value-of
select="polito:Other_incomes"/></aida:b>
<aida:br/><aida:font size="+0">Taxes
Expenses: </aida:font>
<aida:b><xsl:value-of
select="polito:Taxes_Expenses"/> </aida:b>
<aida:br/><aida:font size="+0">Phone Number:
</aida:font>
<aida:b><xsl:value-of
select="polito:Phone_number"/> </aida:b>
<aida:br/><aida:font size="+0">Mail Address:
</aida:font>
<aida:b><xsl:value-of
select="polito:Mail_address"/>
</aida:b>
</aida:body></aida:mhtml>
</xsl:template>
</xsl:stylesheet>"#;

    const TAX_INSTANCE: &str = r#"<polito:tax xmlns:polito="http://www.polito.it/tax">
<polito:Unique_identification_number>D12876</polito:Unique_identification_number>
<polito:Surname>Popescu</polito:Surname>
<polito:Name>Ion</polito:Name>
<polito:Income_from_buildings_fields>21,000,000</polito:Income_from_buildings_fields>
<polito:Income_as_employee>2,000,000</polito:Income_as_employee>
<polito:Other_incomes>1,000,000</polito:Other_incomes>
<polito:Taxes_Expenses>2,000,000</polito:Taxes_Expenses>
<polito:Phone_number>+22323214</polito:Phone_number>
<polito:Mail_address>Popescu.Ion@domain.com</polito:Mail_address>
</polito:tax>"#;

    fn tax_sheet() -> Stylesheet {
        parse_stylesheet(&parse(TAX_STYLESHEET.as_bytes()).unwrap()).unwrap()
    }

    fn tax_instance() -> XmlElement {
        parse(TAX_INSTANCE.as_bytes()).unwrap().root
    }

    fn count_value_of(node: &TemplateNode) -> usize {
        match node {
            TemplateNode::ValueOf { .. } => 1,
            TemplateNode::Text(_) => 0,
            TemplateNode::Element { children, .. } => children.iter().map(count_value_of).sum(),
        }
    }

    #[test]
    fn tax_stylesheet_parses() {
        let sheet = tax_sheet();
        assert_eq!(sheet.match_root.namespace_uri, "http://www.polito.it/tax");
        assert_eq!(sheet.match_root.local, "tax");
        assert_eq!(sheet.output_method, "xml");
        assert_eq!(count_value_of(&sheet.body), 9);
    }

    #[test]
    fn rendering_fills_in_field_values() {
        let doc = apply(&tax_sheet(), &tax_instance()).unwrap();
        assert!(doc.root.name.is(ns::AIDA_ENVELOPE, "mhtml"));
        let body = doc.root.find(ns::AIDA_ENVELOPE, "body").unwrap();

        // The heading literal survives.
        let rendered = String::from_utf8(serialize(&doc)).unwrap();
        assert!(rendered.contains("Tax Declaration"));

        // "Fiscal Code:" label is followed by a bold element holding the
        // identification number.
        let mut after_label = false;
        let mut found = false;
        for child in body.child_elements() {
            if child.name.local == "font" && child.text().contains("Fiscal Code:") {
                after_label = true;
            } else if after_label {
                assert_eq!(child.name.local, "b");
                assert_eq!(child.text().trim(), "D12876");
                found = true;
                break;
            }
        }
        assert!(found);

        // Every field value appears in the output.
        for value in ["Popescu", "Ion", "21,000,000", "+22323214", "Popescu.Ion@domain.com"] {
            assert!(rendered.contains(value), "{value}");
        }
    }

    #[test]
    fn rendered_output_reparses() {
        let doc = apply(&tax_sheet(), &tax_instance()).unwrap();
        let bytes = serialize(&doc);
        assert_eq!(parse(&bytes).unwrap(), doc);
    }

    #[test]
    fn literal_only_sheet_copies_verbatim() {
        let doc = parse(
            br#"<xsl:stylesheet xmlns:xsl="http://www.w3.org/1999/XSL/Transform" version="1.0"
xmlns:t="urn:t">
<xsl:output method="xml"/>
<xsl:template match="t:r">
<out xmlns="urn:out"><keep>hi</keep></out>
</xsl:template>
</xsl:stylesheet>"#,
        )
        .unwrap();
        let sheet = parse_stylesheet(&doc).unwrap();
        let instance = XmlElement::new(XmlName::new("urn:t", "t", "r"));
        let out = apply(&sheet, &instance).unwrap();
        assert_eq!(out.root.name.local, "out");
        assert_eq!(out.root.find("urn:out", "keep").unwrap().text(), "hi");
    }

    #[test]
    fn match_failure_and_missing_field() {
        let sheet = tax_sheet();
        let wrong_root = XmlElement::new(XmlName::new("urn:other", "o", "tax"));
        assert!(matches!(
            apply(&sheet, &wrong_root),
            Err(TransformError::MatchFailure { .. })
        ));

        let mut incomplete = tax_instance();
        incomplete.children.pop();
        incomplete.children.pop(); // drop Mail_address and its whitespace
        let err = apply(&sheet, &incomplete);
        assert!(
            matches!(err, Err(TransformError::MissingField(ref f)) if f.contains("Mail_address")),
            "{err:?}"
        );
    }

    #[test]
    fn unsupported_constructs_rejected() {
        let cases: &[(&str, &str)] = &[
            (
                r#"<xsl:stylesheet xmlns:xsl="http://www.w3.org/1999/XSL/Transform" version="1.0">
<xsl:output method="xml"/>
<xsl:template match="r"><o><xsl:for-each select="x"/></o></xsl:template>
</xsl:stylesheet>"#,
                "for-each",
            ),
            (
                r#"<xsl:stylesheet xmlns:xsl="http://www.w3.org/1999/XSL/Transform" version="1.0">
<xsl:output method="xml"/>
<xsl:template match="r"><o/></xsl:template>
<xsl:template match="s"><o/></xsl:template>
</xsl:stylesheet>"#,
                "two templates",
            ),
            (
                r#"<xsl:stylesheet xmlns:xsl="http://www.w3.org/1999/XSL/Transform" version="1.0">
<xsl:template match="r"><o/></xsl:template>
</xsl:stylesheet>"#,
                "missing xsl:output",
            ),
            (
                r#"<xsl:stylesheet xmlns:xsl="http://www.w3.org/1999/XSL/Transform" version="1.0"
xmlns:p="urn:p">
<xsl:output method="xml"/>
<xsl:template match="p:r"><o><xsl:value-of select="p:a/p:b"/></o></xsl:template>
</xsl:stylesheet>"#,
                "multi-step select",
            ),
            (
                r#"<xsl:stylesheet xmlns:xsl="http://www.w3.org/1999/XSL/Transform" version="1.0">
<xsl:output method="xml"/>
<xsl:template match="r/x"><o/></xsl:template>
</xsl:stylesheet>"#,
                "path match pattern",
            ),
            (
                r#"<xsl:stylesheet xmlns:xsl="http://www.w3.org/1999/XSL/Transform" version="2.0">
<xsl:output method="xml"/>
<xsl:template match="r"><o/></xsl:template>
</xsl:stylesheet>"#,
                "wrong version",
            ),
            (
                r#"<xsl:stylesheet xmlns:xsl="http://www.w3.org/1999/XSL/Transform" version="1.0"
xmlns:p="urn:p">
<xsl:output method="xml"/>
<xsl:template match="r"><p:o/></xsl:template>
</xsl:stylesheet>"#,
                "literal tree borrows a prefix from the stylesheet element",
            ),
        ];
        for (doc, what) in cases {
            let parsed = parse(doc.as_bytes()).unwrap();
            assert!(
                matches!(
                    parse_stylesheet(&parsed),
                    Err(TransformError::UnsupportedStylesheet(_))
                ),
                "{what}"
            );
        }
    }

    fn tax_transform_data() -> TransformData {
        TransformData::new(
            "taxTrafo1",
            DocumentTypeId::new("aida://www.polito.it/tax").unwrap(),
            "en",
            parse(TAX_STYLESHEET.as_bytes()).unwrap().root,
        )
        .unwrap()
    }

    #[test]
    fn transform_data_round_trip() {
        let data = tax_transform_data();
        assert_eq!(data.transform_method, "xslt");
        assert_eq!(data.output_format, "mhtml");
        let doc = emit_transform_data(&data);
        let back = parse_transform_data(&doc).unwrap();
        assert_eq!(back, data);

        // Survives serialization, stylesheet bytes included.
        let reparsed = parse(&serialize(&doc)).unwrap();
        assert_eq!(parse_transform_data(&reparsed).unwrap(), data);
    }

    #[test]
    fn transform_data_field_extraction() {
        let doc = emit_transform_data(&tax_transform_data());
        let data = parse_transform_data(&doc).unwrap();
        assert_eq!(data.transform_id, "taxTrafo1");
        assert_eq!(data.document_type_id.as_str(), "aida://www.polito.it/tax");
        assert_eq!(data.language, "en");
    }

    #[test]
    fn transform_data_rejections() {
        let data = tax_transform_data();
        let emitted = String::from_utf8(serialize(&emit_transform_data(&data))).unwrap();

        let no_format = emitted.replacen("<aida:outputFormat>mhtml</aida:outputFormat>", "", 1);
        assert!(parse_transform_data(&parse(no_format.as_bytes()).unwrap()).is_err());

        let wrong_method = emitted.replacen(">xslt<", ">fo<", 1);
        assert!(parse_transform_data(&parse(wrong_method.as_bytes()).unwrap()).is_err());

        let empty_id = emitted.replacen(">taxTrafo1<", "> <", 1);
        assert!(parse_transform_data(&parse(empty_id.as_bytes()).unwrap()).is_err());

        assert!(TransformData::new(
            "",
            DocumentTypeId::new("aida://x/y").unwrap(),
            "en",
            parse(TAX_STYLESHEET.as_bytes()).unwrap().root,
        )
        .is_err());
    }
}
