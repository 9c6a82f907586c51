//! XML vocabulary for definitions.
//!
//! Generic definitions: `aida:genericSchema` holding `documentRoot`,
//! `documentNamespace`, `namespacePrefix` and a `fieldList` of
//! name-plus-empty-type-tag fields. Complete definitions:
//! `aida:documentTypeData` holding `documentTypeID`, `schema` (the compiled
//! schema in `xsd:` vocabulary), and optionally the generic source.
//!
//! Emission uses the `http://aida.infonova.at` namespace; on input either
//! that URI or `http://www.polito.it` is accepted for the `aida` vocabulary,
//! since both appear in circulating documents.
//!
//! Reading a schema enforces the restricted subset: one root element
//! declaration with a single sequence of element references, an optional
//! named `shortString` simple type of the exact canonical shape, and field
//! declarations that are either plain type references or single-facet
//! `maxLength` string restrictions. Any other construct is refused as
//! [`SchemaError::SchemaTooRich`] — the validator must never claim to have
//! checked a schema it only partially understood.

use std::collections::BTreeMap;

use super::{
    malformed, CompiledSchema, DocumentTypeDefinition, DocumentTypeId, FieldDef,
    FieldType, GenericTypeDefinition, SchemaError, SHORT_STRING_LIMIT,
};
use crate::ns;
use crate::xml::{XmlDocument, XmlElement, XmlName};

fn aida_name(local: &str) -> XmlName {
    XmlName::new(ns::AIDA_DEFINITIONS, "aida", local)
}

fn xsd_name(local: &str) -> XmlName {
    XmlName::new(ns::XSD, "xsd", local)
}

/// The `aida` vocabulary is accepted under either of the two URIs seen in
/// the wild.
fn is_aida(elem: &XmlElement, local: &str) -> bool {
    elem.name.local == local
        && (elem.name.namespace_uri == ns::AIDA_DEFINITIONS
            || elem.name.namespace_uri == ns::AIDA_ENVELOPE)
}

fn expect_aida<'a>(elem: &'a XmlElement, local: &str) -> Result<&'a XmlElement, SchemaError> {
    if is_aida(elem, local) {
        Ok(elem)
    } else {
        Err(malformed(format!("expected aida:{local}, found {}", elem.name)))
    }
}

/// Trimmed text of an element that must hold nothing but text.
fn text_value(elem: &XmlElement) -> Result<String, SchemaError> {
    if !elem.has_only_text() {
        return Err(malformed(format!("{} must hold only text", elem.name)));
    }
    Ok(elem.text().trim().to_string())
}

pub fn parse_generic(doc: &XmlDocument) -> Result<GenericTypeDefinition, SchemaError> {
    parse_generic_element(&doc.root)
}

/// Reads an `aida:genericSchema` element.
pub fn parse_generic_element(root: &XmlElement) -> Result<GenericTypeDefinition, SchemaError> {
    expect_aida(root, "genericSchema")?;
    let children = root.structural_children()?;
    let [doc_root, doc_ns, prefix, field_list] = children.as_slice() else {
        return Err(malformed(
            "genericSchema must hold documentRoot, documentNamespace, namespacePrefix, fieldList",
        ));
    };
    let document_root = text_value(expect_aida(doc_root, "documentRoot")?)?;
    let document_namespace = text_value(expect_aida(doc_ns, "documentNamespace")?)?;
    let namespace_prefix = text_value(expect_aida(prefix, "namespacePrefix")?)?;

    let mut fields = Vec::new();
    for field in expect_aida(field_list, "fieldList")?.structural_children()? {
        let parts = expect_aida(field, "field")?.structural_children()?;
        let [name_elem, type_elem] = parts.as_slice() else {
            return Err(malformed(
                "field must hold exactly one name and one type tag",
            ));
        };
        let name = text_value(expect_aida(name_elem, "name")?)?;
        fields.push(parse_field_type_tag(type_elem, name)?);
    }
    GenericTypeDefinition::new(&document_root, &document_namespace, &namespace_prefix, fields)
}

/// Maps a field's empty type tag (`<aida:shortString max="20"
/// searchable="true"/>` and friends) to a field definition.
fn parse_field_type_tag(tag: &XmlElement, name: String) -> Result<FieldDef, SchemaError> {
    if !is_aida(tag, &tag.name.local) {
        return Err(malformed(format!("unexpected type tag {}", tag.name)));
    }
    if !tag.has_only_text() || !tag.text().trim().is_empty() {
        return Err(malformed(format!("type tag {} must be empty", tag.name)));
    }

    let mut max_length = None;
    let mut searchable = false;
    for (attr, value) in &tag.attributes {
        match (attr.namespace_uri.as_str(), attr.local.as_str()) {
            ("", "max") => {
                let m: u32 = value
                    .parse()
                    .map_err(|_| malformed(format!("max {value:?} is not a positive integer")))?;
                max_length = Some(m);
            }
            ("", "searchable") => {
                searchable = match value.as_str() {
                    "true" => true,
                    "false" => false,
                    other => {
                        return Err(malformed(format!("searchable {other:?} must be true or false")))
                    }
                };
            }
            _ => {
                return Err(malformed(format!(
                    "unexpected attribute {} on type tag {}",
                    attr, tag.name
                )))
            }
        }
    }

    let field_type = match tag.name.local.as_str() {
        "shortString" => FieldType::short_string(max_length)?,
        other => {
            if max_length.is_some() {
                return Err(malformed(format!("max is only valid on shortString, not {other}")));
            }
            match other {
                "string" => FieldType::String,
                "date" => FieldType::Date,
                "time" => FieldType::Time,
                "int" => FieldType::Int,
                "double" => FieldType::Double,
                "Boolean" | "boolean" => FieldType::Boolean,
                _ => return Err(malformed(format!("unknown field type tag {other:?}"))),
            }
        }
    };
    Ok(FieldDef {
        name,
        field_type,
        searchable,
    })
}

fn emit_generic_element(generic: &GenericTypeDefinition) -> XmlElement {
    let mut field_list = XmlElement::new(aida_name("fieldList"));
    for field in &generic.fields {
        let (local, max) = match &field.field_type {
            FieldType::String => ("string", None),
            FieldType::ShortString { max_length } => ("shortString", *max_length),
            FieldType::Date => ("date", None),
            FieldType::Time => ("time", None),
            FieldType::Int => ("int", None),
            FieldType::Double => ("double", None),
            FieldType::Boolean => ("Boolean", None),
        };
        let mut tag = XmlElement::new(aida_name(local));
        if let Some(m) = max {
            tag = tag.with_attribute(XmlName::local("max"), &m.to_string());
        }
        if field.searchable {
            tag = tag.with_attribute(XmlName::local("searchable"), "true");
        }
        field_list = field_list.with_child(
            XmlElement::new(aida_name("field"))
                .with_child(XmlElement::new(aida_name("name")).with_text(&field.name))
                .with_child(tag),
        );
    }
    XmlElement::new(aida_name("genericSchema"))
        .with_child(XmlElement::new(aida_name("documentRoot")).with_text(&generic.document_root))
        .with_child(
            XmlElement::new(aida_name("documentNamespace")).with_text(&generic.document_namespace),
        )
        .with_child(
            XmlElement::new(aida_name("namespacePrefix")).with_text(&generic.namespace_prefix),
        )
        .with_child(field_list)
}

fn emit_schema_element(schema: &CompiledSchema) -> XmlElement {
    let p = &schema.namespace_prefix;
    let mut sequence = XmlElement::new(xsd_name("sequence"));
    for field in &schema.element_order {
        sequence = sequence.with_child(
            XmlElement::new(xsd_name("element"))
                .with_attribute(XmlName::local("ref"), &format!("{p}:{field}")),
        );
    }
    let root_decl = XmlElement::new(xsd_name("element"))
        .with_attribute(XmlName::local("name"), &schema.root_element)
        .with_child(XmlElement::new(xsd_name("complexType")).with_child(sequence));

    let short_string_decl = XmlElement::new(xsd_name("simpleType"))
        .with_attribute(XmlName::local("name"), "shortString")
        .with_child(
            XmlElement::new(xsd_name("restriction"))
                .with_attribute(XmlName::local("base"), "xsd:string")
                .with_child(
                    XmlElement::new(xsd_name("maxLength"))
                        .with_attribute(XmlName::local("value"), &SHORT_STRING_LIMIT.to_string()),
                ),
        );

    let mut out = XmlElement::new(xsd_name("schema"))
        .with_declaration(p, &schema.target_namespace)
        .with_declaration("xsd", ns::XSD)
        .with_attribute(XmlName::local("targetNamespace"), &schema.target_namespace)
        .with_child(root_decl)
        .with_child(short_string_decl);

    for field in &schema.element_order {
        let decl =
            XmlElement::new(xsd_name("element")).with_attribute(XmlName::local("name"), field);
        let decl = match &schema.constraints[field] {
            FieldType::ShortString {
                max_length: Some(m),
            } => decl.with_child(
                XmlElement::new(xsd_name("simpleType")).with_child(
                    XmlElement::new(xsd_name("restriction"))
                        .with_attribute(XmlName::local("base"), &format!("{p}:shortString"))
                        .with_child(
                            XmlElement::new(xsd_name("maxLength"))
                                .with_attribute(XmlName::local("value"), &m.to_string()),
                        ),
                ),
            ),
            FieldType::ShortString { max_length: None } => {
                decl.with_attribute(XmlName::local("type"), &format!("{p}:shortString"))
            }
            FieldType::String => decl.with_attribute(XmlName::local("type"), "xsd:string"),
            FieldType::Date => decl.with_attribute(XmlName::local("type"), "xsd:date"),
            FieldType::Time => decl.with_attribute(XmlName::local("type"), "xsd:time"),
            FieldType::Int => decl.with_attribute(XmlName::local("type"), "xsd:int"),
            FieldType::Double => decl.with_attribute(XmlName::local("type"), "xsd:double"),
            FieldType::Boolean => decl.with_attribute(XmlName::local("type"), "xsd:boolean"),
        };
        out = out.with_child(decl);
    }
    out
}

/// Serializes a definition to its `aida:documentTypeData` document.
pub fn emit_type_definition(def: &DocumentTypeDefinition) -> XmlDocument {
    let mut root = XmlElement::new(aida_name("documentTypeData"))
        .with_declaration("aida", ns::AIDA_DEFINITIONS)
        .with_declaration("xsi", ns::XSI)
        .with_attribute(
            XmlName::new(ns::XSI, "xsi", "schemaLocation"),
            &format!("{} aida:documentTypeData", ns::AIDA_DEFINITIONS),
        )
        .with_child(XmlElement::new(aida_name("documentTypeID")).with_text(def.type_id.as_str()))
        .with_child(
            XmlElement::new(aida_name("schema")).with_child(emit_schema_element(&def.compiled_schema)),
        );
    if let Some(generic) = &def.source_generic {
        root = root.with_child(emit_generic_element(generic));
    }
    XmlDocument::new(root)
}

pub fn parse_type_definition(doc: &XmlDocument) -> Result<DocumentTypeDefinition, SchemaError> {
    parse_type_definition_element(&doc.root)
}

/// Reads an `aida:documentTypeData` element (attributes on the wrapper, such
/// as `xsi:schemaLocation`, are ignored).
pub fn parse_type_definition_element(
    root: &XmlElement,
) -> Result<DocumentTypeDefinition, SchemaError> {
    expect_aida(root, "documentTypeData")?;
    let children = root.structural_children()?;
    let (id_elem, schema_wrapper, generic_elem) = match children.as_slice() {
        [id, schema] => (*id, *schema, None),
        [id, schema, generic] => (*id, *schema, Some(*generic)),
        _ => {
            return Err(malformed(
                "documentTypeData must hold documentTypeID, schema, and optionally genericSchema",
            ))
        }
    };
    let type_id = DocumentTypeId::new(&text_value(expect_aida(id_elem, "documentTypeID")?)?)?;

    let schema_children = expect_aida(schema_wrapper, "schema")?.structural_children()?;
    let [schema_elem] = schema_children.as_slice() else {
        return Err(malformed("aida:schema must hold exactly one xsd:schema"));
    };
    let compiled_schema = parse_schema_element(schema_elem)?;

    let source_generic = generic_elem.map(parse_generic_element).transpose()?;
    DocumentTypeDefinition::new(type_id, compiled_schema, source_generic)
}

fn too_rich(msg: impl Into<String>) -> SchemaError {
    SchemaError::SchemaTooRich(msg.into())
}

/// Resolves `prefix:local` attribute values (type / ref / base) against the
/// declarations in scope.
fn resolve_qname(
    value: &str,
    scope: &BTreeMap<String, String>,
) -> Result<(String, String), SchemaError> {
    let (prefix, local) = match value.split_once(':') {
        Some((p, l)) => (p, l),
        None => ("", value),
    };
    if local.is_empty() {
        return Err(malformed(format!("invalid QName {value:?}")));
    }
    let uri = scope
        .get(prefix)
        .cloned()
        .ok_or_else(|| too_rich(format!("QName {value:?} uses an undeclared prefix")))?;
    Ok((uri, local.to_string()))
}

fn single_attr(elem: &XmlElement, name: &str) -> Result<String, SchemaError> {
    let mut found = None;
    for (attr, value) in &elem.attributes {
        if attr.namespace_uri.is_empty() && attr.local == name {
            found = Some(value.clone());
        } else {
            return Err(too_rich(format!(
                "unsupported attribute {} on {}",
                attr, elem.name
            )));
        }
    }
    found.ok_or_else(|| malformed(format!("{} lacks the {name} attribute", elem.name)))
}

fn expect_xsd<'a>(elem: &'a XmlElement, local: &str) -> Result<&'a XmlElement, SchemaError> {
    if elem.name.is(ns::XSD, local) {
        Ok(elem)
    } else {
        Err(too_rich(format!("expected xsd:{local}, found {}", elem.name)))
    }
}

/// Reads an `xsd:schema` element, admitting only the restricted subset.
fn parse_schema_element(schema_elem: &XmlElement) -> Result<CompiledSchema, SchemaError> {
    expect_xsd(schema_elem, "schema")?;
    let target_namespace = single_attr(schema_elem, "targetNamespace")?;
    if target_namespace.is_empty() {
        return Err(malformed("targetNamespace must not be empty"));
    }
    let scope = &schema_elem.namespace_declarations;
    let namespace_prefix = scope
        .iter()
        .find(|(p, uri)| !p.is_empty() && **uri == target_namespace)
        .map(|(p, _)| p.clone())
        .ok_or_else(|| malformed("schema must declare a prefix for its target namespace"))?;

    let mut root_decl: Option<&XmlElement> = None;
    let mut short_string_decl: Option<&XmlElement> = None;
    let mut field_decls: Vec<&XmlElement> = Vec::new();
    for child in schema_elem.structural_children()? {
        if child.name.is(ns::XSD, "element") {
            let has_complex = child
                .child_elements()
                .any(|e| e.name.is(ns::XSD, "complexType"));
            if has_complex {
                if root_decl.replace(child).is_some() {
                    return Err(too_rich("more than one root element declaration"));
                }
            } else {
                field_decls.push(child);
            }
        } else if child.name.is(ns::XSD, "simpleType") {
            if short_string_decl.replace(child).is_some() {
                return Err(too_rich("more than one named simple type"));
            }
        } else {
            return Err(too_rich(format!("unsupported construct {}", child.name)));
        }
    }

    if let Some(decl) = short_string_decl {
        check_short_string_decl(decl, scope)?;
    }

    let root_decl = root_decl.ok_or_else(|| malformed("schema lacks a root element declaration"))?;
    let (root_element, element_order) =
        parse_root_decl(root_decl, scope, &target_namespace)?;

    let mut constraints = BTreeMap::new();
    for decl in field_decls {
        let (name, field_type) = parse_field_decl(
            decl,
            scope,
            &target_namespace,
            short_string_decl.is_some(),
        )?;
        if constraints.insert(name.clone(), field_type).is_some() {
            return Err(malformed(format!("field {name:?} declared twice")));
        }
    }

    // The sequence and the declarations must name exactly the same fields.
    for field in &element_order {
        if !constraints.contains_key(field) {
            return Err(malformed(format!("referenced field {field:?} is never declared")));
        }
    }
    for field in constraints.keys() {
        if !element_order.contains(field) {
            return Err(malformed(format!("declared field {field:?} is never referenced")));
        }
    }

    Ok(CompiledSchema {
        root_element,
        target_namespace,
        namespace_prefix,
        element_order,
        constraints,
    })
}

/// The named `shortString` type must be exactly the canonical declaration:
/// a 250-character restriction of `xsd:string`.
fn check_short_string_decl(
    decl: &XmlElement,
    scope: &BTreeMap<String, String>,
) -> Result<(), SchemaError> {
    if single_attr(decl, "name")? != "shortString" {
        return Err(too_rich("the only supported named simple type is shortString"));
    }
    let children = decl.structural_children()?;
    let [restriction] = children.as_slice() else {
        return Err(too_rich("shortString must hold exactly one restriction"));
    };
    expect_xsd(restriction, "restriction")?;
    if resolve_qname(&single_attr(restriction, "base")?, scope)?
        != (ns::XSD.to_string(), "string".to_string())
    {
        return Err(too_rich("shortString must restrict xsd:string"));
    }
    let facets = restriction.structural_children()?;
    let [max_length] = facets.as_slice() else {
        return Err(too_rich("shortString must carry exactly one maxLength facet"));
    };
    expect_xsd(max_length, "maxLength")?;
    if single_attr(max_length, "value")? != SHORT_STRING_LIMIT.to_string() {
        return Err(too_rich(format!(
            "shortString maxLength must be {SHORT_STRING_LIMIT}"
        )));
    }
    Ok(())
}

fn parse_root_decl(
    decl: &XmlElement,
    scope: &BTreeMap<String, String>,
    target_namespace: &str,
) -> Result<(String, Vec<String>), SchemaError> {
    let root_element = single_attr(decl, "name")?;
    let children = decl.structural_children()?;
    let [complex] = children.as_slice() else {
        return Err(too_rich("root element must hold exactly one complexType"));
    };
    expect_xsd(complex, "complexType")?;
    if !complex.attributes.is_empty() {
        return Err(too_rich("attributes on complexType are not supported"));
    }
    let complex_children = complex.structural_children()?;
    let [sequence] = complex_children.as_slice() else {
        return Err(too_rich("complexType must hold exactly one sequence"));
    };
    expect_xsd(sequence, "sequence")?;
    if !sequence.attributes.is_empty() {
        return Err(too_rich("attributes on sequence are not supported"));
    }

    let mut element_order = Vec::new();
    for entry in sequence.structural_children()? {
        expect_xsd(entry, "element")?;
        if !entry.children.is_empty() {
            return Err(too_rich("sequence entries must be empty element references"));
        }
        let scope = merged_scope(scope, entry);
        let (uri, local) = resolve_qname(&single_attr(entry, "ref")?, &scope)?;
        if uri != target_namespace {
            return Err(malformed(format!(
                "reference {local:?} points outside the target namespace"
            )));
        }
        if element_order.contains(&local) {
            return Err(malformed(format!("field {local:?} referenced twice")));
        }
        element_order.push(local);
    }
    if element_order.is_empty() {
        return Err(malformed("the sequence must reference at least one field"));
    }
    Ok((root_element, element_order))
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

fn parse_field_decl(
    decl: &XmlElement,
    scope: &BTreeMap<String, String>,
    target_namespace: &str,
    have_short_string: bool,
) -> Result<(String, FieldType), SchemaError> {
    let mut name = None;
    let mut type_ref = None;
    for (attr, value) in &decl.attributes {
        match (attr.namespace_uri.as_str(), attr.local.as_str()) {
            ("", "name") => name = Some(value.clone()),
            ("", "type") => type_ref = Some(value.clone()),
            _ => {
                return Err(too_rich(format!(
                    "unsupported attribute {} on element declaration",
                    attr
                )))
            }
        }
    }
    let name = name.ok_or_else(|| malformed("element declaration lacks a name"))?;
    let scope = merged_scope(scope, decl);

    let require_short_string = |what: &str| {
        if have_short_string {
            Ok(())
        } else {
            Err(too_rich(format!(
                "{what} references shortString but the schema does not declare it"
            )))
        }
    };

    let field_type = match (type_ref, decl.structural_children()?.as_slice()) {
        (Some(type_ref), []) => {
            let (uri, local) = resolve_qname(&type_ref, &scope)?;
            if uri == ns::XSD {
                match local.as_str() {
                    "string" => FieldType::String,
                    "date" => FieldType::Date,
                    "time" => FieldType::Time,
                    "int" => FieldType::Int,
                    "double" => FieldType::Double,
                    "boolean" => FieldType::Boolean,
                    other => return Err(too_rich(format!("unsupported type xsd:{other}"))),
                }
            } else if uri == target_namespace && local == "shortString" {
                require_short_string(&name)?;
                FieldType::ShortString { max_length: None }
            } else {
                return Err(too_rich(format!("unsupported type reference {type_ref:?}")));
            }
        }
        (None, [simple]) => {
            expect_xsd(simple, "simpleType")?;
            if !simple.attributes.is_empty() {
                return Err(too_rich("anonymous simple types take no attributes"));
            }
            let inner = simple.structural_children()?;
            let [restriction] = inner.as_slice() else {
                return Err(too_rich("anonymous simpleType must hold one restriction"));
            };
            expect_xsd(restriction, "restriction")?;
            let scope = merged_scope(&scope, restriction);
            let (base_uri, base_local) =
                resolve_qname(&single_attr(restriction, "base")?, &scope)?;
            let base_is_short = base_uri == target_namespace && base_local == "shortString";
            let base_is_string = base_uri == ns::XSD && base_local == "string";
            if base_is_short {
                require_short_string(&name)?;
            } else if !base_is_string {
                return Err(too_rich(format!(
                    "unsupported restriction base {base_local:?}"
                )));
            }
            let facets = restriction.structural_children()?;
            let [max_length] = facets.as_slice() else {
                return Err(too_rich("restriction must carry exactly one maxLength facet"));
            };
            expect_xsd(max_length, "maxLength")?;
            let value = single_attr(max_length, "value")?;
            let m: u32 = value
                .parse()
                .map_err(|_| malformed(format!("maxLength {value:?} is not a number")))?;
            FieldType::short_string(Some(m))?
        }
        (Some(_), [_]) => {
            return Err(malformed(
                "element declaration carries both a type and an anonymous simpleType",
            ))
        }
        (None, []) => return Err(too_rich("element declaration without a type")),
        _ => return Err(too_rich("element declaration with unsupported children")),
    };
    Ok((name, field_type))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::compile;
    use crate::xml::parse;

    const TABLE_GENERIC_TAX: &str = r#"<aida:genericSchema
xmlns:aida="http://aida.infonova.at">
<aida:documentRoot> tax
</aida:documentRoot>
<aida:documentNamespace>
http://www.polito.it/tax
</aida:documentNamespace>
<aida:namespacePrefix> polito
</aida:namespacePrefix>
<aida:fieldList>
<aida:field>
  <aida:name> Unique_identification_number
</aida:name>
<aida:shortString max="20"
searchable="true"/>
</aida:field>
<aida:field>
  <aida:name>Surname</aida:name>
  <aida:shortString max="20"
searchable="true"/>
</aida:field>
<aida:field>
  <aida:name>Name</aida:name>
  <aida:shortString max="20"
searchable="true"/>
</aida:field>
<aida:field>
  <aida:name>Income_from_buildings_fields
</aida:name>
  <aida:shortString max="70"/>
</aida:field>
<aida:field>
  <aida:name>Income_as_employee
</aida:name>
  <aida:shortString max="70"/>
</aida:field>
<aida:field>
    <aida:name>Other_incomes</aida:name>
    <aida:shortString max="80"/>
</aida:field>
<aida:field>
    <aida:name>Taxes_Expenses</aida:name>
    <aida:shortString max="80"/>
</aida:field>
<aida:field>
    <aida:name>Phone_number</aida:name>
    <aida:shortString max="30"/>
</aida:field>
<aida:field>
    <aida:name>Mail_address</aida:name>
    <aida:shortString max="200"/>
</aida:field>
</aida:fieldList>
</aida:genericSchema>"#;

    fn tax_generic() -> GenericTypeDefinition {
        parse_generic(&parse(TABLE_GENERIC_TAX.as_bytes()).unwrap()).unwrap()
    }

    fn tax_definition() -> DocumentTypeDefinition {
        compile(
            tax_generic(),
            DocumentTypeId::new("aida://www.polito.it/tax").unwrap(),
        )
    }

    #[test]
    fn tax_generic_parses_fully() {
        let generic = tax_generic();
        assert_eq!(generic.document_root, "tax");
        assert_eq!(generic.document_namespace, "http://www.polito.it/tax");
        assert_eq!(generic.namespace_prefix, "polito");
        assert_eq!(generic.fields.len(), 9);
        let first = &generic.fields[0];
        assert_eq!(first.name, "Unique_identification_number");
        assert_eq!(first.field_type, FieldType::ShortString { max_length: Some(20) });
        assert!(first.searchable);
        let last = &generic.fields[8];
        assert_eq!(last.name, "Mail_address");
        assert_eq!(last.field_type, FieldType::ShortString { max_length: Some(200) });
        assert!(!last.searchable);
    }

    #[test]
    fn generic_under_other_aida_namespace_accepted() {
        let alt = TABLE_GENERIC_TAX.replace("http://aida.infonova.at", "http://www.polito.it");
        let generic = parse_generic(&parse(alt.as_bytes()).unwrap()).unwrap();
        assert_eq!(generic, tax_generic());
    }

    #[test]
    fn minimal_generic_without_max() {
        let doc = parse(
            br#"<aida:genericSchema xmlns:aida="http://aida.infonova.at">
<aida:documentRoot>r</aida:documentRoot>
<aida:documentNamespace>urn:r</aida:documentNamespace>
<aida:namespacePrefix>p</aida:namespacePrefix>
<aida:fieldList><aida:field><aida:name>f</aida:name><aida:string/></aida:field></aida:fieldList>
</aida:genericSchema>"#,
        )
        .unwrap();
        let generic = parse_generic(&doc).unwrap();
        assert_eq!(generic.fields[0].field_type, FieldType::String);
        assert!(!generic.fields[0].searchable);
    }

    #[test]
    fn generic_rejections() {
        let cases: &[(&str, &str)] = &[
            ("<aida:shortString max=\"300\"/>", "max over the limit"),
            ("<aida:shortString max=\"20\"/><aida:string/>", "two type tags"),
            ("<aida:mystery/>", "unknown type tag"),
            ("<aida:int max=\"5\"/>", "max on a non-shortString type"),
            ("<aida:string searchable=\"maybe\"/>", "bad searchable value"),
            ("<aida:string other=\"1\"/>", "unknown attribute"),
            ("<aida:string>text</aida:string>", "non-empty type tag"),
        ];
        for (tag, what) in cases {
            let doc = format!(
                r#"<aida:genericSchema xmlns:aida="http://aida.infonova.at">
<aida:documentRoot>r</aida:documentRoot>
<aida:documentNamespace>urn:r</aida:documentNamespace>
<aida:namespacePrefix>p</aida:namespacePrefix>
<aida:fieldList><aida:field><aida:name>f</aida:name>{tag}</aida:field></aida:fieldList>
</aida:genericSchema>"#
            );
            assert!(
                parse_generic(&parse(doc.as_bytes()).unwrap()).is_err(),
                "{what}"
            );
        }
    }

    #[test]
    fn compiled_tax_schema_has_table_shape() {
        let def = tax_definition();
        let doc = emit_type_definition(&def);
        let root = &doc.root;
        assert!(root.name.is(ns::AIDA_DEFINITIONS, "documentTypeData"));

        let id = root.find(ns::AIDA_DEFINITIONS, "documentTypeID").unwrap();
        assert_eq!(id.text(), "aida://www.polito.it/tax");

        let schema = root
            .find(ns::AIDA_DEFINITIONS, "schema")
            .unwrap()
            .find(ns::XSD, "schema")
            .unwrap();
        assert_eq!(
            schema.attribute("", "targetNamespace"),
            Some("http://www.polito.it/tax")
        );
        assert_eq!(
            schema.namespace_declarations.get("polito").map(String::as_str),
            Some("http://www.polito.it/tax")
        );

        // Root declaration: sequence of the nine refs in order.
        let root_decl = schema
            .child_elements()
            .find(|e| e.attribute("", "name") == Some("tax"))
            .unwrap();
        let refs: Vec<_> = root_decl
            .find(ns::XSD, "complexType")
            .unwrap()
            .find(ns::XSD, "sequence")
            .unwrap()
            .child_elements()
            .map(|e| e.attribute("", "ref").unwrap().to_string())
            .collect();
        assert_eq!(
            refs,
            [
                "polito:Unique_identification_number",
                "polito:Surname",
                "polito:Name",
                "polito:Income_from_buildings_fields",
                "polito:Income_as_employee",
                "polito:Other_incomes",
                "polito:Taxes_Expenses",
                "polito:Phone_number",
                "polito:Mail_address",
            ]
        );

        // The named shortString type restricting xsd:string to 250.
        let short = schema
            .child_elements()
            .find(|e| e.name.is(ns::XSD, "simpleType"))
            .unwrap();
        assert_eq!(short.attribute("", "name"), Some("shortString"));
        let restriction = short.find(ns::XSD, "restriction").unwrap();
        assert_eq!(restriction.attribute("", "base"), Some("xsd:string"));
        assert_eq!(
            restriction
                .find(ns::XSD, "maxLength")
                .unwrap()
                .attribute("", "value"),
            Some("250")
        );

        // Field declaration narrowing shortString to 20.
        let field = schema
            .child_elements()
            .find(|e| e.attribute("", "name") == Some("Unique_identification_number"))
            .unwrap();
        let base = field
            .find(ns::XSD, "simpleType")
            .unwrap()
            .find(ns::XSD, "restriction")
            .unwrap();
        assert_eq!(base.attribute("", "base"), Some("polito:shortString"));
        assert_eq!(
            base.find(ns::XSD, "maxLength").unwrap().attribute("", "value"),
            Some("20")
        );

        // The generic source rides along.
        assert!(root.find(ns::AIDA_DEFINITIONS, "genericSchema").is_some());
    }

    #[test]
    fn emit_parse_round_trip() {
        let def = tax_definition();
        let doc = emit_type_definition(&def);
        assert_eq!(parse_type_definition(&doc).unwrap(), def);

        // Byte-determinism of emission.
        let a = crate::xml::serialize(&emit_type_definition(&def));
        let b = crate::xml::serialize(&emit_type_definition(&def));
        assert_eq!(a, b);
    }

    #[test]
    fn round_trip_covers_every_field_type() {
        let generic = GenericTypeDefinition::new(
            "all",
            "urn:all",
            "a",
            vec![
                FieldDef { name: "S".into(), field_type: FieldType::String, searchable: true },
                FieldDef {
                    name: "SS".into(),
                    field_type: FieldType::ShortString { max_length: None },
                    searchable: false,
                },
                FieldDef {
                    name: "SSM".into(),
                    field_type: FieldType::ShortString { max_length: Some(7) },
                    searchable: false,
                },
                FieldDef { name: "D".into(), field_type: FieldType::Date, searchable: false },
                FieldDef { name: "T".into(), field_type: FieldType::Time, searchable: false },
                FieldDef { name: "I".into(), field_type: FieldType::Int, searchable: false },
                FieldDef { name: "F".into(), field_type: FieldType::Double, searchable: false },
                FieldDef { name: "B".into(), field_type: FieldType::Boolean, searchable: false },
            ],
        )
        .unwrap();
        let def = compile(generic, DocumentTypeId::new("aida://all/types").unwrap());
        let doc = emit_type_definition(&def);
        assert_eq!(parse_type_definition(&doc).unwrap(), def);
    }

    #[test]
    fn definition_without_source_generic() {
        let mut def = tax_definition();
        def.source_generic = None;
        let doc = emit_type_definition(&def);
        assert!(doc.root.find(ns::AIDA_DEFINITIONS, "genericSchema").is_none());
        assert_eq!(parse_type_definition(&doc).unwrap(), def);
    }

    #[test]
    fn rich_schemas_are_refused() {
        let def = tax_definition();
        let base = crate::xml::serialize(&emit_type_definition(&def));
        let base = String::from_utf8(base).unwrap();

        let with_choice = base.replace("xsd:sequence", "xsd:choice");
        let err = parse_type_definition(&parse(with_choice.as_bytes()).unwrap());
        assert!(matches!(err, Err(SchemaError::SchemaTooRich(_))), "{err:?}");

        let with_min_occurs = base.replacen(
            "<xsd:element ref=\"polito:Surname\"/>",
            "<xsd:element ref=\"polito:Surname\" minOccurs=\"0\"/>",
            1,
        );
        assert!(matches!(
            parse_type_definition(&parse(with_min_occurs.as_bytes()).unwrap()),
            Err(SchemaError::SchemaTooRich(_))
        ));

        let with_pattern = base.replacen(
            "<xsd:maxLength value=\"20\"/>",
            "<xsd:pattern value=\"[A-Z]*\"/>",
            1,
        );
        assert!(matches!(
            parse_type_definition(&parse(with_pattern.as_bytes()).unwrap()),
            Err(SchemaError::SchemaTooRich(_))
        ));
    }

    #[test]
    fn mismatched_generic_is_rejected() {
        let def = tax_definition();
        let emitted = String::from_utf8(crate::xml::serialize(&emit_type_definition(&def))).unwrap();
        // Claim a different max in the embedded generic than the schema says.
        let lying = emitted.replacen("max=\"200\"", "max=\"199\"", 1);
        assert!(parse_type_definition(&parse(lying.as_bytes()).unwrap()).is_err());
    }
}
