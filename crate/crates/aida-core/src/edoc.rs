//! The e-document envelope: signed content plus one or more parallel
//! signatures, each carrying its own properties.
//!
//! An `aida:eDocument` holds the content subtree inside `aida:signedContent`
//! (always the first child) followed by one `dsig:Signature` per signer. The
//! signatures are parallel: each one independently covers the identical
//! content, so countersigning never touches — and can never invalidate —
//! what others have signed.
//!
//! Also here: instance construction from a compiled definition plus field
//! values, and the four-step verification pipeline a relying party runs
//! against a definitions repository (fetch the definition, check its
//! signature, validate the instance structure, check the instance
//! signature).

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ns;
use crate::schema::{validate_instance, DocumentTypeDefinition, ValidationReport};
use crate::sigcore::{self, AlgorithmId, Digest, KeyPair};
use crate::xml::{
    canonicalize, select_with_scope, NodePath, XmlDocument, XmlElement, XmlError, XmlName, XmlNode,
};
use crate::xmldsig::{
    self, DsigError, KeyInfo, ReferenceTarget, VerificationReport, XmlSignature,
};

#[derive(Debug, Error)]
pub enum EDocError {
    #[error("malformed e-document: {0}")]
    MalformedEDocument(String),
    #[error("no such field {0:?} in the document type")]
    UnknownField(String),
    #[error("no value given for field {0:?}")]
    MissingField(String),
    #[error("instance rejected by its document type")]
    ValueRejected(ValidationReport),
    #[error(transparent)]
    Dsig(#[from] DsigError),
    #[error(transparent)]
    Xml(#[from] XmlError),
}

impl From<sigcore::SigError> for EDocError {
    fn from(e: sigcore::SigError) -> Self {
        EDocError::Dsig(DsigError::Sig(e))
    }
}

fn malformed(msg: impl Into<String>) -> EDocError {
    EDocError::MalformedEDocument(msg.into())
}

/// A parsed envelope: the content subtree (the single element under
/// `aida:signedContent`) and the parallel signatures over it.
#[derive(Debug, Clone, PartialEq)]
pub struct EDocument {
    pub signed_content: XmlElement,
    pub signatures: Vec<XmlSignature>,
}

/// Typed view of the signer-committed properties. The underlying
/// `aida:signedProperties` element is an open record — children this code
/// does not know round-trip untouched inside the signature — so the view
/// reads and writes only the fields defined here.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SignedProperties {
    /// Id of the transform the signer viewed the document through.
    pub transform_data_id: Option<String>,
    /// Digest of the canonical signed content, fixed at signing time.
    pub document_hash: Option<Digest>,
}

/// Typed view of the uncommitted properties: data attached after signing,
/// outside all digests. The timestamp is opaque bytes from the caller;
/// nothing here generates or validates timestamps.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UnsignedProperties {
    pub signature_value_timestamp: Option<Vec<u8>>,
}

fn aida_name(local: &str) -> XmlName {
    XmlName::new(ns::AIDA_ENVELOPE, "aida", local)
}

fn is_aida(elem: &XmlElement, local: &str) -> bool {
    elem.name.local == local
        && (elem.name.namespace_uri == ns::AIDA_ENVELOPE
            || elem.name.namespace_uri == ns::AIDA_DEFINITIONS)
}

impl SignedProperties {
    pub fn none() -> Self {
        SignedProperties::default()
    }

    /// Renders as the `aida:signedProperties` element (empty when both
    /// fields are absent).
    pub fn to_element(&self) -> XmlElement {
        let mut elem = XmlElement::new(aida_name("signedProperties"));
        if let Some(id) = &self.transform_data_id {
            elem = elem.with_child(XmlElement::new(aida_name("transformDataID")).with_text(id));
        }
        if let Some(hash) = &self.document_hash {
            elem = elem.with_child(
                XmlElement::new(aida_name("documentHash"))
                    .with_text(&sigcore::base64_encode(&hash.value)),
            );
        }
        elem
    }

    /// Reads the known fields back. The hash element carries bare digest
    /// bytes, so the algorithm — fixed per signature — comes from the
    /// caller.
    pub fn from_element(
        elem: &XmlElement,
        digest_algorithm: &AlgorithmId,
    ) -> Result<SignedProperties, EDocError> {
        let mut props = SignedProperties::none();
        for child in elem.child_elements() {
            if is_aida(child, "transformDataID") {
                props.transform_data_id = Some(child.text().trim().to_string());
            } else if is_aida(child, "documentHash") {
                props.document_hash = Some(Digest {
                    algorithm: digest_algorithm.clone(),
                    value: sigcore::base64_decode(&child.text())?,
                });
            }
        }
        Ok(props)
    }
}

impl UnsignedProperties {
    pub fn none() -> Self {
        UnsignedProperties::default()
    }

    pub fn to_element(&self) -> XmlElement {
        let mut elem = XmlElement::new(aida_name("unsignedProperties"));
        if let Some(ts) = &self.signature_value_timestamp {
            elem = elem.with_child(
                XmlElement::new(aida_name("signatureValueTimeStamp"))
                    .with_text(&sigcore::base64_encode(ts)),
            );
        }
        elem
    }

    pub fn from_element(elem: &XmlElement) -> Result<UnsignedProperties, EDocError> {
        let mut props = UnsignedProperties::none();
        for child in elem.child_elements() {
            if is_aida(child, "signatureValueTimeStamp") {
                props.signature_value_timestamp = Some(sigcore::base64_decode(&child.text())?);
            }
        }
        Ok(props)
    }
}

/// The digest algorithm a signature's properties hash is read with: the one
/// paired with its signature method.
fn signature_digest_algorithm(sig: &XmlSignature) -> Result<AlgorithmId, EDocError> {
    Ok(sigcore::paired_digest_algorithm(
        &sig.signed_info.signature_method,
    )?)
}

/// The signer-committed properties of one signature, as a typed view.
pub fn signed_properties_view(sig: &XmlSignature) -> Result<SignedProperties, EDocError> {
    SignedProperties::from_element(&sig.signed_properties, &signature_digest_algorithm(sig)?)
}

/// The uncommitted properties of one signature, as a typed view.
pub fn unsigned_properties_view(sig: &XmlSignature) -> Result<UnsignedProperties, EDocError> {
    UnsignedProperties::from_element(&sig.unsigned_properties)
}

/// Path of the content every envelope signature covers: the first child of
/// the envelope root (paths are root-relative).
pub fn content_path() -> NodePath {
    NodePath::parse_uri("#/aida:signedContent").unwrap()
}

/// Bindings in force at `aida:signedContent`: the ones declared on the
/// envelope root.
fn envelope_context() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("aida".to_string(), ns::AIDA_ENVELOPE.to_string()),
        ("xsi".to_string(), ns::XSI.to_string()),
    ])
}

fn signed_content_element(content: &XmlElement) -> XmlElement {
    XmlElement::new(aida_name("signedContent")).with_child(content.clone())
}

/// The digest a signer records as `documentHash`: taken over the same
/// canonical `aida:signedContent` bytes the content reference signs.
pub fn signed_content_digest(
    content: &XmlElement,
    algorithm: &AlgorithmId,
) -> Result<Digest, EDocError> {
    let canonical = canonicalize(&signed_content_element(content), &envelope_context())?;
    Ok(sigcore::digest(&canonical, algorithm)?)
}

/// Wraps a content subtree and applies the first signature.
pub fn wrap_and_sign(
    content: XmlElement,
    key: &KeyPair,
    key_info: KeyInfo,
    props: &SignedProperties,
    unsigned: &UnsignedProperties,
) -> Result<EDocument, EDocError> {
    let signature = sign_content(&content, key, key_info, props, unsigned)?;
    Ok(EDocument {
        signed_content: content,
        signatures: vec![signature],
    })
}

/// Adds an independent parallel signature over the identical content.
/// Returns a new value; existing signatures are untouched and stay valid.
pub fn countersign(
    edoc: &EDocument,
    key: &KeyPair,
    key_info: KeyInfo,
    props: &SignedProperties,
    unsigned: &UnsignedProperties,
) -> Result<EDocument, EDocError> {
    let signature = sign_content(&edoc.signed_content, key, key_info, props, unsigned)?;
    let mut out = edoc.clone();
    out.signatures.push(signature);
    Ok(out)
}

fn sign_content(
    content: &XmlElement,
    key: &KeyPair,
    key_info: KeyInfo,
    props: &SignedProperties,
    unsigned: &UnsignedProperties,
) -> Result<XmlSignature, EDocError> {
    Ok(xmldsig::sign_enveloping(
        &signed_content_element(content),
        &content_path(),
        &envelope_context(),
        key,
        key_info,
        props.to_element(),
        unsigned.to_element(),
    )?)
}

/// Serializes the envelope: `aida:eDocument` with the signed content first,
/// then every signature.
pub fn emit_edoc(edoc: &EDocument) -> XmlDocument {
    let mut root = XmlElement::new(aida_name("eDocument"))
        .with_declaration("aida", ns::AIDA_ENVELOPE)
        .with_declaration("xsi", ns::XSI)
        .with_attribute(
            XmlName::new(ns::XSI, "xsi", "schemaLocation"),
            &format!("{} aida:eDocument", ns::AIDA_ENVELOPE),
        )
        .with_child(signed_content_element(&edoc.signed_content));
    for signature in &edoc.signatures {
        root.children.push(XmlNode::Element(xmldsig::emit(signature)));
    }
    XmlDocument::new(root)
}

pub fn parse_edoc(doc: &XmlDocument) -> Result<EDocument, EDocError> {
    parse_edoc_element(&doc.root)
}

pub fn parse_edoc_element(root: &XmlElement) -> Result<EDocument, EDocError> {
    if !is_aida(root, "eDocument") {
        return Err(malformed(format!("expected aida:eDocument, found {}", root.name)));
    }
    let mut signed_content: Option<XmlElement> = None;
    let mut signatures = Vec::new();
    for child in &root.children {
        let elem = match child {
            XmlNode::Text(_) if child.is_whitespace_text() => continue,
            XmlNode::Text(_) => return Err(malformed("stray text inside eDocument")),
            XmlNode::Element(e) => e,
        };
        if is_aida(elem, "signedContent") {
            if signed_content.is_some() {
                return Err(malformed("more than one signedContent"));
            }
            if !signatures.is_empty() {
                return Err(malformed("signedContent must be the first child"));
            }
            signed_content = Some(extract_content(elem)?);
        } else if elem.name.is(ns::DSIG, "Signature") {
            if signed_content.is_none() {
                return Err(malformed("signedContent must come before any Signature"));
            }
            let signature = xmldsig::absorb(elem)?;
            let covers_content = signature
                .signed_info
                .references
                .iter()
                .any(|r| r.target == ReferenceTarget::Path(content_path()));
            if !covers_content {
                return Err(malformed("signature does not cover the signed content"));
            }
            signatures.push(signature);
        } else {
            return Err(malformed(format!("unexpected element {}", elem.name)));
        }
    }
    let signed_content =
        signed_content.ok_or_else(|| malformed("eDocument lacks a signedContent"))?;
    if signatures.is_empty() {
        return Err(malformed("eDocument carries no signature"));
    }
    Ok(EDocument {
        signed_content,
        signatures,
    })
}

/// The content subtree is the single element child; surrounding indentation
/// is dropped.
fn extract_content(signed_content: &XmlElement) -> Result<XmlElement, EDocError> {
    let mut content = None;
    for child in &signed_content.children {
        match child {
            XmlNode::Text(_) if child.is_whitespace_text() => {}
            XmlNode::Text(_) => return Err(malformed("stray text inside signedContent")),
            XmlNode::Element(e) => {
                if content.is_some() {
                    return Err(malformed("signedContent must hold exactly one element"));
                }
                content = Some(e.clone());
            }
        }
    }
    content.ok_or_else(|| malformed("signedContent is empty"))
}

/// Builds an instance subtree for a definition from field values. `values`
/// must name every field exactly once; children come out in schema order.
/// The instance is validated before being returned.
pub fn make_instance(
    def: &DocumentTypeDefinition,
    values: &[(String, String)],
) -> Result<XmlElement, EDocError> {
    let schema = &def.compiled_schema;
    let mut remaining: BTreeMap<&str, &str> = BTreeMap::new();
    for (name, value) in values {
        if !schema.constraints.contains_key(name.as_str())
            || remaining.insert(name, value).is_some()
        {
            return Err(EDocError::UnknownField(name.clone()));
        }
    }

    let prefix = &schema.namespace_prefix;
    let mut root = XmlElement::new(XmlName::new(
        &schema.target_namespace,
        prefix,
        &schema.root_element,
    ))
    .with_declaration(prefix, &schema.target_namespace)
    .with_declaration("xsi", ns::XSI)
    .with_attribute(
        XmlName::new(ns::XSI, "xsi", "schemaLocation"),
        &format!("{} {}", schema.target_namespace, def.type_id),
    );
    for field in &schema.element_order {
        let value = remaining
            .remove(field.as_str())
            .ok_or_else(|| EDocError::MissingField(field.clone()))?;
        root = root.with_child(
            XmlElement::new(XmlName::new(&schema.target_namespace, prefix, field))
                .with_text(value),
        );
    }

    let report = validate_instance(&root, def);
    if !report.valid {
        return Err(EDocError::ValueRejected(report));
    }
    Ok(root)
}

/// The four client-side verification steps, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepName {
    FetchDefinition,
    VerifyDefinitionSignature,
    ValidateStructure,
    VerifyInstanceSignature,
}

impl StepName {
    pub fn as_str(self) -> &'static str {
        match self {
            StepName::FetchDefinition => "fetch-definition",
            StepName::VerifyDefinitionSignature => "verify-definition-signature",
            StepName::ValidateStructure => "validate-structure",
            StepName::VerifyInstanceSignature => "verify-instance-signature",
        }
    }
}

impl std::fmt::Display for StepName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Passed,
    Failed,
    Skipped,
}

impl StepOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            StepOutcome::Passed => "pass",
            StepOutcome::Failed => "fail",
            StepOutcome::Skipped => "skipped",
        }
    }
}

impl std::fmt::Display for StepOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineStep {
    pub name: StepName,
    pub outcome: StepOutcome,
    pub detail: String,
}

/// Outcome of the whole pipeline: all four steps in order, short-circuited
/// after the first failure. `overall` is true only when every step passed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineReport {
    pub steps: Vec<PipelineStep>,
    pub overall: bool,
}

struct StepRecorder {
    steps: Vec<PipelineStep>,
    failed: bool,
}

impl StepRecorder {
    /// Runs one step unless an earlier one failed (then records a skip).
    /// On success the closure supplies a carried value and a detail line.
    fn run<T>(
        &mut self,
        name: StepName,
        step: impl FnOnce() -> Result<(T, String), String>,
    ) -> Option<T> {
        if self.failed {
            self.steps.push(PipelineStep {
                name,
                outcome: StepOutcome::Skipped,
                detail: "not reached".to_string(),
            });
            return None;
        }
        match step() {
            Ok((value, detail)) => {
                self.steps.push(PipelineStep {
                    name,
                    outcome: StepOutcome::Passed,
                    detail,
                });
                Some(value)
            }
            Err(detail) => {
                self.failed = true;
                self.steps.push(PipelineStep {
                    name,
                    outcome: StepOutcome::Failed,
                    detail,
                });
                None
            }
        }
    }
}

fn all_signatures_valid(edoc: &EDocument) -> Result<String, String> {
    let reports = verify_edoc(edoc).map_err(|e| e.to_string())?;
    for report in &reports {
        if !report.signature_valid {
            return Err(report
                .failure_reason
                .clone()
                .unwrap_or_else(|| "signature does not verify".to_string()));
        }
    }
    Ok(format!(
        "{} signature{} valid",
        reports.len(),
        if reports.len() == 1 { "" } else { "s" }
    ))
}

/// Runs the relying party's four checks on a signed instance: fetch the
/// document type definition (resolved by the instance root's namespace),
/// verify the definition's signatures, validate the instance against the
/// schema, then verify the instance's own signatures. Nothing here errors;
/// every failure lands in the report.
pub fn pipeline_verify(
    instance: &EDocument,
    repo: &crate::repository::Repository,
) -> PipelineReport {
    let mut rec = StepRecorder {
        steps: Vec::new(),
        failed: false,
    };

    let namespace = instance.signed_content.name.namespace_uri.clone();
    let fetched = rec.run(StepName::FetchDefinition, || {
        let def_edoc = repo
            .find_definition_by_namespace(&namespace)
            .map_err(|e| e.to_string())?;
        let def = crate::schema::parse_type_definition_element(&def_edoc.signed_content)
            .map_err(|e| format!("stored definition does not parse: {e}"))?;
        let detail = format!("definition {} for namespace {namespace}", def.type_id);
        Ok(((def_edoc, def), detail))
    });

    rec.run(StepName::VerifyDefinitionSignature, || {
        let (def_edoc, _) = fetched.as_ref().expect("step 1 passed");
        all_signatures_valid(def_edoc).map(|detail| ((), detail))
    });

    rec.run(StepName::ValidateStructure, || {
        let (_, def) = fetched.as_ref().expect("step 1 passed");
        let report = validate_instance(&instance.signed_content, def);
        if report.valid {
            Ok(((), "instance matches the definition".to_string()))
        } else {
            Err(report
                .violations
                .iter()
                .map(|v| format!("{}: {}", v.label, v.message))
                .collect::<Vec<_>>()
                .join("; "))
        }
    });

    rec.run(StepName::VerifyInstanceSignature, || {
        all_signatures_valid(instance).map(|detail| ((), detail))
    });

    let overall = rec
        .steps
        .iter()
        .all(|s| s.outcome == StepOutcome::Passed);
    PipelineReport {
        steps: rec.steps,
        overall,
    }
}

/// Verifies every parallel signature, resolving references into the
/// envelope's own tree. One report per signature, in order.
pub fn verify_edoc(edoc: &EDocument) -> Result<Vec<VerificationReport>, EDocError> {
    let emitted = emit_edoc(edoc);
    edoc.signatures
        .iter()
        .map(|signature| {
            let report = xmldsig::verify_signature(signature, |target| match target {
                ReferenceTarget::Path(path) => {
                    let (elem, scope) = select_with_scope(&emitted, path)?;
                    Ok(canonicalize(elem, &scope)?)
                }
                ReferenceTarget::Blob(label) => {
                    Err(DsigError::UnresolvableReference(label.clone()))
                }
            })?;
            Ok(report)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{compile, DocumentTypeId, FieldDef, FieldType, GenericTypeDefinition};
    use crate::sigcore::generate_keypair;
    use crate::xml::{parse, serialize};
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn test_key(seed: u64) -> KeyPair {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        generate_keypair(&AlgorithmId::rsa_sha1(), 1024, &mut rng).unwrap()
    }

    fn tax_definition() -> DocumentTypeDefinition {
        let short = |max| FieldType::ShortString {
            max_length: Some(max),
        };
        let fields = vec![
            FieldDef { name: "Unique_identification_number".into(), field_type: short(20), searchable: true },
            FieldDef { name: "Surname".into(), field_type: short(20), searchable: true },
            FieldDef { name: "Name".into(), field_type: short(20), searchable: true },
            FieldDef { name: "Income_from_buildings_fields".into(), field_type: short(70), searchable: false },
            FieldDef { name: "Income_as_employee".into(), field_type: short(70), searchable: false },
            FieldDef { name: "Other_incomes".into(), field_type: short(80), searchable: false },
            FieldDef { name: "Taxes_Expenses".into(), field_type: short(80), searchable: false },
            FieldDef { name: "Phone_number".into(), field_type: short(30), searchable: false },
            FieldDef { name: "Mail_address".into(), field_type: short(200), searchable: false },
        ];
        let generic =
            GenericTypeDefinition::new("tax", "http://www.polito.it/tax", "polito", fields)
                .unwrap();
        compile(generic, DocumentTypeId::new("aida://www.polito.it/tax").unwrap())
    }

    fn tax_values() -> Vec<(String, String)> {
        [
            ("Unique_identification_number", "D12876"),
            ("Surname", "Popescu"),
            ("Name", "Ion"),
            ("Income_from_buildings_fields", "21,000,000"),
            ("Income_as_employee", "2,000,000"),
            ("Other_incomes", "1,000,000"),
            ("Taxes_Expenses", "2,000,000"),
            ("Phone_number", "+22323214"),
            ("Mail_address", "Popescu.Ion@domain.com"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
    }

    fn small_content() -> XmlElement {
        XmlElement::new(XmlName::new("urn:x", "x", "note"))
            .with_declaration("x", "urn:x")
            .with_text("hello")
    }

    #[test]
    fn wrap_sign_verify() {
        let key = test_key(1);
        let edoc = wrap_and_sign(
            small_content(),
            &key,
            KeyInfo::PublicKey(key.public_key.clone()),
            &SignedProperties::none(),
            &UnsignedProperties::none(),
        )
        .unwrap();
        let reports = verify_edoc(&edoc).unwrap();
        assert_eq!(reports.len(), 1);
        assert!(reports[0].signature_valid, "{:?}", reports[0]);
        assert!(reports[0].reference_results.iter().all(|r| r.digest_matches));
    }

    #[test]
    fn envelope_shape() {
        let key = test_key(2);
        let edoc = wrap_and_sign(
            small_content(),
            &key,
            KeyInfo::PublicKey(key.public_key.clone()),
            &SignedProperties::none(),
            &UnsignedProperties::none(),
        )
        .unwrap();
        let doc = emit_edoc(&edoc);
        assert!(doc.root.name.is(ns::AIDA_ENVELOPE, "eDocument"));
        assert_eq!(
            doc.root.attribute(ns::XSI, "schemaLocation"),
            Some("http://www.polito.it aida:eDocument")
        );
        let children: Vec<_> = doc.root.child_elements().collect();
        assert_eq!(children.len(), 2);
        assert!(children[0].name.is(ns::AIDA_ENVELOPE, "signedContent"));
        assert!(children[1].name.is(ns::DSIG, "Signature"));

        // Empty properties serialize as empty elements.
        let props = children[1]
            .find(ns::DSIG, "Object")
            .unwrap()
            .find(ns::AIDA_ENVELOPE, "properties")
            .unwrap();
        let signed = props.find(ns::AIDA_ENVELOPE, "signedProperties").unwrap();
        assert!(signed.children.is_empty());
    }

    #[test]
    fn round_trip() {
        let key = test_key(3);
        let props = SignedProperties {
            transform_data_id: Some("taxTrafo1".into()),
            document_hash: Some(
                signed_content_digest(&small_content(), &AlgorithmId::sha1()).unwrap(),
            ),
        };
        let unsigned = UnsignedProperties {
            signature_value_timestamp: Some(b"opaque-tsp-token".to_vec()),
        };
        let edoc = wrap_and_sign(
            small_content(),
            &key,
            KeyInfo::PublicKey(key.public_key.clone()),
            &props,
            &unsigned,
        )
        .unwrap();

        let bytes = serialize(&emit_edoc(&edoc));
        let back = parse_edoc(&parse(&bytes).unwrap()).unwrap();
        assert_eq!(back, edoc);

        assert_eq!(signed_properties_view(&back.signatures[0]).unwrap(), props);
        assert_eq!(unsigned_properties_view(&back.signatures[0]).unwrap(), unsigned);
        assert!(verify_edoc(&back).unwrap()[0].signature_valid);
    }

    #[test]
    fn countersign_parallel() {
        let (key_a, key_b) = (test_key(4), test_key(5));
        let edoc = wrap_and_sign(
            small_content(),
            &key_a,
            KeyInfo::PublicKey(key_a.public_key.clone()),
            &SignedProperties::none(),
            &UnsignedProperties::none(),
        )
        .unwrap();
        let both = countersign(
            &edoc,
            &key_b,
            KeyInfo::PublicKey(key_b.public_key.clone()),
            &SignedProperties::none(),
            &UnsignedProperties::none(),
        )
        .unwrap();
        assert_eq!(edoc.signatures.len(), 1, "countersign returns a new value");
        assert_eq!(both.signatures.len(), 2);
        let reports = verify_edoc(&both).unwrap();
        assert!(reports.iter().all(|r| r.signature_valid));

        // Order independence.
        let mut swapped = both.clone();
        swapped.signatures.reverse();
        let swapped_reports = verify_edoc(&swapped).unwrap();
        assert!(swapped_reports.iter().all(|r| r.signature_valid));

        // Tampering with the content breaks every signature.
        let mut tampered = both.clone();
        tampered.signed_content.children.clear();
        let reports = verify_edoc(&tampered).unwrap();
        for report in &reports {
            assert!(!report.reference_results[0].digest_matches);
        }
    }

    #[test]
    fn unsigned_properties_not_covered() {
        let key = test_key(6);
        let edoc = wrap_and_sign(
            small_content(),
            &key,
            KeyInfo::PublicKey(key.public_key.clone()),
            &SignedProperties::none(),
            &UnsignedProperties::none(),
        )
        .unwrap();
        let mut stamped = edoc.clone();
        stamped.signatures[0].unsigned_properties = UnsignedProperties {
            signature_value_timestamp: Some(b"added later".to_vec()),
        }
        .to_element();
        let reports = verify_edoc(&stamped).unwrap();
        assert!(reports[0].signature_valid);
        assert!(reports[0].reference_results.iter().all(|r| r.digest_matches));
    }

    #[test]
    fn parse_rejections() {
        let key = test_key(7);
        let edoc = wrap_and_sign(
            small_content(),
            &key,
            KeyInfo::PublicKey(key.public_key.clone()),
            &SignedProperties::none(),
            &UnsignedProperties::none(),
        )
        .unwrap();
        let doc = emit_edoc(&edoc);

        // Signature before signedContent.
        let mut reordered = doc.clone();
        reordered.root.children.reverse();
        assert!(matches!(
            parse_edoc(&reordered),
            Err(EDocError::MalformedEDocument(_))
        ));

        // No signature at all.
        let mut unsigned_doc = doc.clone();
        unsigned_doc.root.children.truncate(1);
        assert!(matches!(
            parse_edoc(&unsigned_doc),
            Err(EDocError::MalformedEDocument(_))
        ));

        // Two elements inside signedContent.
        let mut doubled = doc.clone();
        if let XmlNode::Element(sc) = &mut doubled.root.children[0] {
            let extra = sc.children[0].clone();
            sc.children.push(extra);
        }
        assert!(matches!(
            parse_edoc(&doubled),
            Err(EDocError::MalformedEDocument(_))
        ));
    }

    #[test]
    fn instance_construction() {
        let def = tax_definition();
        let instance = make_instance(&def, &tax_values()).unwrap();
        assert!(instance.name.is("http://www.polito.it/tax", "tax"));
        assert_eq!(instance.name.prefix, "polito");
        assert_eq!(
            instance.attribute(ns::XSI, "schemaLocation"),
            Some("http://www.polito.it/tax aida://www.polito.it/tax")
        );
        let children: Vec<_> = instance.child_elements().collect();
        assert_eq!(children.len(), 9);
        assert_eq!(children[0].name.local, "Unique_identification_number");
        assert_eq!(children[0].text(), "D12876");
        assert_eq!(children[8].text(), "Popescu.Ion@domain.com");

        // Values may arrive in any order; the schema fixes the layout.
        let mut shuffled = tax_values();
        shuffled.reverse();
        assert_eq!(make_instance(&def, &shuffled).unwrap(), instance);
    }

    #[test]
    fn instance_rejections() {
        let def = tax_definition();

        let mut missing = tax_values();
        missing.retain(|(k, _)| k != "Surname");
        assert!(matches!(
            make_instance(&def, &missing),
            Err(EDocError::MissingField(f)) if f == "Surname"
        ));

        let mut unknown = tax_values();
        unknown.push(("Shoe_size".into(), "44".into()));
        assert!(matches!(
            make_instance(&def, &unknown),
            Err(EDocError::UnknownField(f)) if f == "Shoe_size"
        ));

        let mut duplicated = tax_values();
        duplicated.push(("Surname".into(), "Again".into()));
        assert!(matches!(
            make_instance(&def, &duplicated),
            Err(EDocError::UnknownField(f)) if f == "Surname"
        ));

        let mut too_long = tax_values();
        too_long[1].1 = "x".repeat(21);
        match make_instance(&def, &too_long) {
            Err(EDocError::ValueRejected(report)) => {
                assert!(report.violations.iter().any(|v| v.label == "Surname"));
            }
            other => panic!("expected ValueRejected, got {other:?}"),
        }
    }

    fn pipeline_fixture() -> (tempfile::TempDir, crate::repository::Repository, EDocument) {
        let dir = tempfile::tempdir().unwrap();
        let repo = crate::repository::Repository::open(dir.path()).unwrap();
        let def = tax_definition();
        let def_key = test_key(9);
        let def_edoc = wrap_and_sign(
            crate::schema::emit_type_definition(&def).root,
            &def_key,
            KeyInfo::PublicKey(def_key.public_key.clone()),
            &SignedProperties::none(),
            &UnsignedProperties::none(),
        )
        .unwrap();
        repo.store_definition(&def_edoc).unwrap();

        let inst_key = test_key(10);
        let instance = make_instance(&def, &tax_values()).unwrap();
        let instance_edoc = wrap_and_sign(
            instance,
            &inst_key,
            KeyInfo::PublicKey(inst_key.public_key.clone()),
            &SignedProperties::none(),
            &UnsignedProperties::none(),
        )
        .unwrap();
        (dir, repo, instance_edoc)
    }

    fn outcomes(report: &PipelineReport) -> Vec<StepOutcome> {
        report.steps.iter().map(|s| s.outcome).collect()
    }

    #[test]
    fn pipeline_happy_path() {
        let (_dir, repo, instance_edoc) = pipeline_fixture();
        let report = pipeline_verify(&instance_edoc, &repo);
        assert!(report.overall, "{report:?}");
        assert_eq!(report.steps.len(), 4);
        assert_eq!(
            report.steps.iter().map(|s| s.name).collect::<Vec<_>>(),
            [
                StepName::FetchDefinition,
                StepName::VerifyDefinitionSignature,
                StepName::ValidateStructure,
                StepName::VerifyInstanceSignature,
            ]
        );
        assert!(report.steps.iter().all(|s| s.outcome == StepOutcome::Passed));
    }

    #[test]
    fn pipeline_stops_on_bad_definition_signature() {
        use StepOutcome::*;
        let (dir, repo, instance_edoc) = pipeline_fixture();

        // Corrupt the stored definition's signature bytes in place, keeping
        // the repository's own integrity digest consistent so the failure
        // surfaces at signature verification, not corruption detection.
        let objects = dir.path().join("objects");
        let entry = std::fs::read_dir(&objects).unwrap().next().unwrap().unwrap();
        let text = std::fs::read_to_string(entry.path()).unwrap();
        let at = text.find("<dsig:SignatureValue>").unwrap() + "<dsig:SignatureValue>".len();
        let swapped = if &text[at..at + 1] == "A" { "B" } else { "A" };
        let tampered = format!("{}{}{}", &text[..at], swapped, &text[at + 1..]);
        std::fs::write(entry.path(), &tampered).unwrap();

        let digest = crate::sigcore::digest(tampered.as_bytes(), &AlgorithmId::sha1()).unwrap();
        let digest_hex: String = digest.value.iter().map(|b| format!("{b:02x}")).collect();
        let index_path = dir.path().join("index.tsv");
        let index = std::fs::read_to_string(&index_path).unwrap();
        let patched: String = index
            .lines()
            .map(|line| {
                let mut fields: Vec<&str> = line.split('\t').collect();
                fields[2] = &digest_hex;
                fields.join("\t") + "\n"
            })
            .collect();
        std::fs::write(&index_path, patched).unwrap();

        let report = pipeline_verify(&instance_edoc, &repo);
        assert!(!report.overall);
        assert_eq!(outcomes(&report), [Passed, Failed, Skipped, Skipped]);
    }

    #[test]
    fn pipeline_catches_structure_violation() {
        use StepOutcome::*;
        let (_dir, repo, _) = pipeline_fixture();

        // A signed instance with two fields swapped: the signature is
        // genuine, the structure is not.
        let def = tax_definition();
        let mut reordered = make_instance(&def, &tax_values()).unwrap();
        reordered.children.swap(0, 1);
        let key = test_key(11);
        let edoc = wrap_and_sign(
            reordered,
            &key,
            KeyInfo::PublicKey(key.public_key.clone()),
            &SignedProperties::none(),
            &UnsignedProperties::none(),
        )
        .unwrap();
        let report = pipeline_verify(&edoc, &repo);
        assert_eq!(outcomes(&report), [Passed, Passed, Failed, Skipped]);
    }

    #[test]
    fn pipeline_catches_tampered_instance() {
        use StepOutcome::*;
        let (_dir, repo, mut instance_edoc) = pipeline_fixture();

        // Change a field value after signing; the shape stays legal.
        let surname = instance_edoc.signed_content.children[1].clone();
        if let XmlNode::Element(mut e) = surname {
            e.children = vec![XmlNode::Text("Mallory".to_string())];
            instance_edoc.signed_content.children[1] = XmlNode::Element(e);
        }
        let report = pipeline_verify(&instance_edoc, &repo);
        assert_eq!(outcomes(&report), [Passed, Passed, Passed, Failed]);
    }

    #[test]
    fn pipeline_unknown_namespace() {
        use StepOutcome::*;
        let (_dir, repo, _) = pipeline_fixture();
        let key = test_key(12);
        let foreign = wrap_and_sign(
            XmlElement::new(XmlName::new("urn:elsewhere", "e", "doc"))
                .with_declaration("e", "urn:elsewhere"),
            &key,
            KeyInfo::PublicKey(key.public_key.clone()),
            &SignedProperties::none(),
            &UnsignedProperties::none(),
        )
        .unwrap();
        let report = pipeline_verify(&foreign, &repo);
        assert_eq!(outcomes(&report), [Failed, Skipped, Skipped, Skipped]);
    }

    #[test]
    fn signed_instance_verifies() {
        let def = tax_definition();
        let key = test_key(8);
        let instance = make_instance(&def, &tax_values()).unwrap();
        let props = SignedProperties {
            transform_data_id: Some("taxTrafo1".into()),
            document_hash: Some(signed_content_digest(&instance, &AlgorithmId::sha1()).unwrap()),
        };
        let edoc = wrap_and_sign(
            instance,
            &key,
            KeyInfo::PublicKey(key.public_key.clone()),
            &props,
            &UnsignedProperties::none(),
        )
        .unwrap();
        let bytes = serialize(&emit_edoc(&edoc));
        let back = parse_edoc(&parse(&bytes).unwrap()).unwrap();
        assert!(verify_edoc(&back).unwrap()[0].signature_valid);
        assert_eq!(
            signed_properties_view(&back.signatures[0]).unwrap().transform_data_id,
            Some("taxTrafo1".into())
        );
    }
}
