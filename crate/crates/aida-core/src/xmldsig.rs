//! Building and checking XML signature envelopes.
//!
//! A signature covers three things, each through its own digest reference:
//! the content (an element subtree in the host document, or an external byte
//! blob for detached mode), the `KeyInfo` element carrying the verification
//! key, and the signer's `signedProperties`. The references live in
//! `SignedInfo`, and the signature value is computed over the canonical bytes
//! of `SignedInfo` itself — so what is actually signed is the list of digests
//! together with the algorithm identifiers, and every covered part is checked
//! by recomputing its digest.
//!
//! Covering `KeyInfo` is mandatory here: without it, a holder of a different
//! key pair could swap in their own certificate and re-sign nothing.
//! `unsignedProperties` is deliberately outside coverage — that is where
//! countersignature material accumulates after the fact.
//!
//! The serialized element is `dsig:Signature` with children `SignedInfo`,
//! `SignatureValue`, `KeyInfo`, `Object`; the `Object` wraps
//! `aida:properties` holding the signed and unsigned property elements.
//! Reference URIs use the `#/prefix:local/...` path form for in-document
//! targets and an opaque label for detached blobs. `Transforms` is accepted
//! only absent or empty: transform chains rewrite what a digest means and
//! are a classic verification pitfall.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ns;
use crate::sigcore::{self, cert, AlgorithmId, KeyPair, SigError, SignatureBytes};
use crate::xml::{canonicalize, NodePath, XmlElement, XmlError, XmlName};

#[derive(Debug, Error)]
pub enum DsigError {
    #[error("malformed signature: {0}")]
    MalformedSignature(String),
    #[error("cannot resolve reference {0:?}")]
    UnresolvableReference(String),
    #[error(transparent)]
    Sig(#[from] SigError),
    #[error(transparent)]
    Xml(#[from] XmlError),
}

fn malformed(msg: impl Into<String>) -> DsigError {
    DsigError::MalformedSignature(msg.into())
}

/// What a reference points at: an element subtree addressed by path within
/// the document holding the signature, or external bytes named by a label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReferenceTarget {
    Path(NodePath),
    Blob(String),
}

impl ReferenceTarget {
    /// The serialized `URI` attribute value.
    pub fn uri(&self) -> String {
        match self {
            ReferenceTarget::Path(p) => p.to_uri(),
            ReferenceTarget::Blob(label) => label.clone(),
        }
    }

    fn from_uri(uri: &str) -> ReferenceTarget {
        match NodePath::parse_uri(uri) {
            Some(path) => ReferenceTarget::Path(path),
            None => ReferenceTarget::Blob(uri.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reference {
    pub target: ReferenceTarget,
    pub digest_method: AlgorithmId,
    pub digest_value: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedInfo {
    pub canonicalization_method: String,
    pub signature_method: AlgorithmId,
    pub references: Vec<Reference>,
}

/// The verification key as carried inside the signature: an X.509
/// certificate (DER) or a bare SPKI public key (DER).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KeyInfo {
    Certificate(Vec<u8>),
    PublicKey(Vec<u8>),
}

impl KeyInfo {
    /// The SPKI public key bytes to verify with.
    pub fn public_key(&self) -> Result<Vec<u8>, DsigError> {
        match self {
            KeyInfo::Certificate(der) => Ok(cert::extract_public_key(der)?),
            KeyInfo::PublicKey(spki) => Ok(spki.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct XmlSignature {
    pub signed_info: SignedInfo,
    pub signature_value: SignatureBytes,
    pub key_info: KeyInfo,
    pub signed_properties: XmlElement,
    pub unsigned_properties: XmlElement,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceResult {
    pub target: String,
    pub digest_matches: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationReport {
    pub signature_valid: bool,
    pub reference_results: Vec<ReferenceResult>,
    pub failure_reason: Option<String>,
}

/// Path of the `KeyInfo` element relative to the document the signature
/// lives in; resolved against the signature itself during verification.
pub fn keyinfo_path() -> NodePath {
    NodePath::parse_uri("#/dsig:Signature/dsig:KeyInfo").unwrap()
}

/// Path of the `signedProperties` element, resolved the same way.
pub fn signed_properties_path() -> NodePath {
    NodePath::parse_uri("#/dsig:Signature/dsig:Object/aida:properties/aida:signedProperties")
        .unwrap()
}

fn dsig_name(local: &str) -> XmlName {
    XmlName::new(ns::DSIG, "dsig", local)
}

fn dsig_context() -> BTreeMap<String, String> {
    BTreeMap::from([("dsig".to_string(), ns::DSIG.to_string())])
}

fn properties_context() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("dsig".to_string(), ns::DSIG.to_string()),
        ("aida".to_string(), ns::AIDA_ENVELOPE.to_string()),
    ])
}

/// The `dsig:KeyInfo` element for a key. The digest reference covering the
/// key is computed over this element's canonical bytes.
fn keyinfo_element(key_info: &KeyInfo) -> XmlElement {
    let inner = match key_info {
        KeyInfo::Certificate(der) => XmlElement::new(dsig_name("X509Data")).with_child(
            XmlElement::new(dsig_name("X509Certificate"))
                .with_text(&sigcore::base64_encode(der)),
        ),
        KeyInfo::PublicKey(spki) => {
            XmlElement::new(dsig_name("KeyValue")).with_text(&sigcore::base64_encode(spki))
        }
    };
    XmlElement::new(dsig_name("KeyInfo")).with_child(inner)
}

fn canonical_keyinfo_bytes(key_info: &KeyInfo) -> Result<Vec<u8>, DsigError> {
    Ok(canonicalize(&keyinfo_element(key_info), &dsig_context())?)
}

fn canonical_signed_properties_bytes(props: &XmlElement) -> Result<Vec<u8>, DsigError> {
    Ok(canonicalize(props, &properties_context())?)
}

/// The `dsig:SignedInfo` element; its canonical bytes are what the signature
/// value is computed over.
fn signed_info_element(si: &SignedInfo) -> XmlElement {
    let mut elem = XmlElement::new(dsig_name("SignedInfo"))
        .with_child(
            XmlElement::new(dsig_name("CanonicalizationMethod"))
                .with_attribute(XmlName::local("Algorithm"), &si.canonicalization_method),
        )
        .with_child(
            XmlElement::new(dsig_name("SignatureMethod"))
                .with_attribute(XmlName::local("Algorithm"), &si.signature_method.uri),
        );
    for reference in &si.references {
        elem = elem.with_child(
            XmlElement::new(dsig_name("Reference"))
                .with_attribute(XmlName::local("URI"), &reference.target.uri())
                .with_child(
                    XmlElement::new(dsig_name("DigestMethod"))
                        .with_attribute(XmlName::local("Algorithm"), &reference.digest_method.uri),
                )
                .with_child(
                    XmlElement::new(dsig_name("DigestValue"))
                        .with_text(&sigcore::base64_encode(&reference.digest_value)),
                ),
        );
    }
    elem
}

fn canonical_signed_info_bytes(si: &SignedInfo) -> Result<Vec<u8>, DsigError> {
    Ok(canonicalize(&signed_info_element(si), &dsig_context())?)
}

/// An empty properties element, for signers with nothing to record.
pub fn empty_properties(local: &str) -> XmlElement {
    XmlElement::new(XmlName::new(ns::AIDA_ENVELOPE, "aida", local))
}

fn check_properties_element(elem: &XmlElement, local: &str) -> Result<(), DsigError> {
    if !elem.name.is(ns::AIDA_ENVELOPE, local) {
        return Err(malformed(format!(
            "properties element must be aida:{local}, found {}",
            elem.name
        )));
    }
    Ok(())
}

fn build_signature(
    content_target: ReferenceTarget,
    content_bytes: &[u8],
    key: &KeyPair,
    key_info: KeyInfo,
    signed_properties: XmlElement,
    unsigned_properties: XmlElement,
) -> Result<XmlSignature, DsigError> {
    check_properties_element(&signed_properties, "signedProperties")?;
    check_properties_element(&unsigned_properties, "unsignedProperties")?;
    let digest_method = sigcore::paired_digest_algorithm(&key.algorithm)?;

    let reserved = [
        ReferenceTarget::Path(keyinfo_path()),
        ReferenceTarget::Path(signed_properties_path()),
    ];
    if reserved.contains(&content_target) {
        return Err(malformed(format!(
            "content target {} collides with a signature-internal reference",
            content_target.uri()
        )));
    }

    let make_reference = |target: ReferenceTarget, bytes: &[u8]| -> Result<Reference, DsigError> {
        Ok(Reference {
            target,
            digest_method: digest_method.clone(),
            digest_value: sigcore::digest(bytes, &digest_method)?.value,
        })
    };

    let references = vec![
        make_reference(content_target, content_bytes)?,
        make_reference(
            ReferenceTarget::Path(keyinfo_path()),
            &canonical_keyinfo_bytes(&key_info)?,
        )?,
        make_reference(
            ReferenceTarget::Path(signed_properties_path()),
            &canonical_signed_properties_bytes(&signed_properties)?,
        )?,
    ];

    let signed_info = SignedInfo {
        canonicalization_method: ns::C14N_METHOD.to_string(),
        signature_method: key.algorithm.clone(),
        references,
    };
    let signature_value =
        sigcore::sign(&key.private_key, &canonical_signed_info_bytes(&signed_info)?, &key.algorithm)?;

    Ok(XmlSignature {
        signed_info,
        signature_value,
        key_info,
        signed_properties,
        unsigned_properties,
    })
}

/// Signs an element subtree living at `content_path` in the host document.
/// `content_context` is the namespace context of that subtree — the bindings
/// declared on its ancestors — and must be reproduced at verification time;
/// callers get both from [`crate::xml::select_with_scope`] on the host
/// document.
pub fn sign_enveloping(
    content: &XmlElement,
    content_path: &NodePath,
    content_context: &BTreeMap<String, String>,
    key: &KeyPair,
    key_info: KeyInfo,
    signed_properties: XmlElement,
    unsigned_properties: XmlElement,
) -> Result<XmlSignature, DsigError> {
    let canonical = canonicalize(content, content_context)?;
    build_signature(
        ReferenceTarget::Path(content_path.clone()),
        &canonical,
        key,
        key_info,
        signed_properties,
        unsigned_properties,
    )
}

/// Signs raw external bytes. `label` names the blob in the reference URI;
/// correlating the label with the actual bytes at verification time is the
/// caller's contract.
pub fn sign_detached(
    blob: &[u8],
    label: &str,
    key: &KeyPair,
    key_info: KeyInfo,
    signed_properties: XmlElement,
    unsigned_properties: XmlElement,
) -> Result<XmlSignature, DsigError> {
    if label.starts_with("#/") {
        return Err(malformed(format!(
            "blob label {label:?} would be read back as an in-document path"
        )));
    }
    build_signature(
        ReferenceTarget::Blob(label.to_string()),
        blob,
        key,
        key_info,
        signed_properties,
        unsigned_properties,
    )
}

/// Serializes to the `dsig:Signature` element: SignedInfo, SignatureValue,
/// KeyInfo, then Object wrapping `aida:properties`.
pub fn emit(signature: &XmlSignature) -> XmlElement {
    let properties = XmlElement::new(XmlName::new(ns::AIDA_ENVELOPE, "aida", "properties"))
        .with_declaration("aida", ns::AIDA_ENVELOPE)
        .with_child(signature.signed_properties.clone())
        .with_child(signature.unsigned_properties.clone());
    XmlElement::new(dsig_name("Signature"))
        .with_declaration("dsig", ns::DSIG)
        .with_child(signed_info_element(&signature.signed_info))
        .with_child(
            XmlElement::new(dsig_name("SignatureValue"))
                .with_text(&sigcore::base64_encode(&signature.signature_value.value)),
        )
        .with_child(keyinfo_element(&signature.key_info))
        .with_child(XmlElement::new(dsig_name("Object")).with_child(properties))
}

/// Structural child elements; whitespace-only text between them is
/// tolerated, any other text is an error.
fn structural_children(elem: &XmlElement) -> Result<Vec<&XmlElement>, DsigError> {
    elem.structural_children()
        .map_err(|e| malformed(e.to_string()))
}

fn expect_dsig<'a>(elem: &'a XmlElement, local: &str) -> Result<&'a XmlElement, DsigError> {
    if elem.name.is(ns::DSIG, local) {
        Ok(elem)
    } else {
        Err(malformed(format!("expected dsig:{local}, found {}", elem.name)))
    }
}

fn required_attr(elem: &XmlElement, name: &str) -> Result<String, DsigError> {
    elem.attribute("", name)
        .map(str::to_string)
        .ok_or_else(|| malformed(format!("{} lacks the {name} attribute", elem.name)))
}

fn decode_base64_text(elem: &XmlElement) -> Result<Vec<u8>, DsigError> {
    sigcore::base64_decode(&elem.text())
        .map_err(|e| malformed(format!("{}: {e}", elem.name)))
}

/// Reads a `dsig:Signature` element back into a signature value, checking
/// the structure as it goes: required children in order, supported
/// canonicalization, registered algorithms, decodable base64, absent-or-empty
/// Transforms, the mandatory KeyInfo and signedProperties references, and no
/// duplicate reference targets.
pub fn absorb(element: &XmlElement) -> Result<XmlSignature, DsigError> {
    expect_dsig(element, "Signature")?;
    let children = structural_children(element)?;
    if children.len() != 4 {
        return Err(malformed(format!(
            "Signature must have 4 children, found {}",
            children.len()
        )));
    }
    let si_elem = expect_dsig(children[0], "SignedInfo")?;
    let sv_elem = expect_dsig(children[1], "SignatureValue")?;
    let ki_elem = expect_dsig(children[2], "KeyInfo")?;
    let obj_elem = expect_dsig(children[3], "Object")?;

    // SignedInfo: methods then references.
    let si_children = structural_children(si_elem)?;
    if si_children.len() < 3 {
        return Err(malformed("SignedInfo must hold both methods and at least one Reference"));
    }
    let c14n = required_attr(expect_dsig(si_children[0], "CanonicalizationMethod")?, "Algorithm")?;
    if c14n != ns::C14N_METHOD {
        return Err(malformed(format!("unsupported canonicalization {c14n:?}")));
    }
    let sig_method = AlgorithmId::new(&required_attr(
        expect_dsig(si_children[1], "SignatureMethod")?,
        "Algorithm",
    )?);
    if !sigcore::is_signature_algorithm(&sig_method) {
        return Err(malformed(format!("unknown signature algorithm {sig_method}")));
    }
    let mut references = Vec::new();
    for ref_elem in &si_children[2..] {
        let ref_elem = expect_dsig(ref_elem, "Reference")?;
        let target = ReferenceTarget::from_uri(&required_attr(ref_elem, "URI")?);
        let mut digest_method = None;
        let mut digest_value = None;
        for part in structural_children(ref_elem)? {
            if part.name.is(ns::DSIG, "Transforms") {
                if !structural_children(part)?.is_empty() {
                    return Err(malformed("transform chains are not supported"));
                }
            } else if part.name.is(ns::DSIG, "DigestMethod") {
                let alg = AlgorithmId::new(&required_attr(part, "Algorithm")?);
                sigcore::digest(b"", &alg)
                    .map_err(|_| malformed(format!("unknown digest algorithm {alg}")))?;
                digest_method = Some(alg);
            } else if part.name.is(ns::DSIG, "DigestValue") {
                digest_value = Some(decode_base64_text(part)?);
            } else {
                return Err(malformed(format!("unexpected {} in Reference", part.name)));
            }
        }
        let reference = Reference {
            target,
            digest_method: digest_method.ok_or_else(|| malformed("Reference lacks DigestMethod"))?,
            digest_value: digest_value.ok_or_else(|| malformed("Reference lacks DigestValue"))?,
        };
        if references.iter().any(|r: &Reference| r.target == reference.target) {
            return Err(malformed(format!(
                "two references share the target {}",
                reference.target.uri()
            )));
        }
        references.push(reference);
    }

    let signature_value = SignatureBytes {
        algorithm: sig_method.clone(),
        value: decode_base64_text(sv_elem)?,
    };
    if signature_value.value.is_empty() {
        return Err(malformed("empty SignatureValue"));
    }

    // KeyInfo: X509Data/X509Certificate or KeyValue.
    let ki_children = structural_children(ki_elem)?;
    let key_info = match ki_children.as_slice() {
        [one] if one.name.is(ns::DSIG, "X509Data") => {
            let inner = structural_children(one)?;
            match inner.as_slice() {
                [c] if c.name.is(ns::DSIG, "X509Certificate") => {
                    KeyInfo::Certificate(decode_base64_text(c)?)
                }
                _ => return Err(malformed("X509Data must hold exactly one X509Certificate")),
            }
        }
        [one] if one.name.is(ns::DSIG, "KeyValue") => KeyInfo::PublicKey(decode_base64_text(one)?),
        _ => return Err(malformed("KeyInfo must hold an X509Data or a KeyValue")),
    };

    // Object > aida:properties > signedProperties + unsignedProperties.
    let obj_children = structural_children(obj_elem)?;
    let [props] = obj_children.as_slice() else {
        return Err(malformed("Object must hold exactly the properties element"));
    };
    if !props.name.is(ns::AIDA_ENVELOPE, "properties") {
        return Err(malformed(format!("expected aida:properties, found {}", props.name)));
    }
    let prop_children = structural_children(props)?;
    let [signed_props, unsigned_props] = prop_children.as_slice() else {
        return Err(malformed(
            "properties must hold signedProperties and unsignedProperties",
        ));
    };
    check_properties_element(signed_props, "signedProperties")?;
    check_properties_element(unsigned_props, "unsignedProperties")?;

    let signature = XmlSignature {
        signed_info: SignedInfo {
            canonicalization_method: c14n,
            signature_method: sig_method,
            references,
        },
        signature_value,
        key_info,
        signed_properties: (*signed_props).clone(),
        unsigned_properties: (*unsigned_props).clone(),
    };
    check_reference_coverage(&signature)?;
    Ok(signature)
}

/// Every signature must carry exactly one KeyInfo reference, exactly one
/// signedProperties reference, and at least one content reference.
fn check_reference_coverage(signature: &XmlSignature) -> Result<(), DsigError> {
    let count = |path: &NodePath| {
        signature
            .signed_info
            .references
            .iter()
            .filter(|r| r.target == ReferenceTarget::Path(path.clone()))
            .count()
    };
    if count(&keyinfo_path()) != 1 {
        return Err(malformed("signature must carry exactly one KeyInfo reference"));
    }
    if count(&signed_properties_path()) != 1 {
        return Err(malformed(
            "signature must carry exactly one signedProperties reference",
        ));
    }
    if signature.signed_info.references.len() < 3 {
        return Err(malformed("signature must carry a content reference"));
    }
    Ok(())
}

/// Runs the two obligatory checks: the signature over the canonical
/// `SignedInfo` bytes, and the digest of every reference. The two
/// signature-internal references (KeyInfo, signedProperties) are resolved
/// against the signature itself; `resolve` supplies the bytes for all other
/// targets — canonical subtree bytes for paths, raw bytes for blobs.
///
/// Mismatches never raise: they come back as `false` entries in the report.
/// Errors are reserved for inputs that cannot be checked at all, e.g. an
/// unresolvable target or an unusable key.
pub fn verify_signature(
    signature: &XmlSignature,
    mut resolve: impl FnMut(&ReferenceTarget) -> Result<Vec<u8>, DsigError>,
) -> Result<VerificationReport, DsigError> {
    check_reference_coverage(signature)?;
    let public_key = signature.key_info.public_key()?;

    let signature_ok = sigcore::verify(
        &public_key,
        &canonical_signed_info_bytes(&signature.signed_info)?,
        &signature.signature_value,
    )?;

    let keyinfo_target = ReferenceTarget::Path(keyinfo_path());
    let props_target = ReferenceTarget::Path(signed_properties_path());
    let mut reference_results = Vec::new();
    let mut all_match = true;
    for reference in &signature.signed_info.references {
        let bytes = if reference.target == keyinfo_target {
            canonical_keyinfo_bytes(&signature.key_info)?
        } else if reference.target == props_target {
            canonical_signed_properties_bytes(&signature.signed_properties)?
        } else {
            resolve(&reference.target)?
        };
        let recomputed = sigcore::digest(&bytes, &reference.digest_method)?;
        let digest_matches = recomputed.value == reference.digest_value;
        all_match &= digest_matches;
        reference_results.push(ReferenceResult {
            target: reference.target.uri(),
            digest_matches,
        });
    }

    let signature_valid = signature_ok && all_match;
    let failure_reason = if !signature_ok {
        Some("signature value does not verify over SignedInfo".to_string())
    } else if !all_match {
        reference_results
            .iter()
            .find(|r| !r.digest_matches)
            .map(|r| format!("digest mismatch for reference {}", r.target))
    } else {
        None
    };
    Ok(VerificationReport {
        signature_valid,
        reference_results,
        failure_reason,
    })
}
