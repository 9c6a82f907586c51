//! Namespace URIs and algorithm identifiers used across the e-document
//! formats.

/// Namespace of generic type definitions and document type definitions.
pub const AIDA_DEFINITIONS: &str = "http://aida.infonova.at";

/// Namespace of the e-document envelope (`aida:eDocument`, `aida:properties`,
/// `aida:mhtml`) and of transform data.
pub const AIDA_ENVELOPE: &str = "http://www.polito.it";

/// XML Signature namespace.
pub const DSIG: &str = "http://www.w3.org/2000/09/xmldsig#";

/// XML Schema vocabulary namespace.
pub const XSD: &str = "http://www.w3.org/2001/XMLSchema";

/// XML Schema instance namespace (`xsi:schemaLocation`).
pub const XSI: &str = "http://www.w3.org/2001/XMLSchema-instance";

/// XSL Transform namespace.
pub const XSL: &str = "http://www.w3.org/1999/XSL/Transform";

/// Reserved `xml:` prefix namespace, bound implicitly in every document.
pub const XML: &str = "http://www.w3.org/XML/1998/namespace";

/// Identifier of the canonicalization method recorded in `SignedInfo`.
pub const C14N_METHOD: &str = "http://www.w3.org/TR/2001/REC-xml-c14n-20010315";

/// SHA-1 digest algorithm identifier.
pub const ALG_SHA1: &str = "http://www.w3.org/2000/09/xmldsig#sha1";

/// RSA with SHA-1 signature algorithm identifier.
pub const ALG_RSA_SHA1: &str = "http://www.w3.org/2000/09/xmldsig#rsa-sha1";

/// SHA-256 digest algorithm identifier.
pub const ALG_SHA256: &str = "http://www.w3.org/2001/04/xmlenc#sha256";

/// RSA with SHA-256 signature algorithm identifier.
pub const ALG_RSA_SHA256: &str = "http://www.w3.org/2001/04/xmldsig-more#rsa-sha256";
