//! Secure self-describing document toolkit.
//!
//! Everything needed to produce and check signed, self-contained XML
//! documents: a strict document model with a deterministic canonical form
//! ([`xml`]), digest/signature primitives and key material handling
//! ([`sigcore`]), enveloping and detached XML signatures ([`xmldsig`]),
//! generic document type definitions compiled to schemas with instance
//! validation ([`schema`]), restricted presentation stylesheets
//! ([`transform`]), the signed document envelope and its verification
//! pipeline ([`edoc`]), and a signed-definition store ([`repository`]).

pub mod edoc;
pub mod ns;
pub mod repository;
pub mod schema;
pub mod sigcore;
pub mod transform;
pub mod xml;
pub mod xmldsig;

pub use schema::{DocumentTypeDefinition, GenericTypeDefinition};
pub use xml::{XmlDocument, XmlElement, XmlName};
pub use xmldsig::XmlSignature;
