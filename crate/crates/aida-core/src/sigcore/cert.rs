//! Minimal X.509 support: self-signed certificates for carrying a public key
//! inside a signature, and extraction of the key from any certificate.
//!
//! The certificates built here are identity envelopes, not a PKI: self-signed
//! root profile, fixed validity window, serial derived from the key so the
//! same pair always yields the same certificate.

use std::str::FromStr;

use rsa::pkcs1v15;
use sha1::{Digest as _, Sha1};
use sha2::Sha256;
use x509_cert::builder::{Builder, CertificateBuilder, Profile};
use x509_cert::der::asn1::UtcTime;
use x509_cert::der::pem::LineEnding;
use x509_cert::der::{Decode, DecodePem, DateTime, Encode, EncodePem};
use x509_cert::name::Name;
use x509_cert::serial_number::SerialNumber;
use x509_cert::spki::SubjectPublicKeyInfoOwned;
use x509_cert::time::{Time, Validity};
use x509_cert::Certificate;

use super::{decode_private, KeyPair, SigError, SignatureKind};

fn crypto_err<E: std::fmt::Display>(e: E) -> SigError {
    SigError::Crypto(e.to_string())
}

fn utc(year: u16, month: u8, day: u8, h: u8, m: u8, s: u8) -> Result<Time, SigError> {
    let dt = DateTime::new(year, month, day, h, m, s).map_err(crypto_err)?;
    Ok(Time::UtcTime(UtcTime::from_date_time(dt).map_err(crypto_err)?))
}

/// Builds a DER-encoded self-signed certificate over the pair's public key.
/// `subject` is a common name, or a full distinguished name if it contains
/// `=`.
pub fn build_self_signed(pair: &KeyPair, subject: &str) -> Result<Vec<u8>, SigError> {
    let kind = SignatureKind::of(&pair.algorithm)?;

    // Serial number from the key itself keeps certificate creation fully
    // deterministic. Masked positive, forced nonzero.
    let mut serial = Sha1::digest(&pair.public_key)[..8].to_vec();
    serial[0] = (serial[0] & 0x7f) | 0x01;
    let serial = SerialNumber::new(&serial).map_err(crypto_err)?;

    let validity = Validity {
        not_before: utc(2020, 1, 1, 0, 0, 0)?,
        not_after: utc(2049, 12, 31, 23, 59, 59)?,
    };
    let dn = if subject.contains('=') {
        subject.to_string()
    } else {
        format!("CN={subject}")
    };
    let name = Name::from_str(&dn)
        .map_err(|e| SigError::Crypto(format!("invalid subject {subject:?}: {e}")))?;
    let spki = SubjectPublicKeyInfoOwned::try_from(pair.public_key.as_slice())
        .map_err(|e| SigError::MalformedKey(format!("SPKI: {e}")))?;
    let private = decode_private(&pair.private_key)?;

    let cert = match kind {
        SignatureKind::RsaSha1 => {
            let signer = pkcs1v15::SigningKey::<Sha1>::new(private);
            CertificateBuilder::new(Profile::Root, serial, validity, name, spki, &signer)
                .map_err(crypto_err)?
                .build::<pkcs1v15::Signature>()
                .map_err(crypto_err)?
        }
        SignatureKind::RsaSha256 => {
            let signer = pkcs1v15::SigningKey::<Sha256>::new(private);
            CertificateBuilder::new(Profile::Root, serial, validity, name, spki, &signer)
                .map_err(crypto_err)?
                .build::<pkcs1v15::Signature>()
                .map_err(crypto_err)?
        }
    };
    cert.to_der().map_err(crypto_err)
}

/// Pulls the SPKI public key (DER) out of a DER-encoded certificate.
pub fn extract_public_key(cert_der: &[u8]) -> Result<Vec<u8>, SigError> {
    let cert = Certificate::from_der(cert_der)
        .map_err(|e| SigError::MalformedKey(format!("certificate: {e}")))?;
    cert.tbs_certificate
        .subject_public_key_info
        .to_der()
        .map_err(crypto_err)
}

pub fn cert_to_pem(cert_der: &[u8]) -> Result<String, SigError> {
    let cert = Certificate::from_der(cert_der)
        .map_err(|e| SigError::MalformedKey(format!("certificate: {e}")))?;
    cert.to_pem(LineEnding::LF).map_err(crypto_err)
}

pub fn cert_from_pem(pem: &str) -> Result<Vec<u8>, SigError> {
    Certificate::from_pem(pem)
        .map_err(|e| SigError::MalformedKey(format!("certificate PEM: {e}")))?
        .to_der()
        .map_err(crypto_err)
}

#[cfg(test)]
mod tests {
    use super::super::{generate_keypair, AlgorithmId};
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn pair() -> KeyPair {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        generate_keypair(&AlgorithmId::rsa_sha1(), 1024, &mut rng).unwrap()
    }

    #[test]
    fn cert_carries_the_public_key() {
        let pair = pair();
        let der = build_self_signed(&pair, "Test Signer").unwrap();
        assert_eq!(extract_public_key(&der).unwrap(), pair.public_key);
    }

    #[test]
    fn cert_creation_is_deterministic() {
        let pair = pair();
        assert_eq!(
            build_self_signed(&pair, "A").unwrap(),
            build_self_signed(&pair, "A").unwrap()
        );
    }

    #[test]
    fn pem_round_trip() {
        let der = build_self_signed(&pair(), "O=Example,CN=Signer").unwrap();
        let pem = cert_to_pem(&der).unwrap();
        assert!(pem.starts_with("-----BEGIN CERTIFICATE-----"));
        assert_eq!(cert_from_pem(&pem).unwrap(), der);
    }

    #[test]
    fn garbage_certificate_rejected() {
        assert!(matches!(
            extract_public_key(b"not a cert"),
            Err(SigError::MalformedKey(_))
        ));
    }
}
