//! Hybrid certificates: each certificate carries a classical public key and
//! optionally a post-quantum one, and is signed by both of the issuer's
//! keys. Chains are validated under a policy choosing which signature set
//! must hold.

use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::keyfile::write_atomic;
use crate::sig::{verify, SigAlgorithmId, SigError, SigKeyPair, SignatureValue};
use crate::transport::tlv::{decode_list, encode_list, Fields, TlvError};

pub const MAX_CHAIN_LEN: usize = 8;
const ARMOR_HEADER: &str = "-----QSH CERT-----";
const ARMOR_FOOTER: &str = "-----END-----";

mod field {
    pub const SUBJECT: u8 = 0x01;
    pub const ISSUER: u8 = 0x02;
    pub const SERIAL: u8 = 0x03;
    pub const NOT_BEFORE: u8 = 0x04;
    pub const NOT_AFTER: u8 = 0x05;
    pub const CLASSICAL_ALG: u8 = 0x06;
    pub const CLASSICAL_PUB: u8 = 0x07;
    pub const PQ_ALG: u8 = 0x08;
    pub const PQ_PUB: u8 = 0x09;
    pub const IS_CA: u8 = 0x0A;

    pub const CERT_BODY: u8 = 0x01;
    pub const CERT_CLASSICAL_SIG: u8 = 0x02;
    pub const CERT_PQ_SIG: u8 = 0x03;
}

#[derive(Debug, Error)]
pub enum CertError {
    #[error("validity window is empty (not_before {not_before} >= not_after {not_after})")]
    InvalidValidity { not_before: u64, not_after: u64 },
    #[error("self-signed certificate must be signed with the subject's own keys")]
    SelfSignedKeyMismatch,
    #[error("malformed certificate: {0}")]
    Malformed(String),
    #[error("chain length {0} outside 1..=8")]
    ChainLength(usize),
    #[error(transparent)]
    Sig(#[from] SigError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<TlvError> for CertError {
    fn from(e: TlvError) -> Self {
        CertError::Malformed(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PqKey {
    pub alg: SigAlgorithmId,
    pub public: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertificateBody {
    pub subject: String,
    pub issuer: String,
    pub serial: [u8; 8],
    pub not_before: u64,
    pub not_after: u64,
    pub classical_alg: SigAlgorithmId,
    pub classical_pub: Vec<u8>,
    pub pq: Option<PqKey>,
    pub is_ca: bool,
}

impl CertificateBody {
    pub fn is_self_issued(&self) -> bool {
        self.subject == self.issuer
    }

    /// Canonical TLV encoding; this is what signatures cover.
    pub fn encode(&self) -> Vec<u8> {
        let mut f = Fields::new()
            .with(field::SUBJECT, self.subject.as_bytes())
            .with(field::ISSUER, self.issuer.as_bytes())
            .with(field::SERIAL, self.serial)
            .with(field::NOT_BEFORE, self.not_before.to_be_bytes())
            .with(field::NOT_AFTER, self.not_after.to_be_bytes())
            .with(field::CLASSICAL_ALG, self.classical_alg.code().to_be_bytes())
            .with(field::CLASSICAL_PUB, self.classical_pub.clone())
            .with(field::IS_CA, [self.is_ca as u8]);
        if let Some(pq) = &self.pq {
            f.insert(field::PQ_ALG, pq.alg.code().to_be_bytes());
            f.insert(field::PQ_PUB, pq.public.clone());
        }
        f.encode()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CertError> {
        use field::*;
        let f = Fields::decode(bytes)?;
        f.only(&[SUBJECT, ISSUER, SERIAL, NOT_BEFORE, NOT_AFTER, CLASSICAL_ALG, CLASSICAL_PUB, PQ_ALG, PQ_PUB, IS_CA])?;
        let text = |id| {
            String::from_utf8(f.require(id)?.to_vec()).map_err(|_| CertError::Malformed(format!("field 0x{id:02x} is not UTF-8")))
        };
        let pq = match (f.get(PQ_ALG), f.get(PQ_PUB)) {
            (None, None) => None,
            (Some(_), Some(public)) => Some(PqKey {
                alg: SigAlgorithmId::from_code(f.require_u16(PQ_ALG)?)?,
                public: public.to_vec(),
            }),
            _ => return Err(CertError::Malformed("post-quantum key fields must appear together".into())),
        };
        let is_ca = match f.require_u8(IS_CA)? {
            0 => false,
            1 => true,
            _ => return Err(TlvError::BadValue(IS_CA).into()),
        };
        Ok(Self {
            subject: text(SUBJECT)?,
            issuer: text(ISSUER)?,
            serial: f.require_len(SERIAL, 8)?.try_into().unwrap(),
            not_before: f.require_u64(NOT_BEFORE)?,
            not_after: f.require_u64(NOT_AFTER)?,
            classical_alg: SigAlgorithmId::from_code(f.require_u16(CLASSICAL_ALG)?)?,
            classical_pub: f.require(CLASSICAL_PUB)?.to_vec(),
            pq,
            is_ca,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub body: CertificateBody,
    pub classical_sig: SignatureValue,
    pub pq_sig: Option<SignatureValue>,
}

fn encode_sig(sig: &SignatureValue) -> Vec<u8> {
    let mut out = sig.alg.code().to_be_bytes().to_vec();
    out.extend_from_slice(&sig.bytes);
    out
}

fn decode_sig(bytes: &[u8]) -> Result<SignatureValue, CertError> {
    if bytes.len() < 2 {
        return Err(CertError::Malformed("signature field too short".into()));
    }
    let alg = SigAlgorithmId::from_code(u16::from_be_bytes([bytes[0], bytes[1]]))?;
    Ok(SignatureValue { alg, bytes: bytes[2..].to_vec() })
}

impl Certificate {
    pub fn encode(&self) -> Vec<u8> {
        let mut f = Fields::new()
            .with(field::CERT_BODY, self.body.encode())
            .with(field::CERT_CLASSICAL_SIG, encode_sig(&self.classical_sig));
        if let Some(pq) = &self.pq_sig {
            f.insert(field::CERT_PQ_SIG, encode_sig(pq));
        }
        f.encode()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CertError> {
        let f = Fields::decode(bytes)?;
        f.only(&[field::CERT_BODY, field::CERT_CLASSICAL_SIG, field::CERT_PQ_SIG])?;
        Ok(Self {
            body: CertificateBody::decode(f.require(field::CERT_BODY)?)?,
            classical_sig: decode_sig(f.require(field::CERT_CLASSICAL_SIG)?)?,
            pq_sig: f.get(field::CERT_PQ_SIG).map(decode_sig).transpose()?,
        })
    }

    pub fn armor(&self) -> String {
        let hex = hex::encode(self.encode());
        let mut out = String::with_capacity(hex.len() + hex.len() / 64 + 40);
        out.push_str(ARMOR_HEADER);
        out.push('\n');
        for line in hex.as_bytes().chunks(64) {
            out.push_str(std::str::from_utf8(line).unwrap());
            out.push('\n');
        }
        out.push_str(ARMOR_FOOTER);
        out.push('\n');
        out
    }
}

/// Parses every armored certificate in `text`, in order.
pub fn dearmor_all(text: &str) -> Result<Vec<Certificate>, CertError> {
    let mut certs = Vec::new();
    let mut current: Option<String> = None;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        match (&mut current, line) {
            (None, "") => {}
            (None, ARMOR_HEADER) => current = Some(String::new()),
            (Some(hex), ARMOR_FOOTER) => {
                let bytes = hex::decode(&*hex).map_err(|e| CertError::Malformed(format!("line {}: {e}", n + 1)))?;
                certs.push(Certificate::decode(&bytes)?);
                current = None;
            }
            (Some(hex), l) => hex.push_str(l),
            (None, l) => return Err(CertError::Malformed(format!("line {}: unexpected {l:?}", n + 1))),
        }
    }
    if current.is_some() {
        return Err(CertError::Malformed("unterminated certificate block".into()));
    }
    Ok(certs)
}

pub fn read_certificate(path: &Path) -> Result<Certificate, CertError> {
    let mut certs = dearmor_all(&std::fs::read_to_string(path)?)?;
    match certs.len() {
        1 => Ok(certs.pop().unwrap()),
        n => Err(CertError::Malformed(format!("expected one certificate, found {n}"))),
    }
}

pub fn write_certificate(cert: &Certificate, path: &Path) -> Result<(), CertError> {
    Ok(write_atomic(path, cert.armor().as_bytes())?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertChain {
    certs: Vec<Certificate>,
}

impl CertChain {
    pub fn new(certs: Vec<Certificate>) -> Result<Self, CertError> {
        if certs.is_empty() || certs.len() > MAX_CHAIN_LEN {
            return Err(CertError::ChainLength(certs.len()));
        }
        Ok(Self { certs })
    }

    pub fn certs(&self) -> &[Certificate] {
        &self.certs
    }

    pub fn leaf(&self) -> &Certificate {
        &self.certs[0]
    }

    pub fn root(&self) -> &Certificate {
        self.certs.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.certs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Wire form: length-prefixed certificate encodings, leaf first.
    pub fn encode(&self) -> Vec<u8> {
        let encoded: Vec<Vec<u8>> = self.certs.iter().map(Certificate::encode).collect();
        encode_list(encoded.iter().map(Vec::as_slice))
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CertError> {
        let items = decode_list(bytes, 0)?;
        Self::new(items.into_iter().map(Certificate::decode).collect::<Result<_, _>>()?)
    }

    pub fn armor(&self) -> String {
        self.certs.iter().map(Certificate::armor).collect()
    }

    pub fn read(path: &Path) -> Result<Self, CertError> {
        Self::new(dearmor_all(&std::fs::read_to_string(path)?)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), CertError> {
        Ok(write_atomic(path, self.armor().as_bytes())?)
    }
}

/// Signs `body` with the issuer's classical key and, if given, its
/// post-quantum key. Stateful issuer keys advance.
pub fn issue(
    issuer_classical: &mut SigKeyPair,
    issuer_pq: Option<&mut SigKeyPair>,
    body: CertificateBody,
) -> Result<Certificate, CertError> {
    if body.not_before >= body.not_after {
        return Err(CertError::InvalidValidity { not_before: body.not_before, not_after: body.not_after });
    }
    if body.pq.as_ref().is_some_and(|pq| pq.public.len() != pq.alg.public_key_len())
        || body.classical_pub.len() != body.classical_alg.public_key_len()
    {
        return Err(CertError::Malformed("public key length does not match its algorithm".into()));
    }
    if body.is_self_issued() {
        let classical_ok = issuer_classical.alg() == body.classical_alg && issuer_classical.public_key() == body.classical_pub;
        let pq_ok = match (&issuer_pq, &body.pq) {
            (Some(k), Some(pq)) => k.alg() == pq.alg && k.public_key() == pq.public,
            (None, None) => true,
            _ => false,
        };
        if !classical_ok || !pq_ok {
            return Err(CertError::SelfSignedKeyMismatch);
        }
    }
    let encoded = body.encode();
    let classical_sig = issuer_classical.sign(&encoded)?;
    let pq_sig = issuer_pq.map(|k| k.sign(&encoded)).transpose()?;
    Ok(Certificate { body, classical_sig, pq_sig })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationPolicy {
    ClassicalOnly,
    PqOnly,
    HybridBoth,
}

impl ValidationPolicy {
    pub const ALL: [Self; 3] = [Self::ClassicalOnly, Self::PqOnly, Self::HybridBoth];

    pub fn name(self) -> &'static str {
        match self {
            Self::ClassicalOnly => "classical",
            Self::PqOnly => "pq",
            Self::HybridBoth => "hybrid",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    fn checks_classical(self) -> bool {
        matches!(self, Self::ClassicalOnly | Self::HybridBoth)
    }

    fn checks_pq(self) -> bool {
        matches!(self, Self::PqOnly | Self::HybridBoth)
    }
}

impl fmt::Display for ValidationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("chain length {0} outside 1..=8")]
    Length(usize),
    #[error("certificate {index}: issuer does not match the next subject")]
    NameMismatch { index: usize },
    #[error("certificate {index}: outside its validity window")]
    Expired { index: usize },
    #[error("certificate {index}: issues certificates but is not a CA")]
    NotCa { index: usize },
    #[error("certificate {index}: no post-quantum signature material")]
    MissingPqMaterial { index: usize },
    #[error("certificate {index}: classical signature invalid")]
    BadClassicalSig { index: usize },
    #[error("certificate {index}: post-quantum signature invalid")]
    BadPqSig { index: usize },
    #[error("certificate {index}: chain does not end at the trusted root")]
    UntrustedRoot { index: usize },
}

/// Walks the chain leaf to root. The trust anchor is compared first; then
/// each certificate gets name, time, CA-bit, classical and post-quantum
/// checks in that order, so the first failing index is reported.
pub fn validate_chain(
    chain: &CertChain,
    trust_root: &Certificate,
    policy: ValidationPolicy,
    now: u64,
) -> Result<(), ChainError> {
    let certs = chain.certs();
    if certs.is_empty() || certs.len() > MAX_CHAIN_LEN {
        return Err(ChainError::Length(certs.len()));
    }
    let last = certs.len() - 1;
    if certs[last].encode() != trust_root.encode() {
        return Err(ChainError::UntrustedRoot { index: last });
    }
    for (index, cert) in certs.iter().enumerate() {
        let issuer = certs.get(index + 1).unwrap_or(cert);
        if cert.body.issuer != issuer.body.subject {
            return Err(ChainError::NameMismatch { index });
        }
        if now < cert.body.not_before || now > cert.body.not_after {
            return Err(ChainError::Expired { index });
        }
        if index > 0 && !cert.body.is_ca {
            return Err(ChainError::NotCa { index });
        }
        let tbs = cert.body.encode();
        if policy.checks_classical()
            && !verify(issuer.body.classical_alg, &issuer.body.classical_pub, &tbs, &cert.classical_sig)
        {
            return Err(ChainError::BadClassicalSig { index });
        }
        if policy.checks_pq() {
            let (Some(pq_key), Some(pq_sig)) = (&issuer.body.pq, &cert.pq_sig) else {
                return Err(ChainError::MissingPqMaterial { index });
            };
            if !verify(pq_key.alg, &pq_key.public, &tbs, pq_sig) {
                return Err(ChainError::BadPqSig { index });
            }
        }
    }
    Ok(())
}
