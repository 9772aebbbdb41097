//! Key encapsulation: the keypair / encapsulate / decapsulate interface,
//! its two built-in backends (finite-field DH and a module-LWE scheme) and
//! a runtime registry keyed by 16-bit algorithm code.
//!
//! Every key and ciphertext length comes from the backend's
//! [`KemDescriptor`]; nothing downstream assumes a size.

mod dh;
mod lwe;
mod profile;
pub mod ring;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::primitives::{PrimitiveError, QshRng};

pub use dh::{DhGroup, DhKem};
pub use lwe::LweKem;
pub use profile::{security_profile, SecurityProfile, SECURITY_PROFILES};
pub use ring::{Ring, RingPoly};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KemError {
    #[error("unknown kem algorithm code 0x{0:04x}")]
    UnknownAlgorithm(u16),
    #[error("unknown kem algorithm name {0:?}")]
    UnknownName(String),
    #[error("kem algorithm 0x{0:04x} already registered")]
    DuplicateAlgorithm(u16),
    #[error("{what} length {got}, expected {expected}")]
    BadLength { what: &'static str, expected: usize, got: usize },
    #[error("coefficient out of range")]
    CoefficientOutOfRange,
    #[error("public value outside [2, p-2]")]
    InvalidPublicValue,
    #[error("ciphertext is for algorithm 0x{got:04x}, expected 0x{expected:04x}")]
    AlgorithmMismatch { expected: u16, got: u16 },
    #[error(transparent)]
    Primitive(#[from] PrimitiveError),
}

/// 16-bit wire code identifying a KEM. Names for the built-in codes are
/// fixed; other codes get their name from whatever backend registers them.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KemAlgorithmId(pub u16);

impl KemAlgorithmId {
    pub const DH_2048: Self = Self(0x0001);
    pub const LWE_512: Self = Self(0x0101);
    pub const LWE_768: Self = Self(0x0102);
    pub const LWE_1024: Self = Self(0x0103);

    pub const BUILTIN: [Self; 4] = [Self::DH_2048, Self::LWE_512, Self::LWE_768, Self::LWE_1024];

    pub fn code(self) -> u16 {
        self.0
    }

    pub fn builtin_name(self) -> Option<&'static str> {
        match self {
            Self::DH_2048 => Some("dh-2048"),
            Self::LWE_512 => Some("lwe-512"),
            Self::LWE_768 => Some("lwe-768"),
            Self::LWE_1024 => Some("lwe-1024"),
            _ => None,
        }
    }

    pub fn from_builtin_name(name: &str) -> Result<Self, KemError> {
        Self::BUILTIN
            .into_iter()
            .find(|id| id.builtin_name() == Some(name))
            .ok_or_else(|| KemError::UnknownName(name.to_string()))
    }

    pub fn from_builtin_code(code: u16) -> Result<Self, KemError> {
        let id = Self(code);
        id.builtin_name().map(|_| id).ok_or(KemError::UnknownAlgorithm(code))
    }
}

impl fmt::Debug for KemAlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.builtin_name() {
            Some(name) => write!(f, "KemAlgorithmId({name})"),
            None => write!(f, "KemAlgorithmId(0x{:04x})", self.0),
        }
    }
}

impl fmt::Display for KemAlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.builtin_name() {
            Some(name) => f.write_str(name),
            None => write!(f, "0x{:04x}", self.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KemDescriptor {
    pub id: KemAlgorithmId,
    pub name: String,
    pub public_key_len: usize,
    pub secret_key_len: usize,
    pub ciphertext_len: usize,
    pub quantum_safe: bool,
}

#[derive(Clone, PartialEq, Eq)]
pub struct KemKeyPair {
    pub alg: KemAlgorithmId,
    pub public_key: Vec<u8>,
    pub secret_key: Vec<u8>,
}

impl fmt::Debug for KemKeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KemKeyPair")
            .field("alg", &self.alg)
            .field("public_key_len", &self.public_key.len())
            .field("secret_key", &"<redacted>")
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KemCiphertext {
    pub alg: KemAlgorithmId,
    pub bytes: Vec<u8>,
}

#[derive(Clone, PartialEq, Eq)]
pub struct SharedSecret([u8; 32]);

impl SharedSecret {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, KemError> {
        bytes.try_into().map(Self).map_err(|_| KemError::BadLength {
            what: "shared secret",
            expected: 32,
            got: bytes.len(),
        })
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Debug for SharedSecret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SharedSecret(<redacted>)")
    }
}

/// A KEM backend. Implementations may assume inputs already have the
/// lengths declared in their descriptor; [`KemRegistry`] checks them.
pub trait Kem: Send + Sync {
    fn descriptor(&self) -> &KemDescriptor;
    fn keypair(&self, rng: &mut QshRng) -> Result<KemKeyPair, KemError>;
    fn encaps(&self, public_key: &[u8], rng: &mut QshRng) -> Result<(KemCiphertext, SharedSecret), KemError>;
    fn decaps(&self, secret_key: &[u8], ct: &KemCiphertext) -> Result<SharedSecret, KemError>;
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), KemError> {
    if expected == got {
        Ok(())
    } else {
        Err(KemError::BadLength { what, expected, got })
    }
}

#[derive(Clone, Default)]
pub struct KemRegistry {
    backends: BTreeMap<u16, Arc<dyn Kem>>,
}

impl fmt::Debug for KemRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(self.backends.values().map(|b| &b.descriptor().name))
            .finish()
    }
}

impl KemRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// dh-2048 plus the three LWE parameter sets.
    pub fn with_defaults() -> Self {
        let mut reg = Self::empty();
        reg.register(Arc::new(DhKem::ffdhe2048())).expect("fresh registry");
        for k in [2, 3, 4] {
            reg.register(Arc::new(LweKem::new(k))).expect("fresh registry");
        }
        reg
    }

    pub fn register(&mut self, backend: Arc<dyn Kem>) -> Result<(), KemError> {
        let code = backend.descriptor().id.code();
        if self.backends.contains_key(&code) {
            return Err(KemError::DuplicateAlgorithm(code));
        }
        self.backends.insert(code, backend);
        Ok(())
    }

    pub fn get(&self, alg: KemAlgorithmId) -> Result<&Arc<dyn Kem>, KemError> {
        self.backends.get(&alg.code()).ok_or(KemError::UnknownAlgorithm(alg.code()))
    }

    pub fn descriptor(&self, alg: KemAlgorithmId) -> Result<&KemDescriptor, KemError> {
        Ok(self.get(alg)?.descriptor())
    }

    /// Resolves a wire code; unregistered codes are rejected.
    pub fn decode_id(&self, code: u16) -> Result<KemAlgorithmId, KemError> {
        self.get(KemAlgorithmId(code)).map(|b| b.descriptor().id)
    }

    pub fn by_name(&self, name: &str) -> Result<KemAlgorithmId, KemError> {
        self.backends
            .values()
            .map(|b| b.descriptor())
            .find(|d| d.name == name)
            .map(|d| d.id)
            .ok_or_else(|| KemError::UnknownName(name.to_string()))
    }

    pub fn name(&self, alg: KemAlgorithmId) -> String {
        self.descriptor(alg).map(|d| d.name.clone()).unwrap_or_else(|_| alg.to_string())
    }

    pub fn algorithms(&self) -> Vec<KemAlgorithmId> {
        self.backends.values().map(|b| b.descriptor().id).collect()
    }

    pub fn keypair(&self, alg: KemAlgorithmId, rng: &mut QshRng) -> Result<KemKeyPair, KemError> {
        let backend = self.get(alg)?;
        let kp = backend.keypair(rng)?;
        let d = backend.descriptor();
        check_len("public key", d.public_key_len, kp.public_key.len())?;
        check_len("secret key", d.secret_key_len, kp.secret_key.len())?;
        Ok(kp)
    }

    pub fn encaps(
        &self,
        alg: KemAlgorithmId,
        public_key: &[u8],
        rng: &mut QshRng,
    ) -> Result<(KemCiphertext, SharedSecret), KemError> {
        let backend = self.get(alg)?;
        let d = backend.descriptor();
        check_len("public key", d.public_key_len, public_key.len())?;
        let (ct, ss) = backend.encaps(public_key, rng)?;
        check_len("ciphertext", d.ciphertext_len, ct.bytes.len())?;
        Ok((ct, ss))
    }

    pub fn decaps(&self, alg: KemAlgorithmId, secret_key: &[u8], ct: &KemCiphertext) -> Result<SharedSecret, KemError> {
        let backend = self.get(alg)?;
        let d = backend.descriptor();
        if ct.alg != alg {
            return Err(KemError::AlgorithmMismatch { expected: alg.code(), got: ct.alg.code() });
        }
        check_len("secret key", d.secret_key_len, secret_key.len())?;
        check_len("ciphertext", d.ciphertext_len, ct.bytes.len())?;
        backend.decaps(secret_key, ct)
    }
}

/// Test backend with arbitrary key sizes and no security whatsoever: the
/// shared secret is a hash of the public key and a random nonce carried in
/// the clear. Exists to prove that nothing in the stack depends on the
/// built-in sizes.
pub struct MockKem {
    descriptor: KemDescriptor,
}

impl MockKem {
    pub fn new(id: KemAlgorithmId, name: &str, public_key_len: usize, ciphertext_len: usize) -> Self {
        Self {
            descriptor: KemDescriptor {
                id,
                name: name.to_string(),
                public_key_len,
                secret_key_len: public_key_len,
                ciphertext_len,
                quantum_safe: false,
            },
        }
    }

    fn secret(pk: &[u8], ct: &[u8]) -> SharedSecret {
        let mut input = pk.to_vec();
        input.extend_from_slice(ct);
        SharedSecret(*crate::primitives::hash(&input).as_bytes())
    }
}

impl Kem for MockKem {
    fn descriptor(&self) -> &KemDescriptor {
        &self.descriptor
    }

    fn keypair(&self, rng: &mut QshRng) -> Result<KemKeyPair, KemError> {
        let pk = rng.random_bytes(self.descriptor.public_key_len);
        Ok(KemKeyPair { alg: self.descriptor.id, public_key: pk.clone(), secret_key: pk })
    }

    fn encaps(&self, public_key: &[u8], rng: &mut QshRng) -> Result<(KemCiphertext, SharedSecret), KemError> {
        let ct = rng.random_bytes(self.descriptor.ciphertext_len);
        let ss = Self::secret(public_key, &ct);
        Ok((KemCiphertext { alg: self.descriptor.id, bytes: ct }, ss))
    }

    fn decaps(&self, secret_key: &[u8], ct: &KemCiphertext) -> Result<SharedSecret, KemError> {
        Ok(Self::secret(secret_key, &ct.bytes))
    }
}
