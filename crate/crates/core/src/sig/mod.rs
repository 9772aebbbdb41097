//! Signature schemes behind one interface: textbook RSA-2048 with a
//! full-domain hash (classical, quantum-vulnerable) and a stateful
//! Merkle-tree scheme over Lamport one-time keys (hash-based,
//! quantum-safe).

mod merkle;
mod rsa;

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::keyfile::{KeyFile, KeyFileError};
use crate::primitives::{PrimitiveError, QshRng};

pub use merkle::{MERKLE_HEIGHT, MERKLE_LEAVES};

#[derive(Debug, Error)]
pub enum SigError {
    #[error("unknown signature algorithm code 0x{0:04x}")]
    UnknownAlgorithm(u16),
    #[error("unknown signature algorithm name {0:?}")]
    UnknownName(String),
    #[error("signing key exhausted after {0} signatures; rotate the key")]
    KeyExhausted(u64),
    #[error("rsa prime generation exceeded {0} candidates")]
    PrimeBudgetExceeded(u32),
    #[error("malformed {0}")]
    Malformed(&'static str),
    #[error(transparent)]
    KeyFile(#[from] KeyFileError),
    #[error(transparent)]
    Primitive(#[from] PrimitiveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SigAlgorithmId {
    RsaFdh2048,
    MerkleLamportSha256,
}

impl SigAlgorithmId {
    pub const ALL: [Self; 2] = [Self::RsaFdh2048, Self::MerkleLamportSha256];

    pub fn code(self) -> u16 {
        match self {
            Self::RsaFdh2048 => 0x0201,
            Self::MerkleLamportSha256 => 0x0301,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::RsaFdh2048 => "rsa-2048-fdh",
            Self::MerkleLamportSha256 => "merkle-lamport-sha256",
        }
    }

    pub fn from_code(code: u16) -> Result<Self, SigError> {
        Self::ALL.into_iter().find(|a| a.code() == code).ok_or(SigError::UnknownAlgorithm(code))
    }

    pub fn from_name(name: &str) -> Result<Self, SigError> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == name)
            .ok_or_else(|| SigError::UnknownName(name.to_string()))
    }

    pub fn quantum_safe(self) -> bool {
        matches!(self, Self::MerkleLamportSha256)
    }

    pub fn public_key_len(self) -> usize {
        match self {
            Self::RsaFdh2048 => rsa::PUBLIC_KEY_LEN,
            Self::MerkleLamportSha256 => merkle::PUBLIC_KEY_LEN,
        }
    }

    pub fn signature_len(self) -> usize {
        match self {
            Self::RsaFdh2048 => rsa::SIGNATURE_LEN,
            Self::MerkleLamportSha256 => merkle::SIGNATURE_LEN,
        }
    }
}

impl fmt::Display for SigAlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignatureValue {
    pub alg: SigAlgorithmId,
    pub bytes: Vec<u8>,
}

enum Signer {
    Rsa(rsa::RsaSecret),
    Merkle(Arc<merkle::MerkleSecret>),
}

/// A signing key. For the Merkle scheme the next leaf index only moves
/// forward; there is no way to rewind it through this type.
pub struct SigKeyPair {
    alg: SigAlgorithmId,
    public_key: Vec<u8>,
    secret_key: Vec<u8>,
    next_index: u64,
    signer: Signer,
}

impl fmt::Debug for SigKeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SigKeyPair")
            .field("alg", &self.alg)
            .field("public_key_len", &self.public_key.len())
            .field("next_index", &self.next_index)
            .finish_non_exhaustive()
    }
}

pub fn sig_keypair(alg: SigAlgorithmId, rng: &mut QshRng) -> Result<SigKeyPair, SigError> {
    SigKeyPair::generate(alg, rng)
}

pub fn verify(alg: SigAlgorithmId, public_key: &[u8], message: &[u8], sig: &SignatureValue) -> bool {
    if sig.alg != alg || sig.bytes.len() != alg.signature_len() || public_key.len() != alg.public_key_len() {
        return false;
    }
    match alg {
        SigAlgorithmId::RsaFdh2048 => rsa::verify(public_key, message, &sig.bytes),
        SigAlgorithmId::MerkleLamportSha256 => merkle::verify(public_key, message, &sig.bytes),
    }
}

impl SigKeyPair {
    pub fn generate(alg: SigAlgorithmId, rng: &mut QshRng) -> Result<Self, SigError> {
        match alg {
            SigAlgorithmId::RsaFdh2048 => {
                let secret = rsa::RsaSecret::generate(rng)?;
                Ok(Self::from_rsa(secret))
            }
            SigAlgorithmId::MerkleLamportSha256 => {
                let seed: [u8; 32] = rng.random_array();
                Ok(Self::from_merkle(merkle::MerkleSecret::from_seed(seed), 0))
            }
        }
    }

    fn from_rsa(secret: rsa::RsaSecret) -> Self {
        Self {
            alg: SigAlgorithmId::RsaFdh2048,
            public_key: secret.public_key(),
            secret_key: secret.encode(),
            next_index: 0,
            signer: Signer::Rsa(secret),
        }
    }

    fn from_merkle(secret: merkle::MerkleSecret, next_index: u64) -> Self {
        Self {
            alg: SigAlgorithmId::MerkleLamportSha256,
            public_key: secret.root().to_vec(),
            secret_key: secret.seed().to_vec(),
            next_index,
            signer: Signer::Merkle(Arc::new(secret)),
        }
    }

    pub fn alg(&self) -> SigAlgorithmId {
        self.alg
    }

    pub fn public_key(&self) -> &[u8] {
        &self.public_key
    }

    pub fn secret_key(&self) -> &[u8] {
        &self.secret_key
    }

    /// Index of the next one-time key; 0 for RSA.
    pub fn next_index(&self) -> u64 {
        self.next_index
    }

    /// Signatures left before the key is exhausted, or `None` for schemes
    /// without a limit.
    pub fn remaining(&self) -> Option<u64> {
        match self.alg {
            SigAlgorithmId::RsaFdh2048 => None,
            SigAlgorithmId::MerkleLamportSha256 => Some(MERKLE_LEAVES - self.next_index),
        }
    }

    pub fn sign(&mut self, message: &[u8]) -> Result<SignatureValue, SigError> {
        let bytes = match &self.signer {
            Signer::Rsa(secret) => secret.sign(message),
            Signer::Merkle(secret) => {
                if self.next_index >= MERKLE_LEAVES {
                    return Err(SigError::KeyExhausted(MERKLE_LEAVES));
                }
                let sig = secret.sign(self.next_index as u32, message);
                self.next_index += 1;
                sig
            }
        };
        Ok(SignatureValue { alg: self.alg, bytes })
    }

    pub fn public_key_file(&self) -> KeyFile {
        KeyFile::new(self.alg.code(), self.public_key.clone())
    }

    pub fn secret_key_file(&self) -> KeyFile {
        let mut kf = KeyFile::new(self.alg.code(), self.secret_key.clone());
        kf.trailer = self.next_index.to_be_bytes().to_vec();
        kf
    }

    /// Rebuilds a key pair from a secret-key file (including its state
    /// index).
    pub fn from_secret_key_file(kf: &KeyFile) -> Result<Self, SigError> {
        let alg = SigAlgorithmId::from_code(kf.alg_code)?;
        let index: [u8; 8] = kf.trailer.as_slice().try_into().map_err(|_| SigError::Malformed("key state index"))?;
        let next_index = u64::from_be_bytes(index);
        match alg {
            SigAlgorithmId::RsaFdh2048 => Ok(Self::from_rsa(rsa::RsaSecret::decode(&kf.key)?)),
            SigAlgorithmId::MerkleLamportSha256 => {
                let seed: [u8; 32] = kf.key.as_slice().try_into().map_err(|_| SigError::Malformed("merkle seed"))?;
                if next_index > MERKLE_LEAVES {
                    return Err(SigError::Malformed("key state index"));
                }
                Ok(Self::from_merkle(merkle::MerkleSecret::from_seed(seed), next_index))
            }
        }
    }

    pub fn read_secret(path: &Path) -> Result<Self, SigError> {
        Self::from_secret_key_file(&KeyFile::read(path)?)
    }

    /// Atomically rewrites the secret-key file; call after every signature
    /// from a stateful key.
    pub fn write_secret(&self, path: &Path) -> Result<(), SigError> {
        Ok(self.secret_key_file().write(path)?)
    }

    pub fn write_public(&self, path: &Path) -> Result<(), SigError> {
        Ok(self.public_key_file().write(path)?)
    }
}

/// Reads a public-key file written by [`SigKeyPair::write_public`].
pub fn read_public_key(path: &Path) -> Result<(SigAlgorithmId, Vec<u8>), SigError> {
    let kf = KeyFile::read(path)?;
    let alg = SigAlgorithmId::from_code(kf.alg_code)?;
    if kf.key.len() != alg.public_key_len() || !kf.trailer.is_empty() {
        return Err(SigError::Malformed("public key file"));
    }
    Ok((alg, kf.key))
}
