use std::fmt;

use hkdf::Hkdf;
use sha2::{Digest, Sha256};

use super::PrimitiveError;

/// Largest output `kdf` will produce: 255 blocks of 32 bytes.
pub const KDF_MAX_OUTPUT: usize = 255 * 32;

/// A SHA-256 digest.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Digest256([u8; 32]);

impl Digest256 {
    pub const LEN: usize = 32;

    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Self> {
        bytes.try_into().ok().map(Self)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl AsRef<[u8]> for Digest256 {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for Digest256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest256({})", self.to_hex())
    }
}

impl fmt::Display for Digest256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

pub fn hash(data: &[u8]) -> Digest256 {
    Digest256(Sha256::digest(data).into())
}

/// Incremental hashing, for inputs assembled from several pieces.
#[derive(Clone, Default)]
pub struct Hasher(Sha256);

impl Hasher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, data: &[u8]) -> &mut Self {
        self.0.update(data);
        self
    }

    /// Digest of everything fed so far. The hasher stays usable.
    pub fn current(&self) -> Digest256 {
        Digest256(self.0.clone().finalize().into())
    }

    pub fn finish(self) -> Digest256 {
        Digest256(self.0.finalize().into())
    }
}

/// Extract-then-expand key derivation (HKDF-SHA256 with an empty salt).
pub fn kdf(secret: &[u8], context: &[u8], out_len: usize) -> Result<Vec<u8>, PrimitiveError> {
    if out_len == 0 || out_len > KDF_MAX_OUTPUT {
        return Err(PrimitiveError::KdfLength(out_len));
    }
    let mut out = vec![0u8; out_len];
    Hkdf::<Sha256>::new(None, secret)
        .expand(context, &mut out)
        .map_err(|_| PrimitiveError::KdfLength(out_len))?;
    Ok(out)
}
