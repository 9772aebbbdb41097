//! Cryptographic building blocks shared by every other module: SHA-256,
//! an HKDF-style key derivation function, a hash-based encrypt-then-MAC
//! AEAD, arbitrary precision modular arithmetic and randomness.

mod aead;
mod bignat;
mod hash;
mod rng;

pub use aead::{aead_decrypt, aead_encrypt, direction_nonce, AeadBox, SymmetricKey, NONCE_LEN, TAG_LEN};
pub use bignat::{miller_rabin, modpow, BigNat, FixedBasePow};
pub use hash::{hash, kdf, Digest256, Hasher, KDF_MAX_OUTPUT};
pub use rng::{random_bytes, QshRng};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PrimitiveError {
    #[error("kdf output length {0} out of range 1..=8160")]
    KdfLength(usize),
    #[error("authentication failure")]
    AuthenticationFailure,
    #[error("modulus must be at least 2")]
    ModulusTooSmall,
    #[error("entropy source unavailable: {0}")]
    EntropyUnavailable(String),
    #[error("invalid key length {0}, expected 32")]
    KeyLength(usize),
}

/// Compares two byte strings without an early exit on the first difference.
///
/// Length is not secret; slices of unequal length compare unequal
/// immediately.
pub fn ct_eq(a: &[u8], b: &[u8]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let diff = a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y));
    // black_box keeps the optimizer from turning the fold back into a
    // short-circuiting comparison.
    std::hint::black_box(diff) == 0
}
