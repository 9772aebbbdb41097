use std::fmt;

use hmac::{Hmac, Mac};
use sha2::Sha256;

use super::{ct_eq, kdf, Hasher, PrimitiveError};

pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 32;

/// A 256-bit symmetric key.
#[derive(Clone, PartialEq, Eq)]
pub struct SymmetricKey([u8; 32]);

impl SymmetricKey {
    pub const BITS: usize = 256;

    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, PrimitiveError> {
        bytes
            .try_into()
            .map(Self)
            .map_err(|_| PrimitiveError::KeyLength(bytes.len()))
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn bits(&self) -> usize {
        self.0.len() * 8
    }
}

impl fmt::Debug for SymmetricKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SymmetricKey(<redacted>)")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AeadBox {
    pub nonce: [u8; NONCE_LEN],
    pub ciphertext: Vec<u8>,
    pub tag: [u8; TAG_LEN],
}

/// The all-zero nonce with the final byte set to the message direction
/// (0x00 client to server, 0x01 server to client).
pub fn direction_nonce(direction: u8) -> [u8; NONCE_LEN] {
    let mut nonce = [0u8; NONCE_LEN];
    nonce[NONCE_LEN - 1] = direction;
    nonce
}

struct SubKeys {
    stream: [u8; 32],
    mac: [u8; 32],
}

fn sub_keys(key: &SymmetricKey, nonce: &[u8; NONCE_LEN]) -> SubKeys {
    let mut context = b"qsh-aead-v1".to_vec();
    context.extend_from_slice(nonce);
    let okm = kdf(key.as_bytes(), &context, 64).expect("64 is a valid kdf length");
    let mut stream = [0u8; 32];
    let mut mac = [0u8; 32];
    stream.copy_from_slice(&okm[..32]);
    mac.copy_from_slice(&okm[32..]);
    SubKeys { stream, mac }
}

// Keystream block i = SHA-256(stream_key || i as u64 BE).
fn apply_keystream(stream_key: &[u8; 32], data: &mut [u8]) {
    for (counter, chunk) in data.chunks_mut(32).enumerate() {
        let mut h = Hasher::new();
        h.update(stream_key).update(&(counter as u64).to_be_bytes());
        let block = h.finish();
        for (b, k) in chunk.iter_mut().zip(block.as_bytes()) {
            *b ^= k;
        }
    }
}

fn compute_tag(mac_key: &[u8; 32], ad: &[u8], ciphertext: &[u8]) -> [u8; TAG_LEN] {
    let mut mac = Hmac::<Sha256>::new_from_slice(mac_key).expect("hmac takes any key length");
    mac.update(&(ad.len() as u64).to_be_bytes());
    mac.update(ad);
    mac.update(ciphertext);
    mac.finalize().into_bytes().into()
}

pub fn aead_encrypt(key: &SymmetricKey, nonce: [u8; NONCE_LEN], plaintext: &[u8], ad: &[u8]) -> AeadBox {
    let keys = sub_keys(key, &nonce);
    let mut ciphertext = plaintext.to_vec();
    apply_keystream(&keys.stream, &mut ciphertext);
    let tag = compute_tag(&keys.mac, ad, &ciphertext);
    AeadBox { nonce, ciphertext, tag }
}

/// Verifies the tag before touching the ciphertext; on failure nothing of
/// the plaintext is released.
pub fn aead_decrypt(key: &SymmetricKey, sealed: &AeadBox, ad: &[u8]) -> Result<Vec<u8>, PrimitiveError> {
    let keys = sub_keys(key, &sealed.nonce);
    let expected = compute_tag(&keys.mac, ad, &sealed.ciphertext);
    if !ct_eq(&expected, &sealed.tag) {
        return Err(PrimitiveError::AuthenticationFailure);
    }
    let mut plaintext = sealed.ciphertext.clone();
    apply_keystream(&keys.stream, &mut plaintext);
    Ok(plaintext)
}
