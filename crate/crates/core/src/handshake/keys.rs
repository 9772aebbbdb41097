//! Session key schedule and the two encrypted messages.

use std::fmt;

use crate::kem::{KemAlgorithmId, SharedSecret};
use crate::primitives::{aead_decrypt, aead_encrypt, direction_nonce, kdf, AeadBox, Digest256, SymmetricKey, TAG_LEN};
use crate::transport::{Fields, Frame, MsgType, TlvError};

use super::messages::{auth_result, credential, sealed};
use super::{HandshakeError, HandshakeMode};

const SESSION_CONTEXT: &[u8] = b"qsh1-session";
const CLIENT_TO_SERVER: u8 = 0x00;
const SERVER_TO_CLIENT: u8 = 0x01;
const MAX_CREDENTIAL_FIELD: usize = 255;

pub const AUTH_OK_DETAIL: &str = "authenticated";
pub const AUTH_FAILED_DETAIL: &str = "authentication failed";

#[derive(Clone, PartialEq, Eq)]
pub struct SessionKeys {
    pub key: SymmetricKey,
    pub kem: KemAlgorithmId,
    pub mode: HandshakeMode,
}

impl fmt::Debug for SessionKeys {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SessionKeys").field("kem", &self.kem).field("mode", &self.mode).finish_non_exhaustive()
    }
}

/// key = kdf(ss, "qsh1-session" || running_hash, 32)
pub fn derive_session_keys(
    ss: &SharedSecret,
    running_hash: &Digest256,
    kem: KemAlgorithmId,
    mode: HandshakeMode,
) -> SessionKeys {
    let mut context = SESSION_CONTEXT.to_vec();
    context.extend_from_slice(running_hash.as_bytes());
    let bytes = kdf(ss.as_bytes(), &context, 32).expect("32 is a valid kdf length");
    SessionKeys { key: SymmetricKey::from_slice(&bytes).expect("32 bytes"), kem, mode }
}

#[derive(Clone, PartialEq, Eq)]
pub struct Credential {
    user_id: String,
    password: String,
}

impl Credential {
    pub fn new(user_id: &str, password: &str) -> Result<Self, HandshakeError> {
        let ok = |s: &str| !s.is_empty() && s.len() <= MAX_CREDENTIAL_FIELD;
        if !ok(user_id) || !ok(password) {
            return Err(HandshakeError::Malformed("user id and password must be 1-255 bytes".into()));
        }
        Ok(Self { user_id: user_id.into(), password: password.into() })
    }

    pub fn user_id(&self) -> &str {
        &self.user_id
    }

    pub fn password(&self) -> &str {
        &self.password
    }

    fn encode(&self) -> Vec<u8> {
        Fields::new()
            .with(credential::USER_ID, self.user_id.as_bytes())
            .with(credential::PASSWORD, self.password.as_bytes())
            .encode()
    }

    fn decode(bytes: &[u8]) -> Result<Self, HandshakeError> {
        let f = Fields::decode(bytes)?;
        f.only(&[credential::USER_ID, credential::PASSWORD])?;
        let text = |id| String::from_utf8(f.require(id)?.to_vec()).map_err(|_| HandshakeError::from(TlvError::BadValue(id)));
        Self::new(&text(credential::USER_ID)?, &text(credential::PASSWORD)?)
    }
}

impl fmt::Debug for Credential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Credential").field("user_id", &self.user_id).field("password", &"<redacted>").finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthResult {
    pub success: bool,
    pub detail: String,
}

impl AuthResult {
    /// Unknown user and wrong password produce the same value.
    pub fn from_verdict(success: bool) -> Self {
        let detail = if success { AUTH_OK_DETAIL } else { AUTH_FAILED_DETAIL };
        Self { success, detail: detail.into() }
    }

    fn encode(&self) -> Vec<u8> {
        Fields::new()
            .with(auth_result::SUCCESS, [self.success as u8])
            .with(auth_result::DETAIL, self.detail.as_bytes())
            .encode()
    }

    fn decode(bytes: &[u8]) -> Result<Self, HandshakeError> {
        let f = Fields::decode(bytes)?;
        f.only(&[auth_result::SUCCESS, auth_result::DETAIL])?;
        let success = match f.require_u8(auth_result::SUCCESS)? {
            0 => false,
            1 => true,
            _ => return Err(TlvError::BadValue(auth_result::SUCCESS).into()),
        };
        let detail = String::from_utf8(f.require(auth_result::DETAIL)?.to_vec())
            .map_err(|_| TlvError::BadValue(auth_result::DETAIL))?;
        Ok(Self { success, detail })
    }
}

fn seal(msg_type: MsgType, keys: &SessionKeys, direction: u8, plaintext: &[u8], ad: &Digest256) -> Frame {
    let b = aead_encrypt(&keys.key, direction_nonce(direction), plaintext, ad.as_bytes());
    Frame::new(msg_type, Fields::new().with(sealed::CIPHERTEXT, b.ciphertext).with(sealed::TAG, b.tag))
}

fn open(f: &Fields, keys: &SessionKeys, direction: u8, ad: &Digest256) -> Result<Vec<u8>, HandshakeError> {
    f.only(&[sealed::CIPHERTEXT, sealed::TAG])?;
    let sealed_box = AeadBox {
        nonce: direction_nonce(direction),
        ciphertext: f.require(sealed::CIPHERTEXT)?.to_vec(),
        tag: f.require_len(sealed::TAG, TAG_LEN)?.try_into().unwrap(),
    };
    aead_decrypt(&keys.key, &sealed_box, ad.as_bytes()).map_err(|_| HandshakeError::AeadFailure)
}

/// EncryptedCredentials frame; `running_hash` is the transcript hash at the
/// key-schedule point.
pub fn seal_credentials(cred: &Credential, keys: &SessionKeys, running_hash: &Digest256) -> Frame {
    seal(MsgType::EncryptedCredentials, keys, CLIENT_TO_SERVER, &cred.encode(), running_hash)
}

pub fn open_credentials(f: &Fields, keys: &SessionKeys, running_hash: &Digest256) -> Result<Credential, HandshakeError> {
    Credential::decode(&open(f, keys, CLIENT_TO_SERVER, running_hash)?)
}

/// AuthResult frame; `running_hash` includes the EncryptedCredentials frame.
pub fn seal_auth_result(result: &AuthResult, keys: &SessionKeys, running_hash: &Digest256) -> Frame {
    seal(MsgType::AuthResult, keys, SERVER_TO_CLIENT, &result.encode(), running_hash)
}

pub fn open_auth_result(f: &Fields, keys: &SessionKeys, running_hash: &Digest256) -> Result<AuthResult, HandshakeError> {
    AuthResult::decode(&open(f, keys, SERVER_TO_CLIENT, running_hash)?)
}
