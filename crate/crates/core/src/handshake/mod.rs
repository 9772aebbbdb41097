//! Client and server handshake state machines for the two flows: DH-style
//! (server publishes a key share, client answers with its own) and
//! KEM-style (client publishes an ephemeral public key, server
//! encapsulates). Both end with credentials sent under the session key.

mod client;
mod driver;
mod keys;
pub mod messages;
mod server;

use std::fmt;

use thiserror::Error;

use crate::certs::ChainError;
use crate::kem::{KemAlgorithmId, KemError};
use crate::primitives::{Digest256, Hasher};
use crate::sig::{SigAlgorithmId, SigError};
use crate::transport::{alert, TransportError};

pub use client::{ClientConfig, ClientHandshake};
pub use driver::{run_client, serve_connection, ClientReport, Server, ServerHandle, ServerReport, SessionRecord};
pub use keys::{
    derive_session_keys, open_auth_result, open_credentials, seal_auth_result, seal_credentials, AuthResult, Credential,
    SessionKeys, AUTH_FAILED_DETAIL, AUTH_OK_DETAIL,
};
pub use server::{ServerConfig, ServerHandshake, SigningKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HandshakeMode {
    /// Server sends a public key share; client answers with its own share.
    Dh,
    /// Client sends an ephemeral KEM public key; server encapsulates.
    Kem,
}

impl HandshakeMode {
    pub const ALL: [Self; 2] = [Self::Dh, Self::Kem];

    pub fn code(self) -> u8 {
        match self {
            Self::Dh => 0x01,
            Self::Kem => 0x02,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Dh => "dh",
            Self::Kem => "kem",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    /// Default flow for an algorithm: dh-* runs the DH flow, everything
    /// else the KEM flow.
    pub fn for_algorithm_name(name: &str) -> Self {
        if name.starts_with("dh-") {
            Self::Dh
        } else {
            Self::Kem
        }
    }
}

impl fmt::Display for HandshakeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegotiationOffer {
    kem_prefs: Vec<KemAlgorithmId>,
    sig_prefs: Vec<SigAlgorithmId>,
    modes: Vec<HandshakeMode>,
    client_nonce: [u8; 32],
}

impl NegotiationOffer {
    pub fn new(
        kem_prefs: Vec<KemAlgorithmId>,
        sig_prefs: Vec<SigAlgorithmId>,
        modes: Vec<HandshakeMode>,
        client_nonce: [u8; 32],
    ) -> Result<Self, HandshakeError> {
        fn unique<T: PartialEq>(v: &[T]) -> bool {
            v.iter().enumerate().all(|(i, x)| !v[..i].contains(x))
        }
        if kem_prefs.is_empty() || sig_prefs.is_empty() || modes.is_empty() {
            return Err(HandshakeError::InvalidOffer("preference lists must be non-empty"));
        }
        if !unique(&kem_prefs) || !unique(&sig_prefs) || !unique(&modes) {
            return Err(HandshakeError::InvalidOffer("preference lists must not repeat entries"));
        }
        Ok(Self { kem_prefs, sig_prefs, modes, client_nonce })
    }

    pub fn kem_prefs(&self) -> &[KemAlgorithmId] {
        &self.kem_prefs
    }

    pub fn sig_prefs(&self) -> &[SigAlgorithmId] {
        &self.sig_prefs
    }

    pub fn modes(&self) -> &[HandshakeMode] {
        &self.modes
    }

    pub fn client_nonce(&self) -> &[u8; 32] {
        &self.client_nonce
    }
}

/// First client preference that the server also allows.
pub fn negotiate<T: PartialEq + Copy>(client_prefs: &[T], server_allowed: &[T]) -> Option<T> {
    client_prefs.iter().copied().find(|c| server_allowed.contains(c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Negotiated {
    pub mode: HandshakeMode,
    pub kem: KemAlgorithmId,
    /// Transcript signature algorithm; `None` for unsigned handshakes.
    pub sig: Option<SigAlgorithmId>,
}

/// Append-only log of raw frames with a running hash over their
/// concatenation.
#[derive(Clone, Default)]
pub struct Transcript {
    frames: Vec<Vec<u8>>,
    hasher: Hasher,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, frame: &[u8]) {
        self.hasher.update(frame);
        self.frames.push(frame.to_vec());
    }

    pub fn running_hash(&self) -> Digest256 {
        self.hasher.current()
    }

    /// Hash of the transcript extended by `extra`, leaving it unchanged.
    pub fn hash_with(&self, extra: &[u8]) -> Digest256 {
        let mut h = self.hasher.clone();
        h.update(extra);
        h.finish()
    }

    pub fn frames(&self) -> &[Vec<u8>] {
        &self.frames
    }
}

impl fmt::Debug for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Transcript")
            .field("frames", &self.frames.len())
            .field("running_hash", &self.running_hash())
            .finish()
    }
}

#[derive(Debug, Error)]
pub enum HandshakeError {
    #[error("invalid offer: {0}")]
    InvalidOffer(&'static str),
    #[error("no mutually supported algorithm or mode")]
    NoMutualAlgorithm,
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unexpected {msg_type} in state {state}")]
    UnexpectedMessage { state: &'static str, msg_type: &'static str },
    #[error("certificate chain invalid: {0}")]
    ChainInvalid(ChainError),
    #[error("transcript signature invalid")]
    TranscriptSignatureInvalid,
    #[error("server did not sign the transcript")]
    SignatureMissing,
    #[error("decryption failed")]
    AeadFailure,
    #[error("peer sent alert 0x{0:02x} ({desc})", desc = alert::describe(*.0))]
    PeerAlert(u8),
    #[error("signing failed: {0}")]
    Signing(#[from] SigError),
    #[error("kem operation failed: {0}")]
    Kem(#[from] KemError),
    #[error("transport: {0}")]
    Transport(#[from] TransportError),
}

impl HandshakeError {
    /// Alert code to send when this error aborts a handshake locally.
    pub fn alert_code(&self) -> Option<u8> {
        match self {
            Self::NoMutualAlgorithm => Some(alert::NO_MUTUAL_ALGORITHM),
            Self::Malformed(_) | Self::UnexpectedMessage { .. } | Self::Kem(_) | Self::InvalidOffer(_) => {
                Some(alert::MALFORMED)
            }
            Self::ChainInvalid(_) | Self::TranscriptSignatureInvalid | Self::SignatureMissing | Self::Signing(_) => {
                Some(alert::AUTHENTICATION_FAILED)
            }
            Self::AeadFailure => Some(alert::DECRYPT_FAILED),
            Self::PeerAlert(_) | Self::Transport(_) => None,
        }
    }
}

impl From<crate::transport::TlvError> for HandshakeError {
    fn from(e: crate::transport::TlvError) -> Self {
        Self::Malformed(e.to_string())
    }
}

/// What a state machine wants done after consuming one frame.
#[derive(Debug)]
pub struct Output {
    /// Encoded frames to send, in order.
    pub send: Vec<Vec<u8>>,
    pub status: Status,
}

#[derive(Debug)]
pub enum Status {
    Continue,
    Complete(AuthResult),
    Failed(HandshakeError),
    /// Frame dropped without effect (an Alert after the handshake ended).
    Ignored,
}

impl Output {
    fn cont(send: Vec<Vec<u8>>) -> Self {
        Self { send, status: Status::Continue }
    }
}

#[cfg(test)]
mod tests;
