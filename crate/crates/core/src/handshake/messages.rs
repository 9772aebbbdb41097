//! Payload schemas. Field ids are part of the wire format.

use crate::certs::CertChain;
use crate::kem::KemAlgorithmId;
use crate::sig::SigAlgorithmId;
use crate::transport::{Fields, Frame, MsgType, TlvError};

use super::{HandshakeError, HandshakeMode};

pub mod client_hello {
    pub const MODES: u8 = 0x01;
    pub const KEM_PREFS: u8 = 0x02;
    pub const SIG_PREFS: u8 = 0x03;
    pub const NONCE: u8 = 0x04;
    pub const KEY_SHARE_ALG: u8 = 0x05;
    pub const KEY_SHARE: u8 = 0x06;
}

pub mod server_hello {
    pub const MODE: u8 = 0x01;
    pub const KEM: u8 = 0x02;
    pub const SIG: u8 = 0x03;
    pub const NONCE: u8 = 0x04;
    pub const KEY_MATERIAL: u8 = 0x05;
    pub const CHAIN: u8 = 0x06;
    pub const SIGNATURE: u8 = 0x07;
}

pub mod client_key_share {
    pub const CIPHERTEXT: u8 = 0x01;
}

/// EncryptedCredentials and AuthResult share this layout.
pub mod sealed {
    pub const CIPHERTEXT: u8 = 0x01;
    pub const TAG: u8 = 0x02;
}

pub mod credential {
    pub const USER_ID: u8 = 0x01;
    pub const PASSWORD: u8 = 0x02;
}

pub mod auth_result {
    pub const SUCCESS: u8 = 0x01;
    pub const DETAIL: u8 = 0x02;
}

pub mod alert_fields {
    pub const CODE: u8 = 0x01;
}

fn u16_list(values: impl IntoIterator<Item = u16>) -> Vec<u8> {
    values.into_iter().flat_map(u16::to_be_bytes).collect()
}

fn parse_u16_list(bytes: &[u8], id: u8) -> Result<Vec<u16>, TlvError> {
    if bytes.is_empty() || !bytes.len().is_multiple_of(2) {
        return Err(TlvError::BadValue(id));
    }
    Ok(bytes.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect())
}

fn nonce(f: &Fields, id: u8) -> Result<[u8; 32], TlvError> {
    Ok(f.require_len(id, 32)?.try_into().unwrap())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientHello {
    pub modes: Vec<HandshakeMode>,
    pub kem_prefs: Vec<KemAlgorithmId>,
    /// Raw codes: unknown signature algorithms are carried, not rejected.
    pub sig_prefs: Vec<u16>,
    pub nonce: [u8; 32],
    pub key_share: Option<(KemAlgorithmId, Vec<u8>)>,
}

impl ClientHello {
    pub fn to_frame(&self) -> Frame {
        use client_hello::*;
        let mut f = Fields::new()
            .with(MODES, self.modes.iter().map(|m| m.code()).collect::<Vec<_>>())
            .with(KEM_PREFS, u16_list(self.kem_prefs.iter().map(|k| k.code())))
            .with(SIG_PREFS, u16_list(self.sig_prefs.iter().copied()))
            .with(NONCE, self.nonce);
        if let Some((alg, pk)) = &self.key_share {
            f.insert(KEY_SHARE_ALG, alg.code().to_be_bytes());
            f.insert(KEY_SHARE, pk.clone());
        }
        Frame::new(MsgType::ClientHello, f)
    }

    pub fn from_fields(f: &Fields) -> Result<Self, HandshakeError> {
        use client_hello::*;
        f.only(&[MODES, KEM_PREFS, SIG_PREFS, NONCE, KEY_SHARE_ALG, KEY_SHARE])?;
        let mode_bytes = f.require(MODES)?;
        let modes = mode_bytes
            .iter()
            .map(|&c| HandshakeMode::from_code(c).ok_or(TlvError::BadValue(MODES)))
            .collect::<Result<Vec<_>, _>>()?;
        if modes.is_empty() {
            return Err(TlvError::BadValue(MODES).into());
        }
        let key_share = match (f.get(KEY_SHARE_ALG), f.get(KEY_SHARE)) {
            (None, None) => None,
            (Some(_), Some(pk)) => Some((KemAlgorithmId(f.require_u16(KEY_SHARE_ALG)?), pk.to_vec())),
            _ => return Err(HandshakeError::Malformed("key share fields must appear together".into())),
        };
        Ok(Self {
            modes,
            kem_prefs: parse_u16_list(f.require(KEM_PREFS)?, KEM_PREFS)?.into_iter().map(KemAlgorithmId).collect(),
            sig_prefs: parse_u16_list(f.require(SIG_PREFS)?, SIG_PREFS)?,
            nonce: nonce(f, NONCE)?,
            key_share,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerHello {
    pub mode: HandshakeMode,
    pub kem: KemAlgorithmId,
    pub sig: Option<SigAlgorithmId>,
    pub nonce: [u8; 32],
    /// Ciphertext in the KEM flow, server public key in the DH flow.
    pub key_material: Vec<u8>,
    pub chain: CertChain,
    pub signature: Option<Vec<u8>>,
}

impl ServerHello {
    /// Frame without the signature field: the span the signature covers
    /// (after the ClientHello).
    pub fn unsigned_frame(&self) -> Frame {
        use server_hello::*;
        let mut f = Fields::new()
            .with(MODE, [self.mode.code()])
            .with(KEM, self.kem.code().to_be_bytes())
            .with(NONCE, self.nonce)
            .with(KEY_MATERIAL, self.key_material.clone())
            .with(CHAIN, self.chain.encode());
        if let Some(sig) = self.sig {
            f.insert(SIG, sig.code().to_be_bytes());
        }
        Frame::new(MsgType::ServerHello, f)
    }

    pub fn to_frame(&self) -> Frame {
        let mut frame = self.unsigned_frame();
        if let Some(s) = &self.signature {
            frame.fields.insert(server_hello::SIGNATURE, s.clone());
        }
        frame
    }

    pub fn from_fields(f: &Fields) -> Result<Self, HandshakeError> {
        use server_hello::*;
        f.only(&[MODE, KEM, SIG, NONCE, KEY_MATERIAL, CHAIN, SIGNATURE])?;
        let mode = HandshakeMode::from_code(f.require_u8(MODE)?).ok_or(TlvError::BadValue(MODE))?;
        let sig = match f.get(SIG) {
            Some(_) => Some(SigAlgorithmId::from_code(f.require_u16(SIG)?).map_err(|_| TlvError::BadValue(SIG))?),
            None => None,
        };
        let signature = f.get(SIGNATURE).map(<[u8]>::to_vec);
        if sig.is_some() != signature.is_some() {
            return Err(HandshakeError::Malformed("signature algorithm and signature must appear together".into()));
        }
        let chain = CertChain::decode(f.require(CHAIN)?)
            .map_err(|e| HandshakeError::Malformed(format!("certificate chain: {e}")))?;
        Ok(Self {
            mode,
            kem: KemAlgorithmId(f.require_u16(KEM)?),
            sig,
            nonce: nonce(f, NONCE)?,
            key_material: f.require(KEY_MATERIAL)?.to_vec(),
            chain,
            signature,
        })
    }
}

pub fn client_key_share_frame(ciphertext: &[u8]) -> Frame {
    Frame::new(MsgType::ClientKeyShare, Fields::new().with(client_key_share::CIPHERTEXT, ciphertext))
}

pub fn parse_client_key_share(f: &Fields) -> Result<Vec<u8>, HandshakeError> {
    f.only(&[client_key_share::CIPHERTEXT])?;
    Ok(f.require(client_key_share::CIPHERTEXT)?.to_vec())
}
