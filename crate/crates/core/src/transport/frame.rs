//! Wire frames: `"QSH1" || version || msg_type || payload_len (4 BE) ||
//! payload`, where the payload is a TLV field list.

use std::fmt;

use thiserror::Error;

use super::tlv::{Fields, TlvError};

pub const MAGIC: [u8; 4] = *b"QSH1";
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 10;
pub const MAX_PAYLOAD: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MsgType {
    ClientHello = 0x01,
    ServerHello = 0x02,
    ClientKeyShare = 0x03,
    EncryptedCredentials = 0x04,
    AuthResult = 0x05,
    Alert = 0x06,
}

impl MsgType {
    pub const ALL: [MsgType; 6] = [
        Self::ClientHello,
        Self::ServerHello,
        Self::ClientKeyShare,
        Self::EncryptedCredentials,
        Self::AuthResult,
        Self::Alert,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::ClientHello => "ClientHello",
            Self::ServerHello => "ServerHello",
            Self::ClientKeyShare => "ClientKeyShare",
            Self::EncryptedCredentials => "EncryptedCredentials",
            Self::AuthResult => "AuthResult",
            Self::Alert => "Alert",
        }
    }
}

impl fmt::Display for MsgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version 0x{0:02x}")]
    BadVersion(u8),
    #[error("unknown message type 0x{0:02x}")]
    UnknownMsgType(u8),
    #[error("payload length {0} exceeds the 1 MiB limit")]
    Oversize(u32),
    #[error("frame truncated: need {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("{0} bytes after the declared frame end")]
    TrailingBytes(usize),
    #[error("frame payload: {0}")]
    Tlv(#[from] TlvError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: MsgType,
    pub fields: Fields,
}

/// Alert codes carried in field 0x01 of an Alert frame.
pub mod alert {
    pub const NO_MUTUAL_ALGORITHM: u8 = 0x01;
    pub const MALFORMED: u8 = 0x02;
    pub const AUTHENTICATION_FAILED: u8 = 0x03;
    pub const DECRYPT_FAILED: u8 = 0x04;

    pub fn describe(code: u8) -> &'static str {
        match code {
            NO_MUTUAL_ALGORITHM => "no mutual algorithm",
            MALFORMED => "malformed or unexpected message",
            AUTHENTICATION_FAILED => "certificate chain or transcript signature invalid",
            DECRYPT_FAILED => "decryption failed",
            _ => "unknown alert",
        }
    }
}

/// Parsed fixed header; payload not yet read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameHeader {
    pub msg_type: MsgType,
    pub payload_len: usize,
}

impl FrameHeader {
    pub fn parse(h: &[u8; HEADER_LEN]) -> Result<Self, FrameError> {
        let magic: [u8; 4] = h[..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(FrameError::BadMagic(magic));
        }
        if h[4] != VERSION {
            return Err(FrameError::BadVersion(h[4]));
        }
        let msg_type = MsgType::from_code(h[5]).ok_or(FrameError::UnknownMsgType(h[5]))?;
        let len = u32::from_be_bytes(h[6..10].try_into().unwrap());
        if len as usize > MAX_PAYLOAD {
            return Err(FrameError::Oversize(len));
        }
        Ok(Self { msg_type, payload_len: len as usize })
    }
}

impl Frame {
    pub fn new(msg_type: MsgType, fields: Fields) -> Self {
        Self { msg_type, fields }
    }

    pub fn alert(code: u8) -> Self {
        Self::new(MsgType::Alert, Fields::new().with(0x01, vec![code]))
    }

    /// Alert code, if this is a well-formed Alert.
    pub fn alert_code(&self) -> Option<u8> {
        match self.msg_type {
            MsgType::Alert => self.fields.require_u8(0x01).ok(),
            _ => None,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let payload_len = self.fields.encoded_len();
        assert!(payload_len <= MAX_PAYLOAD, "frame payload over 1 MiB");
        let mut out = Vec::with_capacity(HEADER_LEN + payload_len);
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(self.msg_type.code());
        out.extend_from_slice(&(payload_len as u32).to_be_bytes());
        self.fields.encode_into(&mut out);
        out
    }

    /// Decodes exactly one frame occupying all of `bytes`.
    pub fn decode(bytes: &[u8]) -> Result<Self, FrameError> {
        let header: &[u8; HEADER_LEN] = bytes
            .get(..HEADER_LEN)
            .and_then(|h| h.try_into().ok())
            .ok_or(FrameError::Truncated { needed: HEADER_LEN, have: bytes.len() })?;
        let h = FrameHeader::parse(header)?;
        let needed = HEADER_LEN + h.payload_len;
        if bytes.len() < needed {
            return Err(FrameError::Truncated { needed, have: bytes.len() });
        }
        if bytes.len() > needed {
            return Err(FrameError::TrailingBytes(bytes.len() - needed));
        }
        let fields = Fields::decode(&bytes[HEADER_LEN..needed])?;
        Ok(Self { msg_type: h.msg_type, fields })
    }
}

pub fn frame_encode(frame: &Frame) -> Vec<u8> {
    frame.encode()
}

pub fn frame_decode(bytes: &[u8]) -> Result<Frame, FrameError> {
    Frame::decode(bytes)
}
