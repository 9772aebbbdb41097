//! Framing, channels, and the man-in-the-middle harness.

mod channel;
mod frame;
pub mod mitm;
pub mod tlv;

use std::io;
use std::time::Duration;

use thiserror::Error;

pub use channel::{
    memory_pair, Channel, Direction, FrameLog, MemoryChannel, RecordingChannel, TcpChannel, DEFAULT_PORT,
    DEFAULT_TIMEOUT,
};
pub use frame::{alert, frame_decode, frame_encode, Frame, FrameError, FrameHeader, MsgType, HEADER_LEN, MAGIC, MAX_PAYLOAD, VERSION};
pub use tlv::{Fields, TlvError};

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("receive timed out after {0:?}")]
    Timeout(Duration),
    #[error("peer closed the connection")]
    PeerClosed,
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Frame(#[from] FrameError),
}
