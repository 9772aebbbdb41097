use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use super::frame::{Frame, FrameHeader, HEADER_LEN};
use super::TransportError;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);
pub const DEFAULT_PORT: u16 = 7411;

/// Whole-frame, in-order message pipe. The raw methods move exactly one
/// encoded frame per call.
pub trait Channel: Send {
    fn send_raw(&mut self, frame: &[u8]) -> Result<(), TransportError>;
    fn recv_raw(&mut self) -> Result<Vec<u8>, TransportError>;
    fn set_timeout(&mut self, timeout: Duration);

    fn send(&mut self, frame: &Frame) -> Result<(), TransportError> {
        self.send_raw(&frame.encode())
    }

    fn recv(&mut self) -> Result<Frame, TransportError> {
        Ok(Frame::decode(&self.recv_raw()?)?)
    }
}

impl<C: Channel + ?Sized> Channel for Box<C> {
    fn send_raw(&mut self, frame: &[u8]) -> Result<(), TransportError> {
        (**self).send_raw(frame)
    }
    fn recv_raw(&mut self) -> Result<Vec<u8>, TransportError> {
        (**self).recv_raw()
    }
    fn set_timeout(&mut self, timeout: Duration) {
        (**self).set_timeout(timeout)
    }
}

pub struct MemoryChannel {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    timeout: Duration,
}

/// Two connected in-process endpoints.
pub fn memory_pair() -> (MemoryChannel, MemoryChannel) {
    let (tx_a, rx_b) = mpsc::channel();
    let (tx_b, rx_a) = mpsc::channel();
    (
        MemoryChannel { tx: tx_a, rx: rx_a, timeout: DEFAULT_TIMEOUT },
        MemoryChannel { tx: tx_b, rx: rx_b, timeout: DEFAULT_TIMEOUT },
    )
}

impl Channel for MemoryChannel {
    fn send_raw(&mut self, frame: &[u8]) -> Result<(), TransportError> {
        self.tx.send(frame.to_vec()).map_err(|_| TransportError::PeerClosed)
    }

    fn recv_raw(&mut self) -> Result<Vec<u8>, TransportError> {
        self.rx.recv_timeout(self.timeout).map_err(|e| match e {
            RecvTimeoutError::Timeout => TransportError::Timeout(self.timeout),
            RecvTimeoutError::Disconnected => TransportError::PeerClosed,
        })
    }

    fn set_timeout(&mut self, timeout: Duration) {
        self.timeout = timeout;
    }
}

pub struct TcpChannel {
    stream: TcpStream,
    timeout: Duration,
}

impl TcpChannel {
    pub fn connect(addr: impl ToSocketAddrs, timeout: Duration) -> Result<Self, TransportError> {
        let mut last = None;
        for a in addr.to_socket_addrs()? {
            match TcpStream::connect_timeout(&a, timeout) {
                Ok(stream) => return Self::from_stream(stream, timeout),
                Err(e) => last = Some(e),
            }
        }
        Err(last.map_or(TransportError::Io(io::Error::new(io::ErrorKind::InvalidInput, "no address")), Into::into))
    }

    pub fn from_stream(stream: TcpStream, timeout: Duration) -> Result<Self, TransportError> {
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(timeout))?;
        stream.set_write_timeout(Some(timeout))?;
        Ok(Self { stream, timeout })
    }

    pub fn peer_addr(&self) -> Option<SocketAddr> {
        self.stream.peer_addr().ok()
    }

    fn read_exact(&mut self, buf: &mut [u8], at_frame_start: bool) -> Result<(), TransportError> {
        let mut filled = 0;
        while filled < buf.len() {
            match self.stream.read(&mut buf[filled..]) {
                Ok(0) if filled == 0 && at_frame_start => return Err(TransportError::PeerClosed),
                Ok(0) => {
                    return Err(TransportError::Io(io::Error::new(
                        io::ErrorKind::UnexpectedEof,
                        "connection closed mid-frame",
                    )))
                }
                Ok(n) => filled += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                    return Err(TransportError::Timeout(self.timeout))
                }
                Err(e) if matches!(e.kind(), io::ErrorKind::ConnectionReset | io::ErrorKind::BrokenPipe) => {
                    return Err(TransportError::PeerClosed)
                }
                Err(e) => return Err(e.into()),
            }
        }
        Ok(())
    }
}

impl Channel for TcpChannel {
    fn send_raw(&mut self, frame: &[u8]) -> Result<(), TransportError> {
        self.stream.write_all(frame).map_err(|e| match e.kind() {
            io::ErrorKind::BrokenPipe | io::ErrorKind::ConnectionReset => TransportError::PeerClosed,
            _ => e.into(),
        })
    }

    /// Reads the fixed header first so an oversize or garbage length is
    /// rejected before any payload buffer is allocated.
    fn recv_raw(&mut self) -> Result<Vec<u8>, TransportError> {
        let mut header = [0u8; HEADER_LEN];
        self.read_exact(&mut header, true)?;
        let h = FrameHeader::parse(&header)?;
        let mut frame = vec![0u8; HEADER_LEN + h.payload_len];
        frame[..HEADER_LEN].copy_from_slice(&header);
        self.read_exact(&mut frame[HEADER_LEN..], false)?;
        Ok(frame)
    }

    fn set_timeout(&mut self, timeout: Duration) {
        self.timeout = timeout;
        let _ = self.stream.set_read_timeout(Some(timeout));
        let _ = self.stream.set_write_timeout(Some(timeout));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ClientToServer,
    ServerToClient,
}

impl Direction {
    pub fn label(self) -> &'static str {
        match self {
            Self::ClientToServer => "C2S",
            Self::ServerToClient => "S2C",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "C2S" => Some(Self::ClientToServer),
            "S2C" => Some(Self::ServerToClient),
            _ => None,
        }
    }
}

pub type FrameLog = Arc<Mutex<Vec<(Direction, Vec<u8>)>>>;

/// Wraps a channel and records every frame that crosses it. `outbound` is
/// the direction of frames this endpoint sends.
pub struct RecordingChannel<C> {
    inner: C,
    outbound: Direction,
    log: FrameLog,
}

impl<C: Channel> RecordingChannel<C> {
    pub fn new(inner: C, outbound: Direction) -> Self {
        Self { inner, outbound, log: FrameLog::default() }
    }

    pub fn log(&self) -> FrameLog {
        self.log.clone()
    }

    fn inbound(&self) -> Direction {
        match self.outbound {
            Direction::ClientToServer => Direction::ServerToClient,
            Direction::ServerToClient => Direction::ClientToServer,
        }
    }
}

impl<C: Channel> Channel for RecordingChannel<C> {
    fn send_raw(&mut self, frame: &[u8]) -> Result<(), TransportError> {
        self.inner.send_raw(frame)?;
        self.log.lock().unwrap().push((self.outbound, frame.to_vec()));
        Ok(())
    }

    fn recv_raw(&mut self) -> Result<Vec<u8>, TransportError> {
        let frame = self.inner.recv_raw()?;
        self.log.lock().unwrap().push((self.inbound(), frame.clone()));
        Ok(frame)
    }

    fn set_timeout(&mut self, timeout: Duration) {
        self.inner.set_timeout(timeout)
    }
}
