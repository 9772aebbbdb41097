//! Runs the state machines over channels, plus a threaded TCP server.

use std::fs::OpenOptions;
use std::io::{self, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use crate::primitives::QshRng;
use crate::transport::{alert, Channel, Direction, Frame, RecordingChannel, TcpChannel, TransportError, DEFAULT_TIMEOUT};

use super::{AuthResult, ClientConfig, ClientHandshake, HandshakeError, Negotiated, Output, ServerConfig, ServerHandshake, Status};

#[derive(Debug, Clone)]
pub struct ClientReport {
    pub negotiated: Negotiated,
    pub auth: AuthResult,
    /// Raw frames in transcript order.
    pub transcript: Vec<Vec<u8>>,
}

#[derive(Debug, Clone)]
pub struct ServerReport {
    pub negotiated: Negotiated,
    pub user_id: String,
    pub auth: AuthResult,
    pub transcript: Vec<Vec<u8>>,
}

/// Outcome of one step: keep going, or stop with the machine's verdict.
enum Step {
    More,
    Done(AuthResult),
}

fn flush(channel: &mut dyn Channel, out: Output) -> Result<Step, HandshakeError> {
    let failed = matches!(out.status, Status::Failed(_));
    for frame in &out.send {
        match channel.send_raw(frame) {
            Ok(()) => {}
            // Alerts are best effort; the peer may already be gone.
            Err(_) if failed => break,
            Err(e) => return Err(e.into()),
        }
    }
    match out.status {
        Status::Continue | Status::Ignored => Ok(Step::More),
        Status::Complete(result) => Ok(Step::Done(result)),
        Status::Failed(e) => Err(e),
    }
}

fn receive(channel: &mut dyn Channel) -> Result<Vec<u8>, HandshakeError> {
    match channel.recv_raw() {
        Ok(raw) => Ok(raw),
        Err(TransportError::Frame(e)) => {
            let _ = channel.send(&Frame::alert(alert::MALFORMED));
            Err(HandshakeError::Malformed(e.to_string()))
        }
        Err(e) => Err(e.into()),
    }
}

/// Runs one client handshake to completion. A rejected password is a
/// successful run with `auth.success == false`.
pub fn run_client(channel: &mut dyn Channel, config: ClientConfig, rng: QshRng) -> Result<ClientReport, HandshakeError> {
    let (mut machine, hello) = ClientHandshake::start(config, rng)?;
    channel.send_raw(&hello)?;
    loop {
        let raw = receive(channel)?;
        let out = machine.handle(&raw);
        if let Step::Done(auth) = flush(channel, out)? {
            return Ok(ClientReport {
                negotiated: machine.negotiated().expect("negotiated before completion"),
                auth,
                transcript: machine.transcript().frames().to_vec(),
            });
        }
    }
}

/// Serves one connection to completion.
pub fn serve_connection(
    channel: &mut dyn Channel,
    config: Arc<ServerConfig>,
    rng: QshRng,
) -> Result<ServerReport, HandshakeError> {
    let mut machine = ServerHandshake::new(config, rng);
    loop {
        let raw = receive(channel)?;
        let out = machine.handle(&raw);
        if let Step::Done(auth) = flush(channel, out)? {
            return Ok(ServerReport {
                negotiated: machine.negotiated().expect("negotiated before completion"),
                user_id: machine.user_id().unwrap_or_default().to_string(),
                auth,
                transcript: machine.transcript().frames().to_vec(),
            });
        }
    }
}

/// One captured connection: raw frames plus non-secret annotations.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SessionRecord {
    pub index: u64,
    pub frames: Vec<(Direction, Vec<u8>)>,
    pub notes: Vec<(String, String)>,
}

impl SessionRecord {
    pub fn note(&self, key: &str) -> Option<&str> {
        self.notes.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Text block: `SESSION n`, one `C2S <hex>` / `S2C <hex>` line per
    /// frame, `NOTE key=value` lines, `END`.
    pub fn render(&self) -> String {
        let mut s = format!("SESSION {}\n", self.index);
        for (dir, bytes) in &self.frames {
            s.push_str(&format!("{} {}\n", dir.label(), hex::encode(bytes)));
        }
        for (k, v) in &self.notes {
            s.push_str(&format!("NOTE {k}={v}\n"));
        }
        s.push_str("END\n");
        s
    }

    pub fn parse_all(text: &str) -> Result<Vec<Self>, String> {
        let mut out = Vec::new();
        let mut current: Option<Self> = None;
        for (n, line) in text.lines().enumerate() {
            let n = n + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, rest) = line.split_once(' ').unwrap_or((line, ""));
            match (word, current.as_mut()) {
                ("SESSION", None) => {
                    let index = rest.parse().map_err(|_| format!("line {n}: bad session index"))?;
                    current = Some(Self { index, ..Self::default() });
                }
                ("END", Some(_)) => out.push(current.take().unwrap()),
                ("NOTE", Some(rec)) => {
                    let (k, v) = rest.split_once('=').ok_or(format!("line {n}: note without '='"))?;
                    rec.notes.push((k.to_string(), v.to_string()));
                }
                (dir, Some(rec)) if Direction::from_label(dir).is_some() => {
                    let bytes = hex::decode(rest).map_err(|e| format!("line {n}: {e}"))?;
                    rec.frames.push((Direction::from_label(dir).unwrap(), bytes));
                }
                _ => return Err(format!("line {n}: unexpected '{word}'")),
            }
        }
        if current.is_some() {
            return Err("capture ends inside a session".into());
        }
        Ok(out)
    }
}

/// Completed-session callback target shared by connection threads.
type Sessions = Arc<Mutex<Vec<SessionRecord>>>;

pub struct Server {
    listener: TcpListener,
    config: Arc<ServerConfig>,
    rng: QshRng,
    capture: Option<PathBuf>,
    timeout: Duration,
}

pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
    sessions: Sessions,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs, config: Arc<ServerConfig>, rng: QshRng) -> io::Result<Self> {
        Ok(Self { listener: TcpListener::bind(addr)?, config, rng, capture: None, timeout: DEFAULT_TIMEOUT })
    }

    /// Append every session to this file in the capture text format.
    pub fn capture_to(mut self, path: PathBuf) -> Self {
        self.capture = Some(path);
        self
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Starts accepting on a background thread; one thread per connection.
    pub fn spawn(self) -> io::Result<ServerHandle> {
        let addr = self.listener.local_addr()?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let sessions = Sessions::default();
        let thread = {
            let shutdown = shutdown.clone();
            let sessions = sessions.clone();
            thread::spawn(move || self.accept_loop(&shutdown, &sessions))
        };
        Ok(ServerHandle { addr, shutdown, thread: Some(thread), sessions })
    }

    /// Accepts forever on the calling thread.
    pub fn run(self) {
        let never = AtomicBool::new(false);
        self.accept_loop(&never, &Sessions::default());
    }

    fn accept_loop(mut self, shutdown: &AtomicBool, sessions: &Sessions) {
        let counter = AtomicU64::new(0);
        let capture_lock = Arc::new(Mutex::new(()));
        let mut workers: Vec<JoinHandle<()>> = Vec::new();
        for stream in self.listener.incoming() {
            if shutdown.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = stream else { continue };
            workers.retain(|w| !w.is_finished());
            let index = counter.fetch_add(1, Ordering::SeqCst);
            let config = self.config.clone();
            let rng = self.rng.fork();
            let capture = self.capture.clone();
            let capture_lock = capture_lock.clone();
            let sessions = sessions.clone();
            let timeout = self.timeout;
            workers.push(thread::spawn(move || {
                let record = handle_connection(stream, index, config, rng, timeout);
                if let Some(path) = capture {
                    let _guard = capture_lock.lock().unwrap_or_else(|p| p.into_inner());
                    let written = OpenOptions::new()
                        .create(true)
                        .append(true)
                        .open(&path)
                        .and_then(|mut f| f.write_all(record.render().as_bytes()));
                    if let Err(e) = written {
                        eprintln!("capture write to {} failed: {e}", path.display());
                    }
                }
                sessions.lock().unwrap_or_else(|p| p.into_inner()).push(record);
            }));
        }
        for w in workers {
            let _ = w.join();
        }
    }
}

fn handle_connection(
    stream: TcpStream,
    index: u64,
    config: Arc<ServerConfig>,
    rng: QshRng,
    timeout: Duration,
) -> SessionRecord {
    let mut notes = Vec::new();
    if let Ok(peer) = stream.peer_addr() {
        notes.push(("peer".to_string(), peer.to_string()));
    }
    let channel = match TcpChannel::from_stream(stream, timeout) {
        Ok(c) => c,
        Err(e) => {
            notes.push(("outcome".into(), format!("error: {e}")));
            return SessionRecord { index, frames: vec![], notes };
        }
    };
    let mut channel = RecordingChannel::new(channel, Direction::ServerToClient);
    let log = channel.log();
    match serve_connection(&mut channel, config, rng) {
        Ok(report) => {
            let n = report.negotiated;
            notes.push(("mode".into(), n.mode.name().into()));
            notes.push(("kem".into(), format!("0x{:04x}", n.kem.code())));
            notes.push(("sig".into(), n.sig.map_or("none".into(), |s| s.name().to_string())));
            notes.push(("user".into(), report.user_id));
            notes.push(("auth".into(), if report.auth.success { "success" } else { "failure" }.into()));
            notes.push(("outcome".into(), "complete".into()));
        }
        Err(e) => notes.push(("outcome".into(), format!("error: {e}"))),
    }
    let frames = log.lock().unwrap_or_else(|p| p.into_inner()).clone();
    SessionRecord { index, frames, notes }
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Sessions finished so far.
    pub fn sessions(&self) -> Vec<SessionRecord> {
        self.sessions.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }

    /// Stops accepting and waits for in-flight connections.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if let Some(t) = self.thread.take() {
            self.shutdown.store(true, Ordering::SeqCst);
            // Wake the blocking accept.
            let _ = TcpStream::connect_timeout(&self.addr, Duration::from_secs(1));
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}
