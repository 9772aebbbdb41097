//! Active attacker sitting between a client and a server channel.
//!
//! The relay understands the handshake well enough to run two separate
//! key agreements, one with each side, when asked to substitute key
//! material. Against an unsigned DH-flow handshake that recovers the
//! credentials; a signed transcript makes the client abort instead.

use std::fmt::Write as _;

use crate::handshake::messages::{client_key_share, client_key_share_frame, ClientHello, ServerHello};
use crate::handshake::{
    derive_session_keys, open_auth_result, open_credentials, seal_auth_result, seal_credentials, HandshakeMode,
    SessionKeys, Transcript,
};
use crate::kem::{KemAlgorithmId, KemCiphertext, KemKeyPair, KemRegistry};
use crate::primitives::QshRng;

use super::{Channel, Direction, Frame, MsgType, TransportError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Strategy {
    PassThrough,
    /// Replace key material in both directions with the attacker's own.
    SubstituteKeyShare,
    /// Flip the low bit of one byte of the n-th relayed frame. Offsets past
    /// the end wrap.
    CorruptByte { frame_index: usize, offset: usize },
    /// Send `recorded` in place of the n-th relayed frame.
    Replay { frame_index: usize, recorded: Vec<u8> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelayedFrame {
    pub index: usize,
    pub direction: Direction,
    pub msg_type: Option<MsgType>,
    pub received_len: usize,
    pub forwarded_len: usize,
    pub altered: bool,
}

#[derive(Debug, Clone, Default)]
pub struct AttackLog {
    pub frames: Vec<RelayedFrame>,
    /// Plaintext credentials the attacker decrypted, if any.
    pub recovered: Option<(String, String)>,
    /// Decrypted AuthResult detail, if any.
    pub auth_detail: Option<String>,
    pub events: Vec<String>,
    /// Why the relay stopped.
    pub ended: String,
}

impl AttackLog {
    fn event(&mut self, s: impl Into<String>) {
        self.events.push(s.into());
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for f in &self.frames {
            let name = f.msg_type.map_or("<undecodable>", MsgType::name);
            let action = if f.altered { "ALTERED" } else { "forwarded" };
            let _ = writeln!(
                out,
                "#{} {} {} {} -> {} bytes {}",
                f.index,
                f.direction.label(),
                name,
                f.received_len,
                f.forwarded_len,
                action
            );
        }
        for e in &self.events {
            let _ = writeln!(out, "event: {e}");
        }
        if let Some((user, password)) = &self.recovered {
            let _ = writeln!(out, "RECOVERED CREDENTIALS user={user} password={password}");
        }
        if let Some(d) = &self.auth_detail {
            let _ = writeln!(out, "auth result seen by attacker: {d}");
        }
        let _ = writeln!(out, "ended: {}", self.ended);
        out
    }
}

/// Per-leg view of one of the two handshakes the attacker is part of.
#[derive(Default)]
struct Leg {
    transcript: Transcript,
    keys: Option<SessionKeys>,
}

struct Substitution<'a> {
    registry: &'a KemRegistry,
    rng: &'a mut QshRng,
    kem: Option<KemAlgorithmId>,
    client_leg: Leg,
    server_leg: Leg,
    /// Attacker keypair presented to the server (KEM flow) or client (DH flow).
    ephemeral: Option<KemKeyPair>,
    /// The honest peer's public key the attacker encapsulates to.
    victim_pk: Option<Vec<u8>>,
}

impl Substitution<'_> {
    /// Rewrites one frame. Returns the bytes to forward.
    fn rewrite(&mut self, dir: Direction, raw: &[u8], log: &mut AttackLog) -> Result<Vec<u8>, String> {
        let frame = Frame::decode(raw).map_err(|e| e.to_string())?;
        let out = match (dir, frame.msg_type) {
            (Direction::ClientToServer, MsgType::ClientHello) => {
                let mut ch = ClientHello::from_fields(&frame.fields).map_err(|e| e.to_string())?;
                if let Some((alg, pk)) = ch.key_share.take() {
                    let kp = self.registry.keypair(alg, self.rng).map_err(|e| e.to_string())?;
                    ch.key_share = Some((alg, kp.public_key.clone()));
                    self.victim_pk = Some(pk);
                    self.ephemeral = Some(kp);
                    log.event("replaced client key share with attacker key");
                }
                let out = ch.to_frame().encode();
                self.client_leg.transcript.append(raw);
                self.server_leg.transcript.append(&out);
                out
            }
            (Direction::ServerToClient, MsgType::ServerHello) => {
                let mut sh = ServerHello::from_fields(&frame.fields).map_err(|e| e.to_string())?;
                self.kem = Some(sh.kem);
                self.server_leg.transcript.append(raw);
                match sh.mode {
                    HandshakeMode::Kem => {
                        let kp = self.ephemeral.take().ok_or("KEM flow without client key share")?;
                        let ct = KemCiphertext { alg: sh.kem, bytes: sh.key_material.clone() };
                        let server_ss = self.registry.decaps(sh.kem, &kp.secret_key, &ct).map_err(|e| e.to_string())?;
                        let victim = self.victim_pk.as_ref().ok_or("no client key")?;
                        let (ct, client_ss) = self.registry.encaps(sh.kem, victim, self.rng).map_err(|e| e.to_string())?;
                        sh.key_material = ct.bytes;
                        let out = sh.to_frame().encode();
                        self.client_leg.transcript.append(&out);
                        let h = self.server_leg.transcript.running_hash();
                        self.server_leg.keys = Some(derive_session_keys(&server_ss, &h, sh.kem, sh.mode));
                        let h = self.client_leg.transcript.running_hash();
                        self.client_leg.keys = Some(derive_session_keys(&client_ss, &h, sh.kem, sh.mode));
                        log.event("re-encapsulated toward client; holding both session keys");
                        out
                    }
                    HandshakeMode::Dh => {
                        let kp = self.registry.keypair(sh.kem, self.rng).map_err(|e| e.to_string())?;
                        self.victim_pk = Some(std::mem::replace(&mut sh.key_material, kp.public_key.clone()));
                        self.ephemeral = Some(kp);
                        let out = sh.to_frame().encode();
                        self.client_leg.transcript.append(&out);
                        log.event("replaced server key share with attacker key");
                        out
                    }
                }
            }
            (Direction::ClientToServer, MsgType::ClientKeyShare) => {
                let kem = self.kem.ok_or("key share before ServerHello")?;
                self.client_leg.transcript.append(raw);
                let ct = frame.fields.require(client_key_share::CIPHERTEXT).map_err(|e| e.to_string())?.to_vec();
                let kp = self.ephemeral.take().ok_or("DH flow without attacker key")?;
                let client_ss = self
                    .registry
                    .decaps(kem, &kp.secret_key, &KemCiphertext { alg: kem, bytes: ct })
                    .map_err(|e| e.to_string())?;
                let victim = self.victim_pk.as_ref().ok_or("no server key")?;
                let (ct, server_ss) = self.registry.encaps(kem, victim, self.rng).map_err(|e| e.to_string())?;
                let out = client_key_share_frame(&ct.bytes).encode();
                self.server_leg.transcript.append(&out);
                let h = self.client_leg.transcript.running_hash();
                self.client_leg.keys = Some(derive_session_keys(&client_ss, &h, kem, HandshakeMode::Dh));
                let h = self.server_leg.transcript.running_hash();
                self.server_leg.keys = Some(derive_session_keys(&server_ss, &h, kem, HandshakeMode::Dh));
                log.event("completed separate key agreements with client and server");
                out
            }
            (Direction::ClientToServer, MsgType::EncryptedCredentials) => {
                let (ck, sk) = match (&self.client_leg.keys, &self.server_leg.keys) {
                    (Some(c), Some(s)) => (c, s),
                    _ => return Err("credentials before key agreement".into()),
                };
                let cred = open_credentials(&frame.fields, ck, &self.client_leg.transcript.running_hash())
                    .map_err(|e| format!("could not open credentials: {e}"))?;
                log.recovered = Some((cred.user_id().to_string(), cred.password().to_string()));
                let out = seal_credentials(&cred, sk, &self.server_leg.transcript.running_hash()).encode();
                self.client_leg.transcript.append(raw);
                self.server_leg.transcript.append(&out);
                out
            }
            (Direction::ServerToClient, MsgType::AuthResult) => {
                let (ck, sk) = match (&self.client_leg.keys, &self.server_leg.keys) {
                    (Some(c), Some(s)) => (c, s),
                    _ => return Err("auth result before key agreement".into()),
                };
                let result = open_auth_result(&frame.fields, sk, &self.server_leg.transcript.running_hash())
                    .map_err(|e| format!("could not open auth result: {e}"))?;
                log.auth_detail = Some(result.detail.clone());
                let out = seal_auth_result(&result, ck, &self.client_leg.transcript.running_hash()).encode();
                self.server_leg.transcript.append(raw);
                self.client_leg.transcript.append(&out);
                out
            }
            _ => raw.to_vec(),
        };
        Ok(out)
    }
}

/// Who speaks after a frame of this type went from `dir`.
fn next_speaker(dir: Direction, msg: Option<MsgType>) -> Option<Direction> {
    use Direction::*;
    match (dir, msg) {
        (_, Some(MsgType::Alert)) | (ServerToClient, Some(MsgType::AuthResult)) => None,
        (ClientToServer, Some(MsgType::ClientHello)) => Some(ServerToClient),
        (ServerToClient, Some(MsgType::ServerHello)) => Some(ClientToServer),
        // The DH-flow client sends its key share and credentials back to back.
        (ClientToServer, Some(MsgType::ClientKeyShare)) => Some(ClientToServer),
        (ClientToServer, Some(MsgType::EncryptedCredentials)) => Some(ServerToClient),
        // Out-of-protocol traffic: expect the receiver to complain.
        _ => Some(flip(dir)),
    }
}

fn flip(d: Direction) -> Direction {
    match d {
        Direction::ClientToServer => Direction::ServerToClient,
        Direction::ServerToClient => Direction::ClientToServer,
    }
}

/// Relays one handshake between `client_side` (connected to the client)
/// and `server_side` (connected to the server). Stops after the final
/// AuthResult, any Alert, or when a side stops talking.
pub fn mitm_run(
    client_side: &mut dyn Channel,
    server_side: &mut dyn Channel,
    strategy: Strategy,
    registry: &KemRegistry,
    rng: &mut QshRng,
) -> Result<AttackLog, TransportError> {
    let mut log = AttackLog::default();
    let mut sub = Substitution {
        registry,
        rng,
        kem: None,
        client_leg: Leg::default(),
        server_leg: Leg::default(),
        ephemeral: None,
        victim_pk: None,
    };
    let mut speaker = Some(Direction::ClientToServer);
    let mut index = 0;
    while let Some(dir) = speaker {
        let received = match dir {
            Direction::ClientToServer => client_side.recv_raw(),
            Direction::ServerToClient => server_side.recv_raw(),
        };
        let raw = match received {
            Ok(r) => r,
            Err(TransportError::Timeout(_)) | Err(TransportError::PeerClosed) if index > 0 => {
                log.ended = format!("{} side went quiet", dir.label());
                return Ok(log);
            }
            Err(e) => return Err(e),
        };
        let msg_type = Frame::decode(&raw).ok().map(|f| f.msg_type);
        let forwarded = match &strategy {
            Strategy::PassThrough => raw.clone(),
            Strategy::CorruptByte { frame_index, offset } if *frame_index == index => {
                let mut b = raw.clone();
                let at = offset % b.len().max(1);
                if let Some(byte) = b.get_mut(at) {
                    *byte ^= 0x01;
                }
                b
            }
            Strategy::Replay { frame_index, recorded } if *frame_index == index => recorded.clone(),
            Strategy::CorruptByte { .. } | Strategy::Replay { .. } => raw.clone(),
            Strategy::SubstituteKeyShare => match sub.rewrite(dir, &raw, &mut log) {
                Ok(b) => b,
                Err(e) => {
                    log.event(format!("substitution failed on frame {index}: {e}; forwarding unchanged"));
                    raw.clone()
                }
            },
        };
        let altered = forwarded != raw;
        match dir {
            Direction::ClientToServer => server_side.send_raw(&forwarded)?,
            Direction::ServerToClient => client_side.send_raw(&forwarded)?,
        }
        log.frames.push(RelayedFrame {
            index,
            direction: dir,
            msg_type,
            received_len: raw.len(),
            forwarded_len: forwarded.len(),
            altered,
        });
        if let Some(code) = Frame::decode(&raw).ok().and_then(|f| f.alert_code()) {
            log.ended = format!("{} sent alert 0x{code:02x}", dir.label());
            return Ok(log);
        }
        index += 1;
        speaker = next_speaker(dir, msg_type);
    }
    log.ended = "handshake finished".into();
    Ok(log)
}
