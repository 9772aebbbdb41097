//! Capture replay into a readable transcript dump. Key shares, ciphertexts
//! and signatures are abbreviated; encrypted payloads are shown by length
//! only.

use std::fmt::Write as _;

use qsh_core::certs::{read_certificate, validate_chain, Certificate, ValidationPolicy};
use qsh_core::handshake::messages::{client_hello, sealed, server_hello, ServerHello};
use qsh_core::handshake::{HandshakeMode, SessionRecord, Transcript};
use qsh_core::kem::KemAlgorithmId;
use qsh_core::sig::{verify, SigAlgorithmId, SignatureValue};
use qsh_core::transport::{alert, Direction, Frame, MsgType};

use crate::args::InspectArgs;
use crate::error::CliError;
use crate::keys::unix_now;

const SHOW_BYTES: usize = 16;

fn abbreviated(v: &[u8]) -> String {
    if v.len() <= 2 * SHOW_BYTES {
        hex::encode(v)
    } else {
        format!("{}.. ({} bytes)", hex::encode(&v[..SHOW_BYTES]), v.len())
    }
}

fn kem_name(code: u16) -> String {
    KemAlgorithmId(code).builtin_name().map_or_else(|| format!("0x{code:04x}"), str::to_string)
}

fn sig_name(code: u16) -> String {
    SigAlgorithmId::from_code(code).map_or_else(|_| format!("0x{code:04x}"), |s| s.name().to_string())
}

fn u16_names(v: &[u8], name: fn(u16) -> String) -> String {
    if !v.len().is_multiple_of(2) {
        return format!("<odd length> {}", abbreviated(v));
    }
    v.chunks_exact(2).map(|c| name(u16::from_be_bytes([c[0], c[1]]))).collect::<Vec<_>>().join(", ")
}

fn u16_name(v: &[u8], name: fn(u16) -> String) -> String {
    match <[u8; 2]>::try_from(v) {
        Ok(b) => name(u16::from_be_bytes(b)),
        Err(_) => format!("<bad length> {}", abbreviated(v)),
    }
}

fn mode_names(v: &[u8]) -> String {
    v.iter()
        .map(|&c| HandshakeMode::from_code(c).map_or_else(|| format!("0x{c:02x}"), |m| m.name().to_string()))
        .collect::<Vec<_>>()
        .join(", ")
}

/// (field name, rendered value) for one TLV field.
fn describe_field(t: MsgType, id: u8, v: &[u8]) -> (&'static str, String) {
    match (t, id) {
        (MsgType::ClientHello, client_hello::MODES) => ("modes", mode_names(v)),
        (MsgType::ClientHello, client_hello::KEM_PREFS) => ("kem_prefs", u16_names(v, kem_name)),
        (MsgType::ClientHello, client_hello::SIG_PREFS) => ("sig_prefs", u16_names(v, sig_name)),
        (MsgType::ClientHello, client_hello::NONCE) => ("nonce", hex::encode(v)),
        (MsgType::ClientHello, client_hello::KEY_SHARE_ALG) => ("key_share_alg", u16_name(v, kem_name)),
        (MsgType::ClientHello, client_hello::KEY_SHARE) => ("key_share", abbreviated(v)),
        (MsgType::ServerHello, server_hello::MODE) => ("mode", mode_names(v)),
        (MsgType::ServerHello, server_hello::KEM) => ("kem", u16_name(v, kem_name)),
        (MsgType::ServerHello, server_hello::SIG) => ("sig", u16_name(v, sig_name)),
        (MsgType::ServerHello, server_hello::NONCE) => ("nonce", hex::encode(v)),
        (MsgType::ServerHello, server_hello::KEY_MATERIAL) => ("key_material", abbreviated(v)),
        (MsgType::ServerHello, server_hello::CHAIN) => ("chain", match qsh_core::certs::CertChain::decode(v) {
            Ok(c) => {
                let subjects: Vec<&str> = c.certs().iter().map(|c| c.body.subject.as_str()).collect();
                format!("{} certificate(s): {}", c.len(), subjects.join(" <- "))
            }
            Err(e) => format!("<undecodable: {e}>"),
        }),
        (MsgType::ServerHello, server_hello::SIGNATURE) => ("signature", abbreviated(v)),
        (MsgType::ClientKeyShare, 0x01) => ("ciphertext", abbreviated(v)),
        (MsgType::EncryptedCredentials | MsgType::AuthResult, sealed::CIPHERTEXT) => {
            ("ciphertext", format!("<redacted: {} bytes encrypted>", v.len()))
        }
        (MsgType::EncryptedCredentials | MsgType::AuthResult, sealed::TAG) => ("tag", hex::encode(v)),
        (MsgType::Alert, 0x01) => ("code", match v {
            [c] => format!("0x{c:02x} ({})", alert::describe(*c)),
            _ => format!("<bad length> {}", abbreviated(v)),
        }),
        _ => ("unknown", abbreviated(v)),
    }
}

struct Verdicts {
    chain: String,
    signature: String,
}

fn verdicts(sh_frame: &Frame, prior: &Transcript, root: Option<&Certificate>, policy: ValidationPolicy) -> Verdicts {
    let sh = match ServerHello::from_fields(&sh_frame.fields) {
        Ok(sh) => sh,
        Err(e) => {
            return Verdicts { chain: format!("unparseable ServerHello: {e}"), signature: "unknown".into() };
        }
    };
    let anchor = root.unwrap_or_else(|| sh.chain.root());
    let anchor_note = if root.is_some() { "given root" } else { "self-anchored" };
    let chain = match validate_chain(&sh.chain, anchor, policy, unix_now()) {
        Ok(()) => format!("ok ({policy}, {anchor_note})"),
        Err(e) => format!("FAILED ({policy}, {anchor_note}): {e}"),
    };
    let signature = match (sh.sig, &sh.signature) {
        (Some(alg), Some(bytes)) => {
            let leaf = &sh.chain.leaf().body;
            let public = if leaf.classical_alg == alg {
                Some(&leaf.classical_pub)
            } else {
                leaf.pq.as_ref().filter(|k| k.alg == alg).map(|k| &k.public)
            };
            let span = prior.hash_with(&sh.unsigned_frame().encode());
            let sig = SignatureValue { alg, bytes: bytes.clone() };
            if public.is_some_and(|pk| verify(alg, pk, span.as_bytes(), &sig)) {
                format!("ok ({alg})")
            } else {
                format!("INVALID ({alg})")
            }
        }
        _ => "none (unsigned transcript)".into(),
    };
    Verdicts { chain, signature }
}

pub fn dump_session(s: &SessionRecord, root: Option<&Certificate>, policy: ValidationPolicy) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "session {}", s.index);
    for (k, v) in &s.notes {
        let _ = writeln!(out, "  {k}: {v}");
    }
    let mut transcript = Transcript::new();
    let mut found = None;
    for (i, (dir, raw)) in s.frames.iter().enumerate() {
        let arrow = match dir {
            Direction::ClientToServer => "client -> server",
            Direction::ServerToClient => "server -> client",
        };
        let frame = match Frame::decode(raw) {
            Ok(f) => f,
            Err(e) => {
                let _ = writeln!(out, "  [{i}] {arrow} <undecodable, {} bytes>: {e}", raw.len());
                continue;
            }
        };
        let _ = writeln!(out, "  [{i}] {arrow} {} ({} bytes)", frame.msg_type, raw.len());
        for (id, v) in frame.fields.iter() {
            let (name, value) = describe_field(frame.msg_type, id, v);
            let _ = writeln!(out, "      0x{id:02x} {name:<14} len {:>5}  {value}", v.len());
        }
        if frame.msg_type == MsgType::ServerHello && found.is_none() {
            found = Some(verdicts(&frame, &transcript, root, policy));
        }
        if frame.msg_type != MsgType::Alert {
            transcript.append(raw);
            let _ = writeln!(out, "      transcript hash {}", hex::encode(transcript.running_hash().as_bytes()));
        }
    }
    let (chain, signature) = match found {
        Some(v) => (v.chain, v.signature),
        None => ("no ServerHello captured".into(), "no ServerHello captured".into()),
    };
    let _ = writeln!(out, "  verdict chain: {chain}");
    let _ = writeln!(out, "  verdict signature: {signature}");
    let _ = writeln!(out, "  verdict auth: {}", s.note("auth").unwrap_or("not reached"));
    out
}

pub fn inspect(a: InspectArgs) -> Result<(), CliError> {
    let policy = ValidationPolicy::from_name(&a.policy).expect("validated by clap");
    let root = a.root.as_ref().map(|p| read_certificate(p).map_err(|e| CliError::input(p, e))).transpose()?;
    let text = std::fs::read_to_string(&a.capture).map_err(|e| CliError::input(&a.capture, e))?;
    let sessions = SessionRecord::parse_all(&text).map_err(|e| CliError::crypto(format!("{}: {e}", a.capture.display())))?;
    if sessions.is_empty() {
        return Err(CliError::crypto(format!("{}: no sessions captured", a.capture.display())));
    }
    let dump: String = sessions.iter().map(|s| dump_session(s, root.as_ref(), policy)).collect();
    crate::emit(&dump);
    Ok(())
}
