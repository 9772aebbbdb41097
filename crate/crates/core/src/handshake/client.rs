use std::sync::Arc;

use crate::certs::{validate_chain, Certificate, ValidationPolicy};
use crate::kem::{KemCiphertext, KemKeyPair, KemRegistry};
use crate::primitives::QshRng;
use crate::sig::{verify, SignatureValue};
use crate::transport::{Frame, MsgType};

use super::keys::{derive_session_keys, open_auth_result, seal_credentials, Credential, SessionKeys};
use super::messages::{client_key_share_frame, ClientHello, ServerHello};
use super::{HandshakeError, HandshakeMode, Negotiated, NegotiationOffer, Output, Status, Transcript};

#[derive(Clone)]
pub struct ClientConfig {
    pub registry: Arc<KemRegistry>,
    pub offer: NegotiationOffer,
    /// Flow the client prepares for; must be among `offer.modes()`. The
    /// KEM flow sends a key share for the first KEM preference.
    pub mode: HandshakeMode,
    pub trust_root: Certificate,
    pub policy: ValidationPolicy,
    /// Validation time, seconds since the epoch.
    pub now: u64,
    /// Abort if the server does not sign the transcript. Turning this off
    /// re-opens the classic man-in-the-middle hole.
    pub require_signed: bool,
    pub credential: Credential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    AwaitServerHello,
    AwaitAuthResult,
    Done,
    Failed,
}

impl State {
    fn name(self) -> &'static str {
        match self {
            Self::AwaitServerHello => "AwaitServerHello",
            Self::AwaitAuthResult => "AwaitAuthResult",
            Self::Done => "Done",
            Self::Failed => "Failed",
        }
    }
}

pub struct ClientHandshake {
    config: ClientConfig,
    rng: QshRng,
    state: State,
    transcript: Transcript,
    hello: ClientHello,
    ephemeral: Option<KemKeyPair>,
    negotiated: Option<Negotiated>,
    keys: Option<SessionKeys>,
}

impl ClientHandshake {
    /// Builds the ClientHello. Returns the machine and the encoded frame to
    /// send.
    pub fn start(config: ClientConfig, mut rng: QshRng) -> Result<(Self, Vec<u8>), HandshakeError> {
        let offer = &config.offer;
        if !offer.modes().contains(&config.mode) {
            return Err(HandshakeError::InvalidOffer("mode hint not among offered modes"));
        }
        let ephemeral = match config.mode {
            HandshakeMode::Kem => Some(config.registry.keypair(offer.kem_prefs()[0], &mut rng)?),
            HandshakeMode::Dh => None,
        };
        let hello = ClientHello {
            modes: offer.modes().to_vec(),
            kem_prefs: offer.kem_prefs().to_vec(),
            sig_prefs: offer.sig_prefs().iter().map(|s| s.code()).collect(),
            nonce: *offer.client_nonce(),
            key_share: ephemeral.as_ref().map(|kp| (kp.alg, kp.public_key.clone())),
        };
        let bytes = hello.to_frame().encode();
        let mut transcript = Transcript::new();
        transcript.append(&bytes);
        let machine = Self {
            config,
            rng,
            state: State::AwaitServerHello,
            transcript,
            hello,
            ephemeral,
            negotiated: None,
            keys: None,
        };
        Ok((machine, bytes))
    }

    pub fn state_name(&self) -> &'static str {
        self.state.name()
    }

    pub fn is_finished(&self) -> bool {
        matches!(self.state, State::Done | State::Failed)
    }

    pub fn negotiated(&self) -> Option<Negotiated> {
        self.negotiated
    }

    pub fn session_keys(&self) -> Option<&SessionKeys> {
        self.keys.as_ref()
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn handle(&mut self, raw: &[u8]) -> Output {
        let frame = match Frame::decode(raw) {
            Ok(f) => f,
            Err(e) => return self.fail(HandshakeError::Malformed(e.to_string())),
        };
        if frame.msg_type == MsgType::Alert {
            if self.is_finished() {
                return Output { send: vec![], status: Status::Ignored };
            }
            self.abandon();
            let code = frame.alert_code().unwrap_or(0);
            return Output { send: vec![], status: Status::Failed(HandshakeError::PeerAlert(code)) };
        }
        let result = match (self.state, frame.msg_type) {
            (State::AwaitServerHello, MsgType::ServerHello) => self.on_server_hello(raw, &frame),
            (State::AwaitAuthResult, MsgType::AuthResult) => self.on_auth_result(raw, &frame),
            (state, t) => Err(HandshakeError::UnexpectedMessage { state: state.name(), msg_type: t.name() }),
        };
        result.unwrap_or_else(|e| self.fail(e))
    }

    fn abandon(&mut self) {
        self.state = State::Failed;
        self.keys = None;
        self.ephemeral = None;
    }

    fn fail(&mut self, err: HandshakeError) -> Output {
        self.abandon();
        let send = err.alert_code().map(|c| Frame::alert(c).encode()).into_iter().collect();
        Output { send, status: Status::Failed(err) }
    }

    fn on_server_hello(&mut self, raw: &[u8], frame: &Frame) -> Result<Output, HandshakeError> {
        let sh = ServerHello::from_fields(&frame.fields)?;
        let offer = &self.config.offer;
        let mode_ok = self.hello.modes.contains(&sh.mode)
            && match sh.mode {
                HandshakeMode::Kem => self.ephemeral.as_ref().is_some_and(|kp| kp.alg == sh.kem),
                HandshakeMode::Dh => true,
            };
        if !mode_ok || !offer.kem_prefs().contains(&sh.kem) {
            return Err(HandshakeError::Malformed("server chose an algorithm or mode that was not offered".into()));
        }
        if let Some(sig) = sh.sig {
            if !offer.sig_prefs().contains(&sig) {
                return Err(HandshakeError::Malformed("server chose a signature algorithm that was not offered".into()));
            }
        }

        validate_chain(&sh.chain, &self.config.trust_root, self.config.policy, self.config.now)
            .map_err(HandshakeError::ChainInvalid)?;

        match (&sh.sig, &sh.signature) {
            (Some(alg), Some(sig_bytes)) => {
                let leaf = &sh.chain.leaf().body;
                let public = if leaf.classical_alg == *alg {
                    Some(&leaf.classical_pub)
                } else {
                    leaf.pq.as_ref().filter(|pq| pq.alg == *alg).map(|pq| &pq.public)
                };
                let signed = self.transcript.hash_with(&sh.unsigned_frame().encode());
                let sig = SignatureValue { alg: *alg, bytes: sig_bytes.clone() };
                if !public.is_some_and(|pk| verify(*alg, pk, signed.as_bytes(), &sig)) {
                    return Err(HandshakeError::TranscriptSignatureInvalid);
                }
            }
            _ if self.config.require_signed => return Err(HandshakeError::SignatureMissing),
            _ => {}
        }

        self.transcript.append(raw);
        let registry = self.config.registry.clone();
        let mut send = Vec::new();
        let ss = match sh.mode {
            HandshakeMode::Kem => {
                let kp = self.ephemeral.take().expect("checked above");
                registry.decaps(sh.kem, &kp.secret_key, &KemCiphertext { alg: sh.kem, bytes: sh.key_material })?
            }
            HandshakeMode::Dh => {
                let (ct, ss) = registry.encaps(sh.kem, &sh.key_material, &mut self.rng)?;
                let cks = client_key_share_frame(&ct.bytes).encode();
                self.transcript.append(&cks);
                send.push(cks);
                ss
            }
        };
        let keys = derive_session_keys(&ss, &self.transcript.running_hash(), sh.kem, sh.mode);
        let creds = seal_credentials(&self.config.credential, &keys, &self.transcript.running_hash()).encode();
        self.transcript.append(&creds);
        send.push(creds);
        self.keys = Some(keys);
        self.negotiated = Some(Negotiated { mode: sh.mode, kem: sh.kem, sig: sh.sig });
        self.state = State::AwaitAuthResult;
        Ok(Output::cont(send))
    }

    fn on_auth_result(&mut self, raw: &[u8], frame: &Frame) -> Result<Output, HandshakeError> {
        let keys = self.keys.as_ref().expect("keys exist in AwaitAuthResult");
        let result = open_auth_result(&frame.fields, keys, &self.transcript.running_hash())?;
        self.transcript.append(raw);
        self.state = State::Done;
        Ok(Output { send: vec![], status: Status::Complete(result) })
    }
}
