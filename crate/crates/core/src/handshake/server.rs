use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use crate::certs::CertChain;
use crate::kem::{KemAlgorithmId, KemCiphertext, KemKeyPair, KemRegistry};
use crate::primitives::QshRng;
use crate::sig::{SigAlgorithmId, SigError, SigKeyPair, SignatureValue};
use crate::transport::{Frame, MsgType};
use crate::userstore::UserStore;

use super::keys::{derive_session_keys, open_credentials, seal_auth_result, AuthResult, SessionKeys};
use super::messages::{parse_client_key_share, ClientHello, ServerHello};
use super::{negotiate, HandshakeError, HandshakeMode, Negotiated, Output, Status, Transcript};

/// A transcript-signing key shared by all connections. Stateful keys can be
/// persisted after every signature.
pub struct SigningKey {
    alg: SigAlgorithmId,
    public_key: Vec<u8>,
    key: Mutex<SigKeyPair>,
    persist_to: Option<PathBuf>,
}

impl SigningKey {
    pub fn new(key: SigKeyPair, persist_to: Option<PathBuf>) -> Self {
        Self { alg: key.alg(), public_key: key.public_key().to_vec(), key: Mutex::new(key), persist_to }
    }

    pub fn alg(&self) -> SigAlgorithmId {
        self.alg
    }

    pub fn public_key(&self) -> &[u8] {
        &self.public_key
    }

    pub fn sign(&self, message: &[u8]) -> Result<SignatureValue, SigError> {
        let mut key = self.key.lock().unwrap_or_else(|p| p.into_inner());
        let sig = key.sign(message)?;
        if let Some(path) = &self.persist_to {
            key.write_secret(path)?;
        }
        Ok(sig)
    }
}

pub struct ServerConfig {
    pub registry: Arc<KemRegistry>,
    pub allowed_kems: Vec<KemAlgorithmId>,
    pub allowed_modes: Vec<HandshakeMode>,
    pub chain: CertChain,
    /// Keys whose public halves appear in the leaf certificate.
    pub signing_keys: Vec<Arc<SigningKey>>,
    pub sign_transcript: bool,
    pub users: Arc<RwLock<UserStore>>,
}

impl ServerConfig {
    /// Checks that every signing key matches a public key in the leaf.
    pub fn check(&self) -> Result<(), String> {
        let leaf = &self.chain.leaf().body;
        for k in &self.signing_keys {
            let matches = (leaf.classical_alg == k.alg() && leaf.classical_pub == k.public_key())
                || leaf.pq.as_ref().is_some_and(|pq| pq.alg == k.alg() && pq.public == k.public_key());
            if !matches {
                return Err(format!("{} signing key does not match the leaf certificate", k.alg()));
            }
        }
        if self.sign_transcript && self.signing_keys.is_empty() {
            return Err("transcript signing enabled but no signing key configured".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    AwaitClientHello,
    AwaitClientKeyShare,
    AwaitCredentials,
    Done,
    Failed,
}

impl State {
    fn name(self) -> &'static str {
        match self {
            Self::AwaitClientHello => "AwaitClientHello",
            Self::AwaitClientKeyShare => "AwaitClientKeyShare",
            Self::AwaitCredentials => "AwaitCredentials",
            Self::Done => "Done",
            Self::Failed => "Failed",
        }
    }
}

pub struct ServerHandshake {
    config: Arc<ServerConfig>,
    rng: QshRng,
    state: State,
    transcript: Transcript,
    ephemeral: Option<KemKeyPair>,
    negotiated: Option<Negotiated>,
    keys: Option<SessionKeys>,
    user_id: Option<String>,
}

impl ServerHandshake {
    pub fn new(config: Arc<ServerConfig>, rng: QshRng) -> Self {
        Self {
            config,
            rng,
            state: State::AwaitClientHello,
            transcript: Transcript::new(),
            ephemeral: None,
            negotiated: None,
            keys: None,
            user_id: None,
        }
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

    /// User id presented in the credentials, once decrypted.
    pub fn user_id(&self) -> Option<&str> {
        self.user_id.as_deref()
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
            (State::AwaitClientHello, MsgType::ClientHello) => self.on_client_hello(raw, &frame),
            (State::AwaitClientKeyShare, MsgType::ClientKeyShare) => self.on_client_key_share(raw, &frame),
            (State::AwaitCredentials, MsgType::EncryptedCredentials) => self.on_credentials(raw, &frame),
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

    fn on_client_hello(&mut self, raw: &[u8], frame: &Frame) -> Result<Output, HandshakeError> {
        let ch = ClientHello::from_fields(&frame.fields)?;
        let config = self.config.clone();

        let mode = ch
            .modes
            .iter()
            .copied()
            .find(|m| config.allowed_modes.contains(m) && (*m != HandshakeMode::Kem || ch.key_share.is_some()))
            .ok_or(HandshakeError::NoMutualAlgorithm)?;
        let registered: Vec<KemAlgorithmId> =
            config.allowed_kems.iter().copied().filter(|k| config.registry.get(*k).is_ok()).collect();
        let kem = negotiate(&ch.kem_prefs, &registered).ok_or(HandshakeError::NoMutualAlgorithm)?;
        let signer = if config.sign_transcript {
            let available: Vec<u16> = config.signing_keys.iter().map(|k| k.alg().code()).collect();
            let code = negotiate(&ch.sig_prefs, &available).ok_or(HandshakeError::NoMutualAlgorithm)?;
            config.signing_keys.iter().find(|k| k.alg().code() == code).cloned()
        } else {
            None
        };

        self.transcript.append(raw);
        let mut shared = None;
        let key_material = match mode {
            HandshakeMode::Kem => {
                let (share_alg, pk) = ch.key_share.as_ref().expect("mode requires a key share");
                if *share_alg != kem {
                    // The client committed to a key share for a different
                    // algorithm than the one negotiated.
                    return Err(HandshakeError::NoMutualAlgorithm);
                }
                let (ct, ss) = config.registry.encaps(kem, pk, &mut self.rng)?;
                shared = Some(ss);
                ct.bytes
            }
            HandshakeMode::Dh => {
                let kp = config.registry.keypair(kem, &mut self.rng)?;
                let pk = kp.public_key.clone();
                self.ephemeral = Some(kp);
                pk
            }
        };
        let mut sh = ServerHello {
            mode,
            kem,
            sig: signer.as_ref().map(|s| s.alg()),
            nonce: self.rng.random_array(),
            key_material,
            chain: config.chain.clone(),
            signature: None,
        };
        if let Some(signer) = &signer {
            let span = self.transcript.hash_with(&sh.unsigned_frame().encode());
            sh.signature = Some(signer.sign(span.as_bytes())?.bytes);
        }
        let sh_bytes = sh.to_frame().encode();
        self.transcript.append(&sh_bytes);
        self.negotiated = Some(Negotiated { mode, kem, sig: sh.sig });

        match shared {
            Some(ss) => {
                self.keys = Some(derive_session_keys(&ss, &self.transcript.running_hash(), kem, mode));
                self.state = State::AwaitCredentials;
            }
            None => self.state = State::AwaitClientKeyShare,
        }
        Ok(Output::cont(vec![sh_bytes]))
    }

    fn on_client_key_share(&mut self, raw: &[u8], frame: &Frame) -> Result<Output, HandshakeError> {
        let ct = parse_client_key_share(&frame.fields)?;
        let negotiated = self.negotiated.expect("set with ServerHello");
        let kp = self.ephemeral.take().expect("DH flow keeps an ephemeral key");
        let ss = self.config.registry.decaps(negotiated.kem, &kp.secret_key, &KemCiphertext { alg: negotiated.kem, bytes: ct })?;
        self.transcript.append(raw);
        self.keys = Some(derive_session_keys(&ss, &self.transcript.running_hash(), negotiated.kem, negotiated.mode));
        self.state = State::AwaitCredentials;
        Ok(Output::cont(vec![]))
    }

    fn on_credentials(&mut self, raw: &[u8], frame: &Frame) -> Result<Output, HandshakeError> {
        let keys = self.keys.as_ref().expect("keys exist in AwaitCredentials");
        let cred = open_credentials(&frame.fields, keys, &self.transcript.running_hash())?;
        self.transcript.append(raw);
        let ok = self.config.users.read().unwrap_or_else(|p| p.into_inner()).verify_password(cred.user_id(), cred.password());
        let result = AuthResult::from_verdict(ok);
        let reply = seal_auth_result(&result, keys, &self.transcript.running_hash()).encode();
        self.transcript.append(&reply);
        self.user_id = Some(cred.user_id().to_string());
        self.state = State::Done;
        Ok(Output { send: vec![reply], status: Status::Complete(result) })
    }
}
