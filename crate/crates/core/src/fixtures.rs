//! Ready-made PKI, user store and configs for tests and demos. Keys come
//! from fixed seeds; never use them for anything real.

use std::collections::VecDeque;
use std::sync::{Arc, OnceLock, RwLock};
use std::thread;

use crate::certs::{issue, CertChain, Certificate, CertificateBody, PqKey, ValidationPolicy};
use crate::handshake::{
    run_client, serve_connection, AuthResult, ClientConfig, ClientHandshake, ClientReport, Credential, HandshakeError, HandshakeMode, NegotiationOffer, ServerConfig,
    ServerHandshake, ServerReport, SessionKeys, SigningKey, Status,
};
use crate::kem::{KemAlgorithmId, KemRegistry};
use crate::primitives::QshRng;
use crate::sig::{SigAlgorithmId, SigKeyPair};
use crate::transport::mitm::{mitm_run, AttackLog, Strategy};
use crate::transport::{memory_pair, Direction, Frame};
use crate::userstore::{UserStore, MIN_ITERATIONS};

/// Validation time used with fixture certificates.
pub const FIXTURE_NOW: u64 = 1_700_000_000;
pub const FIXTURE_NOT_AFTER: u64 = 4_000_000_000;
pub const FIXTURE_USER: &str = "alice";
pub const FIXTURE_PASSWORD: &str = "correct horse battery staple";

/// Root CA and a leaf, both carrying RSA and Merkle keys.
pub struct TestPki {
    pub root: Certificate,
    pub chain: CertChain,
    pub leaf_rsa: SigKeyPair,
    pub leaf_merkle: SigKeyPair,
}

struct Cached {
    root: Certificate,
    chain: CertChain,
    leaf_rsa: Vec<u8>,
    leaf_merkle: Vec<u8>,
}

pub fn body(subject: &str, issuer: &str, classical: &SigKeyPair, pq: Option<&SigKeyPair>, is_ca: bool) -> CertificateBody {
    let mut serial = [0u8; 8];
    let h = crate::primitives::hash(subject.as_bytes());
    serial.copy_from_slice(&h.as_bytes()[..8]);
    CertificateBody {
        subject: subject.into(),
        issuer: issuer.into(),
        serial,
        not_before: FIXTURE_NOW - 86_400,
        not_after: FIXTURE_NOT_AFTER,
        classical_alg: classical.alg(),
        classical_pub: classical.public_key().to_vec(),
        pq: pq.map(|k| PqKey { alg: k.alg(), public: k.public_key().to_vec() }),
        is_ca,
    }
}

fn build() -> Cached {
    let mut rng = QshRng::seeded(0x0F1C_70E5);
    let mut gen = |alg| SigKeyPair::generate(alg, &mut rng).expect("fixture key generation");
    let mut root_c = gen(SigAlgorithmId::RsaFdh2048);
    let mut root_q = gen(SigAlgorithmId::MerkleLamportSha256);
    let leaf_c = gen(SigAlgorithmId::RsaFdh2048);
    let leaf_q = gen(SigAlgorithmId::MerkleLamportSha256);
    let root_body = body("qsh-root", "qsh-root", &root_c, Some(&root_q), true);
    let root = issue(&mut root_c, Some(&mut root_q), root_body).expect("root");
    let leaf_body = body("qsh-server", "qsh-root", &leaf_c, Some(&leaf_q), false);
    let leaf = issue(&mut root_c, Some(&mut root_q), leaf_body).expect("leaf");
    Cached {
        chain: CertChain::new(vec![leaf, root.clone()]).expect("chain"),
        root,
        leaf_rsa: leaf_c.secret_key_file().encode(),
        leaf_merkle: leaf_q.secret_key_file().encode(),
    }
}

impl TestPki {
    /// Generated once per process; each call returns fresh key objects, so
    /// Merkle state is not shared between callers.
    pub fn shared() -> Self {
        static CACHE: OnceLock<Cached> = OnceLock::new();
        let c = CACHE.get_or_init(build);
        let key = |bytes: &[u8]| {
            let kf = crate::keyfile::KeyFile::decode(bytes).expect("cached key file");
            SigKeyPair::from_secret_key_file(&kf).expect("cached key")
        };
        Self { root: c.root.clone(), chain: c.chain.clone(), leaf_rsa: key(&c.leaf_rsa), leaf_merkle: key(&c.leaf_merkle) }
    }

    pub fn signing_keys(self) -> (Certificate, CertChain, Vec<Arc<SigningKey>>) {
        let keys = vec![Arc::new(SigningKey::new(self.leaf_rsa, None)), Arc::new(SigningKey::new(self.leaf_merkle, None))];
        (self.root, self.chain, keys)
    }
}

/// Store holding [`FIXTURE_USER`] with the minimum iteration count.
pub fn user_store() -> UserStore {
    let mut store = UserStore::new();
    store
        .add_user(FIXTURE_USER, FIXTURE_PASSWORD, MIN_ITERATIONS, &mut QshRng::seeded(7))
        .expect("fixture user");
    store
}

/// Server allowing every registered KEM in both modes.
pub fn server_config(registry: Arc<KemRegistry>, sign: bool) -> (Certificate, ServerConfig) {
    let (root, chain, signing_keys) = TestPki::shared().signing_keys();
    let config = ServerConfig {
        allowed_kems: registry.algorithms(),
        registry,
        allowed_modes: HandshakeMode::ALL.to_vec(),
        chain,
        signing_keys,
        sign_transcript: sign,
        users: Arc::new(RwLock::new(user_store())),
    };
    (root, config)
}

/// Client offering a single KEM in a single mode.
pub fn client_config(
    registry: Arc<KemRegistry>,
    root: Certificate,
    kem: KemAlgorithmId,
    mode: HandshakeMode,
    password: &str,
    rng: &mut QshRng,
) -> ClientConfig {
    let offer = NegotiationOffer::new(
        vec![kem],
        vec![SigAlgorithmId::RsaFdh2048, SigAlgorithmId::MerkleLamportSha256],
        vec![mode],
        rng.random_array(),
    )
    .expect("valid offer");
    ClientConfig {
        registry,
        offer,
        mode,
        trust_root: root,
        policy: ValidationPolicy::HybridBoth,
        now: FIXTURE_NOW,
        require_signed: true,
        credential: Credential::new(FIXTURE_USER, password).expect("credential"),
    }
}

/// Result of [`exchange`]: every frame in delivery order and each side's
/// final status.
pub struct Exchange {
    pub frames: Vec<(Direction, Vec<u8>)>,
    pub client: Option<Status>,
    pub server: Option<Status>,
    pub client_keys: Option<SessionKeys>,
    pub server_keys: Option<SessionKeys>,
}

impl Exchange {
    pub fn client_ok(&self) -> Option<&AuthResult> {
        match &self.client {
            Some(Status::Complete(r)) => Some(r),
            _ => None,
        }
    }

    pub fn server_ok(&self) -> Option<&AuthResult> {
        match &self.server {
            Some(Status::Complete(r)) => Some(r),
            _ => None,
        }
    }

    pub fn client_error(&self) -> Option<&HandshakeError> {
        match &self.client {
            Some(Status::Failed(e)) => Some(e),
            _ => None,
        }
    }

    pub fn server_error(&self) -> Option<&HandshakeError> {
        match &self.server {
            Some(Status::Failed(e)) => Some(e),
            _ => None,
        }
    }

    /// Alert codes seen on the wire, with the direction they travelled.
    pub fn alerts(&self) -> Vec<(Direction, u8)> {
        self.frames
            .iter()
            .filter_map(|(d, raw)| Frame::decode(raw).ok().and_then(|f| f.alert_code()).map(|c| (*d, c)))
            .collect()
    }
}

/// Runs both state machines in lockstep without threads or sockets.
/// `tamper` sees each frame (delivery index, direction, bytes) before the
/// receiving side does and may rewrite it.
pub fn exchange(
    client: ClientConfig,
    client_rng: QshRng,
    server: Arc<ServerConfig>,
    server_rng: QshRng,
    mut tamper: impl FnMut(usize, Direction, &mut Vec<u8>),
) -> Exchange {
    let (mut c, hello) = ClientHandshake::start(client, client_rng).expect("valid client config");
    let mut s = ServerHandshake::new(server, server_rng);
    let mut queue = VecDeque::from([(Direction::ClientToServer, hello)]);
    let mut ex = Exchange { frames: vec![], client: None, server: None, client_keys: None, server_keys: None };
    while let Some((dir, mut bytes)) = queue.pop_front() {
        tamper(ex.frames.len(), dir, &mut bytes);
        let (out, reply_dir) = match dir {
            Direction::ClientToServer => (s.handle(&bytes), Direction::ServerToClient),
            Direction::ServerToClient => (c.handle(&bytes), Direction::ClientToServer),
        };
        ex.frames.push((dir, bytes));
        queue.extend(out.send.into_iter().map(|f| (reply_dir, f)));
        if !matches!(out.status, Status::Continue | Status::Ignored) {
            match dir {
                Direction::ClientToServer => ex.server = Some(out.status),
                Direction::ServerToClient => ex.client = Some(out.status),
            }
        }
        // Keys are dropped on failure, so look after every step.
        if let Some(k) = c.session_keys() {
            ex.client_keys = Some(k.clone());
        }
        if let Some(k) = s.session_keys() {
            ex.server_keys = Some(k.clone());
        }
    }
    ex
}

/// Signed lwe-768 KEM-flow handshake with fixed seeds. The frames are a
/// frozen golden vector.
pub fn seeded_kem_handshake() -> Vec<(Direction, Vec<u8>)> {
    let registry = Arc::new(KemRegistry::with_defaults());
    let (root, server) = server_config(registry.clone(), true);
    let mut crng = QshRng::seeded(0xC11E);
    let client = client_config(registry, root, KemAlgorithmId::LWE_768, HandshakeMode::Kem, FIXTURE_PASSWORD, &mut crng);
    let ex = exchange(client, crng, Arc::new(server), QshRng::seeded(0x5E4E), |_, _, _| {});
    assert!(ex.client_ok().is_some_and(|r| r.success), "seeded handshake failed");
    ex.frames
}

/// Capture text: one `C2S <hex>` / `S2C <hex>` line per frame.
pub fn render_frames(frames: &[(Direction, Vec<u8>)]) -> String {
    frames.iter().map(|(d, b)| format!("{} {}\n", d.label(), hex::encode(b))).collect()
}

/// Outcome of one client / attacker / server run over in-memory channels.
pub struct MitmOutcome {
    pub log: AttackLog,
    pub client: Result<ClientReport, HandshakeError>,
    pub server: Result<ServerReport, HandshakeError>,
}

/// Runs a fixture client and server with an interceptor between them.
/// `sign` controls both the server's transcript signing and whether the
/// client insists on it.
pub fn mitm_scenario(
    registry: Arc<KemRegistry>,
    kem: KemAlgorithmId,
    mode: HandshakeMode,
    sign: bool,
    strategy: Strategy,
    seed: u64,
) -> MitmOutcome {
    let (root, server) = server_config(registry.clone(), sign);
    let server = Arc::new(server);
    let mut crng = QshRng::seeded(seed);
    let mut client = client_config(registry.clone(), root, kem, mode, FIXTURE_PASSWORD, &mut crng);
    client.require_signed = sign;
    let (mut client_end, mut to_client) = memory_pair();
    let (mut to_server, mut server_end) = memory_pair();
    let server_thread = thread::spawn(move || serve_connection(&mut server_end, server, QshRng::seeded(seed ^ 0x5E4E)));
    let client_thread = thread::spawn(move || run_client(&mut client_end, client, crng));
    let mut arng = QshRng::seeded(seed ^ 0xA77A);
    let log = mitm_run(&mut to_client, &mut to_server, strategy, &registry, &mut arng).expect("relay transport");
    drop((to_client, to_server));
    MitmOutcome {
        log,
        client: client_thread.join().expect("client thread"),
        server: server_thread.join().expect("server thread"),
    }
}
