use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use super::messages::{client_hello, server_hello, ClientHello, ServerHello};
use super::*;
use crate::fixtures::{self, client_config, exchange, server_config, Exchange, FIXTURE_PASSWORD};
use crate::kem::{KemAlgorithmId, KemRegistry, MockKem};
use crate::primitives::{hash, kdf, QshRng};
use crate::sig::{verify, SigAlgorithmId, SignatureValue};
use crate::transport::{alert, Direction, Frame, MsgType};
use crate::userstore::{UserStore, MIN_ITERATIONS};

const MOCK: KemAlgorithmId = KemAlgorithmId(0x7F01);

fn registry() -> Arc<KemRegistry> {
    static R: OnceLock<Arc<KemRegistry>> = OnceLock::new();
    R.get_or_init(|| {
        let mut r = KemRegistry::with_defaults();
        r.register(Arc::new(MockKem::new(MOCK, "mock-7-13", 7, 13))).unwrap();
        Arc::new(r)
    })
    .clone()
}

fn server(sign: bool) -> (crate::certs::Certificate, Arc<ServerConfig>) {
    let (root, config) = server_config(registry(), sign);
    (root, Arc::new(config))
}

fn run(kem: KemAlgorithmId, mode: HandshakeMode, sign: bool, seed: u64) -> Exchange {
    let (root, srv) = server(sign);
    let mut rng = QshRng::seeded(seed);
    let mut client = client_config(registry(), root, kem, mode, FIXTURE_PASSWORD, &mut rng);
    client.require_signed = sign;
    exchange(client, rng, srv, QshRng::seeded(seed ^ 0xFFFF), |_, _, _| {})
}

fn frame_type(raw: &[u8]) -> MsgType {
    Frame::decode(raw).unwrap().msg_type
}

#[test]
fn honest_runs_agree_on_keys() {
    let kems = KemAlgorithmId::BUILTIN;
    let mut rng = QshRng::seeded(500);
    for i in 0..500u64 {
        let pick = rng.random_array::<3>();
        // dh-2048 is the slow one; keep it to about one run in eight.
        let kem = if pick[0].is_multiple_of(8) { kems[0] } else { kems[1 + pick[0] as usize % 3] };
        let mode = HandshakeMode::ALL[pick[1] as usize % 2];
        let sign = pick[2].is_multiple_of(2);
        let ex = run(kem, mode, sign, 1000 + i);
        assert!(ex.client_ok().is_some_and(|r| r.success), "run {i}: {:?}", ex.client);
        assert!(ex.server_ok().is_some_and(|r| r.success), "run {i}: {:?}", ex.server);
        let (c, s) = (ex.client_keys.unwrap(), ex.server_keys.unwrap());
        assert_eq!(c, s, "run {i}");
        assert_eq!((c.kem, c.mode), (kem, mode));
    }
}

#[test]
fn every_combination_completes() {
    for kem in KemAlgorithmId::BUILTIN {
        for mode in HandshakeMode::ALL {
            for sign in [true, false] {
                let ex = run(kem, mode, sign, 7);
                assert!(ex.client_ok().is_some_and(|r| r.success), "{kem} {mode} {sign}: {:?}", ex.client);
                let expected = match mode {
                    HandshakeMode::Kem => vec![MsgType::ClientHello, MsgType::ServerHello, MsgType::EncryptedCredentials, MsgType::AuthResult],
                    HandshakeMode::Dh => vec![
                        MsgType::ClientHello,
                        MsgType::ServerHello,
                        MsgType::ClientKeyShare,
                        MsgType::EncryptedCredentials,
                        MsgType::AuthResult,
                    ],
                };
                assert_eq!(ex.frames.iter().map(|(_, f)| frame_type(f)).collect::<Vec<_>>(), expected);
            }
        }
    }
}

#[test]
fn session_key_matches_schedule() {
    // Recompute the key from the transcript with an independent hash of
    // the concatenated frames.
    let registry = registry();
    let (root, srv) = server(true);
    let mut rng = QshRng::seeded(3);
    let client = client_config(registry.clone(), root, MOCK, HandshakeMode::Kem, FIXTURE_PASSWORD, &mut rng);
    let ex = exchange(client, rng, srv, QshRng::seeded(4), |_, _, _| {});
    let keys = ex.client_keys.clone().unwrap();
    let ch = ClientHello::from_fields(&Frame::decode(&ex.frames[0].1).unwrap().fields).unwrap();
    let sh = ServerHello::from_fields(&Frame::decode(&ex.frames[1].1).unwrap().fields).unwrap();
    // Mock shared secret: hash(pk || ct), public in the clear.
    let mut input = ch.key_share.unwrap().1;
    input.extend_from_slice(&sh.key_material);
    let ss = hash(&input);
    let mut concat = ex.frames[0].1.clone();
    concat.extend_from_slice(&ex.frames[1].1);
    let mut ctx = b"qsh1-session".to_vec();
    ctx.extend_from_slice(hash(&concat).as_bytes());
    assert_eq!(keys.key.as_bytes().as_slice(), kdf(ss.as_bytes(), &ctx, 32).unwrap().as_slice());
}

#[test]
fn kem_client_hello_carries_public_key() {
    let (root, _) = server(true);
    let mut rng = QshRng::seeded(1);
    let cfg = client_config(registry(), root.clone(), KemAlgorithmId::LWE_768, HandshakeMode::Kem, "pw", &mut rng);
    let (_, hello) = ClientHandshake::start(cfg, rng).unwrap();
    let f = Frame::decode(&hello).unwrap();
    assert_eq!(f.fields.get(client_hello::KEY_SHARE).unwrap().len(), 1184);

    let mut rng = QshRng::seeded(1);
    let cfg = client_config(registry(), root, KemAlgorithmId::DH_2048, HandshakeMode::Dh, "pw", &mut rng);
    let (_, hello) = ClientHandshake::start(cfg, rng).unwrap();
    let f = Frame::decode(&hello).unwrap();
    assert!(!f.fields.contains(client_hello::KEY_SHARE));
    assert!(!f.fields.contains(client_hello::KEY_SHARE_ALG));
}

#[test]
fn offer_validation() {
    let n = [0u8; 32];
    let sig = vec![SigAlgorithmId::RsaFdh2048];
    let modes = vec![HandshakeMode::Kem];
    assert!(NegotiationOffer::new(vec![], sig.clone(), modes.clone(), n).is_err());
    assert!(NegotiationOffer::new(vec![MOCK], vec![], modes.clone(), n).is_err());
    assert!(NegotiationOffer::new(vec![MOCK], sig.clone(), vec![], n).is_err());
    assert!(NegotiationOffer::new(vec![MOCK, MOCK], sig.clone(), modes.clone(), n).is_err());
    assert!(NegotiationOffer::new(vec![MOCK], sig, modes, n).is_ok());
}

#[test]
fn client_preference_wins() {
    let (root, srv) = server(true);
    let mut rng = QshRng::seeded(2);
    let mut client = client_config(registry(), root, KemAlgorithmId::LWE_768, HandshakeMode::Dh, FIXTURE_PASSWORD, &mut rng);
    client.offer = NegotiationOffer::new(
        vec![KemAlgorithmId::LWE_768, KemAlgorithmId::DH_2048],
        vec![SigAlgorithmId::RsaFdh2048],
        vec![HandshakeMode::Dh],
        [1; 32],
    )
    .unwrap();
    let ex = exchange(client, rng, srv, QshRng::seeded(3), |_, _, _| {});
    assert_eq!(ex.client_keys.unwrap().kem, KemAlgorithmId::LWE_768);
}

#[test]
fn no_mutual_kem_alerts_0x01() {
    let (root, config) = server_config(registry(), true);
    let config = ServerConfig {
        allowed_kems: vec![KemAlgorithmId::LWE_512, KemAlgorithmId::LWE_768, KemAlgorithmId::LWE_1024],
        ..config
    };
    let mut rng = QshRng::seeded(2);
    let client = client_config(registry(), root, KemAlgorithmId::DH_2048, HandshakeMode::Dh, FIXTURE_PASSWORD, &mut rng);
    let ex = exchange(client, rng, Arc::new(config), QshRng::seeded(3), |_, _, _| {});
    assert!(matches!(ex.server_error(), Some(HandshakeError::NoMutualAlgorithm)));
    assert_eq!(ex.alerts(), vec![(Direction::ServerToClient, alert::NO_MUTUAL_ALGORITHM)]);
    assert!(matches!(ex.client_error(), Some(HandshakeError::PeerAlert(1))));
}

#[test]
fn key_share_for_unchosen_kem_alerts_0x01() {
    let (root, config) = server_config(registry(), true);
    let config = ServerConfig { allowed_kems: vec![KemAlgorithmId::LWE_512, KemAlgorithmId::LWE_768], ..config };
    let mut rng = QshRng::seeded(2);
    let mut client = client_config(registry(), root, KemAlgorithmId::LWE_1024, HandshakeMode::Kem, "pw", &mut rng);
    client.offer = NegotiationOffer::new(
        vec![KemAlgorithmId::LWE_1024, KemAlgorithmId::LWE_768],
        vec![SigAlgorithmId::RsaFdh2048],
        vec![HandshakeMode::Kem],
        [1; 32],
    )
    .unwrap();
    let ex = exchange(client, rng, Arc::new(config), QshRng::seeded(3), |_, _, _| {});
    assert_eq!(ex.alerts(), vec![(Direction::ServerToClient, alert::NO_MUTUAL_ALGORITHM)]);
}

#[test]
fn signature_covers_hello_span() {
    let ex = run(KemAlgorithmId::LWE_512, HandshakeMode::Kem, true, 11);
    let pki = fixtures::TestPki::shared();
    let sh_raw = &ex.frames[1].1;
    let sh = ServerHello::from_fields(&Frame::decode(sh_raw).unwrap().fields).unwrap();
    assert_eq!(sh.sig, Some(SigAlgorithmId::RsaFdh2048));
    // Independently rebuild ServerHello without its signature field.
    let mut f = Frame::decode(sh_raw).unwrap();
    f.fields.remove(server_hello::SIGNATURE);
    let mut span = ex.frames[0].1.clone();
    span.extend_from_slice(&f.encode());
    let sig = SignatureValue { alg: SigAlgorithmId::RsaFdh2048, bytes: sh.signature.unwrap() };
    assert!(verify(SigAlgorithmId::RsaFdh2048, pki.leaf_rsa.public_key(), hash(&span).as_bytes(), &sig));
    assert!(!verify(SigAlgorithmId::RsaFdh2048, pki.leaf_rsa.public_key(), hash(&ex.frames[0].1).as_bytes(), &sig));
}

#[test]
fn merkle_transcript_signature() {
    let (root, srv) = server(true);
    let mut rng = QshRng::seeded(5);
    let mut client = client_config(registry(), root, KemAlgorithmId::LWE_512, HandshakeMode::Kem, FIXTURE_PASSWORD, &mut rng);
    client.offer = NegotiationOffer::new(
        vec![KemAlgorithmId::LWE_512],
        vec![SigAlgorithmId::MerkleLamportSha256],
        vec![HandshakeMode::Kem],
        [9; 32],
    )
    .unwrap();
    client.policy = crate::certs::ValidationPolicy::PqOnly;
    let ex = exchange(client, rng, srv, QshRng::seeded(6), |_, _, _| {});
    assert!(ex.client_ok().is_some_and(|r| r.success));
    let sh = ServerHello::from_fields(&Frame::decode(&ex.frames[1].1).unwrap().fields).unwrap();
    assert_eq!(sh.sig, Some(SigAlgorithmId::MerkleLamportSha256));
}

#[test]
fn wrong_password_and_unknown_user_look_alike() {
    let (root, srv) = server(true);
    let mut rng = QshRng::seeded(8);
    let client = client_config(registry(), root.clone(), MOCK, HandshakeMode::Kem, "wrong", &mut rng);
    let bad_pw = exchange(client, rng, srv.clone(), QshRng::seeded(9), |_, _, _| {});
    let mut rng = QshRng::seeded(8);
    let mut client = client_config(registry(), root, MOCK, HandshakeMode::Kem, FIXTURE_PASSWORD, &mut rng);
    client.credential = Credential::new("mallory", FIXTURE_PASSWORD).unwrap();
    let no_user = exchange(client, rng, srv, QshRng::seeded(9), |_, _, _| {});
    let (a, b) = (bad_pw.client_ok().unwrap(), no_user.client_ok().unwrap());
    assert!(!a.success);
    assert_eq!(a, b);
    assert_eq!(a.detail, AUTH_FAILED_DETAIL);
    assert_eq!(bad_pw.frames.last().unwrap().1.len(), no_user.frames.last().unwrap().1.len());
}

#[test]
fn stripped_signature_is_rejected_when_required() {
    let (root, srv) = server(false);
    let mut rng = QshRng::seeded(12);
    let client = client_config(registry(), root, MOCK, HandshakeMode::Kem, FIXTURE_PASSWORD, &mut rng);
    let ex = exchange(client, rng, srv, QshRng::seeded(13), |_, _, _| {});
    assert!(matches!(ex.client_error(), Some(HandshakeError::SignatureMissing)));
    assert!(ex.client_keys.is_none());
    assert_eq!(ex.alerts(), vec![(Direction::ClientToServer, alert::AUTHENTICATION_FAILED)]);
}

#[test]
fn expired_chain_is_rejected() {
    let (root, srv) = server(true);
    let mut rng = QshRng::seeded(14);
    let mut client = client_config(registry(), root, MOCK, HandshakeMode::Kem, FIXTURE_PASSWORD, &mut rng);
    client.now = fixtures::FIXTURE_NOT_AFTER + 1;
    let ex = exchange(client, rng, srv, QshRng::seeded(15), |_, _, _| {});
    assert!(matches!(ex.client_error(), Some(HandshakeError::ChainInvalid(_))));
    assert!(ex.client_keys.is_none());
    assert_eq!(ex.alerts(), vec![(Direction::ClientToServer, alert::AUTHENTICATION_FAILED)]);
}

proptest! {
    #[test]
    fn negotiation_picks_first_shared_client_preference(
        client in proptest::sample::subsequence((0u16..40).collect::<Vec<_>>(), 1..20).prop_shuffle(),
        server in proptest::collection::btree_set(0u16..40, 0..20),
    ) {
        let server: Vec<u16> = server.into_iter().collect();
        let got = negotiate(&client, &server);
        let expected = client.iter().copied().find(|c| server.contains(c));
        prop_assert_eq!(got, expected);
        prop_assert_eq!(got, negotiate(&client, &server));
        if let Some(g) = got {
            let pos = client.iter().position(|c| *c == g).unwrap();
            prop_assert!(client[..pos].iter().all(|c| !server.contains(c)));
        }
    }
}

/// One valid-looking frame of every type, taken from an honest DH run.
fn sample_frames() -> Vec<(MsgType, Vec<u8>)> {
    let ex = run(MOCK, HandshakeMode::Dh, true, 21);
    let mut out: Vec<(MsgType, Vec<u8>)> = ex.frames.iter().map(|(_, f)| (frame_type(f), f.clone())).collect();
    out.push((MsgType::Alert, Frame::alert(alert::MALFORMED).encode()));
    assert_eq!(out.len(), MsgType::ALL.len());
    out
}

/// Drives a fresh exchange, returning the client or server machine parked
/// after `steps` frames have been delivered to it.
fn parked_server(mode: HandshakeMode, steps: usize) -> ServerHandshake {
    let (root, srv) = server(true);
    let mut rng = QshRng::seeded(30);
    let client = client_config(registry(), root, MOCK, mode, FIXTURE_PASSWORD, &mut rng);
    let ex = exchange(client, rng, srv.clone(), QshRng::seeded(31), |_, _, _| {});
    let mut s = ServerHandshake::new(srv, QshRng::seeded(31));
    for (_, f) in ex.frames.iter().filter(|(d, _)| *d == Direction::ClientToServer).take(steps) {
        s.handle(f);
    }
    s
}

fn parked_client(mode: HandshakeMode, steps: usize) -> ClientHandshake {
    let (root, srv) = server(true);
    let mut rng = QshRng::seeded(30);
    let client = client_config(registry(), root, MOCK, mode, FIXTURE_PASSWORD, &mut rng);
    let ex = exchange(client.clone(), rng.clone(), srv, QshRng::seeded(31), |_, _, _| {});
    let (mut c, _) = ClientHandshake::start(client, rng).unwrap();
    for (_, f) in ex.frames.iter().filter(|(d, _)| *d == Direction::ServerToClient).take(steps) {
        c.handle(f);
    }
    c
}

fn assert_rejects(out: Output, what: &str) {
    assert!(matches!(out.status, Status::Failed(HandshakeError::UnexpectedMessage { .. })), "{what}: {:?}", out.status);
    assert_eq!(out.send, vec![Frame::alert(alert::MALFORMED).encode()], "{what}");
}

#[test]
fn out_of_order_messages_alert_0x02() {
    let samples = sample_frames();
    let mut checked = 0;
    for mode in HandshakeMode::ALL {
        // Server states reached after 0, 1, 2 (DH only) frames, then Done.
        let server_path: Vec<(usize, Option<MsgType>)> = match mode {
            HandshakeMode::Dh => vec![
                (0, Some(MsgType::ClientHello)),
                (1, Some(MsgType::ClientKeyShare)),
                (2, Some(MsgType::EncryptedCredentials)),
                (3, None),
            ],
            HandshakeMode::Kem => vec![(0, Some(MsgType::ClientHello)), (1, Some(MsgType::EncryptedCredentials)), (2, None)],
        };
        for (steps, legal) in server_path {
            for (t, raw) in &samples {
                if Some(*t) == legal || *t == MsgType::Alert {
                    continue;
                }
                let mut s = parked_server(mode, steps);
                let state = s.state_name();
                assert_rejects(s.handle(raw), &format!("server {mode} {state} {t:?}"));
                checked += 1;
            }
        }
        let client_path = [(0, Some(MsgType::ServerHello)), (1, Some(MsgType::AuthResult)), (2, None)];
        for (steps, legal) in client_path {
            for (t, raw) in &samples {
                if Some(*t) == legal || *t == MsgType::Alert {
                    continue;
                }
                let mut c = parked_client(mode, steps);
                let state = c.state_name();
                assert_rejects(c.handle(raw), &format!("client {mode} {state} {t:?}"));
                checked += 1;
            }
        }
        // Failed is terminal: anything but an Alert is still answered 0x02.
        for (t, raw) in &samples {
            if *t == MsgType::Alert {
                continue;
            }
            let mut s = parked_server(mode, 0);
            s.handle(&Frame::alert(alert::MALFORMED).encode());
            assert_eq!(s.state_name(), "Failed");
            assert_rejects(s.handle(raw), &format!("server failed {t:?}"));
            let mut c = parked_client(mode, 0);
            c.handle(&Frame::alert(alert::MALFORMED).encode());
            assert_rejects(c.handle(raw), &format!("client failed {t:?}"));
            checked += 2;
        }
    }
    assert!(checked > 60);
}

#[test]
fn alerts_abort_live_states_and_are_ignored_after() {
    let a = Frame::alert(alert::DECRYPT_FAILED).encode();
    let mut s = parked_server(HandshakeMode::Dh, 1);
    let out = s.handle(&a);
    assert!(matches!(out.status, Status::Failed(HandshakeError::PeerAlert(4))));
    assert!(out.send.is_empty());
    assert!(s.session_keys().is_none());
    assert!(matches!(s.handle(&a).status, Status::Ignored));
    let mut done = parked_server(HandshakeMode::Kem, 2);
    assert_eq!(done.state_name(), "Done");
    assert!(matches!(done.handle(&a).status, Status::Ignored));
}

#[test]
fn garbage_input_never_panics() {
    let (_, srv) = server(true);
    let mut rng = QshRng::seeded(40);
    for i in 0..2000 {
        let len = rng.random_array::<1>()[0] as usize;
        let mut bytes = rng.random_bytes(len);
        if i % 2 == 0 && bytes.len() >= 6 {
            bytes[..5].copy_from_slice(b"QSH1\x01");
            bytes[5] = 1 + (bytes[5] % 6);
        }
        let mut s = ServerHandshake::new(srv.clone(), QshRng::seeded(i));
        let out = s.handle(&bytes);
        assert!(matches!(out.status, Status::Failed(_)));
    }
}

#[test]
fn password_never_on_the_wire() {
    let mut rng = QshRng::seeded(50);
    for i in 0..8u64 {
        let password = hex::encode(rng.random_array::<16>()); // 32 bytes
        let mut store = UserStore::new();
        store.add_user("alice", &password, MIN_ITERATIONS, &mut rng).unwrap();
        let (root, config) = server_config(registry(), i % 2 == 0);
        let config = ServerConfig { users: Arc::new(std::sync::RwLock::new(store)), ..config };
        let kem = [MOCK, KemAlgorithmId::LWE_512][i as usize % 2];
        let mode = HandshakeMode::ALL[(i / 2) as usize % 2];
        let mut crng = QshRng::seeded(60 + i);
        let mut client = client_config(registry(), root, kem, mode, &password, &mut crng);
        client.require_signed = i % 2 == 0;
        let ex = exchange(client, crng, Arc::new(config), QshRng::seeded(70 + i), |_, _, _| {});
        assert!(ex.client_ok().unwrap().success);
        let capture: Vec<u8> = ex.frames.iter().flat_map(|(_, f)| f.clone()).collect();
        let needle = password.as_bytes();
        assert!(!capture.windows(needle.len()).any(|w| w == needle), "run {i}");
        let hex_capture = hex::encode(&capture);
        assert!(!hex_capture.contains(&hex::encode(needle)));
    }
}

/// Flips one bit inside the named field of a frame and re-encodes it, so
/// the frame still parses.
fn mutate_field(raw: &mut Vec<u8>, field: u8) {
    let mut f = Frame::decode(raw).unwrap();
    let mut v = f.fields.get(field).unwrap().to_vec();
    let mid = v.len() / 2;
    v[mid] ^= 0x01;
    f.fields.insert(field, v);
    *raw = f.encode();
}

#[test]
fn single_frame_mutation_breaks_binding() {
    use super::messages::sealed;
    // (mode, signed, frame index, field, who fails, expected error)
    type Check = fn(&HandshakeError) -> bool;
    let sig_invalid: Check = |e| matches!(e, HandshakeError::TranscriptSignatureInvalid);
    let aead: Check = |e| matches!(e, HandshakeError::AeadFailure);
    let cases: Vec<(HandshakeMode, bool, usize, u8, Direction, Check)> = vec![
        (HandshakeMode::Kem, true, 0, client_hello::NONCE, Direction::ServerToClient, sig_invalid),
        (HandshakeMode::Kem, true, 1, server_hello::NONCE, Direction::ServerToClient, sig_invalid),
        (HandshakeMode::Kem, true, 1, server_hello::KEY_MATERIAL, Direction::ServerToClient, sig_invalid),
        (HandshakeMode::Dh, true, 0, client_hello::NONCE, Direction::ServerToClient, sig_invalid),
        (HandshakeMode::Dh, true, 1, server_hello::KEY_MATERIAL, Direction::ServerToClient, sig_invalid),
        (HandshakeMode::Dh, true, 2, 1, Direction::ClientToServer, aead),
        (HandshakeMode::Dh, true, 3, sealed::CIPHERTEXT, Direction::ClientToServer, aead),
        (HandshakeMode::Dh, true, 4, sealed::TAG, Direction::ServerToClient, aead),
        // Without signatures the running hash still diverges, so the
        // credential AEAD catches it.
        (HandshakeMode::Kem, false, 0, client_hello::NONCE, Direction::ClientToServer, aead),
        (HandshakeMode::Kem, false, 1, server_hello::NONCE, Direction::ClientToServer, aead),
        (HandshakeMode::Dh, false, 0, client_hello::NONCE, Direction::ClientToServer, aead),
        (HandshakeMode::Dh, false, 1, server_hello::NONCE, Direction::ClientToServer, aead),
        (HandshakeMode::Kem, false, 2, sealed::CIPHERTEXT, Direction::ClientToServer, aead),
        (HandshakeMode::Kem, false, 3, sealed::CIPHERTEXT, Direction::ServerToClient, aead),
    ];
    for (n, (mode, sign, index, field, loser, check)) in cases.into_iter().enumerate() {
        let (root, srv) = server(sign);
        let mut rng = QshRng::seeded(80);
        let mut client = client_config(registry(), root, MOCK, mode, FIXTURE_PASSWORD, &mut rng);
        client.require_signed = sign;
        let ex = exchange(client, rng, srv, QshRng::seeded(81), |i, _, raw| {
            if i == index {
                mutate_field(raw, field)
            }
        });
        let err = match loser {
            Direction::ServerToClient => ex.client_error(),
            Direction::ClientToServer => ex.server_error(),
        };
        assert!(err.is_some_and(check), "case {n}: client {:?} server {:?}", ex.client, ex.server);
        assert!(ex.client_ok().is_none(), "case {n}");
    }
}

#[test]
fn replayed_credentials_alert_0x04() {
    let first = run(MOCK, HandshakeMode::Kem, true, 90);
    let captured = first.frames[2].1.clone();
    assert_eq!(frame_type(&captured), MsgType::EncryptedCredentials);
    let (root, srv) = server(true);
    let mut rng = QshRng::seeded(91);
    let client = client_config(registry(), root, MOCK, HandshakeMode::Kem, FIXTURE_PASSWORD, &mut rng);
    let ex = exchange(client, rng, srv, QshRng::seeded(92), |_, _, raw| {
        if frame_type(raw) == MsgType::EncryptedCredentials {
            *raw = captured.clone();
        }
    });
    assert!(matches!(ex.server_error(), Some(HandshakeError::AeadFailure)));
    assert_eq!(ex.alerts(), vec![(Direction::ServerToClient, alert::DECRYPT_FAILED)]);
    assert!(matches!(ex.client_error(), Some(HandshakeError::PeerAlert(4))));
}

#[test]
fn mock_kem_with_odd_sizes_authenticates() {
    for mode in HandshakeMode::ALL {
        let ex = run(MOCK, mode, true, 100);
        assert!(ex.client_ok().is_some_and(|r| r.success), "{mode}");
        let sh = ServerHello::from_fields(&Frame::decode(&ex.frames[1].1).unwrap().fields).unwrap();
        let expected = match mode {
            HandshakeMode::Kem => 13,
            HandshakeMode::Dh => 7,
        };
        assert_eq!(sh.key_material.len(), expected);
    }
}

#[test]
fn seeded_capture_is_stable() {
    let a = fixtures::seeded_kem_handshake();
    let b = fixtures::seeded_kem_handshake();
    assert_eq!(a, b);
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../vectors/handshake_kem_lwe768.txt");
    if std::env::var_os("QSH_REGEN_VECTORS").is_some() {
        std::fs::write(&path, fixtures::render_frames(&a)).unwrap();
    }
    assert_eq!(fixtures::render_frames(&a), std::fs::read_to_string(&path).unwrap());
}

#[test]
fn unknown_fields_are_malformed() {
    let (root, srv) = server(true);
    let mut rng = QshRng::seeded(110);
    let client = client_config(registry(), root, MOCK, HandshakeMode::Kem, FIXTURE_PASSWORD, &mut rng);
    let ex = exchange(client, rng, srv, QshRng::seeded(111), |i, _, raw| {
        if i == 0 {
            let mut f = Frame::decode(raw).unwrap();
            f.fields.insert(0x30, vec![1]);
            *raw = f.encode();
        }
    });
    assert_eq!(ex.alerts(), vec![(Direction::ServerToClient, alert::MALFORMED)]);
}
