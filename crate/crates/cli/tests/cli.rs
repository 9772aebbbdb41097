mod common;

use std::net::TcpListener;

use common::{code, qsh, run, stderr, stdout, Pki, PASSWORD};

fn help(path: &[&str]) -> String {
    let mut args = path.to_vec();
    args.push("--help");
    let out = run(1, &args);
    assert_eq!(code(&out), 0, "{path:?} --help");
    stdout(&out)
}

#[test]
fn help_lists_every_flag() {
    let table: &[(&[&str], &[&str])] = &[
        (&["keygen"], &["--alg", "--out", "--seed", "--config"]),
        (
            &["cert", "issue"],
            &["--subject", "--issuer-chain", "--self-signed", "--classical-key", "--pq-key", "--days", "--out", "--ca", "--issuer-classical-key", "--issuer-pq-key"],
        ),
        (&["user", "add"], &["--users", "--user", "--password-file", "--iterations"]),
        (
            &["serve"],
            &["--listen", "--chain", "--classical-key", "--pq-key", "--users", "--allow", "--insecure-no-sign", "--capture"],
        ),
        (
            &["connect"],
            &["--addr", "--user", "--password-file", "--root", "--policy", "--mode", "--kem", "--insecure-no-sign"],
        ),
        (
            &["bench"],
            &["--addr", "--alg", "--iterations", "--warmup", "--csv", "--report", "--baseline", "--fresh-process", "--user", "--password-file", "--root"],
        ),
        (&["stats"], &["--csv", "--sided", "--baseline", "--report"]),
        (&["inspect"], &["--capture", "--root", "--policy"]),
    ];
    for (path, flags) in table {
        let text = help(path);
        for f in *flags {
            assert!(text.contains(f), "{path:?} help lacks {f}:\n{text}");
        }
    }
    let top = help(&[]);
    for cmd in ["keygen", "cert", "user", "serve", "connect", "bench", "stats", "inspect"] {
        assert!(top.contains(cmd), "top-level help lacks {cmd}");
    }
}

#[test]
fn usage_errors_exit_one_before_side_effects() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("k");
    let o = out_path.to_str().unwrap();
    for args in [
        vec!["keygen", "--alg", "rsa-2048-fdh", "--out", o, "--bogus"],
        vec!["keygen", "--alg", "no-such-alg", "--out", o],
        vec!["keygen", "--alg", "lwe-512", "--out", o, "--seed", "xyz"],
        vec!["keygen", "--out", o],
        vec!["frobnicate"],
        vec!["bench", "--addr", "127.0.0.1:1", "--alg", "lwe-768", "--iterations", "0", "--csv", o, "--report", o, "--user", "u", "--password-file", o, "--root", o],
        vec!["connect", "--addr", "127.0.0.1:1", "--user", "u", "--password-file", o, "--root", o, "--policy", "nope"],
    ] {
        let out = run(1, &args);
        assert_eq!(code(&out), 1, "{args:?}: {}", stderr(&out));
        let err = stderr(&out);
        assert_eq!(err.lines().count(), 1, "one-line reason expected, got {err:?}");
        assert!(!out_path.exists(), "{args:?} created a file");
    }
    let out = qsh().env("QSH_SEED", "not-a-seed").args(["keygen", "--alg", "lwe-512", "--out", o]).output().unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn keygen_is_deterministic_under_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for p in [&a, &b] {
        let out = qsh().args(["keygen", "--alg", "lwe-768", "--out", p.to_str().unwrap(), "--seed", "00ff"]).output().unwrap();
        assert_eq!(code(&out), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let pubkey = std::fs::read(dir.path().join("a.pub")).unwrap();
    // alg code 0x0102, length 1184
    assert_eq!(&pubkey[..6], &[0x01, 0x02, 0, 0, 0x04, 0xA0]);
    assert_eq!(pubkey.len(), 6 + 1184);
}

#[test]
fn connect_outcomes_and_exit_codes() {
    let pki = Pki::new();
    let server = pki.serve(&[]);

    let ok = pki.connect(7, &server.addr, "pw", &["--policy", "hybrid"]);
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    let report = stdout(&ok);
    for line in ["mode: kem", "kem: lwe-768 (0x0102)", "signature: rsa-2048-fdh", "policy: hybrid", "chain: ok", "auth: success"] {
        assert!(report.lines().any(|l| l == line), "missing {line:?} in\n{report}");
    }

    // Stable report apart from the timing line.
    let strip = |s: String| s.lines().filter(|l| !l.starts_with("time:")).collect::<Vec<_>>().join("\n");
    let again = pki.connect(7, &server.addr, "pw", &["--policy", "hybrid"]);
    assert_eq!(strip(stdout(&again)), strip(report.clone()));

    let dh = pki.connect(8, &server.addr, "pw", &["--kem", "dh-2048", "--policy", "pq"]);
    assert_eq!(code(&dh), 0, "{}", stderr(&dh));
    let dh_report = stdout(&dh);
    assert!(dh_report.contains("mode: dh") && dh_report.contains("signature: merkle-lamport-sha256"), "{dh_report}");

    let wrong = pki.connect(9, &server.addr, "bad", &[]);
    assert_eq!(code(&wrong), 4);
    assert!(stdout(&wrong).contains("auth: failure"));
    assert!(stderr(&wrong).contains("authentication rejected"));

    let closed = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().to_string()
    };
    let refused = pki.connect(10, &closed, "pw", &[]);
    assert_eq!(code(&refused), 3, "{}", stderr(&refused));

    // A root the server's chain does not lead to.
    let p = |n: &str| pki.p(n);
    assert_eq!(code(&run(11, &["keygen", "--alg", "rsa-2048-fdh", "--out", &p("other.rsa")])), 0);
    assert_eq!(code(&run(12, &["keygen", "--alg", "merkle-lamport-sha256", "--out", &p("other.mk")])), 0);
    let issued = run(13, &["cert", "issue", "--subject", "qsh-root", "--self-signed", "--classical-key", &p("other.rsa"), "--pq-key", &p("other.mk"), "--out", &p("other.crt")]);
    assert_eq!(code(&issued), 0, "{}", stderr(&issued));
    let mut args = vec!["connect".to_string()];
    args.extend(pki.client_args(&server.addr, "pw"));
    let root_pos = args.iter().position(|a| a == "--root").unwrap();
    args[root_pos + 1] = p("other.crt");
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let untrusted = run(14, &args);
    assert_eq!(code(&untrusted), 2, "{}", stderr(&untrusted));
    assert!(stderr(&untrusted).contains("certificate chain invalid"));
}

#[test]
fn unsigned_server_and_algorithm_allow_list() {
    let pki = Pki::new();
    let server = pki.serve(&["--insecure-no-sign", "--allow", "lwe-512,dh-2048"]);

    let refused = pki.connect(20, &server.addr, "pw", &["--kem", "lwe-512"]);
    assert_eq!(code(&refused), 2, "{}", stderr(&refused));
    assert!(stderr(&refused).contains("did not sign"));

    let accepted = pki.connect(21, &server.addr, "pw", &["--kem", "lwe-512", "--insecure-no-sign"]);
    assert_eq!(code(&accepted), 0, "{}", stderr(&accepted));
    assert!(stdout(&accepted).contains("signature: none"));
    assert!(stderr(&accepted).contains("WARNING"));

    let not_allowed = pki.connect(22, &server.addr, "pw", &["--kem", "lwe-1024", "--insecure-no-sign"]);
    assert_eq!(code(&not_allowed), 2);
    assert!(stderr(&not_allowed).contains("alert 0x01"), "{}", stderr(&not_allowed));

    assert!(server.stderr().contains("WARNING"), "serve must warn about unsigned mode");
}

#[test]
fn config_file_overlay() {
    let pki = Pki::new();
    let server = pki.serve(&[]);
    let cfg = pki.path("client.conf");
    std::fs::write(
        &cfg,
        format!(
            "# client defaults\naddr={}\nuser=alice\npassword-file={}\nroot={}\npolicy=hybrid\n",
            server.addr,
            pki.p("bad"),
            pki.p("root.crt")
        ),
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let rejected = run(30, &["connect", "--config", cfg]);
    assert_eq!(code(&rejected), 4, "{}", stderr(&rejected));
    let overridden = run(31, &["connect", "--config", cfg, "--password-file", &pki.p("pw")]);
    assert_eq!(code(&overridden), 0, "{}", stderr(&overridden));

    std::fs::write(pki.path("bad.conf"), "bogus-flag=1\n").unwrap();
    let unknown = run(32, &["connect", "--config", &pki.p("bad.conf")]);
    assert_eq!(code(&unknown), 1);
}

#[test]
fn inspect_dump_is_faithful_and_redacted() {
    let pki = Pki::new();
    let capture = pki.p("capture.txt");
    let server = pki.serve(&["--capture", &capture]);
    assert_eq!(code(&pki.connect(40, &server.addr, "pw", &[])), 0);
    assert_eq!(code(&pki.connect(41, &server.addr, "bad", &["--kem", "dh-2048"])), 4);
    let deadline = std::time::Instant::now() + std::time::Duration::from_secs(10);
    while std::fs::read_to_string(&capture).unwrap_or_default().lines().filter(|l| *l == "END").count() < 2 {
        assert!(std::time::Instant::now() < deadline, "capture never completed");
        std::thread::sleep(std::time::Duration::from_millis(20));
    }
    drop(server);

    let out = run(42, &["inspect", "--capture", &capture, "--root", &pki.p("root.crt")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let dump = stdout(&out);
    for needle in [
        "ClientHello",
        "ServerHello",
        "ClientKeyShare",
        "EncryptedCredentials",
        "AuthResult",
        "transcript hash",
        "verdict chain: ok (hybrid, given root)",
        "verdict signature: ok (rsa-2048-fdh)",
        "verdict auth: success",
        "verdict auth: failure",
        "<redacted:",
    ] {
        assert!(dump.contains(needle), "dump lacks {needle:?}");
    }

    // Known secrets: the password and both server secret keys.
    let mut secrets: Vec<Vec<u8>> = vec![PASSWORD.as_bytes().to_vec()];
    for key in ["srv.rsa", "srv.mk"] {
        let raw = std::fs::read(pki.path(key)).unwrap();
        let len = u32::from_be_bytes(raw[2..6].try_into().unwrap()) as usize;
        secrets.push(raw[6..6 + len].to_vec());
    }
    let lower = dump.to_lowercase();
    for secret in &secrets {
        assert!(!dump.as_bytes().windows(secret.len()).any(|w| w == secret.as_slice()), "raw secret in dump");
        for window in secret.windows(12.min(secret.len())) {
            assert!(!lower.contains(&hex::encode(window)), "hex of secret material in dump");
        }
    }

    let missing = run(43, &["inspect", "--capture", &pki.p("nope.txt")]);
    assert_eq!(code(&missing), 1);
    std::fs::write(pki.path("junk.txt"), "SESSION x\nC2S zz\n").unwrap();
    assert_eq!(code(&run(44, &["inspect", "--capture", &pki.p("junk.txt")])), 2);
}

#[test]
fn bench_and_stats_commands() {
    let pki = Pki::new();
    let server = pki.serve(&[]);
    let csv = pki.p("samples.csv");
    let report = pki.p("report.toml");
    let mut args: Vec<String> = vec!["bench".into()];
    args.extend(pki.client_args(&server.addr, "pw"));
    args.extend(
        ["--alg", "lwe-768", "--alg", "dh-2048", "--iterations", "3", "--warmup", "1", "--csv", &csv, "--report", &report]
            .map(String::from),
    );
    let argv: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = run(50, &argv);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert_eq!(text.lines().next(), Some("algorithm,iteration,duration_ns"));
    let rep = std::fs::read_to_string(&report).unwrap();
    assert!(rep.contains("lwe-768") && rep.contains("dh-2048") && rep.contains("p_one_sided"));
    assert!(pki.path("report.qq-lwe-768-vs-dh-2048.txt").exists());

    let fresh_csv = pki.p("fresh.csv");
    let mut fresh = args.clone();
    let csv_pos = fresh.iter().position(|a| a == "--csv").unwrap();
    fresh[csv_pos + 1] = fresh_csv.clone();
    fresh.push("--fresh-process".into());
    let it_pos = fresh.iter().position(|a| a == "--iterations").unwrap();
    fresh[it_pos + 1] = "2".into();
    let argv: Vec<&str> = fresh.iter().map(String::as_str).collect();
    let out = run(51, &argv);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(std::fs::read_to_string(&fresh_csv).unwrap().lines().count(), 5);

    let mut wrong = args.clone();
    let pw_pos = wrong.iter().position(|a| a == "--password-file").unwrap();
    wrong[pw_pos + 1] = pki.p("bad");
    let argv: Vec<&str> = wrong.iter().map(String::as_str).collect();
    assert_eq!(code(&run(52, &argv)), 4);

    let stats = run(53, &["stats", "--csv", &csv, "--sided", "two"]);
    assert_eq!(code(&stats), 0, "{}", stderr(&stats));
    let s = stdout(&stats);
    assert!(s.contains("p(two-sided)") && !s.contains("p(one-sided"), "{s}");
    assert!(s.contains("[exact]"));

    assert_eq!(code(&run(54, &["stats", "--csv", &pki.p("missing.csv")])), 1);
    std::fs::write(pki.path("bad.csv"), "algorithm,iteration,duration_ns\nx,0,abc\n").unwrap();
    assert_eq!(code(&run(55, &["stats", "--csv", &pki.p("bad.csv")])), 2);
}
