//! serve, connect, bench.

use std::io::Write;
use std::net::{SocketAddr, ToSocketAddrs};
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::{Arc, RwLock};
use std::time::Instant;

use qsh_bench::{build_report, render_table, run_benchmark, run_timed, write_csv, write_report, BenchConfig, BenchError};
use qsh_core::certs::{read_certificate, CertChain, ValidationPolicy};
use qsh_core::handshake::{run_client, ClientConfig, Credential, HandshakeMode, NegotiationOffer, Server, ServerConfig, SigningKey};
use qsh_core::kem::{KemAlgorithmId, KemRegistry};
use qsh_core::primitives::QshRng;
use qsh_core::sig::SigAlgorithmId;
use qsh_core::transport::{TcpChannel, DEFAULT_TIMEOUT};
use qsh_core::userstore::UserStore;

use crate::args::{BenchArgs, ClientArgs, ConnectArgs, ServeArgs};
use crate::error::CliError;
use crate::keys::{read_password, read_secret, unix_now};
use crate::rng_from_env;

/// KEM preference when the client names none.
const DEFAULT_KEM_ORDER: [&str; 4] = ["lwe-768", "lwe-1024", "lwe-512", "dh-2048"];

const UNSIGNED_WARNING: &str =
    "WARNING: transcript signatures disabled; a man-in-the-middle can impersonate the server and read passwords";

fn resolve(addr: &str) -> Result<SocketAddr, CliError> {
    addr.to_socket_addrs()
        .map_err(|e| CliError::usage(format!("bad address {addr:?}: {e}")))?
        .next()
        .ok_or_else(|| CliError::usage(format!("address {addr:?} did not resolve")))
}

fn kem_ids(registry: &KemRegistry, names: &[String]) -> Result<Vec<KemAlgorithmId>, CliError> {
    names.iter().map(|n| registry.by_name(n).map_err(CliError::usage)).collect()
}

pub fn serve(a: ServeArgs) -> Result<(), CliError> {
    let registry = Arc::new(KemRegistry::with_defaults());
    let allowed_kems = if a.allow.is_empty() { registry.algorithms() } else { kem_ids(&registry, &a.allow)? };
    let chain = CertChain::read(&a.chain).map_err(|e| CliError::input(&a.chain, e))?;
    let classical = read_secret(&a.classical_key)?;
    let pq = read_secret(&a.pq_key)?;
    let users = UserStore::load(&a.users).map_err(|e| CliError::input(&a.users, e))?;
    let config = ServerConfig {
        registry,
        allowed_kems,
        allowed_modes: HandshakeMode::ALL.to_vec(),
        chain,
        signing_keys: vec![
            Arc::new(SigningKey::new(classical, None)),
            Arc::new(SigningKey::new(pq, Some(a.pq_key.clone()))),
        ],
        sign_transcript: !a.insecure_no_sign,
        users: Arc::new(RwLock::new(users)),
    };
    config.check().map_err(CliError::crypto)?;
    if a.insecure_no_sign {
        eprintln!("{UNSIGNED_WARNING}");
    }
    let mut server = Server::bind(&a.listen, Arc::new(config), rng_from_env()?)
        .map_err(|e| CliError::Transport(format!("cannot listen on {}: {e}", a.listen)))?;
    if let Some(path) = &a.capture {
        server = server.capture_to(path.clone());
    }
    let addr = server.local_addr().map_err(|e| CliError::Transport(e.to_string()))?;
    println!("listening on {addr}");
    let _ = std::io::stdout().flush();
    server.run();
    Ok(())
}

fn policy(name: &str) -> ValidationPolicy {
    ValidationPolicy::from_name(name).expect("validated by clap")
}

/// Builds the client side from flags; `kems` is the offer order.
fn client_config(
    c: &ClientArgs,
    registry: Arc<KemRegistry>,
    kems: Vec<KemAlgorithmId>,
    mode: HandshakeMode,
    rng: &mut QshRng,
) -> Result<ClientConfig, CliError> {
    let password = read_password(&c.password_file)?;
    let trust_root = read_certificate(&c.root).map_err(|e| CliError::input(&c.root, e))?;
    let policy = policy(&c.policy);
    let sig_prefs = match policy {
        ValidationPolicy::PqOnly => vec![SigAlgorithmId::MerkleLamportSha256, SigAlgorithmId::RsaFdh2048],
        _ => vec![SigAlgorithmId::RsaFdh2048, SigAlgorithmId::MerkleLamportSha256],
    };
    let offer = NegotiationOffer::new(kems, sig_prefs, vec![mode], rng.random_array()).map_err(CliError::usage)?;
    if c.insecure_no_sign {
        eprintln!("{UNSIGNED_WARNING}");
    }
    Ok(ClientConfig {
        registry,
        offer,
        mode,
        trust_root,
        policy,
        now: unix_now(),
        require_signed: !c.insecure_no_sign,
        credential: Credential::new(&c.user, &password).map_err(CliError::usage)?,
    })
}

pub fn connect(a: ConnectArgs) -> Result<(), CliError> {
    let registry = Arc::new(KemRegistry::with_defaults());
    let names: Vec<String> = match &a.kem {
        Some(k) => vec![k.clone()],
        None if a.mode.as_deref() == Some("dh") => vec!["dh-2048".into()],
        None => DEFAULT_KEM_ORDER.map(String::from).to_vec(),
    };
    let kems = kem_ids(&registry, &names)?;
    let mode = match &a.mode {
        Some(m) => HandshakeMode::from_name(m).expect("validated by clap"),
        None => HandshakeMode::for_algorithm_name(&names[0]),
    };
    let addr = resolve(&a.addr)?;
    let mut rng = rng_from_env()?;
    let config = client_config(&a.client, registry.clone(), kems, mode, &mut rng)?;
    let leaf_pq_checked = config.policy != ValidationPolicy::ClassicalOnly;

    let start = Instant::now();
    let mut channel =
        TcpChannel::connect(addr, DEFAULT_TIMEOUT).map_err(|e| CliError::Transport(format!("transport: {e}")))?;
    let report = run_client(&mut channel, config, rng.fork())?;
    let elapsed = start.elapsed();

    let n = report.negotiated;
    let signature = n.sig.map_or("none (unsigned transcript)".to_string(), |s| s.name().to_string());
    let certificates = if leaf_pq_checked { "quantum-safe signatures verified" } else { "classical signatures verified" };
    let lines = [
        format!("server: {}", a.addr),
        format!("mode: {}", n.mode),
        format!("kem: {} (0x{:04x})", registry.name(n.kem), n.kem.code()),
        format!("signature: {signature}"),
        format!("policy: {}", a.client.policy),
        "chain: ok".to_string(),
        format!("certificates: {certificates}"),
        format!("user: {}", a.client.user),
        format!("auth: {}", if report.auth.success { "success" } else { "failure" }),
        format!("frames: {}", report.transcript.len()),
        format!("time: {:.3} ms", elapsed.as_secs_f64() * 1e3),
    ];
    crate::emit(&(lines.join("\n") + "\n"));
    if !report.auth.success {
        return Err(CliError::AuthRejected(format!("authentication rejected: {}", report.auth.detail)));
    }
    Ok(())
}

fn bench_error(e: BenchError) -> CliError {
    let inner = match &e {
        BenchError::Warmup(inner) => inner.as_ref(),
        other => other,
    };
    match inner {
        _ if e.is_transport() => CliError::Transport(e.to_string()),
        BenchError::Handshake { cause, .. } if cause.starts_with("authentication rejected") => CliError::AuthRejected(e.to_string()),
        BenchError::Config(_) | BenchError::NoIterations => CliError::Usage(e.to_string()),
        _ => CliError::Crypto(e.to_string()),
    }
}

/// One `qsh connect` child per handshake; only the exit status matters.
fn connect_in_child(exe: &Path, a: &BenchArgs, alg: &str) -> Result<(), BenchError> {
    let mut cmd = Command::new(exe);
    cmd.args(["connect", "--addr", &a.addr, "--user", &a.client.user, "--policy", &a.client.policy, "--kem", alg])
        .arg("--password-file")
        .arg(&a.client.password_file)
        .arg("--root")
        .arg(&a.client.root)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped());
    if a.client.insecure_no_sign {
        cmd.arg("--insecure-no-sign");
    }
    let out = cmd.output()?;
    if out.status.success() {
        return Ok(());
    }
    let reason = String::from_utf8_lossy(&out.stderr).lines().last().unwrap_or("").trim_start_matches("qsh: ").to_string();
    let cause = match out.status.code() {
        Some(3) => format!("transport: {reason}"),
        Some(4) => format!("authentication rejected: {reason}"),
        _ => reason,
    };
    Err(BenchError::Handshake { algorithm: alg.to_string(), iteration: 0, cause })
}

pub fn bench(a: BenchArgs) -> Result<(), CliError> {
    let registry = Arc::new(KemRegistry::with_defaults());
    let ids = kem_ids(&registry, &a.algs)?;
    if let Some(b) = &a.baseline {
        if !a.algs.contains(b) {
            return Err(CliError::usage(format!("--baseline {b} is not among the --alg values")));
        }
    }
    let addr = resolve(&a.addr)?;
    let mut rng = rng_from_env()?;
    let template = client_config(&a.client, registry, ids.clone(), HandshakeMode::for_algorithm_name(&a.algs[0]), &mut rng)?;
    let config = BenchConfig { algorithms: a.algs.clone(), iterations: a.iterations, warmup: a.warmup };

    let samples = if a.fresh_process {
        let exe = std::env::current_exe().map_err(|e| CliError::usage(format!("cannot locate qsh executable: {e}")))?;
        run_timed(&config, |alg, iteration| {
            connect_in_child(&exe, &a, alg).map_err(|e| match e {
                BenchError::Handshake { algorithm, cause, .. } => BenchError::Handshake { algorithm, iteration, cause },
                other => other,
            })
        })
    } else {
        run_benchmark(addr, &config, &template, &mut rng)
    }
    .map_err(bench_error)?;

    write_csv(&samples, &a.csv).map_err(bench_error)?;
    let (report, qq) = build_report(&samples, a.baseline.as_deref()).map_err(bench_error)?;
    let written = write_report(&report, &qq, &a.report).map_err(bench_error)?;
    crate::emit(&format!(
        "{}samples: {} -> {}\nreport: {}\n",
        render_table(&written),
        samples.len(),
        a.csv.display(),
        a.report.display()
    ));
    Ok(())
}
