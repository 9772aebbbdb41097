#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

pub const PASSWORD: &str = "correct horse battery staple";
pub const USER: &str = "alice";

pub fn qsh() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_qsh"));
    c.env_remove("QSH_SEED");
    c
}

/// Runs `qsh` with a fixed seed and returns the output.
pub fn run(seed: u64, args: &[&str]) -> Output {
    qsh().env("QSH_SEED", seed.to_string()).args(args).output().expect("spawn qsh")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn ok(out: Output, what: &str) -> Output {
    assert_eq!(out.status.code(), Some(0), "{what} failed: {}", stderr(&out));
    out
}

/// Root CA and a server leaf, both hybrid, plus a one-user password file,
/// all created through the CLI.
pub struct Pki {
    pub dir: tempfile::TempDir,
}

impl Pki {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let pki = Self { dir };
        let p = |n: &str| pki.path(n).to_str().unwrap().to_string();
        for (i, (alg, name)) in [
            ("rsa-2048-fdh", "root.rsa"),
            ("merkle-lamport-sha256", "root.mk"),
            ("rsa-2048-fdh", "srv.rsa"),
            ("merkle-lamport-sha256", "srv.mk"),
        ]
        .iter()
        .enumerate()
        {
            ok(run(100 + i as u64, &["keygen", "--alg", alg, "--out", &p(name)]), "keygen");
        }
        ok(
            run(
                200,
                &["cert", "issue", "--subject", "qsh-root", "--self-signed", "--classical-key", &p("root.rsa"), "--pq-key", &p("root.mk"), "--days", "30", "--out", &p("root.crt")],
            ),
            "root cert",
        );
        ok(
            run(
                201,
                &[
                    "cert", "issue", "--subject", "qsh-server", "--issuer-chain", &p("root.crt"),
                    "--issuer-classical-key", &p("root.rsa"), "--issuer-pq-key", &p("root.mk"),
                    "--classical-key", &p("srv.rsa.pub"), "--pq-key", &p("srv.mk.pub"), "--out", &p("chain.crt"),
                ],
            ),
            "leaf cert",
        );
        std::fs::write(pki.path("pw"), format!("{PASSWORD}\n")).unwrap();
        std::fs::write(pki.path("bad"), "not the password\n").unwrap();
        ok(
            run(202, &["user", "add", "--users", &p("users.txt"), "--user", USER, "--password-file", &p("pw"), "--iterations", "1000"]),
            "user add",
        );
        pki
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn p(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }

    /// `qsh serve` on an ephemeral loopback port.
    pub fn serve(&self, extra: &[&str]) -> ServerProc {
        let mut args = vec![
            "serve".to_string(),
            "--listen".into(),
            "127.0.0.1:0".into(),
            "--chain".into(),
            self.p("chain.crt"),
            "--classical-key".into(),
            self.p("srv.rsa"),
            "--pq-key".into(),
            self.p("srv.mk"),
            "--users".into(),
            self.p("users.txt"),
        ];
        args.extend(extra.iter().map(|s| s.to_string()));
        ServerProc::start(&args)
    }

    /// Client flags for `connect` / `bench`.
    pub fn client_args(&self, addr: &str, password_file: &str) -> Vec<String> {
        vec![
            "--addr".into(),
            addr.into(),
            "--user".into(),
            USER.into(),
            "--password-file".into(),
            self.p(password_file),
            "--root".into(),
            self.p("root.crt"),
        ]
    }

    pub fn connect(&self, seed: u64, addr: &str, password_file: &str, extra: &[&str]) -> Output {
        let mut args = vec!["connect".to_string()];
        args.extend(self.client_args(addr, password_file));
        args.extend(extra.iter().map(|s| s.to_string()));
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        run(seed, &args)
    }
}

pub struct ServerProc {
    pub child: Child,
    pub addr: String,
    pub stderr_path: PathBuf,
}

impl ServerProc {
    pub fn start(args: &[String]) -> Self {
        let stderr_path = std::env::temp_dir().join(format!("qsh-serve-{}-{}.err", std::process::id(), rand_suffix()));
        let mut child = qsh()
            .env("QSH_SEED", "300")
            .args(args)
            .stdout(Stdio::piped())
            .stderr(std::fs::File::create(&stderr_path).unwrap())
            .spawn()
            .expect("spawn qsh serve");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let addr = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("serve did not start: {line:?} {}", std::fs::read_to_string(&stderr_path).unwrap_or_default()))
            .to_string();
        Self { child, addr, stderr_path }
    }

    pub fn stderr(&self) -> String {
        std::fs::read_to_string(&self.stderr_path).unwrap_or_default()
    }
}

impl Drop for ServerProc {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
        let _ = std::fs::remove_file(&self.stderr_path);
    }
}

fn rand_suffix() -> u64 {
    use std::sync::atomic::{AtomicU64, Ordering};
    static N: AtomicU64 = AtomicU64::new(0);
    N.fetch_add(1, Ordering::SeqCst)
}

pub fn exists(p: &Path) -> bool {
    p.exists()
}
