//! `qsh`: keys, certificates, users, server, client, benchmark, statistics
//! and capture inspection.

mod args;
mod error;
mod inspect;
mod keys;
mod net;
mod overlay;
mod stats;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use qsh_core::primitives::QshRng;

use args::{CertCommand, Cli, Command, UserCommand};
use error::CliError;

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    match run(argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qsh: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(argv: Vec<OsString>) -> Result<(), CliError> {
    let argv = overlay::apply(argv)?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            return Err(CliError::usage(first.trim_start_matches("error: ")));
        }
    };
    match cli.command {
        Command::Keygen(a) => keys::keygen(a),
        Command::Cert(CertCommand::Issue(a)) => keys::cert_issue(a),
        Command::User(UserCommand::Add(a)) => keys::user_add(a),
        Command::Serve(a) => net::serve(a),
        Command::Connect(a) => net::connect(a),
        Command::Bench(a) => net::bench(a),
        Command::Stats(a) => stats::stats(a),
        Command::Inspect(a) => inspect::inspect(a),
    }
}

/// Writes command output; a closed pipe (`qsh inspect ... | head`) is not
/// an error.
pub fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|()| out.flush());
}

/// RNG from `QSH_SEED` (decimal, `0x` hex, or 64 hex digits), otherwise
/// from the operating system.
pub fn rng_from_env() -> Result<QshRng, CliError> {
    match std::env::var("QSH_SEED") {
        Ok(s) => parse_seed(&s).ok_or_else(|| CliError::usage(format!("QSH_SEED {s:?} is not a valid seed"))),
        Err(_) => QshRng::from_entropy().map_err(CliError::crypto),
    }
}

fn parse_seed(s: &str) -> Option<QshRng> {
    let s = s.trim();
    if let Some(h) = s.strip_prefix("0x") {
        return u64::from_str_radix(h, 16).ok().map(QshRng::seeded);
    }
    if s.len() == 64 {
        let bytes: [u8; 32] = hex::decode(s).ok()?.try_into().ok()?;
        return Some(QshRng::from_seed_bytes(bytes));
    }
    s.parse().ok().map(QshRng::seeded)
}
