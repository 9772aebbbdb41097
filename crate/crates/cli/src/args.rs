use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use qsh_bench::DEFAULT_WARMUP;

#[derive(Debug, Parser)]
#[command(name = "qsh", version, about = "Crypto-agile password authentication over a KEM handshake")]
pub struct Cli {
    /// key=value file supplying defaults; flags on the command line win
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a signature or KEM key pair (public half goes to <out>.pub)
    Keygen(KeygenArgs),
    /// Certificate management
    #[command(subcommand)]
    Cert(CertCommand),
    /// Password file management
    #[command(subcommand)]
    User(UserCommand),
    /// Run the authentication server
    Serve(ServeArgs),
    /// Authenticate once and print a connection report
    Connect(ConnectArgs),
    /// Time repeated handshakes and write CSV plus report
    Bench(BenchArgs),
    /// Recompute statistics from a benchmark CSV
    Stats(StatsArgs),
    /// Dump a captured session transcript
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct KeygenArgs {
    /// rsa-2048-fdh, merkle-lamport-sha256, or a KEM name such as lwe-768
    #[arg(long)]
    pub alg: String,
    /// Secret key path
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Deterministic seed, up to 32 bytes of hex
    #[arg(long, value_name = "HEX")]
    pub seed: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum CertCommand {
    /// Issue a hybrid certificate (classical plus post-quantum signature)
    Issue(CertIssueArgs),
}

#[derive(Debug, Args)]
pub struct CertIssueArgs {
    #[arg(long)]
    pub subject: String,
    /// Chain of the issuing CA, leaf first; its leaf signs the new cert
    #[arg(long, value_name = "PATH", required_unless_present = "self_signed", conflicts_with = "self_signed")]
    pub issuer_chain: Option<PathBuf>,
    /// Sign with the subject's own keys
    #[arg(long)]
    pub self_signed: bool,
    /// Subject classical key (secret key file, or public file when issued by a CA)
    #[arg(long, value_name = "PATH")]
    pub classical_key: PathBuf,
    /// Subject post-quantum key (secret key file, or public file when issued by a CA)
    #[arg(long, value_name = "PATH")]
    pub pq_key: PathBuf,
    /// Issuer classical secret key; required with --issuer-chain
    #[arg(long, value_name = "PATH", requires = "issuer_chain")]
    pub issuer_classical_key: Option<PathBuf>,
    /// Issuer post-quantum secret key; required with --issuer-chain
    #[arg(long, value_name = "PATH", requires = "issuer_chain")]
    pub issuer_pq_key: Option<PathBuf>,
    /// Mark the certificate as a CA (implied by --self-signed)
    #[arg(long)]
    pub ca: bool,
    #[arg(long, default_value_t = 365, value_parser = clap::value_parser!(u64).range(1..=36500))]
    pub days: u64,
    /// Output chain, new certificate first
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum UserCommand {
    /// Add a user to a password file (created if missing)
    Add(UserAddArgs),
}

#[derive(Debug, Args)]
pub struct UserAddArgs {
    #[arg(long, value_name = "PATH")]
    pub users: PathBuf,
    #[arg(long)]
    pub user: String,
    #[arg(long, value_name = "PATH")]
    pub password_file: PathBuf,
    #[arg(long, default_value_t = qsh_core::userstore::DEFAULT_ITERATIONS)]
    pub iterations: u32,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, value_name = "HOST:PORT")]
    pub listen: String,
    /// Server chain, leaf first
    #[arg(long, value_name = "PATH")]
    pub chain: PathBuf,
    /// Classical secret key matching the leaf
    #[arg(long, value_name = "PATH")]
    pub classical_key: PathBuf,
    /// Post-quantum secret key matching the leaf; its state is saved after every signature
    #[arg(long, value_name = "PATH")]
    pub pq_key: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub users: PathBuf,
    /// Comma-separated KEM names to accept (default: all)
    #[arg(long, value_name = "ALG,...", value_delimiter = ',')]
    pub allow: Vec<String>,
    /// Do not sign the transcript (open to man-in-the-middle attacks)
    #[arg(long)]
    pub insecure_no_sign: bool,
    /// Append every session's frames and annotations to this file
    #[arg(long, value_name = "PATH")]
    pub capture: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct ClientArgs {
    #[arg(long)]
    pub user: String,
    #[arg(long, value_name = "PATH")]
    pub password_file: PathBuf,
    /// Trusted root certificate
    #[arg(long, value_name = "PATH")]
    pub root: PathBuf,
    #[arg(long, default_value = "hybrid", value_parser = ["classical", "pq", "hybrid"])]
    pub policy: String,
    /// Accept a server that does not sign the transcript
    #[arg(long)]
    pub insecure_no_sign: bool,
}

#[derive(Debug, Args)]
pub struct ConnectArgs {
    #[arg(long, value_name = "HOST:PORT")]
    pub addr: String,
    #[command(flatten)]
    pub client: ClientArgs,
    /// Handshake flow (default: dh for dh-* KEMs, kem otherwise)
    #[arg(long, value_parser = ["dh", "kem"])]
    pub mode: Option<String>,
    /// Offer only this KEM
    #[arg(long)]
    pub kem: Option<String>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_name = "HOST:PORT")]
    pub addr: String,
    #[command(flatten)]
    pub client: ClientArgs,
    /// KEM to benchmark; repeat for several
    #[arg(long = "alg", required = true, value_name = "ALG")]
    pub algs: Vec<String>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub iterations: u64,
    #[arg(long, default_value_t = DEFAULT_WARMUP)]
    pub warmup: u64,
    #[arg(long, value_name = "PATH")]
    pub csv: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub report: PathBuf,
    /// Algorithm the others are compared against (default: first dh-*)
    #[arg(long)]
    pub baseline: Option<String>,
    /// Spawn a separate `qsh connect` process per handshake
    #[arg(long)]
    pub fresh_process: bool,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long, value_name = "PATH")]
    pub csv: PathBuf,
    /// Which p-value to print (default: both)
    #[arg(long, value_parser = ["one", "two"])]
    pub sided: Option<String>,
    #[arg(long)]
    pub baseline: Option<String>,
    /// Also write a report file
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long, value_name = "PATH")]
    pub capture: PathBuf,
    /// Validate captured chains against this root instead of their own last certificate
    #[arg(long, value_name = "PATH")]
    pub root: Option<PathBuf>,
    #[arg(long, default_value = "hybrid", value_parser = ["classical", "pq", "hybrid"])]
    pub policy: String,
}
