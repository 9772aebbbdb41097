use std::fmt::Display;
use std::path::Path;

use qsh_core::handshake::HandshakeError;
use thiserror::Error;

/// Each variant maps to one process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Crypto(String),
    #[error("{0}")]
    Transport(String),
    #[error("{0}")]
    AuthRejected(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Crypto(_) => 2,
            Self::Transport(_) => 3,
            Self::AuthRejected(_) => 4,
        }
    }

    pub fn usage(msg: impl Display) -> Self {
        Self::Usage(msg.to_string())
    }

    pub fn crypto(msg: impl Display) -> Self {
        Self::Crypto(msg.to_string())
    }

    /// Input file problems: unreadable files are usage errors, bad
    /// contents are validation failures.
    pub fn input(path: &Path, e: impl Display + IoCause) -> Self {
        if e.is_io() {
            Self::Usage(format!("cannot read {}: {e}", path.display()))
        } else {
            Self::Crypto(format!("{}: {e}", path.display()))
        }
    }
}

impl From<HandshakeError> for CliError {
    fn from(e: HandshakeError) -> Self {
        match e {
            HandshakeError::Transport(t) => Self::Transport(format!("transport: {t}")),
            other => Self::Crypto(format!("handshake failed: {other}")),
        }
    }
}

/// Lets [`CliError::input`] tell io failures from format failures.
pub trait IoCause {
    fn is_io(&self) -> bool;
}

impl IoCause for std::io::Error {
    fn is_io(&self) -> bool {
        self.kind() != std::io::ErrorKind::InvalidData
    }
}

impl IoCause for qsh_core::keyfile::KeyFileError {
    fn is_io(&self) -> bool {
        matches!(self, Self::Io(_))
    }
}

impl IoCause for qsh_core::sig::SigError {
    fn is_io(&self) -> bool {
        matches!(self, Self::KeyFile(qsh_core::keyfile::KeyFileError::Io(_)))
    }
}

impl IoCause for qsh_core::certs::CertError {
    fn is_io(&self) -> bool {
        matches!(self, Self::Io(e) if e.is_io())
    }
}

impl IoCause for qsh_core::userstore::UserStoreError {
    fn is_io(&self) -> bool {
        matches!(self, Self::Io(_))
    }
}
