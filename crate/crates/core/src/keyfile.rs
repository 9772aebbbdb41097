//! On-disk key layout shared by KEM and signature keys:
//! `alg_code (u16 BE) || key_len (u32 BE) || key bytes [|| trailer]`.
//!
//! Signature secret keys append an 8-byte big-endian state index as the
//! trailer.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KeyFileError {
    #[error("key file truncated")]
    Truncated,
    #[error("key file has {0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("key file io: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyFile {
    pub alg_code: u16,
    pub key: Vec<u8>,
    pub trailer: Vec<u8>,
}

impl KeyFile {
    pub fn new(alg_code: u16, key: Vec<u8>) -> Self {
        Self { alg_code, key, trailer: Vec::new() }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(6 + self.key.len() + self.trailer.len());
        out.extend_from_slice(&self.alg_code.to_be_bytes());
        out.extend_from_slice(&(self.key.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.key);
        out.extend_from_slice(&self.trailer);
        out
    }

    /// Parses the header and key; whatever follows the key is kept as the
    /// trailer and left to the caller to interpret.
    pub fn decode(bytes: &[u8]) -> Result<Self, KeyFileError> {
        if bytes.len() < 6 {
            return Err(KeyFileError::Truncated);
        }
        let alg_code = u16::from_be_bytes([bytes[0], bytes[1]]);
        let len = u32::from_be_bytes([bytes[2], bytes[3], bytes[4], bytes[5]]) as usize;
        let rest = &bytes[6..];
        if rest.len() < len {
            return Err(KeyFileError::Truncated);
        }
        Ok(Self {
            alg_code,
            key: rest[..len].to_vec(),
            trailer: rest[len..].to_vec(),
        })
    }

    pub fn read(path: &Path) -> Result<Self, KeyFileError> {
        Self::decode(&fs::read(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), KeyFileError> {
        write_atomic(path, &self.encode())?;
        Ok(())
    }
}

/// Writes to a sibling temporary file, syncs it and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}
