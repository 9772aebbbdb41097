//! Password records with salted, iterated SHA-256.
//!
//! File format, one record per LF-terminated line:
//! `user_id:salt_hex:iterations:hash_hex` (lowercase hex).

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::keyfile::write_atomic;
use crate::primitives::{ct_eq, hash, QshRng};

pub const SALT_LEN: usize = 16;
pub const MIN_ITERATIONS: u32 = 1_000;
pub const DEFAULT_ITERATIONS: u32 = 10_000;

#[derive(Debug, Error)]
pub enum UserStoreError {
    #[error("user {0:?} already exists")]
    DuplicateUser(String),
    #[error("invalid user id {0:?}: must be 1-255 bytes with no ':' or line breaks")]
    InvalidUserId(String),
    #[error("iteration count {0} below the minimum of 1000")]
    TooFewIterations(u32),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, PartialEq, Eq)]
pub struct UserRecord {
    pub user_id: String,
    pub salt: [u8; SALT_LEN],
    pub iterations: u32,
    pub password_hash: [u8; 32],
}

impl fmt::Debug for UserRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UserRecord")
            .field("user_id", &self.user_id)
            .field("iterations", &self.iterations)
            .finish_non_exhaustive()
    }
}

/// x_0 = H(salt || password), x_i = H(x_{i-1}); returns x_{iterations-1}.
pub fn iterated_hash(salt: &[u8], password: &[u8], iterations: u32) -> [u8; 32] {
    let mut buf = Vec::with_capacity(salt.len() + password.len());
    buf.extend_from_slice(salt);
    buf.extend_from_slice(password);
    let mut x = *hash(&buf).as_bytes();
    for _ in 1..iterations {
        x = *hash(&x).as_bytes();
    }
    x
}

fn valid_user_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 255 && !id.contains([':', '\n', '\r'])
}

impl UserRecord {
    fn to_line(&self) -> String {
        format!("{}:{}:{}:{}", self.user_id, hex::encode(self.salt), self.iterations, hex::encode(self.password_hash))
    }

    fn parse_line(line: &str, n: usize) -> Result<Self, UserStoreError> {
        let err = |reason: &str| UserStoreError::Parse { line: n, reason: reason.to_string() };
        let parts: Vec<&str> = line.split(':').collect();
        let [user_id, salt, iterations, hash] = parts[..] else {
            return Err(err("expected 4 colon-separated fields"));
        };
        if !valid_user_id(user_id) {
            return Err(err("invalid user id"));
        }
        let lower_hex = |s: &str| s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
        if !lower_hex(salt) || !lower_hex(hash) {
            return Err(err("hex fields must be lowercase hex"));
        }
        let salt: [u8; SALT_LEN] = hex::decode(salt)
            .ok()
            .and_then(|v| v.try_into().ok())
            .ok_or_else(|| err("salt must be 16 bytes of hex"))?;
        let password_hash: [u8; 32] = hex::decode(hash)
            .ok()
            .and_then(|v| v.try_into().ok())
            .ok_or_else(|| err("hash must be 32 bytes of hex"))?;
        let iterations: u32 = iterations.parse().map_err(|_| err("iterations must be a decimal integer"))?;
        if iterations < MIN_ITERATIONS || iterations.to_string() != parts[2] {
            return Err(err("iterations must be a canonical integer >= 1000"));
        }
        Ok(Self { user_id: user_id.to_string(), salt, iterations, password_hash })
    }
}

/// Records in insertion order, indexed by user id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UserStore {
    records: Vec<UserRecord>,
    index: HashMap<String, usize>,
}

impl UserStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[UserRecord] {
        &self.records
    }

    pub fn get(&self, user_id: &str) -> Option<&UserRecord> {
        self.index.get(user_id).map(|&i| &self.records[i])
    }

    fn insert(&mut self, record: UserRecord) -> Result<(), UserStoreError> {
        if self.index.contains_key(&record.user_id) {
            return Err(UserStoreError::DuplicateUser(record.user_id));
        }
        self.index.insert(record.user_id.clone(), self.records.len());
        self.records.push(record);
        Ok(())
    }

    pub fn add_user(
        &mut self,
        user_id: &str,
        password: &str,
        iterations: u32,
        rng: &mut QshRng,
    ) -> Result<(), UserStoreError> {
        if !valid_user_id(user_id) {
            return Err(UserStoreError::InvalidUserId(user_id.to_string()));
        }
        if iterations < MIN_ITERATIONS {
            return Err(UserStoreError::TooFewIterations(iterations));
        }
        if self.index.contains_key(user_id) {
            return Err(UserStoreError::DuplicateUser(user_id.to_string()));
        }
        let salt: [u8; SALT_LEN] = rng.random_array();
        let password_hash = iterated_hash(&salt, password.as_bytes(), iterations);
        self.insert(UserRecord { user_id: user_id.to_string(), salt, iterations, password_hash })
    }

    /// Unknown users cost one default-strength hash so that timing does not
    /// reveal which ids exist.
    pub fn verify_password(&self, user_id: &str, password: &str) -> bool {
        match self.get(user_id) {
            Some(r) => ct_eq(&iterated_hash(&r.salt, password.as_bytes(), r.iterations), &r.password_hash),
            None => {
                let dummy = iterated_hash(&[0u8; SALT_LEN], password.as_bytes(), DEFAULT_ITERATIONS);
                let _ = ct_eq(&dummy, &[0u8; 32]);
                false
            }
        }
    }

    pub fn to_text(&self) -> String {
        self.records.iter().map(|r| r.to_line() + "\n").collect()
    }

    pub fn parse(text: &str) -> Result<Self, UserStoreError> {
        let mut store = Self::new();
        for (i, line) in text.split_terminator('\n').enumerate() {
            let n = i + 1;
            let record = UserRecord::parse_line(line, n)?;
            store.insert(record).map_err(|_| UserStoreError::Parse { line: n, reason: "duplicate user id".into() })?;
        }
        Ok(store)
    }

    pub fn load(path: &Path) -> Result<Self, UserStoreError> {
        let bytes = std::fs::read(path)?;
        let text =
            String::from_utf8(bytes).map_err(|_| UserStoreError::Parse { line: 0, reason: "file is not UTF-8".into() })?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), UserStoreError> {
        Ok(write_atomic(path, self.to_text().as_bytes())?)
    }
}
