//! TLV field lists: `id (1) || len (4 BE) || value`, ids strictly
//! ascending. Shared by frame payloads and certificate encodings.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TlvError {
    #[error("tlv field header truncated at offset {0}")]
    TruncatedHeader(usize),
    #[error("tlv field 0x{id:02x} declares {declared} bytes, {available} available")]
    TruncatedValue { id: u8, declared: u64, available: usize },
    #[error("tlv field 0x{id:02x} follows 0x{prev:02x}; ids must ascend")]
    OutOfOrder { prev: u8, id: u8 },
    #[error("duplicate tlv field 0x{0:02x}")]
    Duplicate(u8),
    #[error("missing tlv field 0x{0:02x}")]
    Missing(u8),
    #[error("unexpected tlv field 0x{0:02x}")]
    Unexpected(u8),
    #[error("tlv field 0x{id:02x} has length {got}, expected {expected}")]
    BadLength { id: u8, expected: usize, got: usize },
    #[error("tlv field 0x{0:02x} has an invalid value")]
    BadValue(u8),
}

pub const FIELD_HEADER_LEN: usize = 5;

/// An ordered set of fields. Ordering and uniqueness hold by construction,
/// so any `Fields` value encodes to a valid payload.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Fields(BTreeMap<u8, Vec<u8>>);

impl Fields {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builder-style insert; replaces an existing value.
    pub fn with(mut self, id: u8, value: impl Into<Vec<u8>>) -> Self {
        self.0.insert(id, value.into());
        self
    }

    pub fn insert(&mut self, id: u8, value: impl Into<Vec<u8>>) {
        self.0.insert(id, value.into());
    }

    pub fn remove(&mut self, id: u8) -> Option<Vec<u8>> {
        self.0.remove(&id)
    }

    pub fn get(&self, id: u8) -> Option<&[u8]> {
        self.0.get(&id).map(Vec::as_slice)
    }

    pub fn require(&self, id: u8) -> Result<&[u8], TlvError> {
        self.get(id).ok_or(TlvError::Missing(id))
    }

    pub fn require_len(&self, id: u8, len: usize) -> Result<&[u8], TlvError> {
        let v = self.require(id)?;
        if v.len() != len {
            return Err(TlvError::BadLength { id, expected: len, got: v.len() });
        }
        Ok(v)
    }

    pub fn require_u8(&self, id: u8) -> Result<u8, TlvError> {
        Ok(self.require_len(id, 1)?[0])
    }

    pub fn require_u16(&self, id: u8) -> Result<u16, TlvError> {
        Ok(u16::from_be_bytes(self.require_len(id, 2)?.try_into().unwrap()))
    }

    pub fn require_u64(&self, id: u8) -> Result<u64, TlvError> {
        Ok(u64::from_be_bytes(self.require_len(id, 8)?.try_into().unwrap()))
    }

    /// Fails on any field id outside `allowed`.
    pub fn only(&self, allowed: &[u8]) -> Result<(), TlvError> {
        match self.0.keys().find(|id| !allowed.contains(id)) {
            Some(&id) => Err(TlvError::Unexpected(id)),
            None => Ok(()),
        }
    }

    pub fn contains(&self, id: u8) -> bool {
        self.0.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u8, &[u8])> {
        self.0.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    pub fn encoded_len(&self) -> usize {
        self.0.values().map(|v| FIELD_HEADER_LEN + v.len()).sum()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.encode_into(&mut out);
        out
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        for (id, v) in &self.0 {
            out.push(*id);
            out.extend_from_slice(&(v.len() as u32).to_be_bytes());
            out.extend_from_slice(v);
        }
    }

    pub fn decode(mut bytes: &[u8]) -> Result<Self, TlvError> {
        let total = bytes.len();
        let mut map = BTreeMap::new();
        let mut prev: Option<u8> = None;
        while !bytes.is_empty() {
            if bytes.len() < FIELD_HEADER_LEN {
                return Err(TlvError::TruncatedHeader(total - bytes.len()));
            }
            let id = bytes[0];
            let len = u32::from_be_bytes(bytes[1..5].try_into().unwrap()) as u64;
            let rest = &bytes[FIELD_HEADER_LEN..];
            if len > rest.len() as u64 {
                return Err(TlvError::TruncatedValue { id, declared: len, available: rest.len() });
            }
            match prev {
                Some(p) if p == id => return Err(TlvError::Duplicate(id)),
                Some(p) if p > id => return Err(TlvError::OutOfOrder { prev: p, id }),
                _ => {}
            }
            let (value, tail) = rest.split_at(len as usize);
            map.insert(id, value.to_vec());
            prev = Some(id);
            bytes = tail;
        }
        Ok(Self(map))
    }
}

/// Sequence of length-prefixed items (`len (4 BE) || bytes`), used where a
/// single field carries a list.
pub fn encode_list<'a>(items: impl IntoIterator<Item = &'a [u8]>) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        out.extend_from_slice(&(item.len() as u32).to_be_bytes());
        out.extend_from_slice(item);
    }
    out
}

pub fn decode_list(mut bytes: &[u8], field: u8) -> Result<Vec<&[u8]>, TlvError> {
    let mut items = Vec::new();
    while !bytes.is_empty() {
        if bytes.len() < 4 {
            return Err(TlvError::BadValue(field));
        }
        let len = u32::from_be_bytes(bytes[..4].try_into().unwrap()) as usize;
        if len > bytes.len() - 4 {
            return Err(TlvError::BadValue(field));
        }
        items.push(&bytes[4..4 + len]);
        bytes = &bytes[4 + len..];
    }
    Ok(items)
}
