//! Stateful hash-based signatures: 256 Lamport one-time keys under a
//! height-8 Merkle tree. All one-time secrets derive from a 32-byte seed.
//!
//! Signature layout: `index (4 BE) || 256 x (revealed secret || hash of
//! the unrevealed secret) || 8 authentication-path nodes`, 16644 bytes.

use crate::primitives::{ct_eq, hash, Hasher};

pub const MERKLE_HEIGHT: u32 = 8;
pub const MERKLE_LEAVES: u64 = 1 << MERKLE_HEIGHT;
const DIGEST_BITS: usize = 256;
pub const PUBLIC_KEY_LEN: usize = 32;
pub const SIGNATURE_LEN: usize = 4 + DIGEST_BITS * 64 + MERKLE_HEIGHT as usize * 32;

const LEAF_PREFIX: u8 = 0x00;
const NODE_PREFIX: u8 = 0x01;

type Node = [u8; 32];

pub struct MerkleSecret {
    seed: [u8; 32],
    /// Heap layout: node k has children 2k and 2k+1; leaves start at 256.
    tree: Vec<Node>,
}

fn one_time_secret(seed: &[u8; 32], leaf: u32, i: u16, bit: u8) -> Node {
    let mut h = Hasher::new();
    h.update(b"qsh-lamport").update(seed).update(&leaf.to_be_bytes()).update(&i.to_be_bytes()).update(&[bit]);
    *h.finish().as_bytes()
}

fn digest_bit(d: &[u8; 32], i: usize) -> u8 {
    (d[i / 8] >> (7 - i % 8)) & 1
}

fn parent(left: &Node, right: &Node) -> Node {
    let mut h = Hasher::new();
    h.update(&[NODE_PREFIX]).update(left).update(right);
    *h.finish().as_bytes()
}

/// Leaf hash over the 512 public pieces in (i, bit) order.
fn leaf_hash(pieces: impl Iterator<Item = Node>) -> Node {
    let mut h = Hasher::new();
    h.update(&[LEAF_PREFIX]);
    for p in pieces {
        h.update(&p);
    }
    *h.finish().as_bytes()
}

impl MerkleSecret {
    pub fn from_seed(seed: [u8; 32]) -> Self {
        let leaves = MERKLE_LEAVES as usize;
        let mut tree = vec![[0u8; 32]; 2 * leaves];
        for leaf in 0..leaves {
            let pieces = (0..DIGEST_BITS as u16).flat_map(|i| {
                [0u8, 1].map(|b| *hash(&one_time_secret(&seed, leaf as u32, i, b)).as_bytes())
            });
            tree[leaves + leaf] = leaf_hash(pieces);
        }
        for k in (1..leaves).rev() {
            tree[k] = parent(&tree[2 * k], &tree[2 * k + 1]);
        }
        Self { seed, tree }
    }

    pub fn seed(&self) -> &[u8; 32] {
        &self.seed
    }

    pub fn root(&self) -> &Node {
        &self.tree[1]
    }

    pub fn sign(&self, leaf: u32, message: &[u8]) -> Vec<u8> {
        assert!((leaf as u64) < MERKLE_LEAVES);
        let d = *hash(message).as_bytes();
        let mut out = Vec::with_capacity(SIGNATURE_LEN);
        out.extend_from_slice(&leaf.to_be_bytes());
        for i in 0..DIGEST_BITS {
            let b = digest_bit(&d, i);
            out.extend_from_slice(&one_time_secret(&self.seed, leaf, i as u16, b));
            out.extend_from_slice(hash(&one_time_secret(&self.seed, leaf, i as u16, 1 - b)).as_bytes());
        }
        let mut k = MERKLE_LEAVES as usize + leaf as usize;
        while k > 1 {
            out.extend_from_slice(&self.tree[k ^ 1]);
            k /= 2;
        }
        debug_assert_eq!(out.len(), SIGNATURE_LEN);
        out
    }
}

pub fn verify(public_key: &[u8], message: &[u8], signature: &[u8]) -> bool {
    if signature.len() != SIGNATURE_LEN || public_key.len() != PUBLIC_KEY_LEN {
        return false;
    }
    let leaf = u32::from_be_bytes(signature[..4].try_into().unwrap());
    if leaf as u64 >= MERKLE_LEAVES {
        return false;
    }
    let d = *hash(message).as_bytes();
    let ots = &signature[4..4 + DIGEST_BITS * 64];
    let pieces = ots.chunks_exact(64).enumerate().flat_map(|(i, chunk)| {
        let revealed = *hash(&chunk[..32]).as_bytes();
        let other: Node = chunk[32..].try_into().unwrap();
        if digest_bit(&d, i) == 0 {
            [revealed, other]
        } else {
            [other, revealed]
        }
    });
    let mut node = leaf_hash(pieces);
    let mut idx = leaf;
    for sibling in signature[4 + DIGEST_BITS * 64..].chunks_exact(32) {
        let sibling: Node = sibling.try_into().unwrap();
        node = if idx & 1 == 0 { parent(&node, &sibling) } else { parent(&sibling, &node) };
        idx >>= 1;
    }
    ct_eq(&node, public_key)
}
