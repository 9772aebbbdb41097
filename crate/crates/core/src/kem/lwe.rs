//! Module-LWE key encapsulation with Kyber-shaped parameters (n = 256,
//! q = 3329, eta = 2, rank k in {2, 3, 4}) but public-key-encryption
//! semantics: encapsulation encrypts a random 32-byte seed and both sides
//! hash it, together with the ciphertext, into the shared secret.
//!
//! No compression, no NTT, no re-encryption check. Not wire compatible
//! with standardized ML-KEM.
//!
//! Layouts (12-bit little-endian coefficient packing, two per 3 bytes):
//! - public key: `pack(t) || seed`
//! - secret key: `seed || pack(s)`
//! - ciphertext: `pack(u) || pack(v)`

use crate::primitives::{hash, kdf, Hasher, QshRng};

use super::ring::{Ring, RingPoly};
use super::{Kem, KemAlgorithmId, KemCiphertext, KemDescriptor, KemError, KemKeyPair, SharedSecret};

const RING: Ring = Ring::LWE;
const SEED_LEN: usize = 32;
const POLY_BYTES: usize = 256 * 12 / 8;
const HALF_Q: u32 = 1665;

pub struct LweKem {
    k: usize,
    descriptor: KemDescriptor,
}

impl LweKem {
    /// Rank 2, 3 or 4.
    pub fn new(k: usize) -> Self {
        let (id, name) = match k {
            2 => (KemAlgorithmId::LWE_512, "lwe-512"),
            3 => (KemAlgorithmId::LWE_768, "lwe-768"),
            4 => (KemAlgorithmId::LWE_1024, "lwe-1024"),
            _ => panic!("unsupported module rank {k}"),
        };
        Self {
            k,
            descriptor: KemDescriptor {
                id,
                name: name.to_string(),
                public_key_len: k * POLY_BYTES + SEED_LEN,
                secret_key_len: SEED_LEN + k * POLY_BYTES,
                ciphertext_len: (k + 1) * POLY_BYTES,
                quantum_safe: true,
            },
        }
    }

    pub fn rank(&self) -> usize {
        self.k
    }
}

/// Uniform polynomial from a SHA-256 counter-mode stream over
/// `seed || i || j`, by rejection of 12-bit candidates >= q.
fn expand_poly(seed: &[u8; SEED_LEN], i: u8, j: u8) -> RingPoly {
    let mut coeffs = Vec::with_capacity(RING.n);
    let mut counter: u32 = 0;
    while coeffs.len() < RING.n {
        let mut h = Hasher::new();
        h.update(b"qsh-lwe-matrix").update(seed).update(&[i, j]).update(&counter.to_be_bytes());
        let block = h.finish();
        counter += 1;
        for chunk in block.as_bytes()[..30].chunks_exact(3) {
            let d1 = chunk[0] as u32 | ((chunk[1] as u32 & 0x0F) << 8);
            let d2 = (chunk[1] as u32 >> 4) | ((chunk[2] as u32) << 4);
            for d in [d1, d2] {
                if d < RING.q && coeffs.len() < RING.n {
                    coeffs.push(d);
                }
            }
        }
    }
    RingPoly { coeffs }
}

/// Matrix A with A[i][j] = expand_poly(seed, i, j).
fn expand_matrix(seed: &[u8; SEED_LEN], k: usize) -> Vec<Vec<RingPoly>> {
    (0..k)
        .map(|i| (0..k).map(|j| expand_poly(seed, i as u8, j as u8)).collect())
        .collect()
}

/// Centered binomial sample with eta = 2: (b0 + b1) - (b2 + b3).
fn sample_cbd(rng: &mut QshRng) -> RingPoly {
    let bytes = rng.random_bytes(RING.n / 2);
    let mut coeffs = Vec::with_capacity(RING.n);
    for byte in bytes {
        for nibble in [byte & 0x0F, byte >> 4] {
            let a = (nibble & 1) + ((nibble >> 1) & 1);
            let b = ((nibble >> 2) & 1) + ((nibble >> 3) & 1);
            coeffs.push((RING.q + a as u32 - b as u32) % RING.q);
        }
    }
    RingPoly { coeffs }
}

fn sample_vec(rng: &mut QshRng, k: usize) -> Vec<RingPoly> {
    (0..k).map(|_| sample_cbd(rng)).collect()
}

fn pack(polys: &[RingPoly], out: &mut Vec<u8>) {
    for p in polys {
        for pair in p.coeffs.chunks_exact(2) {
            let (a, b) = (pair[0], pair[1]);
            out.push(a as u8);
            out.push(((a >> 8) | ((b & 0x0F) << 4)) as u8);
            out.push((b >> 4) as u8);
        }
    }
}

fn unpack(bytes: &[u8], count: usize) -> Result<Vec<RingPoly>, KemError> {
    debug_assert_eq!(bytes.len(), count * POLY_BYTES);
    bytes
        .chunks_exact(POLY_BYTES)
        .map(|chunk| {
            let mut coeffs = Vec::with_capacity(RING.n);
            for b in chunk.chunks_exact(3) {
                coeffs.push(b[0] as u32 | ((b[1] as u32 & 0x0F) << 8));
                coeffs.push((b[1] as u32 >> 4) | ((b[2] as u32) << 4));
            }
            if coeffs.iter().any(|&c| c >= RING.q) {
                return Err(KemError::CoefficientOutOfRange);
            }
            Ok(RingPoly { coeffs })
        })
        .collect()
}

/// sum_j lhs[j] * rhs[j] + extra, reduced once.
fn inner_product(lhs: &[&RingPoly], rhs: &[RingPoly], extra: &RingPoly) -> RingPoly {
    let mut acc: Vec<i64> = extra.coeffs.iter().map(|&c| c as i64).collect();
    for (a, b) in lhs.iter().zip(rhs) {
        RING.mul_acc(a, b, &mut acc);
    }
    RING.from_signed(&acc)
}

fn derive_secret(message: &[u8; 32], ct: &[u8]) -> Result<SharedSecret, KemError> {
    let mut input = message.to_vec();
    input.extend_from_slice(hash(ct).as_bytes());
    SharedSecret::from_slice(&kdf(&input, b"lwe-kem", 32)?)
}

impl Kem for LweKem {
    fn descriptor(&self) -> &KemDescriptor {
        &self.descriptor
    }

    fn keypair(&self, rng: &mut QshRng) -> Result<KemKeyPair, KemError> {
        let k = self.k;
        let seed: [u8; SEED_LEN] = rng.random_array();
        let a = expand_matrix(&seed, k);
        let s = sample_vec(rng, k);
        let e = sample_vec(rng, k);
        // t = A s + e
        let t: Vec<RingPoly> = (0..k)
            .map(|i| inner_product(&a[i].iter().collect::<Vec<_>>(), &s, &e[i]))
            .collect();

        let mut public_key = Vec::with_capacity(self.descriptor.public_key_len);
        pack(&t, &mut public_key);
        public_key.extend_from_slice(&seed);

        let mut secret_key = Vec::with_capacity(self.descriptor.secret_key_len);
        secret_key.extend_from_slice(&seed);
        pack(&s, &mut secret_key);

        Ok(KemKeyPair { alg: self.descriptor.id, public_key, secret_key })
    }

    fn encaps(&self, public_key: &[u8], rng: &mut QshRng) -> Result<(KemCiphertext, SharedSecret), KemError> {
        let k = self.k;
        let t = unpack(&public_key[..k * POLY_BYTES], k)?;
        let seed: [u8; SEED_LEN] = public_key[k * POLY_BYTES..].try_into().expect("length checked");
        let a = expand_matrix(&seed, k);

        let message: [u8; 32] = rng.random_array();
        let r = sample_vec(rng, k);
        let e1 = sample_vec(rng, k);
        let e2 = sample_cbd(rng);

        // u = A^T r + e1
        let u: Vec<RingPoly> = (0..k)
            .map(|i| inner_product(&(0..k).map(|j| &a[j][i]).collect::<Vec<_>>(), &r, &e1[i]))
            .collect();
        // v = t^T r + e2 + encode(m)
        let encoded = RingPoly {
            coeffs: (0..RING.n)
                .map(|bit| ((message[bit / 8] >> (bit % 8)) & 1) as u32 * HALF_Q)
                .collect(),
        };
        let v = inner_product(&t.iter().collect::<Vec<_>>(), &r, &RING.add(&e2, &encoded));

        let mut bytes = Vec::with_capacity(self.descriptor.ciphertext_len);
        pack(&u, &mut bytes);
        pack(std::slice::from_ref(&v), &mut bytes);
        let ss = derive_secret(&message, &bytes)?;
        Ok((KemCiphertext { alg: self.descriptor.id, bytes }, ss))
    }

    fn decaps(&self, secret_key: &[u8], ct: &KemCiphertext) -> Result<SharedSecret, KemError> {
        let k = self.k;
        let s = unpack(&secret_key[SEED_LEN..], k)?;
        let mut polys = unpack(&ct.bytes, k + 1)?;
        let v = polys.pop().expect("k + 1 polynomials");
        let u = polys;

        // w = v - s^T u ~ encode(m) + small noise
        let su = inner_product(&s.iter().collect::<Vec<_>>(), &u, &RING.zero());
        let w = RING.sub(&v, &su);
        let mut message = [0u8; 32];
        for (bit, &c) in w.coeffs.iter().enumerate() {
            // Nearest of {0, q/2}: 1 iff c lies in (q/4, 3q/4).
            let one = ((2 * c + RING.q / 2) / RING.q) & 1;
            message[bit / 8] |= (one as u8) << (bit % 8);
        }
        derive_secret(&message, &ct.bytes)
    }
}
