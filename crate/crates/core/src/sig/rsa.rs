//! Textbook RSA-2048 over a full-domain hash. Not for production use: no
//! blinding, no standardized padding.
//!
//! Layouts (big-endian, fixed width):
//! - public key: `n (256) || e (4)`
//! - secret key: `n (256) || d (256) || p (128) || q (128)`
//! - signature: `s (256)`

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::One;

use crate::primitives::{ct_eq, kdf, miller_rabin, modpow, BigNat, QshRng};

use super::SigError;

const MODULUS_BYTES: usize = 256;
const PRIME_BYTES: usize = 128;
const PRIME_BITS: u64 = 1024;
pub const PUBLIC_KEY_LEN: usize = MODULUS_BYTES + 4;
pub const SECRET_KEY_LEN: usize = 2 * MODULUS_BYTES + 2 * PRIME_BYTES;
pub const SIGNATURE_LEN: usize = MODULUS_BYTES;
pub const PUBLIC_EXPONENT: u64 = 65537;
const CANDIDATE_BUDGET: u32 = 10_000;
const MR_ROUNDS: u32 = 40;

pub struct RsaSecret {
    n: BigNat,
    d: BigNat,
    p: BigNat,
    q: BigNat,
    // CRT parameters
    dp: BigNat,
    dq: BigNat,
    q_inv: BigNat,
}

fn small_primes() -> &'static [u32] {
    use std::sync::OnceLock;
    static PRIMES: OnceLock<Vec<u32>> = OnceLock::new();
    PRIMES.get_or_init(|| (3u32..2000).filter(|n| (2..*n).take_while(|d| d * d <= *n).all(|d| n % d != 0)).collect())
}

/// Random 1024-bit prime with its top two bits set (so p*q has exactly
/// 2048 bits) and gcd(p - 1, e) = 1.
fn random_prime(rng: &mut QshRng, budget: &mut u32) -> Result<BigNat, SigError> {
    let e = BigUint::from(PUBLIC_EXPONENT);
    loop {
        if *budget == 0 {
            return Err(SigError::PrimeBudgetExceeded(CANDIDATE_BUDGET));
        }
        *budget -= 1;
        let mut c = BigNat::random_bits_exact(rng, PRIME_BITS).as_biguint().clone();
        c.set_bit(PRIME_BITS - 2, true);
        c.set_bit(0, true);
        if small_primes().iter().any(|&sp| (&c % sp) == BigUint::ZERO) {
            continue;
        }
        if !(&c - 1u8).gcd(&e).is_one() {
            continue;
        }
        let candidate = BigNat::from_biguint(c);
        if miller_rabin(&candidate, MR_ROUNDS, rng) {
            return Ok(candidate);
        }
    }
}

fn full_domain_hash(message: &[u8], n: &BigNat) -> BigNat {
    let expanded = kdf(message, b"rsa-fdh", MODULUS_BYTES).expect("256 is a valid kdf length");
    &BigNat::from_bytes_be(&expanded) % n
}

fn pad(v: &BigNat, len: usize) -> Vec<u8> {
    v.to_bytes_be_padded(len).expect("value fits its field")
}

impl RsaSecret {
    pub fn generate(rng: &mut QshRng) -> Result<Self, SigError> {
        let mut budget = CANDIDATE_BUDGET;
        let p = random_prime(rng, &mut budget)?;
        let mut q = random_prime(rng, &mut budget)?;
        while q == p {
            q = random_prime(rng, &mut budget)?;
        }
        let p1 = p.as_biguint() - 1u8;
        let q1 = q.as_biguint() - 1u8;
        let lambda = p1.lcm(&q1);
        let d = BigUint::from(PUBLIC_EXPONENT)
            .modinv(&lambda)
            .expect("gcd(e, p-1) = gcd(e, q-1) = 1");
        Ok(Self::from_parts(p, q, BigNat::from_biguint(d)))
    }

    fn from_parts(p: BigNat, q: BigNat, d: BigNat) -> Self {
        let n = &p * &q;
        let dp = &d % &BigNat::from_biguint(p.as_biguint() - 1u8);
        let dq = &d % &BigNat::from_biguint(q.as_biguint() - 1u8);
        let q_inv = BigNat::from_biguint(q.as_biguint().modinv(p.as_biguint()).unwrap_or_default());
        Self { n, d, p, q, dp, dq, q_inv }
    }

    pub fn public_key(&self) -> Vec<u8> {
        let mut out = pad(&self.n, MODULUS_BYTES);
        out.extend_from_slice(&(PUBLIC_EXPONENT as u32).to_be_bytes());
        out
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = pad(&self.n, MODULUS_BYTES);
        out.extend(pad(&self.d, MODULUS_BYTES));
        out.extend(pad(&self.p, PRIME_BYTES));
        out.extend(pad(&self.q, PRIME_BYTES));
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, SigError> {
        if bytes.len() != SECRET_KEY_LEN {
            return Err(SigError::Malformed("rsa secret key"));
        }
        let (n, rest) = bytes.split_at(MODULUS_BYTES);
        let (d, rest) = rest.split_at(MODULUS_BYTES);
        let (p, q) = rest.split_at(PRIME_BYTES);
        let key = Self::from_parts(BigNat::from_bytes_be(p), BigNat::from_bytes_be(q), BigNat::from_bytes_be(d));
        if pad(&key.n, MODULUS_BYTES) != n || key.q_inv.is_zero() {
            return Err(SigError::Malformed("rsa secret key"));
        }
        Ok(key)
    }

    /// s = H(m)^d mod n, computed with the CRT.
    pub fn sign(&self, message: &[u8]) -> Vec<u8> {
        let h = full_domain_hash(message, &self.n);
        let sp = modpow(&h, &self.dp, &self.p).expect("p >= 2");
        let sq = modpow(&h, &self.dq, &self.q).expect("q >= 2");
        // s = sq + q * ((sp - sq) * q_inv mod p)
        let diff = &(&(&sp + &self.p) - &(&sq % &self.p)) % &self.p;
        let hcoef = &(&diff * &self.q_inv) % &self.p;
        let s = &sq + &(&hcoef * &self.q);
        pad(&s, SIGNATURE_LEN)
    }

    #[cfg(test)]
    pub fn modulus(&self) -> &BigNat {
        &self.n
    }

    #[cfg(test)]
    pub fn private_exponent(&self) -> &BigNat {
        &self.d
    }
}

pub fn verify(public_key: &[u8], message: &[u8], signature: &[u8]) -> bool {
    let (n_bytes, e_bytes) = public_key.split_at(MODULUS_BYTES);
    let n = BigNat::from_bytes_be(n_bytes);
    let e = BigNat::from_bytes_be(e_bytes);
    let s = BigNat::from_bytes_be(signature);
    if n.bits() < 2 || n.is_even() || s >= n {
        return false;
    }
    let Ok(recovered) = modpow(&s, &e, &n) else {
        return false;
    };
    ct_eq(&pad(&recovered, MODULUS_BYTES), &pad(&full_domain_hash(message, &n), MODULUS_BYTES))
}
