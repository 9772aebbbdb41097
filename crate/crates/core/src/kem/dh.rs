use std::sync::{Arc, OnceLock};

use crate::primitives::{kdf, modpow, BigNat, FixedBasePow, QshRng};

use super::{Kem, KemAlgorithmId, KemCiphertext, KemDescriptor, KemError, KemKeyPair, SharedSecret};

// RFC 7919 ffdhe2048, generator 2.
const FFDHE2048_P: &str = "\
FFFFFFFFFFFFFFFFADF85458A2BB4A9AAFDC5620273D3CF1\
D8B9C583CE2D3695A9E13641146433FBCC939DCE249B3EF9\
7D2FE363630C75D8F681B202AEC4617AD3DF1ED5D5FD6561\
2433F51F5F066ED0856365553DED1AF3B557135E7F57C935\
984F0C70E0E68B77E2A689DAF3EFE8721DF158A136ADE735\
30ACCA4F483A797ABC0AB182B324FB61D108A94BB2C8E3FB\
B96ADAB760D7F4681D4F42A3DE394DF4AE56EDE76372BB19\
0B07A7C8EE0A6D709E02FCE1CDF7E2ECC03404CD28342F61\
9172FE9CE98583FF8E4F1232EEF28183C3FE3B1B4C6FAD73\
3BB5FCBC2EC22005C58EF1837D1683B2C6F34A26C1B2EFFA\
886B423861285C97FFFFFFFFFFFFFFFF";

/// A multiplicative group mod a prime `p` with generator `g`. Elements are
/// encoded big-endian at the byte width of `p`.
pub struct DhGroup {
    p: BigNat,
    g: BigNat,
    p_minus_one: BigNat,
    byte_len: usize,
    generator_table: OnceLock<Option<FixedBasePow>>,
}

impl DhGroup {
    pub fn new(p: BigNat, g: BigNat) -> Self {
        let byte_len = p.bits().div_ceil(8) as usize;
        Self {
            p_minus_one: &p - &BigNat::one(),
            p,
            g,
            byte_len,
            generator_table: OnceLock::new(),
        }
    }

    pub fn ffdhe2048() -> Arc<Self> {
        static GROUP: OnceLock<Arc<DhGroup>> = OnceLock::new();
        GROUP
            .get_or_init(|| Arc::new(DhGroup::new(BigNat::from_hex(FFDHE2048_P).expect("valid hex"), BigNat::from_u64(2))))
            .clone()
    }

    /// The p = 23, g = 5 toy group used by the worked examples.
    pub fn toy() -> Self {
        Self::new(BigNat::from_u64(23), BigNat::from_u64(5))
    }

    pub fn prime(&self) -> &BigNat {
        &self.p
    }

    pub fn generator(&self) -> &BigNat {
        &self.g
    }

    pub fn byte_len(&self) -> usize {
        self.byte_len
    }

    /// Secret exponent uniform in [2, p-2].
    pub fn random_exponent(&self, rng: &mut QshRng) -> BigNat {
        BigNat::random_range(rng, &BigNat::from_u64(2), &self.p_minus_one)
    }

    /// A secret exponent and its public value, resampled until the public
    /// value passes [`check_public`](Self::check_public). Only small test
    /// groups ever need a second draw.
    pub fn fresh_pair(&self, rng: &mut QshRng) -> (BigNat, BigNat) {
        loop {
            let a = self.random_exponent(rng);
            let public = self.public_value(&a);
            if self.check_public(&public).is_ok() {
                return (a, public);
            }
        }
    }

    /// g^a mod p.
    pub fn public_value(&self, exponent: &BigNat) -> BigNat {
        let table = self
            .generator_table
            .get_or_init(|| FixedBasePow::new(&self.g, &self.p, self.p.bits()));
        match table {
            Some(t) if exponent.bits() <= self.p.bits() => t.pow(exponent),
            _ => modpow(&self.g, exponent, &self.p).expect("p >= 2"),
        }
    }

    /// peer^a mod p, without validating `peer`.
    pub fn shared_value(&self, exponent: &BigNat, peer: &BigNat) -> BigNat {
        modpow(peer, exponent, &self.p).expect("p >= 2")
    }

    /// Rejects 0, 1, p-1 and anything >= p.
    pub fn check_public(&self, value: &BigNat) -> Result<(), KemError> {
        if *value < BigNat::from_u64(2) || *value >= self.p_minus_one {
            return Err(KemError::InvalidPublicValue);
        }
        Ok(())
    }

    pub fn encode(&self, value: &BigNat) -> Vec<u8> {
        value.to_bytes_be_padded(self.byte_len).expect("group element fits the modulus width")
    }
}

/// Finite-field Diffie-Hellman in KEM form: the public key is `A = g^a`,
/// encapsulation sends a fresh `B = g^b` and both sides derive the shared
/// secret from `g^(ab)`.
pub struct DhKem {
    group: Arc<DhGroup>,
    descriptor: KemDescriptor,
}

impl DhKem {
    pub fn ffdhe2048() -> Self {
        Self::with_group(KemAlgorithmId::DH_2048, "dh-2048", DhGroup::ffdhe2048())
    }

    /// Any group; used by tests to plug in the toy group.
    pub fn with_group(id: KemAlgorithmId, name: &str, group: Arc<DhGroup>) -> Self {
        let len = group.byte_len();
        Self {
            descriptor: KemDescriptor {
                id,
                name: name.to_string(),
                public_key_len: len,
                secret_key_len: len,
                ciphertext_len: len,
                quantum_safe: false,
            },
            group,
        }
    }

    pub fn group(&self) -> &DhGroup {
        &self.group
    }

    fn derive(&self, shared: &BigNat) -> Result<SharedSecret, KemError> {
        let okm = kdf(&self.group.encode(shared), b"dh-kem", 32)?;
        SharedSecret::from_slice(&okm)
    }
}

impl Kem for DhKem {
    fn descriptor(&self) -> &KemDescriptor {
        &self.descriptor
    }

    fn keypair(&self, rng: &mut QshRng) -> Result<KemKeyPair, KemError> {
        let (a, public) = self.group.fresh_pair(rng);
        Ok(KemKeyPair {
            alg: self.descriptor.id,
            public_key: self.group.encode(&public),
            secret_key: self.group.encode(&a),
        })
    }

    fn encaps(&self, public_key: &[u8], rng: &mut QshRng) -> Result<(KemCiphertext, SharedSecret), KemError> {
        let peer = BigNat::from_bytes_be(public_key);
        self.group.check_public(&peer)?;
        let (b, ephemeral) = self.group.fresh_pair(rng);
        let ss = self.derive(&self.group.shared_value(&b, &peer))?;
        let ct = KemCiphertext { alg: self.descriptor.id, bytes: self.group.encode(&ephemeral) };
        Ok((ct, ss))
    }

    fn decaps(&self, secret_key: &[u8], ct: &KemCiphertext) -> Result<SharedSecret, KemError> {
        let peer = BigNat::from_bytes_be(&ct.bytes);
        self.group.check_public(&peer)?;
        let a = BigNat::from_bytes_be(secret_key);
        self.derive(&self.group.shared_value(&a, &peer))
    }
}
