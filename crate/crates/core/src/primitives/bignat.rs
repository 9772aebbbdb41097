use std::fmt;

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};

use super::{PrimitiveError, QshRng};

/// Arbitrary precision natural number.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BigNat(BigUint);

impl BigNat {
    pub fn zero() -> Self {
        Self(BigUint::zero())
    }

    pub fn one() -> Self {
        Self(BigUint::one())
    }

    pub fn from_u64(v: u64) -> Self {
        Self(BigUint::from(v))
    }

    pub fn from_bytes_be(bytes: &[u8]) -> Self {
        Self(BigUint::from_bytes_be(bytes))
    }

    pub fn from_hex(hex: &str) -> Option<Self> {
        let cleaned: String = hex.chars().filter(|c| !c.is_whitespace()).collect();
        BigUint::parse_bytes(cleaned.as_bytes(), 16).map(Self)
    }

    pub fn to_bytes_be(&self) -> Vec<u8> {
        if self.0.is_zero() {
            return Vec::new();
        }
        self.0.to_bytes_be()
    }

    /// Big-endian encoding left-padded to `len` bytes, or `None` if the
    /// value does not fit.
    pub fn to_bytes_be_padded(&self, len: usize) -> Option<Vec<u8>> {
        let raw = self.to_bytes_be();
        if raw.len() > len {
            return None;
        }
        let mut out = vec![0u8; len - raw.len()];
        out.extend_from_slice(&raw);
        Some(out)
    }

    pub fn to_u64(&self) -> Option<u64> {
        u64::try_from(&self.0).ok()
    }

    pub fn bits(&self) -> u64 {
        self.0.bits()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_even(&self) -> bool {
        self.0.is_even()
    }

    pub fn bit(&self, i: u64) -> bool {
        self.0.bit(i)
    }

    pub fn as_biguint(&self) -> &BigUint {
        &self.0
    }

    pub fn from_biguint(v: BigUint) -> Self {
        Self(v)
    }

    /// Uniform value in `[low, high)`.
    pub fn random_range(rng: &mut QshRng, low: &BigNat, high: &BigNat) -> BigNat {
        Self(rng.gen_biguint_range(&low.0, &high.0))
    }

    /// Uniform value with exactly `bits` bits (top bit set).
    pub fn random_bits_exact(rng: &mut QshRng, bits: u64) -> BigNat {
        let mut v = rng.gen_biguint(bits);
        v.set_bit(bits - 1, true);
        Self(v)
    }
}

impl fmt::Debug for BigNat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BigNat({})", self.0)
    }
}

impl fmt::Display for BigNat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl std::ops::$trait<&BigNat> for &BigNat {
            type Output = BigNat;
            fn $method(self, rhs: &BigNat) -> BigNat {
                BigNat(std::ops::$trait::$method(&self.0, &rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Rem, rem);
forward_binop!(Div, div);

impl From<u64> for BigNat {
    fn from(v: u64) -> Self {
        Self::from_u64(v)
    }
}

/// `base^exp mod modulus` by left-to-right binary square-and-multiply.
///
/// Odd multi-limb moduli (every DH and RSA modulus) run the ladder in
/// Montgomery form; everything else uses plain multiply-then-reduce.
pub fn modpow(base: &BigNat, exp: &BigNat, modulus: &BigNat) -> Result<BigNat, PrimitiveError> {
    if modulus.0 < BigUint::from(2u8) {
        return Err(PrimitiveError::ModulusTooSmall);
    }
    if modulus.0.is_odd() && modulus.0.bits() > 64 {
        return Ok(BigNat(Montgomery::new(&modulus.0).pow(&base.0, &exp.0)));
    }
    let m = &modulus.0;
    let b = &base.0 % m;
    let mut acc = BigUint::one() % m;
    for i in (0..exp.0.bits()).rev() {
        acc = (&acc * &acc) % m;
        if exp.0.bit(i) {
            acc = (&acc * &b) % m;
        }
    }
    Ok(BigNat(acc))
}

/// Montgomery arithmetic modulo an odd number, on fixed-width little-endian
/// u64 limbs.
struct Montgomery {
    modulus: Vec<u64>,
    // -modulus^-1 mod 2^64
    m_inv: u64,
    r2: Vec<u64>,
    big: BigUint,
}

impl Montgomery {
    fn new(modulus: &BigUint) -> Self {
        let limbs = modulus.to_u64_digits();
        let n = limbs.len();
        // Newton iteration for the inverse of the low limb mod 2^64.
        let m0 = limbs[0];
        let mut inv: u64 = 1;
        for _ in 0..6 {
            inv = inv.wrapping_mul(2u64.wrapping_sub(m0.wrapping_mul(inv)));
        }
        let r2 = (BigUint::one() << (128 * n)) % modulus;
        Self {
            m_inv: inv.wrapping_neg(),
            r2: Self::limbs_of(&r2, n),
            modulus: limbs,
            big: modulus.clone(),
        }
    }

    fn limbs_of(v: &BigUint, n: usize) -> Vec<u64> {
        let mut out = v.to_u64_digits();
        out.resize(n, 0);
        out
    }

    // CIOS Montgomery multiplication: out = a * b * R^-1 mod m.
    fn mul(&self, a: &[u64], b: &[u64], out: &mut [u64], t: &mut [u64]) {
        let n = self.modulus.len();
        let (a, b, m) = (&a[..n], &b[..n], &self.modulus[..n]);
        let t = &mut t[..n + 2];
        t.fill(0);
        for &bi in b {
            let mut carry: u64 = 0;
            for (tj, &aj) in t[..n].iter_mut().zip(a) {
                let v = *tj as u128 + (aj as u128) * (bi as u128) + carry as u128;
                *tj = v as u64;
                carry = (v >> 64) as u64;
            }
            let v = t[n] as u128 + carry as u128;
            t[n] = v as u64;
            t[n + 1] = (v >> 64) as u64;

            let q = t[0].wrapping_mul(self.m_inv);
            let v = t[0] as u128 + (q as u128) * (m[0] as u128);
            let mut carry = (v >> 64) as u64;
            for j in 1..n {
                let v = t[j] as u128 + (q as u128) * (m[j] as u128) + carry as u128;
                t[j - 1] = v as u64;
                carry = (v >> 64) as u64;
            }
            let v = t[n] as u128 + carry as u128;
            t[n - 1] = v as u64;
            t[n] = t[n + 1] + ((v >> 64) as u64);
        }
        self.final_subtract(&t[..n + 1], out);
    }

    // Squaring via the full 2n-limb square (cross products computed once
    // and doubled), followed by a separate Montgomery reduction.
    fn sqr(&self, a: &[u64], out: &mut [u64], t: &mut [u64]) {
        let n = self.modulus.len();
        let a = &a[..n];
        let t = &mut t[..2 * n + 1];
        t.fill(0);
        for i in 0..n {
            let ai = a[i] as u128;
            let mut carry: u64 = 0;
            for j in i + 1..n {
                let v = t[i + j] as u128 + ai * (a[j] as u128) + carry as u128;
                t[i + j] = v as u64;
                carry = (v >> 64) as u64;
            }
            t[i + n] = carry;
        }
        let mut top = 0u64;
        for x in t[..2 * n].iter_mut() {
            let next = *x >> 63;
            *x = (*x << 1) | top;
            top = next;
        }
        let mut carry: u64 = 0;
        for i in 0..n {
            let sq = (a[i] as u128) * (a[i] as u128);
            let v = t[2 * i] as u128 + (sq as u64) as u128 + carry as u128;
            t[2 * i] = v as u64;
            let v = t[2 * i + 1] as u128 + (sq >> 64) + (v >> 64);
            t[2 * i + 1] = v as u64;
            carry = (v >> 64) as u64;
        }
        self.redc(t, out);
    }

    // Montgomery reduction of a (2n+1)-limb value t < m * R.
    fn redc(&self, t: &mut [u64], out: &mut [u64]) {
        let n = self.modulus.len();
        let m = &self.modulus[..n];
        let mut extra: u64 = 0;
        for i in 0..n {
            let q = t[i].wrapping_mul(self.m_inv);
            let mut carry: u64 = 0;
            for (tj, &mj) in t[i..i + n].iter_mut().zip(m) {
                let v = *tj as u128 + (q as u128) * (mj as u128) + carry as u128;
                *tj = v as u64;
                carry = (v >> 64) as u64;
            }
            let v = t[i + n] as u128 + carry as u128 + extra as u128;
            t[i + n] = v as u64;
            extra = (v >> 64) as u64;
        }
        t[2 * n] = extra;
        self.final_subtract(&t[n..2 * n + 1], out);
    }

    // out = t mod m for an (n+1)-limb t < 2m.
    fn final_subtract(&self, t: &[u64], out: &mut [u64]) {
        let n = self.modulus.len();
        let m = &self.modulus[..n];
        let ge = t[n] != 0 || {
            let mut ge = true;
            for j in (0..n).rev() {
                if t[j] != m[j] {
                    ge = t[j] > m[j];
                    break;
                }
            }
            ge
        };
        if ge {
            let mut borrow = 0u64;
            for j in 0..n {
                let (d1, b1) = t[j].overflowing_sub(m[j]);
                let (d2, b2) = d1.overflowing_sub(borrow);
                out[j] = d2;
                borrow = (b1 | b2) as u64;
            }
        } else {
            out[..n].copy_from_slice(&t[..n]);
        }
    }

    fn pow(&self, base: &BigUint, exp: &BigUint) -> BigUint {
        let n = self.modulus.len();
        let mut t = vec![0u64; 2 * n + 1];
        let mut tmp = vec![0u64; n];

        let b = Self::limbs_of(&(base % &self.big), n);
        let mut b_mont = vec![0u64; n];
        self.mul(&b, &self.r2, &mut b_mont, &mut t);

        let one = Self::limbs_of(&BigUint::one(), n);
        let mut acc = vec![0u64; n];
        self.mul(&one, &self.r2, &mut acc, &mut t);

        // Fixed 5-bit windows from the top: five squarings, then one
        // multiplication by a table entry (entry 0 is one, so every window
        // costs the same).
        const WINDOW: u64 = 5;
        let mut table = vec![acc.clone(), b_mont.clone()];
        for k in 2..(1usize << WINDOW) {
            let mut next = vec![0u64; n];
            self.mul(&table[k - 1], &b_mont, &mut next, &mut t);
            table.push(next);
        }
        let windows = exp.bits().div_ceil(WINDOW);
        for w in (0..windows).rev() {
            let mut digit = 0usize;
            for bit in (0..WINDOW).rev() {
                self.sqr(&acc, &mut tmp, &mut t);
                std::mem::swap(&mut acc, &mut tmp);
                digit = (digit << 1) | exp.bit(w * WINDOW + bit) as usize;
            }
            self.mul(&acc, &table[digit], &mut tmp, &mut t);
            std::mem::swap(&mut acc, &mut tmp);
        }
        self.mul(&acc, &one, &mut tmp, &mut t);
        Self::from_limbs(&tmp)
    }

    fn from_limbs(limbs: &[u64]) -> BigUint {
        BigUint::new(
            limbs
                .iter()
                .flat_map(|limb| [*limb as u32, (*limb >> 32) as u32])
                .collect(),
        )
    }
}

/// Precomputed powers of a fixed base for repeated exponentiation with
/// exponents up to `max_exp_bits` bits: `base^(d * 16^i)` for every nibble
/// position `i` and digit `d`, kept in Montgomery form.
pub struct FixedBasePow {
    ctx: Montgomery,
    table: Vec<Vec<u64>>,
    max_exp_bits: u64,
}

impl FixedBasePow {
    /// `modulus` must be odd and wider than 64 bits.
    pub fn new(base: &BigNat, modulus: &BigNat, max_exp_bits: u64) -> Option<Self> {
        if modulus.0.is_even() || modulus.0.bits() <= 64 {
            return None;
        }
        let ctx = Montgomery::new(&modulus.0);
        let n = ctx.modulus.len();
        let windows = max_exp_bits.div_ceil(4) as usize;
        let mut t = vec![0u64; 2 * n + 1];
        let mut table = Vec::with_capacity(windows * 15);
        let mut unit = vec![0u64; n];
        ctx.mul(&Montgomery::limbs_of(&(&base.0 % &modulus.0), n), &ctx.r2, &mut unit, &mut t);
        for _ in 0..windows {
            let mut power = unit.clone();
            for d in 1..=15u32 {
                table.push(power.clone());
                if d < 15 {
                    let mut next = vec![0u64; n];
                    ctx.mul(&power, &unit, &mut next, &mut t);
                    power = next;
                }
            }
            // unit <- unit^16
            for _ in 0..4 {
                let mut next = vec![0u64; n];
                ctx.sqr(&unit, &mut next, &mut t);
                unit = next;
            }
        }
        Some(Self { ctx, table, max_exp_bits })
    }

    pub fn pow(&self, exp: &BigNat) -> BigNat {
        assert!(exp.bits() <= self.max_exp_bits, "exponent wider than the table");
        let n = self.ctx.modulus.len();
        let mut t = vec![0u64; 2 * n + 1];
        let one = Montgomery::limbs_of(&BigUint::one(), n);
        let mut acc = vec![0u64; n];
        self.ctx.mul(&one, &self.ctx.r2, &mut acc, &mut t);
        let mut tmp = vec![0u64; n];
        for (i, chunk) in exp.0.to_u64_digits().iter().enumerate() {
            for nib in 0..16 {
                let d = ((chunk >> (4 * nib)) & 0xF) as usize;
                if d != 0 {
                    let window = i * 16 + nib;
                    self.ctx.mul(&acc, &self.table[window * 15 + d - 1], &mut tmp, &mut t);
                    std::mem::swap(&mut acc, &mut tmp);
                }
            }
        }
        self.ctx.mul(&acc, &one, &mut tmp, &mut t);
        BigNat(Montgomery::from_limbs(&tmp))
    }
}

/// Probabilistic primality test. `true` means prime with error probability
/// at most 4^-rounds.
pub fn miller_rabin(n: &BigNat, rounds: u32, rng: &mut QshRng) -> bool {
    let n = &n.0;
    let two = BigUint::from(2u8);
    if *n < two {
        return false;
    }
    for small in [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let small = BigUint::from(small);
        if *n == small {
            return true;
        }
        if (n % &small).is_zero() {
            return false;
        }
    }
    let n_minus_one = n - 1u8;
    let s = n_minus_one.trailing_zeros().expect("n - 1 is nonzero");
    let d = &n_minus_one >> s;
    let modulus = BigNat(n.clone());

    'witness: for _ in 0..rounds {
        let a = BigNat(rng.gen_biguint_range(&two, &n_minus_one));
        let mut x = modpow(&a, &BigNat(d.clone()), &modulus)
            .expect("modulus >= 2")
            .0;
        if x.is_one() || x == n_minus_one {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n_minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
