//! Arithmetic in Z_q[x]/(x^n + 1).

/// Ring parameters. The LWE backend uses n = 256, q = 3329; tests use
/// small rings through the same code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ring {
    pub n: usize,
    pub q: u32,
}

/// Polynomial with `n` coefficients, each reduced into [0, q).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingPoly {
    pub coeffs: Vec<u32>,
}

impl Ring {
    pub const LWE: Ring = Ring { n: 256, q: 3329 };

    pub fn new(n: usize, q: u32) -> Self {
        assert!(n > 0 && q >= 2, "degenerate ring");
        Self { n, q }
    }

    pub fn zero(&self) -> RingPoly {
        RingPoly { coeffs: vec![0; self.n] }
    }

    /// Reduces arbitrary signed coefficients into canonical form.
    pub fn from_signed(&self, coeffs: &[i64]) -> RingPoly {
        assert_eq!(coeffs.len(), self.n);
        let q = self.q as i64;
        RingPoly { coeffs: coeffs.iter().map(|c| c.rem_euclid(q) as u32).collect() }
    }

    pub fn is_canonical(&self, p: &RingPoly) -> bool {
        p.coeffs.len() == self.n && p.coeffs.iter().all(|&c| c < self.q)
    }

    pub fn add(&self, a: &RingPoly, b: &RingPoly) -> RingPoly {
        debug_assert!(self.is_canonical(a) && self.is_canonical(b));
        RingPoly {
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| (x + y) % self.q).collect(),
        }
    }

    pub fn sub(&self, a: &RingPoly, b: &RingPoly) -> RingPoly {
        debug_assert!(self.is_canonical(a) && self.is_canonical(b));
        RingPoly {
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| (x + self.q - y) % self.q).collect(),
        }
    }

    /// Schoolbook product with x^n = -1.
    pub fn mul(&self, a: &RingPoly, b: &RingPoly) -> RingPoly {
        let mut acc = vec![0i64; self.n];
        self.mul_acc(a, b, &mut acc);
        self.from_signed(&acc)
    }

    /// Adds the unreduced negacyclic product a*b into `acc`. Callers summing
    /// several products reduce once at the end; with q < 2^16 and n <= 2^10
    /// the accumulator has room for thousands of products.
    pub fn mul_acc(&self, a: &RingPoly, b: &RingPoly, acc: &mut [i64]) {
        debug_assert!(self.is_canonical(a) && self.is_canonical(b));
        let n = self.n;
        for (i, &ai) in a.coeffs.iter().enumerate() {
            if ai == 0 {
                continue;
            }
            let ai = ai as i64;
            let (low, high) = b.coeffs.split_at(n - i);
            // x^i * b_j x^j with i + j < n lands at i + j.
            for (dst, &bj) in acc[i..].iter_mut().zip(low) {
                *dst += ai * bj as i64;
            }
            // i + j >= n wraps around with a sign flip.
            for (dst, &bj) in acc[..i].iter_mut().zip(high) {
                *dst -= ai * bj as i64;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TEST_RING: Ring = Ring { n: 4, q: 17 };

    fn poly(c: &[u32]) -> RingPoly {
        RingPoly { coeffs: c.to_vec() }
    }

    // Independent oracle: full product of degree < 2n, then fold the top
    // half down with a sign flip.
    fn oracle_mul(ring: Ring, a: &RingPoly, b: &RingPoly) -> RingPoly {
        let n = ring.n;
        let q = ring.q as i64;
        let mut full = vec![0i64; 2 * n];
        for i in 0..n {
            for j in 0..n {
                full[i + j] += a.coeffs[i] as i64 * b.coeffs[j] as i64;
            }
        }
        let folded: Vec<u32> = (0..n).map(|k| (full[k] - full[k + n]).rem_euclid(q) as u32).collect();
        poly(&folded)
    }

    #[test]
    fn x_times_x_cubed_is_minus_one() {
        let r = TEST_RING;
        assert_eq!(r.mul(&poly(&[0, 1, 0, 0]), &poly(&[0, 0, 0, 1])), poly(&[16, 0, 0, 0]));
    }

    #[test]
    fn identities() {
        let r = TEST_RING;
        let a = poly(&[3, 16, 0, 9]);
        assert_eq!(r.mul(&a, &poly(&[1, 0, 0, 0])), a);
        assert_eq!(r.add(&a, &r.zero()), a);
        assert_eq!(r.sub(&a, &a), r.zero());
    }

    #[test]
    fn lwe_ring_matches_oracle() {
        let r = Ring::LWE;
        let a = RingPoly { coeffs: (0..256).map(|i| (i * 37 + 5) % 3329).collect() };
        let b = RingPoly { coeffs: (0..256).map(|i| (i * i * 11 + 1) % 3329).collect() };
        assert_eq!(r.mul(&a, &b), oracle_mul(r, &a, &b));
    }

    fn arb_poly() -> impl Strategy<Value = RingPoly> {
        prop::collection::vec(0u32..17, 4).prop_map(|coeffs| RingPoly { coeffs })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn ring_laws((a, b, c) in (arb_poly(), arb_poly(), arb_poly())) {
            let r = TEST_RING;
            prop_assert_eq!(r.mul(&a, &b), oracle_mul(r, &a, &b));
            prop_assert_eq!(r.mul(&a, &b), r.mul(&b, &a));
            prop_assert_eq!(r.add(&a, &b), r.add(&b, &a));
            prop_assert_eq!(r.mul(&r.mul(&a, &b), &c), r.mul(&a, &r.mul(&b, &c)));
            prop_assert_eq!(r.add(&r.add(&a, &b), &c), r.add(&a, &r.add(&b, &c)));
            prop_assert_eq!(r.mul(&a, &r.add(&b, &c)), r.add(&r.mul(&a, &b), &r.mul(&a, &c)));
        }
    }
}
