use super::KemError;

/// Effective security strength of a key-encryption algorithm against
/// classical and quantum adversaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SecurityProfile {
    pub label: &'static str,
    pub key_bits: u32,
    pub classical_bits: u32,
    pub quantum_bits: u32,
    pub quantum_safe: bool,
}

impl SecurityProfile {
    const fn row(label: &'static str, key_bits: u32, classical_bits: u32, quantum_bits: u32) -> Self {
        Self {
            label,
            key_bits,
            classical_bits,
            quantum_bits,
            // AES-128 keeps only 64 bits against Grover search; 128 is the
            // bar the 256-bit keys clear.
            quantum_safe: quantum_bits >= 128,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.label.starts_with("AES")
    }

    /// `label,key_bits,classical_bits,quantum_bits,quantum_safe`
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.label, self.key_bits, self.classical_bits, self.quantum_bits, self.quantum_safe
        )
    }
}

/// Shor's algorithm zeroes out RSA and ECC; Grover halves symmetric keys.
pub const SECURITY_PROFILES: [SecurityProfile; 6] = [
    SecurityProfile::row("RSA 1024", 1024, 80, 0),
    SecurityProfile::row("RSA 2048", 2048, 112, 0),
    SecurityProfile::row("ECC 256", 256, 128, 0),
    SecurityProfile::row("ECC 384", 384, 256, 0),
    SecurityProfile::row("AES 128", 128, 128, 64),
    SecurityProfile::row("AES 256", 256, 256, 128),
];

pub fn security_profile(label: &str) -> Result<SecurityProfile, KemError> {
    SECURITY_PROFILES
        .iter()
        .find(|p| p.label == label)
        .copied()
        .ok_or_else(|| KemError::UnknownName(label.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rows() {
        let rsa = security_profile("RSA 2048").unwrap();
        assert_eq!((rsa.key_bits, rsa.classical_bits, rsa.quantum_bits, rsa.quantum_safe), (2048, 112, 0, false));
        let aes = security_profile("AES 256").unwrap();
        assert_eq!((aes.key_bits, aes.classical_bits, aes.quantum_bits, aes.quantum_safe), (256, 256, 128, true));
        let ecc = security_profile("ECC 384").unwrap();
        assert_eq!((ecc.key_bits, ecc.classical_bits, ecc.quantum_bits, ecc.quantum_safe), (384, 256, 0, false));
    }

    #[test]
    fn unknown_label() {
        assert!(security_profile("DES 56").is_err());
    }

    #[test]
    fn grover_halves_symmetric_and_shor_zeroes_asymmetric() {
        for p in SECURITY_PROFILES {
            if p.is_symmetric() {
                assert_eq!(p.quantum_bits, p.classical_bits / 2, "{}", p.label);
            } else {
                assert_eq!(p.quantum_bits, 0, "{}", p.label);
            }
        }
    }
}
