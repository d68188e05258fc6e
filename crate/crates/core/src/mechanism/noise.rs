//! Deterministic Gaussian noise keyed by a window seed and a query record.

use serde::{Deserialize, Serialize};

use crate::digest::{sha256, Digest};

const TWO_POW_NEG_53: f64 = 1.0 / (1u64 << 53) as f64;

/// Standard normal draw for one score coordinate, scaled by `sigma`.
///
/// Block 0 of `SHA-256(seed || record || coord_be8 || counter_be8)` supplies two
/// 64-bit words `x, y`; `u1 = ((x >> 11) + 1) 2^-53` lies in (0, 1],
/// `u2 = (y >> 11) 2^-53` in [0, 1). Box-Muller on `(u1, u2)` uses libm so the
/// result is bit-identical on every platform.
pub fn derive_noise(window_seed: &[u8; 32], record_digest: &Digest, coordinate: u64, sigma: f64) -> f64 {
    let mut buf = [0u8; 80];
    buf[..32].copy_from_slice(window_seed);
    buf[32..64].copy_from_slice(record_digest.as_bytes());
    buf[64..72].copy_from_slice(&coordinate.to_be_bytes());
    // counter = 0; one block yields the two words we need
    let h = sha256(&buf);
    let b = h.as_bytes();
    let x = u64::from_be_bytes(b[0..8].try_into().unwrap());
    let y = u64::from_be_bytes(b[8..16].try_into().unwrap());
    let u1 = ((x >> 11) + 1) as f64 * TWO_POW_NEG_53;
    let u2 = (y >> 11) as f64 * TWO_POW_NEG_53;
    let r = (-2.0 * libm::log(u1)).sqrt();
    sigma * r * libm::cos(2.0 * std::f64::consts::PI * u2)
}

/// Inputs that fully determine the noise of one query.
///
/// `window_seed` is the provider's secret; only its hash is ever published.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSeedRecord {
    #[serde(with = "hex_bytes32")]
    pub window_seed: [u8; 32],
    pub query_record_digest: Digest,
    pub sigma: f64,
}

impl NoiseSeedRecord {
    pub fn new(window_seed: [u8; 32], query_record_digest: Digest, sigma: f64) -> Self {
        Self {
            window_seed,
            query_record_digest,
            sigma,
        }
    }

    pub fn window_seed_commitment(&self) -> Digest {
        sha256(&self.window_seed)
    }

    pub fn draw(&self, coordinate: u64) -> f64 {
        derive_noise(&self.window_seed, &self.query_record_digest, coordinate, self.sigma)
    }

    /// Noise for coordinates `0..n`.
    pub fn vector(&self, n: usize) -> Vec<f64> {
        (0..n as u64).map(|i| self.draw(i)).collect()
    }
}

pub(crate) mod hex_bytes32 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(b))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let s = String::deserialize(d)?;
        let v = hex::decode(&s).map_err(serde::de::Error::custom)?;
        v.try_into()
            .map_err(|_| serde::de::Error::custom("expected 32 bytes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(i: u64) -> Digest {
        sha256(&i.to_be_bytes())
    }

    #[test]
    fn fixed_inputs_fixed_output() {
        let seed = [7u8; 32];
        let a = derive_noise(&seed, &rec(1), 3, 2.0);
        let b = derive_noise(&seed, &rec(1), 3, 2.0);
        assert_eq!(a.to_bits(), b.to_bits());
        assert_ne!(a, derive_noise(&seed, &rec(1), 4, 2.0));
        assert_ne!(a, derive_noise(&seed, &rec(2), 3, 2.0));
        assert_eq!((a / 2.0).to_bits(), derive_noise(&seed, &rec(1), 3, 1.0).to_bits());
    }

    #[test]
    fn seed_record_serde_roundtrip() {
        let r = NoiseSeedRecord::new([3u8; 32], rec(9), 1.5);
        let j = serde_json::to_string(&r).unwrap();
        let back: NoiseSeedRecord = serde_json::from_str(&j).unwrap();
        assert_eq!(r, back);
        assert_eq!(r.window_seed_commitment(), sha256(&[3u8; 32]));
    }
}
