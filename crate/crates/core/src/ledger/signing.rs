//! Detached signatures over 32-byte digests.

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::digest::{sha256, Digest};
use crate::error::{Error, Result};

pub trait DigestSigner {
    fn sign_digest(&self, digest: &Digest) -> Vec<u8>;
}

pub trait DigestVerifier {
    fn verify_digest(&self, digest: &Digest, signature: &[u8]) -> bool;
}

/// Provider's long-term Ed25519 key.
#[derive(Clone)]
pub struct ProviderKey(SigningKey);

impl ProviderKey {
    pub fn from_seed(seed: [u8; 32]) -> Self {
        ProviderKey(SigningKey::from_bytes(&seed))
    }

    /// Fixed key for tests and reproducible demos. Never use it to protect anything.
    pub fn test_key() -> Self {
        Self::from_seed(sha256(b"collusion-audit deterministic test key").0)
    }

    pub fn public(&self) -> ProviderPublicKey {
        ProviderPublicKey(self.0.verifying_key())
    }
}

impl std::fmt::Debug for ProviderKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ProviderKey({})", hex::encode(self.0.verifying_key().as_bytes()))
    }
}

impl DigestSigner for ProviderKey {
    fn sign_digest(&self, digest: &Digest) -> Vec<u8> {
        self.0.sign(digest.as_bytes()).to_bytes().to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProviderPublicKey(VerifyingKey);

impl ProviderPublicKey {
    pub fn from_bytes(b: &[u8; 32]) -> Result<Self> {
        VerifyingKey::from_bytes(b)
            .map(ProviderPublicKey)
            .map_err(|e| Error::Encoding(format!("bad public key: {e}")))
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.0.to_bytes()
    }
}

impl DigestVerifier for ProviderPublicKey {
    fn verify_digest(&self, digest: &Digest, signature: &[u8]) -> bool {
        let Ok(bytes) = <[u8; 64]>::try_from(signature) else {
            return false;
        };
        self.0
            .verify(digest.as_bytes(), &Signature::from_bytes(&bytes))
            .is_ok()
    }
}

impl Serialize for ProviderPublicKey {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.to_bytes()))
    }
}

impl<'de> Deserialize<'de> for ProviderPublicKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let v = hex::decode(&s).map_err(serde::de::Error::custom)?;
        let b: [u8; 32] = v
            .try_into()
            .map_err(|_| serde::de::Error::custom("public key must be 32 bytes"))?;
        ProviderPublicKey::from_bytes(&b).map_err(serde::de::Error::custom)
    }
}
