use serde::{Deserialize, Serialize};

use crate::digest::{CanonicalReader, CanonicalWriter, Digest};
use crate::error::{Error, Result};

/// Properties a per-query attestation vouches for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Claim {
    EmbedderConsistency,
    NoiseDerivation,
    NoiseThenSelect,
    TenantContainment,
}

impl Claim {
    pub const ALL: [Claim; 4] = [
        Claim::EmbedderConsistency,
        Claim::NoiseDerivation,
        Claim::NoiseThenSelect,
        Claim::TenantContainment,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Claim::EmbedderConsistency => "embedder_consistency",
            Claim::NoiseDerivation => "noise_derivation",
            Claim::NoiseThenSelect => "noise_then_select",
            Claim::TenantContainment => "tenant_containment",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Claim::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Encoding(format!("unknown claim {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Witness discloses everything; the verifier re-executes.
    Transparent,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Transparent => "transparent",
        }
    }
}

/// Per-query proof object stored in the ledger record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttestationBlob {
    pub claims: Vec<Claim>,
    pub backend: Backend,
    #[serde(with = "hex_vec")]
    pub witness: Vec<u8>,
}

impl AttestationBlob {
    pub fn covers_all_claims(&self) -> bool {
        Claim::ALL.iter().all(|c| self.claims.contains(c))
    }
}

/// One ledger leaf.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub account_id: String,
    pub tenant_id: String,
    pub query_digest: Digest,
    pub topk_digest: Digest,
    pub timestamp: u64,
    pub attestation: AttestationBlob,
}

impl QueryRecord {
    /// Digest of the fields fixed before retrieval runs; keys the query's noise.
    pub fn noise_key(account_id: &str, tenant_id: &str, query_digest: &Digest, timestamp: u64) -> Digest {
        CanonicalWriter::new()
            .str("query-noise-key")
            .str(account_id)
            .str(tenant_id)
            .digest(query_digest)
            .u64(timestamp)
            .hash()
    }

    pub fn record_noise_key(&self) -> Digest {
        Self::noise_key(&self.account_id, &self.tenant_id, &self.query_digest, self.timestamp)
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut w = CanonicalWriter::new();
        w.str(&self.account_id)
            .str(&self.tenant_id)
            .digest(&self.query_digest)
            .digest(&self.topk_digest)
            .u64(self.timestamp)
            .u64(self.attestation.claims.len() as u64);
        for c in &self.attestation.claims {
            w.str(c.name());
        }
        w.str(self.attestation.backend.name())
            .bytes(&self.attestation.witness)
            .finish()
    }

    pub fn from_canonical_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = CanonicalReader::new(bytes);
        let account_id = r.str()?;
        let tenant_id = r.str()?;
        let query_digest = r.digest()?;
        let topk_digest = r.digest()?;
        let timestamp = r.u64()?;
        let n = r.u64()? as usize;
        if n > Claim::ALL.len() * 4 {
            return Err(Error::Encoding(format!("implausible claim count {n}")));
        }
        let claims = (0..n).map(|_| Claim::from_name(&r.str()?)).collect::<Result<Vec<_>>>()?;
        let backend = match r.str()?.as_str() {
            "transparent" => Backend::Transparent,
            other => return Err(Error::Encoding(format!("unknown backend {other:?}"))),
        };
        let witness = r.bytes()?.to_vec();
        r.finish()?;
        Ok(QueryRecord {
            account_id,
            tenant_id,
            query_digest,
            topk_digest,
            timestamp,
            attestation: AttestationBlob {
                claims,
                backend,
                witness,
            },
        })
    }

    pub fn leaf(&self) -> Digest {
        super::merkle::leaf_hash(&self.canonical_bytes())
    }
}

/// Digest of a top-K result list: positions and doc ids in rank order.
pub fn topk_digest(positions: &[usize], doc_ids: &[String]) -> Digest {
    let mut w = CanonicalWriter::new();
    w.str("topk").u64(positions.len() as u64);
    for (p, d) in positions.iter().zip(doc_ids) {
        w.u64(*p as u64).str(d);
    }
    w.hash()
}

pub(crate) mod hex_vec {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(b))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digest::sha256;

    pub(crate) fn record(i: u64) -> QueryRecord {
        QueryRecord {
            account_id: format!("acct-{}", i % 3),
            tenant_id: "t0".into(),
            query_digest: sha256(&i.to_be_bytes()),
            topk_digest: sha256(b"topk"),
            timestamp: i + 1,
            attestation: AttestationBlob {
                claims: Claim::ALL.to_vec(),
                backend: Backend::Transparent,
                witness: vec![1, 2, 3],
            },
        }
    }

    #[test]
    fn canonical_roundtrip() {
        let r = record(5);
        let back = QueryRecord::from_canonical_bytes(&r.canonical_bytes()).unwrap();
        assert_eq!(r, back);
        let mut bytes = r.canonical_bytes();
        bytes.push(0);
        assert!(QueryRecord::from_canonical_bytes(&bytes).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let r = record(2);
        let j = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<QueryRecord>(&j).unwrap(), r);
    }

    #[test]
    fn topk_digest_is_order_sensitive() {
        let ids = vec!["a".to_string(), "b".to_string()];
        let rev = vec!["b".to_string(), "a".to_string()];
        assert_ne!(topk_digest(&[0, 1], &ids), topk_digest(&[1, 0], &rev));
    }
}
