//! Transparent-backend witness: everything a verifier needs to re-execute one query.

use serde::{Deserialize, Serialize};

use crate::digest::{CanonicalReader, CanonicalWriter, Digest};
use crate::error::{Error, Result};
use crate::ledger::{MerkleProof, Opening, PathStep, Side};

/// Disclosed in full to the verifier; this is not zero-knowledge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransparentWitness {
    pub embedder_digest: Digest,
    pub query: Vec<f64>,
    /// Key the noise was derived from; must equal the record's noise key.
    pub noise_key: Digest,
    pub sigma: f64,
    /// Claimed noise for coordinates `0..N` of the tenant index.
    pub noise: Vec<f64>,
    pub topk_positions: Vec<u64>,
    pub topk_doc_ids: Vec<String>,
    /// Openings of the top-K positions, in rank order.
    pub openings: Vec<Opening>,
}

fn write_proof(w: &mut CanonicalWriter, p: &MerkleProof) {
    w.u64(p.leaf_position).u64(p.tree_size).u64(p.path.len() as u64);
    for s in &p.path {
        w.digest(&s.sibling).u64(match s.side {
            Side::Left => 0,
            Side::Right => 1,
        });
    }
}

fn read_proof(r: &mut CanonicalReader) -> Result<MerkleProof> {
    let leaf_position = r.u64()?;
    let tree_size = r.u64()?;
    let n = r.u64()?;
    if n > 64 {
        return Err(Error::Encoding(format!("implausible proof length {n}")));
    }
    let path = (0..n)
        .map(|_| {
            let sibling = r.digest()?;
            let side = match r.u64()? {
                0 => Side::Left,
                1 => Side::Right,
                s => return Err(Error::Encoding(format!("bad side tag {s}"))),
            };
            Ok(PathStep { sibling, side })
        })
        .collect::<Result<_>>()?;
    Ok(MerkleProof {
        leaf_position,
        tree_size,
        path,
    })
}

impl TransparentWitness {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = CanonicalWriter::new();
        w.str("transparent-witness/1")
            .digest(&self.embedder_digest)
            .f64_list(&self.query)
            .digest(&self.noise_key)
            .f64(self.sigma)
            .f64_list(&self.noise)
            .u64(self.topk_positions.len() as u64);
        for (p, d) in self.topk_positions.iter().zip(&self.topk_doc_ids) {
            w.u64(*p).str(d);
        }
        w.u64(self.openings.len() as u64);
        for o in &self.openings {
            w.str(&o.tenant_id).u64(o.position).f64_list(&o.embedding);
            write_proof(&mut w, &o.proof);
        }
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = CanonicalReader::new(bytes);
        let tag = r.str()?;
        if tag != "transparent-witness/1" {
            return Err(Error::Encoding(format!("unknown witness format {tag:?}")));
        }
        let embedder_digest = r.digest()?;
        let query = r.f64_list()?;
        let noise_key = r.digest()?;
        let sigma = r.f64()?;
        let noise = r.f64_list()?;
        let k = r.u64()? as usize;
        if k > noise.len().max(1) * 2 {
            return Err(Error::Encoding(format!("implausible top-K length {k}")));
        }
        let mut topk_positions = Vec::with_capacity(k);
        let mut topk_doc_ids = Vec::with_capacity(k);
        for _ in 0..k {
            topk_positions.push(r.u64()?);
            topk_doc_ids.push(r.str()?);
        }
        let m = r.u64()? as usize;
        if m > k.max(1) * 2 {
            return Err(Error::Encoding(format!("implausible opening count {m}")));
        }
        let openings = (0..m)
            .map(|_| {
                Ok(Opening {
                    tenant_id: r.str()?,
                    position: r.u64()?,
                    embedding: r.f64_list()?,
                    proof: read_proof(&mut r)?,
                })
            })
            .collect::<Result<_>>()?;
        r.finish()?;
        Ok(TransparentWitness {
            embedder_digest,
            query,
            noise_key,
            sigma,
            noise,
            topk_positions,
            topk_doc_ids,
            openings,
        })
    }
}
