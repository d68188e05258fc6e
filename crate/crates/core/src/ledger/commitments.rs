//! Commitments published before the audit window opens.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::merkle::{empty_root, inclusion_proof, leaf_hash, root_of, verify_inclusion, MerkleProof};
use crate::accounting::PolicyParams;
use crate::digest::{sha256, CanonicalWriter, Digest};
use crate::error::{Error, Result};
use crate::mechanism::TenantIndex;

/// Root and size of one tenant's embedding commitment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexCommitment {
    pub root: Digest,
    pub size: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitmentBundle {
    pub c_emb: Digest,
    pub c_idx: BTreeMap<String, IndexCommitment>,
    pub c_seed: Digest,
    pub c_ledger_0: Digest,
    pub c_policy: Digest,
    /// Digest of the coalition estimator's parameters, when bound.
    pub c_estimator: Option<Digest>,
    pub published_at: u64,
}

/// `H(eps_acc || delta_acc || sigma || k_max || delta_policy || window_id)`.
pub fn policy_digest(p: &PolicyParams) -> Digest {
    CanonicalWriter::new()
        .f64(p.eps_acc)
        .f64(p.delta_acc)
        .f64(p.sigma)
        .u64(p.k_max as u64)
        .f64(p.delta_policy)
        .str(&p.window_id)
        .hash()
}

pub fn embedding_leaf(embedding: &[f64]) -> Digest {
    leaf_hash(&CanonicalWriter::new().f64_list(embedding).finish())
}

pub fn index_leaves(index: &TenantIndex) -> Vec<Digest> {
    index.embeddings.iter().map(|e| embedding_leaf(e)).collect()
}

pub fn commit_index(index: &TenantIndex) -> IndexCommitment {
    IndexCommitment {
        root: root_of(&index_leaves(index)),
        size: index.len() as u64,
    }
}

/// An embedding opened at one position with its Merkle path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Opening {
    pub tenant_id: String,
    pub position: u64,
    pub embedding: Vec<f64>,
    pub proof: MerkleProof,
}

/// Open every position of an index, sharing one leaf computation.
pub fn open_all(index: &TenantIndex) -> Vec<Opening> {
    let leaves = index_leaves(index);
    (0..index.len())
        .map(|p| Opening {
            tenant_id: index.tenant_id.clone(),
            position: p as u64,
            embedding: index.embeddings[p].clone(),
            proof: inclusion_proof(&leaves, p).expect("position in range"),
        })
        .collect()
}

pub fn verify_opening(commitment: &IndexCommitment, opening: &Opening) -> bool {
    opening.proof.leaf_position == opening.position
        && opening.proof.tree_size == commitment.size
        && verify_inclusion(&commitment.root, &embedding_leaf(&opening.embedding), &opening.proof)
}

pub fn commit_phase_a(
    policy: &PolicyParams,
    embedder_digest: Digest,
    indices: &[TenantIndex],
    window_seed: &[u8; 32],
) -> Result<CommitmentBundle> {
    let mut c_idx = BTreeMap::new();
    for idx in indices {
        if c_idx.insert(idx.tenant_id.clone(), commit_index(idx)).is_some() {
            return Err(Error::InvalidInput(format!("duplicate tenant id {:?}", idx.tenant_id)));
        }
    }
    Ok(CommitmentBundle {
        c_emb: embedder_digest,
        c_idx,
        c_seed: sha256(window_seed),
        c_ledger_0: empty_root(),
        c_policy: policy_digest(policy),
        c_estimator: None,
        published_at: 0,
    })
}

impl CommitmentBundle {
    pub fn with_estimator(mut self, params_digest: Digest) -> Self {
        self.c_estimator = Some(params_digest);
        self
    }

    /// Digest of the whole bundle, for manifests.
    pub fn digest(&self) -> Digest {
        let mut w = CanonicalWriter::new();
        w.digest(&self.c_emb).u64(self.c_idx.len() as u64);
        for (t, c) in &self.c_idx {
            w.str(t).digest(&c.root).u64(c.size);
        }
        w.digest(&self.c_seed)
            .digest(&self.c_ledger_0)
            .digest(&self.c_policy)
            .bytes(self.c_estimator.as_ref().map_or(&[][..], |d| d.as_bytes()))
            .u64(self.published_at);
        w.hash()
    }
}
