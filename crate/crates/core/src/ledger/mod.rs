//! Phase A commitments, the Merkle query ledger and signed receipts.

mod commitments;
mod log;
mod merkle;
mod receipts;
mod records;
mod signing;
mod store;

pub use commitments::{
    commit_index, commit_phase_a, embedding_leaf, index_leaves, open_all, policy_digest, verify_opening,
    CommitmentBundle, IndexCommitment, Opening,
};
pub use log::Ledger;
pub use merkle::{
    consistency_proof, empty_root, inclusion_proof, leaf_hash, node_hash, root_of, verify_consistency,
    verify_inclusion, ConsistencyProof, Frontier, MerkleProof, PathStep, Side,
};
pub use receipts::{issue_receipt, verify_receipt, Receipt, ReceiptCheck};
pub use records::{topk_digest, AttestationBlob, Backend, Claim, QueryRecord};
pub use signing::{DigestSigner, DigestVerifier, ProviderKey, ProviderPublicKey};
pub use store::{load_ledger, save_ledger, LedgerWriter, JOURNAL_FILE, RECORDS_FILE};
