//! Provider-signed query-time receipts.

use serde::{Deserialize, Serialize};

use super::log::Ledger;
use super::merkle::{verify_consistency, verify_inclusion};
use super::records::{hex_vec, QueryRecord};
use super::signing::{DigestSigner, DigestVerifier};
use crate::digest::{CanonicalWriter, Digest};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub account_id: String,
    pub query_digest: Digest,
    pub topk_digest: Digest,
    pub leaf_position: u64,
    pub ledger_root_at_issue: Digest,
    #[serde(with = "hex_vec")]
    pub signature: Vec<u8>,
}

impl Receipt {
    /// Digest of the five signed fields.
    pub fn signed_digest(&self) -> Digest {
        CanonicalWriter::new()
            .str(&self.account_id)
            .digest(&self.query_digest)
            .digest(&self.topk_digest)
            .u64(self.leaf_position)
            .digest(&self.ledger_root_at_issue)
            .hash()
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        CanonicalWriter::new()
            .str(&self.account_id)
            .digest(&self.query_digest)
            .digest(&self.topk_digest)
            .u64(self.leaf_position)
            .digest(&self.ledger_root_at_issue)
            .bytes(&self.signature)
            .finish()
    }
}

/// Receipt for `record`, appended at `position`, with the root right after that append.
pub fn issue_receipt(record: &QueryRecord, position: u64, root: Digest, signer: &impl DigestSigner) -> Receipt {
    let mut r = Receipt {
        account_id: record.account_id.clone(),
        query_digest: record.query_digest,
        topk_digest: record.topk_digest,
        leaf_position: position,
        ledger_root_at_issue: root,
        signature: Vec::new(),
    };
    r.signature = signer.sign_digest(&r.signed_digest());
    r
}

/// Result of checking a receipt against a ledger.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "reason")]
pub enum ReceiptCheck {
    Consistent,
    /// A validly signed receipt disagrees with the ledger: the provider rewrote history.
    Forgery(String),
    /// The receipted record is missing from its position.
    NonInclusion(String),
    /// The signature does not verify; the receipt proves nothing.
    BadSignature,
}

impl ReceiptCheck {
    pub fn is_consistent(&self) -> bool {
        matches!(self, ReceiptCheck::Consistent)
    }
}

pub fn verify_receipt(receipt: &Receipt, verifier: &impl DigestVerifier, ledger: &Ledger) -> ReceiptCheck {
    if !verifier.verify_digest(&receipt.signed_digest(), &receipt.signature) {
        return ReceiptCheck::BadSignature;
    }
    let pos = receipt.leaf_position;
    let Some(record) = ledger.records().get(pos as usize) else {
        return ReceiptCheck::NonInclusion(format!(
            "position {pos} is beyond the ledger's {} records",
            ledger.len()
        ));
    };
    if record.account_id != receipt.account_id || record.query_digest != receipt.query_digest {
        return ReceiptCheck::NonInclusion(format!("position {pos} holds a different query"));
    }
    if record.topk_digest != receipt.topk_digest {
        return ReceiptCheck::Forgery(format!(
            "top-K digest at position {pos} is {} but the receipt signed {}",
            record.topk_digest, receipt.topk_digest
        ));
    }
    let root = ledger.root();
    let proof = match ledger.prove_inclusion(pos) {
        Ok(p) => p,
        Err(e) => return ReceiptCheck::NonInclusion(e.to_string()),
    };
    if !verify_inclusion(&root, &record.leaf(), &proof) {
        return ReceiptCheck::NonInclusion(format!("inclusion proof for position {pos} fails"));
    }
    let issue_size = pos as usize + 1;
    if ledger.root_at(issue_size) != Some(receipt.ledger_root_at_issue) {
        return ReceiptCheck::Forgery(format!(
            "ledger prefix of size {issue_size} does not match the root at issue"
        ));
    }
    let ext = super::merkle::consistency_proof(ledger.leaves(), issue_size).expect("size in range");
    if !verify_consistency(&receipt.ledger_root_at_issue, &root, &ext) {
        return ReceiptCheck::Forgery("current root does not extend the root at issue".into());
    }
    ReceiptCheck::Consistent
}
