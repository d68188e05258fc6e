use std::collections::HashMap;

use super::merkle::{consistency_proof, inclusion_proof, ConsistencyProof, Frontier, MerkleProof};
use super::records::QueryRecord;
use crate::digest::Digest;
use crate::error::{Error, Result};

/// Append-only log of query records with every historical root.
#[derive(Debug, Clone, Default)]
pub struct Ledger {
    records: Vec<QueryRecord>,
    leaves: Vec<Digest>,
    roots: Vec<Digest>,
    root_index: HashMap<Digest, u64>,
    frontier: Frontier,
}

impl Ledger {
    pub fn new() -> Self {
        let mut l = Ledger::default();
        let r = l.frontier.root();
        l.roots.push(r);
        l.root_index.insert(r, 0);
        l
    }

    /// Rebuild a ledger from scratch.
    pub fn from_records(records: impl IntoIterator<Item = QueryRecord>) -> Result<Self> {
        let mut l = Ledger::new();
        for r in records {
            l.append(r)?;
        }
        Ok(l)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[QueryRecord] {
        &self.records
    }

    pub fn leaves(&self) -> &[Digest] {
        &self.leaves
    }

    pub fn root(&self) -> Digest {
        *self.roots.last().expect("roots always holds the empty root")
    }

    /// Root after the first `size` records.
    pub fn root_at(&self, size: usize) -> Option<Digest> {
        self.roots.get(size).copied()
    }

    /// Journal of `(size, root)` for every prefix.
    pub fn root_journal(&self) -> impl Iterator<Item = (u64, Digest)> + '_ {
        self.roots.iter().enumerate().map(|(i, r)| (i as u64, *r))
    }

    pub fn size_of_root(&self, root: &Digest) -> Option<u64> {
        self.root_index.get(root).copied()
    }

    /// Append a record; timestamps must strictly increase.
    pub fn append(&mut self, record: QueryRecord) -> Result<(Digest, u64)> {
        if let Some(last) = self.records.last() {
            if record.timestamp <= last.timestamp {
                return Err(Error::Ledger(format!(
                    "timestamp {} does not follow {}",
                    record.timestamp, last.timestamp
                )));
            }
        }
        let leaf = record.leaf();
        self.frontier.push(leaf);
        let root = self.frontier.root();
        let pos = self.records.len() as u64;
        self.records.push(record);
        self.leaves.push(leaf);
        self.roots.push(root);
        self.root_index.entry(root).or_insert(pos + 1);
        Ok((root, pos))
    }

    pub fn prove_inclusion(&self, position: u64) -> Result<MerkleProof> {
        self.prove_inclusion_at(position, self.len() as u64)
    }

    pub fn prove_inclusion_at(&self, position: u64, tree_size: u64) -> Result<MerkleProof> {
        if tree_size as usize > self.len() {
            return Err(Error::Ledger(format!("tree size {tree_size} exceeds ledger length {}", self.len())));
        }
        inclusion_proof(&self.leaves[..tree_size as usize], position as usize).ok_or_else(|| {
            Error::Ledger(format!("position {position} out of range for {tree_size} leaves"))
        })
    }

    pub fn prove_extension(&self, old_root: &Digest, new_root: &Digest) -> Result<ConsistencyProof> {
        let old = self
            .size_of_root(old_root)
            .ok_or_else(|| Error::Ledger(format!("{old_root} is not a root of this ledger")))?;
        let new = self
            .size_of_root(new_root)
            .ok_or_else(|| Error::Ledger(format!("{new_root} is not a root of this ledger")))?;
        if old > new {
            return Err(Error::Ledger(format!("old size {old} exceeds new size {new}")));
        }
        Ok(consistency_proof(&self.leaves[..new as usize], old as usize).expect("sizes checked"))
    }
}
