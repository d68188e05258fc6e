//! Append-only Merkle tree with RFC 6962 hashing and proof shapes.

use serde::{Deserialize, Serialize};

use crate::digest::{sha256, sha256_concat, Digest};

pub fn leaf_hash(data: &[u8]) -> Digest {
    sha256_concat(&[&[0x00], data])
}

pub fn node_hash(left: &Digest, right: &Digest) -> Digest {
    sha256_concat(&[&[0x01], left.as_bytes(), right.as_bytes()])
}

/// Root of the empty tree, `SHA-256("")`.
pub fn empty_root() -> Digest {
    sha256(b"")
}

fn split_point(n: usize) -> usize {
    // largest power of two strictly below n (n >= 2)
    1 << (usize::BITS - 1 - (n - 1).leading_zeros())
}

/// Tree hash over already-hashed leaves.
pub fn root_of(leaves: &[Digest]) -> Digest {
    match leaves.len() {
        0 => empty_root(),
        1 => leaves[0],
        n => {
            let k = split_point(n);
            node_hash(&root_of(&leaves[..k]), &root_of(&leaves[k..]))
        }
    }
}

/// Which side of the running hash a sibling sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathStep {
    pub sibling: Digest,
    pub side: Side,
}

/// Audit path from a leaf to the root of a tree of `tree_size` leaves.
/// Its length is at most `ceil(log2(tree_size))`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MerkleProof {
    pub leaf_position: u64,
    pub tree_size: u64,
    pub path: Vec<PathStep>,
}

pub fn inclusion_proof(leaves: &[Digest], position: usize) -> Option<MerkleProof> {
    if position >= leaves.len() {
        return None;
    }
    let mut path = Vec::new();
    inclusion_path(leaves, position, &mut path);
    Some(MerkleProof {
        leaf_position: position as u64,
        tree_size: leaves.len() as u64,
        path,
    })
}

fn inclusion_path(leaves: &[Digest], m: usize, out: &mut Vec<PathStep>) {
    let n = leaves.len();
    if n <= 1 {
        return;
    }
    let k = split_point(n);
    if m < k {
        inclusion_path(&leaves[..k], m, out);
        out.push(PathStep {
            sibling: root_of(&leaves[k..]),
            side: Side::Right,
        });
    } else {
        inclusion_path(&leaves[k..], m - k, out);
        out.push(PathStep {
            sibling: root_of(&leaves[..k]),
            side: Side::Left,
        });
    }
}

pub fn verify_inclusion(root: &Digest, leaf: &Digest, proof: &MerkleProof) -> bool {
    if proof.leaf_position >= proof.tree_size {
        return false;
    }
    let (mut fn_, mut sn) = (proof.leaf_position, proof.tree_size - 1);
    let mut r = *leaf;
    for step in &proof.path {
        if sn == 0 {
            return false;
        }
        if fn_ & 1 == 1 || fn_ == sn {
            if step.side != Side::Left {
                return false;
            }
            r = node_hash(&step.sibling, &r);
            if fn_ & 1 == 0 {
                while fn_ & 1 == 0 && fn_ != 0 {
                    fn_ >>= 1;
                    sn >>= 1;
                }
            }
        } else {
            if step.side != Side::Right {
                return false;
            }
            r = node_hash(&r, &step.sibling);
        }
        fn_ >>= 1;
        sn >>= 1;
    }
    sn == 0 && r == *root
}

/// Proof that the first `old_size` leaves of a `new_size` tree are unchanged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyProof {
    pub old_size: u64,
    pub new_size: u64,
    pub path: Vec<Digest>,
}

pub fn consistency_proof(leaves: &[Digest], old_size: usize) -> Option<ConsistencyProof> {
    if old_size > leaves.len() {
        return None;
    }
    let mut path = Vec::new();
    if old_size > 0 {
        subproof(old_size, leaves, true, &mut path);
    }
    Some(ConsistencyProof {
        old_size: old_size as u64,
        new_size: leaves.len() as u64,
        path,
    })
}

fn subproof(m: usize, leaves: &[Digest], complete: bool, out: &mut Vec<Digest>) {
    let n = leaves.len();
    if m == n {
        if !complete {
            out.push(root_of(leaves));
        }
        return;
    }
    let k = split_point(n);
    if m <= k {
        subproof(m, &leaves[..k], complete, out);
        out.push(root_of(&leaves[k..]));
    } else {
        subproof(m - k, &leaves[k..], false, out);
        out.push(root_of(&leaves[..k]));
    }
}

pub fn verify_consistency(old_root: &Digest, new_root: &Digest, proof: &ConsistencyProof) -> bool {
    let (first, second) = (proof.old_size, proof.new_size);
    if first > second {
        return false;
    }
    if first == 0 {
        return proof.path.is_empty() && *old_root == empty_root();
    }
    if first == second {
        return proof.path.is_empty() && old_root == new_root;
    }
    let mut path = proof.path.clone();
    if first.is_power_of_two() {
        path.insert(0, *old_root);
    }
    if path.is_empty() {
        return false;
    }
    let (mut fn_, mut sn) = (first - 1, second - 1);
    while fn_ & 1 == 1 {
        fn_ >>= 1;
        sn >>= 1;
    }
    let (mut fr, mut sr) = (path[0], path[0]);
    for c in &path[1..] {
        if sn == 0 {
            return false;
        }
        if fn_ & 1 == 1 || fn_ == sn {
            fr = node_hash(c, &fr);
            sr = node_hash(c, &sr);
            while fn_ & 1 == 0 && fn_ != 0 {
                fn_ >>= 1;
                sn >>= 1;
            }
        } else {
            sr = node_hash(&sr, c);
        }
        fn_ >>= 1;
        sn >>= 1;
    }
    fr == *old_root && sr == *new_root && sn == 0
}

/// Incremental root: perfect-subtree roots of the current leaf count, left to right.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Frontier {
    nodes: Vec<(u32, Digest)>,
}

impl Frontier {
    pub fn push(&mut self, leaf: Digest) {
        let mut cur = (0u32, leaf);
        while let Some(&(h, d)) = self.nodes.last() {
            if h != cur.0 {
                break;
            }
            self.nodes.pop();
            cur = (h + 1, node_hash(&d, &cur.1));
        }
        self.nodes.push(cur);
    }

    pub fn root(&self) -> Digest {
        let mut it = self.nodes.iter().rev();
        match it.next() {
            None => empty_root(),
            Some(&(_, last)) => it.fold(last, |acc, (_, d)| node_hash(d, &acc)),
        }
    }
}
