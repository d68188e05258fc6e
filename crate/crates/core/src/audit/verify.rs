//! Verifier-side re-execution of one attested query.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::service::Disclosure;
use super::witness::TransparentWitness;
use crate::accounting::PolicyParams;
use crate::digest::sha256;
use crate::estimator::query_digest;
use crate::ledger::{topk_digest, verify_opening, Backend, Claim, CommitmentBundle, QueryRecord};
use crate::mechanism::{derive_noise, select_topk};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

impl CheckOutcome {
    pub fn ok() -> Self {
        CheckOutcome { ok: true, witness: None }
    }

    pub fn fail(witness: impl Into<String>) -> Self {
        CheckOutcome {
            ok: false,
            witness: Some(witness.into()),
        }
    }
}

fn from_result(r: Result<(), String>) -> CheckOutcome {
    match r {
        Ok(()) => CheckOutcome::ok(),
        Err(w) => CheckOutcome::fail(w),
    }
}

/// Everything the verifier holds apart from the ledger itself.
#[derive(Debug, Clone, Copy)]
pub struct VerifierView<'a> {
    pub policy: &'a PolicyParams,
    pub bundle: &'a CommitmentBundle,
    pub disclosure: &'a Disclosure,
}

fn embedder(rec: &QueryRecord, w: &TransparentWitness, v: &VerifierView) -> Result<(), String> {
    if w.embedder_digest != v.bundle.c_emb {
        return Err(format!(
            "witness embedder {} differs from committed {}",
            w.embedder_digest, v.bundle.c_emb
        ));
    }
    if query_digest(&w.query) != rec.query_digest {
        return Err("query embedding does not hash to the record's query digest".into());
    }
    Ok(())
}

fn noise(rec: &QueryRecord, w: &TransparentWitness, v: &VerifierView) -> Result<(), String> {
    if w.sigma.to_bits() != v.policy.sigma.to_bits() {
        return Err(format!("noise scale {} differs from committed policy scale {}", w.sigma, v.policy.sigma));
    }
    if sha256(&v.disclosure.window_seed) != v.bundle.c_seed {
        return Err("disclosed window seed does not match its commitment".into());
    }
    let key = rec.record_noise_key();
    if w.noise_key != key {
        return Err(format!("noise keyed by {} instead of record key {key}", w.noise_key));
    }
    let n = v.disclosure.indices.get(&rec.tenant_id).map_or(0, |i| i.len());
    if w.noise.len() != n {
        return Err(format!("{} noise coordinates for an index of {n}", w.noise.len()));
    }
    for (i, z) in w.noise.iter().enumerate() {
        let expect = derive_noise(&v.disclosure.window_seed, &key, i as u64, v.policy.sigma);
        if z.to_bits() != expect.to_bits() {
            return Err(format!("coordinate {i}: claimed noise {z}, derived {expect}"));
        }
    }
    Ok(())
}

fn ordering(rec: &QueryRecord, w: &TransparentWitness, v: &VerifierView) -> Result<(), String> {
    let idx = v
        .disclosure
        .indices
        .get(&rec.tenant_id)
        .ok_or_else(|| format!("no committed index for tenant {:?}", rec.tenant_id))?;
    if w.noise.len() != idx.len() || w.query.len() != idx.dim {
        return Err("witness shape does not match the tenant index".into());
    }
    let noisy: Vec<f64> = idx.scores(&w.query).iter().zip(&w.noise).map(|(s, z)| s + z).collect();
    let positions = select_topk(&noisy, w.topk_positions.len());
    let claimed: Vec<usize> = w.topk_positions.iter().map(|p| *p as usize).collect();
    if positions != claimed {
        return Err(format!("re-ranking noisy scores gives {positions:?}, witness claims {claimed:?}"));
    }
    let doc_ids: Vec<String> = positions.iter().map(|p| idx.doc_ids[*p].clone()).collect();
    if doc_ids != w.topk_doc_ids {
        return Err("top-K document ids differ from the index".into());
    }
    if topk_digest(&positions, &doc_ids) != rec.topk_digest {
        return Err("re-executed top-K digest differs from the record".into());
    }
    Ok(())
}

fn containment(rec: &QueryRecord, w: &TransparentWitness, v: &VerifierView) -> Result<(), String> {
    let commitment = v
        .bundle
        .c_idx
        .get(&rec.tenant_id)
        .ok_or_else(|| format!("no commitment for tenant {:?}", rec.tenant_id))?;
    if w.openings.len() != w.topk_positions.len() {
        return Err(format!("{} openings for {} results", w.openings.len(), w.topk_positions.len()));
    }
    for (rank, (o, p)) in w.openings.iter().zip(&w.topk_positions).enumerate() {
        if o.tenant_id != rec.tenant_id {
            return Err(format!(
                "rank {rank} opened from tenant {:?}, account belongs to {:?}",
                o.tenant_id, rec.tenant_id
            ));
        }
        if o.position != *p {
            return Err(format!("rank {rank} opens position {} but returned {p}", o.position));
        }
        if !verify_opening(commitment, o) {
            return Err(format!("rank {rank} opening does not verify against the tenant root"));
        }
    }
    Ok(())
}

/// Check all four claims of one record. Every claim gets an outcome.
pub fn verify_record(record: &QueryRecord, view: &VerifierView) -> BTreeMap<Claim, CheckOutcome> {
    let att = &record.attestation;
    let blanket = |why: String| Claim::ALL.iter().map(|c| (*c, CheckOutcome::fail(why.clone()))).collect();
    if att.backend != Backend::Transparent {
        return blanket("unsupported backend".into());
    }
    let w = match TransparentWitness::decode(&att.witness) {
        Ok(w) => w,
        Err(e) => return blanket(format!("witness does not decode: {e}")),
    };
    Claim::ALL
        .iter()
        .map(|c| {
            let outcome = if !att.claims.contains(c) {
                CheckOutcome::fail("claim not attested")
            } else {
                from_result(match c {
                    Claim::EmbedderConsistency => embedder(record, &w, view),
                    Claim::NoiseDerivation => noise(record, &w, view),
                    Claim::NoiseThenSelect => ordering(record, &w, view),
                    Claim::TenantContainment => containment(record, &w, view),
                })
            };
            (*c, outcome)
        })
        .collect()
}
