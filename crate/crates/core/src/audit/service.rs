//! Provider side: noise-then-select retrieval with per-query attestation,
//! ledger append and receipt issue.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::witness::TransparentWitness;
use crate::accounting::PolicyParams;
use crate::digest::{sha256, Digest};
use crate::error::{Error, Result};
use crate::estimator::{estimate, query_digest, CoalitionEstimate, EstimatorParams, ReplayQuery};
use crate::ledger::{
    commit_phase_a, index_leaves, inclusion_proof, issue_receipt, topk_digest, AttestationBlob, Backend, Claim,
    CommitmentBundle, Ledger, Opening, ProviderKey, ProviderPublicKey, QueryRecord, Receipt,
};
use crate::mechanism::{hex_bytes32, select_then_noise, topk_retrieve_instrumented, NoiseSeedRecord, TenantIndex};

/// Ways a provider can misbehave; everything except `Honest` should fail an audit.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Deviation {
    #[default]
    Honest,
    /// Draw noise at `factor * sigma` and report that scale.
    WrongSigma { factor: f64 },
    /// Report an embedder other than the committed one.
    WrongEmbedder,
    /// Derive noise from a key other than the record's.
    WrongNoiseKey,
    /// Rank on clean scores and noise only the winners.
    SelectThenNoise,
    /// Substitute the first opening with one from another tenant's index.
    CrossTenantOpening,
}

/// What the verifier is shown under the transparent backend: the window seed and
/// every committed tenant index. This stands in for zero-knowledge openings and
/// hides nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disclosure {
    #[serde(with = "hex_bytes32")]
    pub window_seed: [u8; 32],
    pub indices: BTreeMap<String, TenantIndex>,
}

#[derive(Debug)]
pub struct ServiceSetup {
    pub policy: PolicyParams,
    pub embedder_digest: Digest,
    pub indices: Vec<TenantIndex>,
    /// Account id to tenant id.
    pub accounts: BTreeMap<String, String>,
    pub window_seed: [u8; 32],
    pub signing_key: ProviderKey,
    pub top_k: usize,
    pub estimator: EstimatorParams,
}

#[derive(Debug)]
pub struct ProviderService {
    policy: PolicyParams,
    embedder_digest: Digest,
    indices: BTreeMap<String, TenantIndex>,
    leaves: BTreeMap<String, Vec<Digest>>,
    accounts: BTreeMap<String, String>,
    window_seed: [u8; 32],
    key: ProviderKey,
    top_k: usize,
    estimator: EstimatorParams,
    bundle: CommitmentBundle,
    ledger: Ledger,
    clock: u64,
    deviation: Deviation,
}

impl ProviderService {
    /// Publish phase A commitments and open an empty ledger.
    pub fn new(setup: ServiceSetup) -> Result<Self> {
        setup.policy.check_domain()?;
        setup.estimator.validate()?;
        let bundle = commit_phase_a(&setup.policy, setup.embedder_digest, &setup.indices, &setup.window_seed)?
            .with_estimator(setup.estimator.digest());
        let mut indices = BTreeMap::new();
        let mut leaves = BTreeMap::new();
        for idx in setup.indices {
            if idx.len() < setup.top_k {
                return Err(Error::InvalidInput(format!(
                    "tenant {:?} has {} documents, fewer than K = {}",
                    idx.tenant_id,
                    idx.len(),
                    setup.top_k
                )));
            }
            leaves.insert(idx.tenant_id.clone(), index_leaves(&idx));
            indices.insert(idx.tenant_id.clone(), idx);
        }
        if let Some((a, t)) = setup.accounts.iter().find(|(_, t)| !indices.contains_key(*t)) {
            return Err(Error::InvalidInput(format!("account {a:?} maps to unknown tenant {t:?}")));
        }
        Ok(ProviderService {
            policy: setup.policy,
            embedder_digest: setup.embedder_digest,
            indices,
            leaves,
            accounts: setup.accounts,
            window_seed: setup.window_seed,
            key: setup.signing_key,
            top_k: setup.top_k,
            estimator: setup.estimator,
            bundle,
            ledger: Ledger::new(),
            clock: 0,
            deviation: Deviation::Honest,
        })
    }

    pub fn set_deviation(&mut self, d: Deviation) {
        self.deviation = d;
    }

    pub fn policy(&self) -> &PolicyParams {
        &self.policy
    }

    pub fn bundle(&self) -> &CommitmentBundle {
        &self.bundle
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    /// Direct ledger access, for simulating a provider that rewrites history.
    pub fn ledger_mut(&mut self) -> &mut Ledger {
        &mut self.ledger
    }

    pub fn public_key(&self) -> ProviderPublicKey {
        self.key.public()
    }

    pub fn estimator_params(&self) -> &EstimatorParams {
        &self.estimator
    }

    pub fn disclosure(&self) -> Disclosure {
        Disclosure {
            window_seed: self.window_seed,
            indices: self.indices.clone(),
        }
    }

    fn open(&self, tenant: &str, position: usize) -> Opening {
        let idx = &self.indices[tenant];
        Opening {
            tenant_id: tenant.to_owned(),
            position: position as u64,
            embedding: idx.embeddings[position].clone(),
            proof: inclusion_proof(&self.leaves[tenant], position).expect("position in range"),
        }
    }

    /// Serve one query: retrieve, attest, append, and return the record with its receipt.
    pub fn attest_query(&mut self, account: &str, query: &[f64]) -> Result<(QueryRecord, Receipt)> {
        let tenant = self
            .accounts
            .get(account)
            .ok_or_else(|| Error::InvalidInput(format!("unknown account {account:?}")))?
            .clone();
        self.clock += 1;
        let timestamp = self.clock;
        let index = &self.indices[&tenant];
        let qd = query_digest(query);
        let key = QueryRecord::noise_key(account, &tenant, &qd, timestamp);

        let (noise_key, sigma) = match self.deviation {
            Deviation::WrongSigma { factor } => (key, self.policy.sigma * factor),
            Deviation::WrongNoiseKey => (sha256(key.as_bytes()), self.policy.sigma),
            _ => (key, self.policy.sigma),
        };
        let seed = NoiseSeedRecord::new(self.window_seed, noise_key, sigma);
        let run = topk_retrieve_instrumented(index, query, self.top_k, &seed)?;
        let noise = seed.vector(index.len());
        let output = if self.deviation == Deviation::SelectThenNoise {
            select_then_noise(index, query, self.top_k)?
        } else {
            run.output
        };

        let mut openings: Vec<Opening> = output.topk_positions.iter().map(|&p| self.open(&tenant, p)).collect();
        if self.deviation == Deviation::CrossTenantOpening {
            let other = self
                .indices
                .keys()
                .find(|t| **t != tenant)
                .ok_or_else(|| Error::InvalidInput("cross-tenant deviation needs two tenants".into()))?
                .clone();
            let p = (openings[0].position as usize).min(self.indices[&other].len() - 1);
            openings[0] = self.open(&other, p);
        }
        // Honest providers never open outside the account's tenant.
        if self.deviation != Deviation::CrossTenantOpening {
            if let Some(o) = openings.iter().find(|o| o.tenant_id != tenant) {
                return Err(Error::InvalidInput(format!(
                    "opening at position {} comes from tenant {:?}, not {tenant:?}",
                    o.position, o.tenant_id
                )));
            }
        }
        let witness = TransparentWitness {
            embedder_digest: if self.deviation == Deviation::WrongEmbedder {
                sha256(self.embedder_digest.as_bytes())
            } else {
                self.embedder_digest
            },
            query: query.to_vec(),
            noise_key,
            sigma,
            noise,
            topk_positions: output.topk_positions.iter().map(|p| *p as u64).collect(),
            topk_doc_ids: output.topk_doc_ids.clone(),
            openings,
        };
        let record = QueryRecord {
            account_id: account.to_owned(),
            tenant_id: tenant,
            query_digest: qd,
            topk_digest: topk_digest(&output.topk_positions, &output.topk_doc_ids),
            timestamp,
            attestation: AttestationBlob {
                claims: Claim::ALL.to_vec(),
                backend: Backend::Transparent,
                witness: witness.encode(),
            },
        };
        let (root, pos) = self.ledger.append(record.clone())?;
        let receipt = issue_receipt(&record, pos, root, &self.key);
        Ok((record, receipt))
    }

    /// Estimate coalition size over the current ledger and certify it.
    pub fn coalition_estimate(&self) -> Result<CoalitionEstimate> {
        estimate(&replay_from_ledger(&self.ledger)?, &self.estimator, &self.ledger.root())
    }
}

/// Queries recovered from the transparent witnesses, in ledger order.
pub fn replay_from_ledger(ledger: &Ledger) -> Result<Vec<ReplayQuery>> {
    ledger
        .records()
        .iter()
        .map(|r| {
            Ok(ReplayQuery {
                account_id: r.account_id.clone(),
                embedding: TransparentWitness::decode(&r.attestation.witness)?.query,
                timestamp: r.timestamp,
            })
        })
        .collect()
}
