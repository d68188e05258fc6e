//! The auditor: ordered checks over a window's commitments, ledger and receipts.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampling::{PlanMode, VerificationPlan};
use super::service::{replay_from_ledger, Disclosure};
use super::verify::{verify_record, CheckOutcome, VerifierView};
use crate::accounting::{epsilon_audit, PolicyParams};
use crate::digest::{sha256, Digest};
use crate::error::Result;
use crate::estimator::{check_replay, verify_certificate, CoalitionEstimate, EstimatorParams};
use crate::ledger::{
    commit_index, empty_root, policy_digest, verify_consistency, verify_receipt, Claim, CommitmentBundle, Ledger,
    ProviderPublicKey, Receipt,
};

pub const COMMITMENT_INTEGRITY: &str = "commitment_integrity";
pub const LEDGER_INTEGRITY: &str = "ledger_integrity";
pub const RECEIPT_CONSISTENCY: &str = "receipt_consistency";
pub const COALITION_CERTIFICATE: &str = "coalition_certificate";
pub const POLICY_CAP: &str = "policy_cap";

/// Everything submitted to the auditor for one window.
#[derive(Debug, Clone)]
pub struct AuditRequest {
    pub policy: PolicyParams,
    pub bundle: CommitmentBundle,
    pub disclosure: Disclosure,
    pub ledger: Ledger,
    /// Root the provider published at window close.
    pub published_root: Digest,
    /// Receipts collected from accounts.
    pub receipts: Vec<Receipt>,
    pub provider_key: ProviderPublicKey,
    pub estimator: EstimatorParams,
    pub coalition: CoalitionEstimate,
    pub plan: VerificationPlan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampledCoverage {
    pub s: usize,
    pub beta: Option<f64>,
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub check: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditVerdict {
    pub status: Status,
    /// `sqrt(k_max) * eps_acc`; reported even on FAIL as the contract's value.
    pub eps_audit_headline: f64,
    /// Leading term plus residual; present only on PASS.
    pub eps_audit_full: Option<f64>,
    pub delta_policy: f64,
    pub k_max: u32,
    /// Largest estimated coalition, when the estimator ran.
    pub coalition_c: Option<usize>,
    /// Every executed check, by name.
    pub checks: BTreeMap<String, CheckOutcome>,
    pub sampled: Option<SampledCoverage>,
    pub witnesses: Vec<Witness>,
}

impl AuditVerdict {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    /// Name of the check that failed, if any.
    pub fn failed_check(&self) -> Option<&str> {
        self.witnesses.first().map(|w| w.check.as_str())
    }
}

struct Checks {
    map: BTreeMap<String, CheckOutcome>,
    failed: Option<Witness>,
}

impl Checks {
    /// Record an outcome; returns false on failure.
    fn record(&mut self, name: &str, r: std::result::Result<(), String>) -> bool {
        match r {
            Ok(()) => {
                self.map.insert(name.into(), CheckOutcome::ok());
                true
            }
            Err(w) => {
                self.map.insert(name.into(), CheckOutcome::fail(w.clone()));
                self.failed = Some(Witness {
                    check: name.into(),
                    detail: w,
                });
                false
            }
        }
    }
}

fn commitment_integrity(req: &AuditRequest) -> std::result::Result<(), String> {
    let b = &req.bundle;
    if policy_digest(&req.policy) != b.c_policy {
        return Err("policy does not match its commitment".into());
    }
    req.policy.check_well_formed().map_err(|e| e.to_string())?;
    if sha256(&req.disclosure.window_seed) != b.c_seed {
        return Err("window seed does not match its commitment".into());
    }
    if b.c_ledger_0 != empty_root() {
        return Err(format!("initial ledger root {} is not the empty root", b.c_ledger_0));
    }
    if !b.c_idx.keys().eq(req.disclosure.indices.keys()) {
        return Err("disclosed tenants differ from committed tenants".into());
    }
    for (t, idx) in &req.disclosure.indices {
        if commit_index(idx) != b.c_idx[t] {
            return Err(format!("index of tenant {t:?} does not match its commitment"));
        }
    }
    match b.c_estimator {
        None => return Err("estimator parameters were not committed".into()),
        Some(d) if d != req.estimator.digest() => {
            return Err("estimator parameters do not match their commitment".into())
        }
        _ => {}
    }
    if let Some(first) = req.ledger.records().first() {
        if b.published_at >= first.timestamp {
            return Err(format!(
                "commitments published at {} but first record is at {}",
                b.published_at, first.timestamp
            ));
        }
    }
    Ok(())
}

fn ledger_integrity(req: &AuditRequest) -> std::result::Result<(), String> {
    let root = req.ledger.root();
    if root != req.published_root {
        return Err(format!("published root {} but ledger hashes to {root}", req.published_root));
    }
    let proof = req
        .ledger
        .prove_extension(&req.bundle.c_ledger_0, &root)
        .map_err(|e| e.to_string())?;
    if !verify_consistency(&req.bundle.c_ledger_0, &root, &proof) {
        return Err("ledger is not an extension of the committed initial root".into());
    }
    Ok(())
}

fn receipt_consistency(req: &AuditRequest) -> std::result::Result<(), String> {
    for (i, r) in req.receipts.iter().enumerate() {
        let check = verify_receipt(r, &req.provider_key, &req.ledger);
        if !check.is_consistent() {
            return Err(format!("receipt {i} (account {:?}, position {}): {check:?}", r.account_id, r.leaf_position));
        }
    }
    Ok(())
}

fn coalition_certificate(req: &AuditRequest) -> std::result::Result<(), String> {
    let replay = replay_from_ledger(&req.ledger).map_err(|e| e.to_string())?;
    let c = check_replay(&req.ledger, &replay);
    if !c.is_valid() {
        return Err(format!("{c:?}"));
    }
    let committed = req.bundle.c_estimator.ok_or("estimator parameters were not committed")?;
    let c = verify_certificate(&req.ledger.root(), &committed, &req.estimator, &req.coalition, &replay)
        .map_err(|e| e.to_string())?;
    if c.is_valid() {
        Ok(())
    } else {
        Err(format!("{c:?}"))
    }
}

/// First failing record per claim, scanning `positions` in ledger order.
fn record_checks(req: &AuditRequest, positions: &[usize]) -> Vec<(Claim, Option<String>)> {
    let view = VerifierView {
        policy: &req.policy,
        bundle: &req.bundle,
        disclosure: &req.disclosure,
    };
    let records = req.ledger.records();
    let results: Vec<BTreeMap<Claim, CheckOutcome>> =
        positions.par_iter().map(|&p| verify_record(&records[p], &view)).collect();
    Claim::ALL
        .iter()
        .map(|c| {
            let bad = positions.iter().zip(&results).find_map(|(p, r)| {
                let o = &r[c];
                (!o.ok).then(|| format!("record {p}: {}", o.witness.as_deref().unwrap_or("")))
            });
            (*c, bad)
        })
        .collect()
}

/// Run the checks in order and stop at the first failure.
///
/// Errors only when the request cannot be evaluated at all.
pub fn run_audit(req: &AuditRequest) -> Result<AuditVerdict> {
    req.policy.check_domain()?;
    let positions = req.plan.select(req.ledger.len());
    let sampled = match req.plan.mode {
        PlanMode::Full => None,
        PlanMode::Sampled { .. } => Some(SampledCoverage {
            s: positions.len(),
            beta: req.plan.beta,
            eta: req.plan.eta,
        }),
    };
    let mut checks = Checks {
        map: BTreeMap::new(),
        failed: None,
    };
    let mut coalition_c = None;

    let all_ok = 'run: {
        if !checks.record(COMMITMENT_INTEGRITY, commitment_integrity(req)) {
            break 'run false;
        }
        for (claim, bad) in record_checks(req, &positions) {
            if !checks.record(claim.name(), bad.map_or(Ok(()), Err)) {
                break 'run false;
            }
        }
        if !checks.record(LEDGER_INTEGRITY, ledger_integrity(req)) {
            break 'run false;
        }
        if !checks.record(RECEIPT_CONSISTENCY, receipt_consistency(req)) {
            break 'run false;
        }
        if !checks.record(COALITION_CERTIFICATE, coalition_certificate(req)) {
            break 'run false;
        }
        let c = req.coalition.largest_cluster_accounts;
        coalition_c = Some(c);
        let cap = if c as u64 <= req.policy.k_max as u64 {
            Ok(())
        } else {
            Err(format!("estimated coalition of {c} accounts exceeds k_max = {}", req.policy.k_max))
        };
        checks.record(POLICY_CAP, cap)
    };

    let eps_audit_full = if all_ok { Some(epsilon_audit(&req.policy)?.full) } else { None };
    Ok(AuditVerdict {
        status: if all_ok { Status::Pass } else { Status::Fail },
        eps_audit_headline: (req.policy.k_max as f64).sqrt() * req.policy.eps_acc,
        eps_audit_full,
        delta_policy: req.policy.delta_policy,
        k_max: req.policy.k_max,
        coalition_c,
        checks: checks.map,
        sampled,
        witnesses: checks.failed.into_iter().collect(),
    })
}
