//! Synthetic audit windows: an honest baseline, the adversarial-provider
//! mutations, and an over-cap coalition.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::run::{AuditRequest, LEDGER_INTEGRITY, RECEIPT_CONSISTENCY};
use super::sampling::VerificationPlan;
use super::service::{Deviation, ProviderService, ServiceSetup};
use crate::accounting::PolicyParams;
use crate::digest::{sha256, CanonicalWriter, Digest};
use crate::error::Result;
use crate::estimator::EstimatorParams;
use crate::ledger::{Claim, Ledger, ProviderKey, Receipt};
use crate::mechanism::{random_unit, TenantIndex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub tenants: usize,
    pub docs_per_tenant: usize,
    pub dim: usize,
    pub top_k: usize,
    pub honest_accounts: usize,
    /// Accounts that all send one shared probe.
    pub colluders: usize,
    pub queries_per_account: usize,
    pub eps_acc: f64,
    pub delta_acc: f64,
    /// Per-account query budget used for calibration.
    pub n_queries: u64,
    pub delta_gap: f64,
    pub k_max: u32,
    pub delta_policy: f64,
    pub theta: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            tenants: 2,
            docs_per_tenant: 50,
            dim: 32,
            top_k: 5,
            honest_accounts: 8,
            colluders: 3,
            queries_per_account: 4,
            eps_acc: 1.0,
            delta_acc: 1e-6,
            n_queries: 10_000,
            delta_gap: 1.0,
            k_max: 10,
            delta_policy: 1e-4,
            theta: 0.8,
            seed: 7,
        }
    }
}

/// Ways the provider can tamper with a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    WrongSigma,
    WrongEmbedder,
    SelectThenNoise,
    CrossTenantOpening,
    DroppedReceiptedRecord,
    InflatedRoot,
}

impl Mutation {
    pub const ALL: [Mutation; 6] = [
        Mutation::WrongSigma,
        Mutation::WrongEmbedder,
        Mutation::SelectThenNoise,
        Mutation::CrossTenantOpening,
        Mutation::DroppedReceiptedRecord,
        Mutation::InflatedRoot,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Mutation::WrongSigma => "wrong_sigma",
            Mutation::WrongEmbedder => "wrong_embedder",
            Mutation::SelectThenNoise => "select_then_noise",
            Mutation::CrossTenantOpening => "cross_tenant_opening",
            Mutation::DroppedReceiptedRecord => "dropped_receipted_record",
            Mutation::InflatedRoot => "inflated_root",
        }
    }

    /// The check a full audit must fail on.
    pub fn expected_check(self) -> &'static str {
        match self {
            Mutation::WrongSigma => Claim::NoiseDerivation.name(),
            Mutation::WrongEmbedder => Claim::EmbedderConsistency.name(),
            Mutation::SelectThenNoise => Claim::NoiseThenSelect.name(),
            Mutation::CrossTenantOpening => Claim::TenantContainment.name(),
            Mutation::DroppedReceiptedRecord => RECEIPT_CONSISTENCY,
            Mutation::InflatedRoot => LEDGER_INTEGRITY,
        }
    }

    fn deviation(self) -> Option<Deviation> {
        match self {
            Mutation::WrongSigma => Some(Deviation::WrongSigma { factor: 0.5 }),
            Mutation::WrongEmbedder => Some(Deviation::WrongEmbedder),
            Mutation::SelectThenNoise => Some(Deviation::SelectThenNoise),
            Mutation::CrossTenantOpening => Some(Deviation::CrossTenantOpening),
            _ => None,
        }
    }
}

/// A closed window: the provider's state, the receipts accounts hold, and the root
/// the provider published.
pub struct Scenario {
    pub service: ProviderService,
    pub receipts: Vec<Receipt>,
    pub published_root: Digest,
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scenario")
            .field("records", &self.service.ledger().len())
            .field("receipts", &self.receipts.len())
            .field("published_root", &self.published_root)
            .finish()
    }
}

fn seed_bytes(tag: &str, seed: u64) -> [u8; 32] {
    CanonicalWriter::new().str(tag).u64(seed).hash().0
}

fn honest_name(i: usize) -> String {
    format!("honest-{i:02}")
}

/// Build and run one window. `mutation` injects a single bad query (or a
/// post-hoc ledger edit) halfway through.
pub fn build_scenario(cfg: &ScenarioConfig, mutation: Option<Mutation>) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let indices = (0..cfg.tenants)
        .map(|t| {
            let emb = (0..cfg.docs_per_tenant).map(|_| random_unit(&mut rng, cfg.dim)).collect();
            TenantIndex::from_embeddings(format!("tenant-{t}"), emb)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut accounts = BTreeMap::new();
    let mut plan: Vec<(String, Vec<f64>)> = Vec::new();
    let probe = random_unit(&mut rng, cfg.dim);
    for i in 0..cfg.honest_accounts {
        accounts.insert(honest_name(i), format!("tenant-{}", i % cfg.tenants));
    }
    for j in 0..cfg.colluders {
        accounts.insert(format!("colluder-{j:02}"), format!("tenant-{}", j % cfg.tenants));
    }
    // Interleave accounts round by round so timestamps mix.
    for _ in 0..cfg.queries_per_account {
        for i in 0..cfg.honest_accounts {
            plan.push((honest_name(i), random_unit(&mut rng, cfg.dim)));
        }
        for j in 0..cfg.colluders {
            plan.push((format!("colluder-{j:02}"), probe.clone()));
        }
    }

    let policy = PolicyParams::calibrated(
        cfg.eps_acc,
        cfg.delta_acc,
        cfg.n_queries,
        cfg.delta_gap,
        cfg.k_max,
        cfg.delta_policy,
        format!("window-{}", cfg.seed),
    )?;
    let mut service = ProviderService::new(ServiceSetup {
        policy,
        embedder_digest: sha256(format!("synthetic-unit-embedder/d={}", cfg.dim).as_bytes()),
        indices,
        accounts,
        window_seed: seed_bytes("window-seed", rng.random()),
        signing_key: ProviderKey::from_seed(seed_bytes("provider-key", cfg.seed)),
        top_k: cfg.top_k,
        estimator: EstimatorParams::new(cfg.theta)?,
    })?;

    // The tampered query comes from an honest account in the middle of the window.
    let target = plan
        .iter()
        .enumerate()
        .skip(plan.len() / 2)
        .find(|(_, (a, _))| a.starts_with("honest"))
        .map(|(i, _)| i);
    let mut receipts = Vec::with_capacity(plan.len());
    for (i, (account, query)) in plan.iter().enumerate() {
        let dev = mutation.and_then(Mutation::deviation).filter(|_| Some(i) == target);
        service.set_deviation(dev.unwrap_or_default());
        let (_, receipt) = service.attest_query(account, query)?;
        receipts.push(receipt);
    }
    service.set_deviation(Deviation::Honest);

    match mutation {
        Some(Mutation::DroppedReceiptedRecord) => {
            let drop = target.expect("window has an honest query");
            let kept: Vec<_> = service
                .ledger()
                .records()
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != drop)
                .map(|(_, r)| r.clone())
                .collect();
            *service.ledger_mut() = Ledger::from_records(kept)?;
        }
        Some(Mutation::InflatedRoot) => {
            // Publish the root of a longer log than the one handed to the auditor.
            let mut padded = service.ledger().clone();
            let mut extra = padded.records().last().expect("nonempty window").clone();
            extra.timestamp += 1;
            padded.append(extra)?;
            let published_root = padded.root();
            return Ok(Scenario {
                service,
                receipts,
                published_root,
            });
        }
        _ => {}
    }
    let published_root = service.ledger().root();
    Ok(Scenario {
        service,
        receipts,
        published_root,
    })
}

impl Scenario {
    /// Assemble the auditor's input; the coalition estimate is the provider's own.
    pub fn request(&self, plan: VerificationPlan) -> Result<AuditRequest> {
        let s = &self.service;
        Ok(AuditRequest {
            policy: s.policy().clone(),
            bundle: s.bundle().clone(),
            disclosure: s.disclosure(),
            ledger: s.ledger().clone(),
            published_root: self.published_root,
            receipts: self.receipts.clone(),
            provider_key: s.public_key(),
            estimator: s.estimator_params().clone(),
            coalition: s.coalition_estimate()?,
            plan,
        })
    }
}
