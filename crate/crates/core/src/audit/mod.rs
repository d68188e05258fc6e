//! Per-query attestation, verification, sampling, the auditor and the proving cost model.
//!
//! The only attestation backend is transparent: witnesses carry the noise vector,
//! the query and the opened embeddings, and the verifier re-executes the query.
//! Nothing is hidden from the verifier.

mod cost;
mod run;
mod sampling;
mod scenario;
mod service;
mod verify;
mod witness;

pub use cost::{
    fit_cost_model, max_reference_error, zk_cost, CircuitMode, CostModel, CostReference, ZkCostEstimate,
    REFERENCE_COSTS, REFERENCE_DIM, REFERENCE_TOP_K, SECONDS_PER_CONSTRAINT, VERIFY_BASE_MS,
};
pub use run::{
    run_audit, AuditRequest, AuditVerdict, SampledCoverage, Status, Witness, COALITION_CERTIFICATE,
    COMMITMENT_INTEGRITY, LEDGER_INTEGRITY, POLICY_CAP, RECEIPT_CONSISTENCY,
};
pub use sampling::{planted_violation_detection, sample_plan, sample_size, DetectionRun, PlanMode, VerificationPlan};
pub use scenario::{build_scenario, Mutation, Scenario, ScenarioConfig};
pub use service::{replay_from_ledger, Deviation, Disclosure, ProviderService, ServiceSetup};
pub use verify::{verify_record, CheckOutcome, VerifierView};
pub use witness::TransparentWitness;
