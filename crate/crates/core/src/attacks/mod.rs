//! k-account coalition adversaries, AUC statistics and falsification gates.

mod auc;
mod external;
mod gates;
mod sweep;
mod trial;

pub use auc::{auc_with_se, delong_se, mann_whitney_auc, midranks, AucEstimate};
pub use external::{external_vs_same, ExternalSpec, RegimeComparison, EXTERNAL_ABS_TOL};
pub use gates::{check_gates, CollapseDiagnostic, CoverageGate, GateReport, SlopeGate};
pub use sweep::{
    cell_seed, grid, run_cell, run_sweep, CellResult, CellRun, GridCell, HarnessShape, SweepResult, SweepSpec,
};
pub use trial::{
    check_trial_policy, run_trial, run_trial_with, topk_hit_count, Adversary, CoalitionConfig, Mode, Pooling,
    Regime, TrialOutcome,
};
