//! Same-tenant coalitions against external coalitions that reach the victim
//! index through an access-control failure.

use serde::{Deserialize, Serialize};

use super::sweep::{run_sweep, GridCell, HarnessShape, SweepSpec};
use super::trial::{Adversary, Mode, Regime};
use crate::accounting::PolicyParams;
use crate::error::Result;

/// Absolute AUC difference tolerated regardless of sampling error.
pub const EXTERNAL_ABS_TOL: f64 = 0.022;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeComparison {
    pub k: u32,
    pub eps_acc: f64,
    pub auc_same: f64,
    pub se_same: f64,
    pub auc_external: f64,
    pub se_external: f64,
    pub delta_auc: f64,
    pub combined_se: f64,
    /// `|delta_auc| <= max(0.022, 2 combined_se)`.
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalSpec {
    pub grid: Vec<GridCell>,
    pub adversary: Adversary,
    pub trials: usize,
    pub policy_template: PolicyParams,
    pub shape: HarnessShape,
    pub master_seed: u64,
    /// External accounts can read the victim index.
    pub m4_access: bool,
}

pub fn external_vs_same(spec: &ExternalSpec) -> Result<Vec<RegimeComparison>> {
    let base = SweepSpec {
        grid: spec.grid.clone(),
        adversary: spec.adversary,
        regime: Regime::SameTenant,
        mode: Mode::FullSim,
        trials: spec.trials,
        policy_template: spec.policy_template.clone(),
        shape: spec.shape,
        master_seed: spec.master_seed,
    };
    let same = run_sweep(&base)?;
    let external_regime = if spec.m4_access {
        Regime::ExternalM4
    } else {
        Regime::ExternalIsolated
    };
    let ext = run_sweep(&SweepSpec {
        regime: external_regime,
        ..base
    })?;
    Ok(same
        .cells
        .iter()
        .zip(&ext.cells)
        .map(|(s, e)| {
            let delta_auc = e.auc - s.auc;
            let combined_se = s.delong_se.hypot(e.delong_se);
            RegimeComparison {
                k: s.k,
                eps_acc: s.eps_acc,
                auc_same: s.auc,
                se_same: s.delong_se,
                auc_external: e.auc,
                se_external: e.delong_se,
                delta_auc,
                combined_se,
                within: delta_auc.abs() <= EXTERNAL_ABS_TOL.max(2.0 * combined_se),
            }
        })
        .collect())
}
