//! Falsification gates over a sweep.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::sweep::SweepResult;
use crate::error::{Error, Result};
use crate::stats::{binomial_lower_bound, linear_fit};

/// Two-sided coverage of a +/- 2 s.e. interval.
const TWO_SE_COVERAGE: f64 = 0.9545;

/// Advantage grows with `sqrt(k)` on the highest-budget row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeGate {
    pub eps_acc: f64,
    pub slope: f64,
    pub slope_se: f64,
    pub t_stat: f64,
    /// Advantage at the largest `k` over advantage at the smallest.
    pub growth_factor: f64,
    pub pass: bool,
}

/// Diagnostic: how well advantage collapses onto `sqrt(k) eps_acc`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseDiagnostic {
    /// Least-squares `c` in `advantage ~ c sqrt(k) eps_acc`.
    pub coefficient: f64,
    pub rms_residual: f64,
}

/// Cells within two standard errors of the prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageGate {
    pub within: usize,
    pub total: usize,
    pub min_required: usize,
    pub max_abs_z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub p1: SlopeGate,
    pub p2: CollapseDiagnostic,
    pub p3: CoverageGate,
    pub pass: bool,
}

pub fn check_gates(sweep: &SweepResult) -> Result<GateReport> {
    let ks: BTreeSet<u32> = sweep.cells.iter().map(|c| c.k).collect();
    if ks.len() < 3 {
        return Err(Error::InvalidInput("gates need at least three values of k".into()));
    }
    let top_eps = sweep
        .cells
        .iter()
        .map(|c| c.eps_acc)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut row: Vec<_> = sweep.cells.iter().filter(|c| c.eps_acc == top_eps).collect();
    row.sort_by_key(|c| c.k);
    let x: Vec<f64> = row.iter().map(|c| (c.k as f64).sqrt()).collect();
    let y: Vec<f64> = row.iter().map(|c| c.advantage()).collect();
    let fit = linear_fit(&x, &y)?;
    let growth_factor = y[y.len() - 1] / y[0];
    let p1 = SlopeGate {
        eps_acc: top_eps,
        slope: fit.slope,
        slope_se: fit.slope_se,
        t_stat: fit.t_stat,
        growth_factor,
        pass: fit.slope > 0.0 && fit.t_stat > 2.0,
    };

    let xs: Vec<f64> = sweep.cells.iter().map(|c| (c.k as f64).sqrt() * c.eps_acc).collect();
    let ys: Vec<f64> = sweep.cells.iter().map(|c| c.advantage()).collect();
    let sxx: f64 = xs.iter().map(|v| v * v).sum();
    let coefficient = xs.iter().zip(&ys).map(|(a, b)| a * b).sum::<f64>() / sxx;
    let rms_residual = (xs
        .iter()
        .zip(&ys)
        .map(|(a, b)| (b - coefficient * a).powi(2))
        .sum::<f64>()
        / xs.len() as f64)
        .sqrt();

    let zs: Vec<f64> = sweep.cells.iter().filter_map(|c| c.z_score()).collect();
    let total = zs.len();
    let within = zs.iter().filter(|z| z.abs() <= 2.0).count();
    let min_required = if total == 0 {
        0
    } else {
        binomial_lower_bound(total as u64, TWO_SE_COVERAGE, 0.05) as usize
    };
    let p3 = CoverageGate {
        within,
        total,
        min_required,
        max_abs_z: zs.iter().fold(0.0, |m, z| m.max(z.abs())),
        pass: total > 0 && within >= min_required,
    };
    Ok(GateReport {
        pass: p1.pass && p3.pass,
        p1,
        p2: CollapseDiagnostic {
            coefficient,
            rms_residual,
        },
        p3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::sweep::CellResult;
    use crate::attacks::trial::{Mode, Regime};

    fn sweep(f: impl Fn(u32, f64) -> (f64, Option<f64>)) -> SweepResult {
        let mut cells = Vec::new();
        for eps in [1.0, 2.0, 4.0] {
            for k in [1, 2, 5, 10, 20] {
                let (auc, pred) = f(k, eps);
                cells.push(CellResult {
                    k,
                    eps_acc: eps,
                    mode: Mode::SufficientStat,
                    adversary: "pooled_mean".into(),
                    auc,
                    delong_se: 0.004,
                    trials: 10_000,
                    predicted_auc: pred,
                    regime: Regime::SameTenant,
                });
            }
        }
        SweepResult {
            cells,
            trials: 10_000,
            mode: Mode::SufficientStat,
        }
    }

    #[test]
    fn flat_sweep_fails_slope_gate() {
        let r = check_gates(&sweep(|_, _| (0.5, Some(0.5)))).unwrap();
        assert!(!r.p1.pass);
        assert!(r.p3.pass);
        assert!(!r.pass);
    }

    #[test]
    fn sqrt_k_sweep_passes() {
        let r = check_gates(&sweep(|k, e| {
            let a = 0.5 + 0.01 * (k as f64).sqrt() * e;
            (a, Some(a))
        }))
        .unwrap();
        assert!(r.p1.pass);
        assert!((r.p1.growth_factor - 20f64.sqrt()).abs() < 1e-9);
        assert_eq!((r.p3.within, r.p3.total, r.p3.min_required), (15, 15, 13));
        assert!((r.p2.coefficient - 0.02).abs() < 1e-12);
    }

    #[test]
    fn needs_three_k_values() {
        let mut s = sweep(|_, _| (0.5, None));
        s.cells.retain(|c| c.k <= 2);
        assert!(check_gates(&s).is_err());
    }
}
