//! Per-query proving cost model fitted to reference circuit sizes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::linear_fit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CircuitMode {
    /// Pre-committed scores, K openings plus a score sumcheck over all N positions.
    Optimized,
    /// All N inner products recomputed in-circuit.
    Naive,
}

impl CircuitMode {
    pub fn label(self) -> &'static str {
        match self {
            CircuitMode::Optimized => "optimized",
            CircuitMode::Naive => "naive",
        }
    }
}

/// Embedding width and K at which the reference sizes were estimated.
pub const REFERENCE_DIM: usize = 384;
pub const REFERENCE_TOP_K: usize = 5;
pub const SECONDS_PER_CONSTRAINT: f64 = 1e-6;
pub const VERIFY_BASE_MS: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostReference {
    pub mode: CircuitMode,
    pub index_size: u64,
    pub constraints: f64,
    pub prove_seconds: f64,
    pub setup_seconds: f64,
}

const fn r(mode: CircuitMode, n: u64, c: f64, p: f64, s: f64) -> CostReference {
    CostReference {
        mode,
        index_size: n,
        constraints: c,
        prove_seconds: p,
        setup_seconds: s,
    }
}

/// Published estimates at d = 384, K = 5.
pub const REFERENCE_COSTS: [CostReference; 8] = [
    r(CircuitMode::Optimized, 1_000, 9.8e4, 0.1, 0.05),
    r(CircuitMode::Optimized, 10_000, 8.9e5, 0.9, 0.4),
    r(CircuitMode::Optimized, 100_000, 8.8e6, 8.8, 4.4),
    r(CircuitMode::Optimized, 1_000_000, 8.8e7, 88.0, 44.0),
    r(CircuitMode::Naive, 1_000, 8.7e5, 0.9, 0.4),
    r(CircuitMode::Naive, 10_000, 8.6e6, 8.6, 4.3),
    r(CircuitMode::Naive, 100_000, 8.6e7, 86.0, 43.0),
    r(CircuitMode::Naive, 1_000_000, 8.6e8, 856.0, 428.0),
];

/// `constraints = base + per_doc * N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub mode: CircuitMode,
    pub base: f64,
    pub per_doc: f64,
}

/// Ordinary least squares over the four reference points of `mode`.
pub fn fit_cost_model(mode: CircuitMode) -> CostModel {
    let (x, y): (Vec<f64>, Vec<f64>) = REFERENCE_COSTS
        .iter()
        .filter(|c| c.mode == mode)
        .map(|c| (c.index_size as f64, c.constraints))
        .unzip();
    let fit = linear_fit(&x, &y).expect("four distinct points");
    CostModel {
        mode,
        base: fit.intercept,
        per_doc: fit.slope,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZkCostEstimate {
    pub mode: CircuitMode,
    pub index_size: u64,
    pub constraints: f64,
    pub prove_seconds: f64,
    pub setup_seconds: f64,
    /// Constant pairing check; the sumcheck field work is reported separately.
    pub verify_ms: f64,
    /// `d * ceil(log2 N)` for the optimized circuit, 0 for naive.
    pub sumcheck_field_ops: u64,
}

pub fn zk_cost(mode: CircuitMode, index_size: u64, dim: usize, top_k: usize) -> Result<ZkCostEstimate> {
    if index_size == 0 {
        return Err(Error::Domain("index size must be at least 1".into()));
    }
    if dim != REFERENCE_DIM || top_k != REFERENCE_TOP_K {
        return Err(Error::Unsupported(format!(
            "cost model is fitted at d = {REFERENCE_DIM}, K = {REFERENCE_TOP_K}; got d = {dim}, K = {top_k}"
        )));
    }
    let m = fit_cost_model(mode);
    let constraints = m.base + m.per_doc * index_size as f64;
    let prove = constraints * SECONDS_PER_CONSTRAINT;
    let log_n = (index_size as f64).log2().ceil() as u64;
    Ok(ZkCostEstimate {
        mode,
        index_size,
        constraints,
        prove_seconds: prove,
        setup_seconds: prove / 2.0,
        verify_ms: VERIFY_BASE_MS,
        sumcheck_field_ops: match mode {
            CircuitMode::Optimized => dim as u64 * log_n,
            CircuitMode::Naive => 0,
        },
    })
}

/// Largest relative error of the fitted model over all reference cells
/// (constraints, prove and setup).
pub fn max_reference_error() -> f64 {
    REFERENCE_COSTS
        .iter()
        .flat_map(|c| {
            let e = zk_cost(c.mode, c.index_size, REFERENCE_DIM, REFERENCE_TOP_K).expect("reference inputs");
            [
                (e.constraints / c.constraints - 1.0).abs(),
                (e.prove_seconds / c.prove_seconds - 1.0).abs(),
                (e.setup_seconds / c.setup_seconds - 1.0).abs(),
            ]
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_points() {
        let o = zk_cost(CircuitMode::Optimized, 100_000, 384, 5).unwrap();
        assert!((o.constraints / 8.8e6 - 1.0).abs() < 0.02, "{}", o.constraints);
        assert!((o.prove_seconds - 8.8).abs() < 0.2);
        assert_eq!(o.setup_seconds, o.prove_seconds / 2.0);
        assert_eq!(o.sumcheck_field_ops, 384 * 17);
        let n = zk_cost(CircuitMode::Naive, 1_000_000, 384, 5).unwrap();
        assert!((n.prove_seconds / 856.0 - 1.0).abs() < 0.02);
        assert!(max_reference_error() < 0.15, "{}", max_reference_error());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(zk_cost(CircuitMode::Naive, 0, 384, 5).is_err());
        assert!(zk_cost(CircuitMode::Naive, 10, 128, 5).is_err());
    }
}
