//! Record sampling for the verifier and the planted-violation detection check.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PlanMode {
    Full,
    Sampled { s: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationPlan {
    pub mode: PlanMode,
    /// Violation fraction the sample is sized to catch.
    pub beta: Option<f64>,
    /// Allowed miss probability at that fraction.
    pub eta: Option<f64>,
    /// Seeds the choice of sampled records.
    #[serde(default)]
    pub seed: u64,
}

impl VerificationPlan {
    pub fn full() -> Self {
        VerificationPlan {
            mode: PlanMode::Full,
            beta: None,
            eta: None,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Sorted ledger positions to verify out of `n`.
    pub fn select(&self, n: usize) -> Vec<usize> {
        match self.mode {
            PlanMode::Sampled { s } if s < n => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let mut v = sample(&mut rng, n, s).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..n).collect(),
        }
    }
}

/// `ceil(ln(1/eta) / beta)`.
pub fn sample_size(beta: f64, eta: f64) -> Result<usize> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(domain(format!("beta = {beta} must lie in (0, 1]")));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(domain(format!("eta = {eta} must lie in (0, 1)")));
    }
    Ok(((1.0 / eta).ln() / beta).ceil() as usize)
}

pub fn sample_plan(beta: f64, eta: f64) -> Result<VerificationPlan> {
    Ok(VerificationPlan {
        mode: PlanMode::Sampled {
            s: sample_size(beta, eta)?,
        },
        beta: Some(beta),
        eta: Some(eta),
        seed: 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRun {
    pub ledger_size: usize,
    pub violations: usize,
    pub sample_size: usize,
    pub repetitions: usize,
    pub detected: usize,
}

impl DetectionRun {
    pub fn rate(&self) -> f64 {
        self.detected as f64 / self.repetitions as f64
    }
}

/// Plant `round(beta * ledger_size)` bad records at random, sample per plan, and
/// count repetitions where at least one bad record is drawn.
pub fn planted_violation_detection(
    ledger_size: usize,
    beta: f64,
    eta: f64,
    repetitions: usize,
    seed: u64,
) -> Result<DetectionRun> {
    let s = sample_size(beta, eta)?;
    let violations = (beta * ledger_size as f64).round() as usize;
    if violations == 0 || s > ledger_size {
        return Err(domain(format!(
            "ledger of {ledger_size} too small for beta = {beta} and sample {s}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = vec![false; ledger_size];
    let mut detected = 0;
    for _ in 0..repetitions {
        bad.iter_mut().for_each(|b| *b = false);
        for i in sample(&mut rng, ledger_size, violations) {
            bad[i] = true;
        }
        if sample(&mut rng, ledger_size, s).into_iter().any(|i| bad[i]) {
            detected += 1;
        }
    }
    Ok(DetectionRun {
        ledger_size,
        violations,
        sample_size: s,
        repetitions,
        detected,
    })
}
