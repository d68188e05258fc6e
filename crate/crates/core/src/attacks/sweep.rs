//! Paired-worlds Monte Carlo sweeps over `(k, eps_acc)` grids.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::auc::auc_with_se;
use super::trial::{run_trial_with, Adversary, CoalitionConfig, Mode, Pooling, Regime, TrialOutcome};
use crate::accounting::{auc_from_gap_sigma, PolicyParams};
use crate::digest::CanonicalWriter;
use crate::error::{Error, Result};
use crate::mechanism::{make_world_pair_with, WorldPair};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub k: u32,
    pub eps_acc: f64,
}

/// Cartesian product, `eps` outer and `k` inner.
pub fn grid(ks: &[u32], eps: &[f64]) -> Vec<GridCell> {
    eps.iter()
        .flat_map(|&e| ks.iter().map(move |&k| GridCell { k, eps_acc: e }))
        .collect()
}

/// Geometry of the simulated victim index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarnessShape {
    pub dim: usize,
    pub n_background: usize,
    pub top_k: usize,
    pub delta_gap: f64,
}

impl Default for HarnessShape {
    fn default() -> Self {
        HarnessShape {
            dim: 32,
            n_background: 50,
            top_k: 5,
            delta_gap: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub grid: Vec<GridCell>,
    pub adversary: Adversary,
    pub regime: Regime,
    pub mode: Mode,
    pub trials: usize,
    /// Supplies `n_queries`, `delta_acc` and the rest of each cell's policy;
    /// `eps_acc` and `sigma` are replaced per cell.
    pub policy_template: PolicyParams,
    pub shape: HarnessShape,
    pub master_seed: u64,
}

/// One row of sweep output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub k: u32,
    pub eps_acc: f64,
    pub mode: Mode,
    pub adversary: String,
    pub auc: f64,
    pub delong_se: f64,
    pub trials: usize,
    pub predicted_auc: Option<f64>,
    pub regime: Regime,
}

impl CellResult {
    pub fn advantage(&self) -> f64 {
        2.0 * (self.auc - 0.5)
    }

    /// `(auc - predicted) / delong_se`, when a prediction exists.
    pub fn z_score(&self) -> Option<f64> {
        self.predicted_auc.map(|p| (self.auc - p) / self.delong_se)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<CellResult>,
    pub trials: usize,
    pub mode: Mode,
}

impl SweepResult {
    pub fn cell(&self, k: u32, eps_acc: f64) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.k == k && c.eps_acc == eps_acc)
    }
}

/// A cell result together with its raw per-trial statistics.
#[derive(Debug, Clone)]
pub struct CellRun {
    pub result: CellResult,
    pub outcomes: Vec<TrialOutcome>,
}

/// Seed for one cell: depends on the master seed, `k`, `eps_acc`, the mode
/// and the regime, not on the adversary.
pub fn cell_seed(master_seed: u64, k: u32, eps_acc: f64, mode: Mode, regime: Regime) -> [u8; 32] {
    CanonicalWriter::new()
        .str("cell-seed")
        .u64(master_seed)
        .u64(k as u64)
        .f64(eps_acc)
        .str(mode.label())
        .str(regime.label())
        .hash()
        .0
}

fn cell_policy(spec: &SweepSpec, eps_acc: f64) -> Result<PolicyParams> {
    let t = &spec.policy_template;
    PolicyParams::calibrated(
        eps_acc,
        t.delta_acc,
        t.n_queries,
        spec.shape.delta_gap,
        t.k_max,
        t.delta_policy,
        t.window_id.clone(),
    )?
    .with_delta_split(t.delta_split)
}

fn predicted(cfg: &CoalitionConfig, gap: f64, sigma: f64) -> Result<Option<f64>> {
    if !cfg.regime.reaches_victim() {
        return Ok(Some(0.5));
    }
    let n = cfg.n_per_account as f64;
    let m = match cfg.adversary {
        Adversary::PooledMean | Adversary::BayesLr | Adversary::InstrumentedScore => cfg.k as f64 * n,
        Adversary::Diversified {
            pooling: Pooling::TargetOnly,
            ..
        } => cfg.target_accounts() as f64 * n,
        _ => return Ok(None),
    };
    auc_from_gap_sigma(gap, sigma, m).map(Some)
}

/// The top-K adversary gets a fresh world every trial; scalar adversaries
/// share one world per cell.
fn fresh_world_per_trial(adv: &Adversary) -> bool {
    matches!(adv, Adversary::TopkHit)
}

pub fn run_cell(spec: &SweepSpec, cell: GridCell) -> Result<CellRun> {
    if spec.trials < 2 {
        return Err(Error::InvalidInput("a sweep needs at least 2 trials per cell".into()));
    }
    let policy = cell_policy(spec, cell.eps_acc)?;
    let cfg = CoalitionConfig {
        k: cell.k,
        n_per_account: policy.n_queries,
        regime: spec.regime,
        adversary: spec.adversary,
        top_k: spec.shape.top_k,
    };
    cfg.validate()?;
    if spec.mode == Mode::SufficientStat && cfg.adversary == Adversary::TopkHit {
        return Err(Error::Unsupported(
            "the top-K hit count has no closed-form sufficient statistic".into(),
        ));
    }
    let seed = cell_seed(spec.master_seed, cell.k, cell.eps_acc, spec.mode, spec.regime);
    let shape = spec.shape;
    let make_world = |rng: &mut ChaCha8Rng| -> Result<WorldPair> {
        make_world_pair_with(rng, shape.dim, shape.delta_gap, shape.n_background)
    };
    let shared_world = if fresh_world_per_trial(&cfg.adversary) {
        None
    } else {
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(u64::MAX);
        Some(make_world(&mut rng)?)
    };
    let sigma = policy.sigma;
    let mode = spec.mode;
    let outcomes: Vec<TrialOutcome> = (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::from_seed(seed);
            rng.set_stream(t as u64);
            match &shared_world {
                Some(w) => run_trial_with(&mut rng, w, &cfg, sigma, mode),
                None => {
                    let w = make_world(&mut rng)?;
                    run_trial_with(&mut rng, &w, &cfg, sigma, mode)
                }
            }
        })
        .collect::<Result<_>>()?;
    let ins: Vec<f64> = outcomes.iter().map(|o| o.statistic_in).collect();
    let outs: Vec<f64> = outcomes.iter().map(|o| o.statistic_out).collect();
    let est = auc_with_se(&ins, &outs)?;
    Ok(CellRun {
        result: CellResult {
            k: cell.k,
            eps_acc: cell.eps_acc,
            mode,
            adversary: cfg.adversary.label(),
            auc: est.auc,
            delong_se: est.delong_se,
            trials: spec.trials,
            predicted_auc: predicted(&cfg, shape.delta_gap, sigma)?,
            regime: spec.regime,
        },
        outcomes,
    })
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    let cells = spec
        .grid
        .iter()
        .map(|&c| run_cell(spec, c).map(|r| r.result))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        cells,
        trials: spec.trials,
        mode: spec.mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(adv: Adversary, mode: Mode, n: u64, trials: usize) -> SweepSpec {
        SweepSpec {
            grid: grid(&[1, 4], &[2.0]),
            adversary: adv,
            regime: Regime::SameTenant,
            mode,
            trials,
            policy_template: PolicyParams::calibrated(1.0, 1e-6, n, 1.0, 20, 1e-4, "w").unwrap(),
            shape: HarnessShape::default(),
            master_seed: 7,
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let s = spec(Adversary::PooledMean, Mode::SufficientStat, 100, 200);
        let a = run_sweep(&s).unwrap();
        let b = run_sweep(&s).unwrap();
        assert_eq!(a, b);
        let mut s2 = s.clone();
        s2.master_seed = 8;
        assert_ne!(run_sweep(&s2).unwrap().cells[0].auc, a.cells[0].auc);
    }

    #[test]
    fn bayes_lr_shares_samples_with_pooled_mean() {
        let a = run_sweep(&spec(Adversary::PooledMean, Mode::FullSim, 50, 300)).unwrap();
        let b = run_sweep(&spec(Adversary::BayesLr, Mode::FullSim, 50, 300)).unwrap();
        for (x, y) in a.cells.iter().zip(&b.cells) {
            assert!((x.auc - y.auc).abs() < 1e-12);
        }
    }

    #[test]
    fn topk_rejects_sufficient_stat_and_small_t() {
        assert!(run_sweep(&spec(Adversary::TopkHit, Mode::SufficientStat, 10, 10)).is_err());
        assert!(run_sweep(&spec(Adversary::PooledMean, Mode::FullSim, 10, 1)).is_err());
    }

    #[test]
    fn grid_order() {
        let g = grid(&[1, 2], &[1.0, 4.0]);
        assert_eq!(g.len(), 4);
        assert_eq!((g[1].k, g[1].eps_acc), (2, 1.0));
        assert_eq!((g[2].k, g[2].eps_acc), (1, 4.0));
    }
}
