//! Coalition adversaries and one paired-worlds trial.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::accounting::PolicyParams;
use crate::error::{Error, Result};
use crate::mechanism::{dot, random_orthogonal, WorldBit, WorldPair};

/// Where the coalition's accounts live relative to the victim index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Accounts belong to the victim's tenant.
    SameTenant,
    /// Accounts belong to another tenant but, through an access-control
    /// failure, retrieve from the victim index.
    ExternalM4,
    /// Accounts belong to another tenant and only see their own index.
    ExternalIsolated,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::SameTenant => "same_tenant",
            Regime::ExternalM4 => "external_m4",
            Regime::ExternalIsolated => "external_isolated",
        }
    }

    /// Whether the coalition's retrievals touch the victim index.
    pub fn reaches_victim(self) -> bool {
        !matches!(self, Regime::ExternalIsolated)
    }
}

/// Which accounts' releases feed the diversified adversary's pooled mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Only the accounts that probe the target.
    #[default]
    TargetOnly,
    /// Every account, including the orthogonal probes.
    AllAccounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Adversary {
    PooledMean,
    BayesLr,
    Diversified {
        rho: f64,
        #[serde(default)]
        pooling: Pooling,
    },
    TopkHit,
    InstrumentedScore,
}

impl Adversary {
    pub fn label(&self) -> String {
        match self {
            Adversary::PooledMean => "pooled_mean".into(),
            Adversary::BayesLr => "bayes_lr".into(),
            Adversary::Diversified { rho, pooling } => match pooling {
                Pooling::TargetOnly => format!("diversified_{rho}"),
                Pooling::AllAccounts => format!("diversified_{rho}_all"),
            },
            Adversary::TopkHit => "topk_hit".into(),
            Adversary::InstrumentedScore => "instrumented_score".into(),
        }
    }
}

/// How a trial is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Every noisy release is drawn.
    FullSim,
    /// Pooled sums are drawn from their exact Gaussian law.
    SufficientStat,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::FullSim => "full_sim",
            Mode::SufficientStat => "sufficient_stat",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoalitionConfig {
    pub k: u32,
    pub n_per_account: u64,
    pub regime: Regime,
    pub adversary: Adversary,
    /// Result-list length for the top-K adversary.
    pub top_k: usize,
}

impl CoalitionConfig {
    pub fn new(k: u32, n_per_account: u64, adversary: Adversary) -> Self {
        CoalitionConfig {
            k,
            n_per_account,
            regime: Regime::SameTenant,
            adversary,
            top_k: 5,
        }
    }

    pub fn with_regime(mut self, regime: Regime) -> Self {
        self.regime = regime;
        self
    }

    /// Accounts that probe the target under the diversified split.
    pub fn target_accounts(&self) -> u32 {
        match self.adversary {
            Adversary::Diversified { rho, .. } => ((rho * self.k as f64 - 1e-9).ceil() as u32).clamp(1, self.k),
            _ => self.k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n_per_account == 0 {
            return Err(Error::Domain("k and n_per_account must be at least 1".into()));
        }
        if let Adversary::Diversified { rho, .. } = self.adversary {
            if !(rho > 0.0 && rho <= 1.0) {
                return Err(Error::Domain(format!("diversified rho = {rho} must lie in (0, 1]")));
            }
        }
        if matches!(self.adversary, Adversary::TopkHit) && self.top_k == 0 {
            return Err(Error::Domain("top_k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Attacker statistic in each world of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub statistic_in: f64,
    pub statistic_out: f64,
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Sum of `m` draws of `mean + sigma Z`.
fn gaussian_sum<R: Rng + ?Sized>(rng: &mut R, mean: f64, sigma: f64, m: u64, mode: Mode) -> f64 {
    match mode {
        Mode::SufficientStat => m as f64 * mean + sigma * (m as f64).sqrt() * normal(rng),
        Mode::FullSim => {
            let mut s = 0.0;
            for _ in 0..m {
                s += normal(rng);
            }
            m as f64 * mean + sigma * s
        }
    }
}

/// Queries (out of `queries`) whose top-`top_k` list contains the planted slot.
///
/// Background noises are drawn lazily in position order and the scan stops
/// as soon as the outcome is settled. Backgrounds sit at lower positions than
/// the slot, so they win ties.
pub fn topk_hit_count<R: Rng + ?Sized>(
    rng: &mut R,
    background: &[f64],
    slot_score: f64,
    sigma: f64,
    top_k: usize,
    queries: u64,
) -> u64 {
    let nb = background.len();
    if nb < top_k {
        return queries;
    }
    let mut hits = 0;
    for _ in 0..queries {
        let s = slot_score + sigma * normal(rng);
        let mut above = 0;
        let mut hit = true;
        for (i, &c) in background.iter().enumerate() {
            if c + sigma * normal(rng) >= s {
                above += 1;
                if above == top_k {
                    hit = false;
                    break;
                }
            }
            if above + (nb - i - 1) < top_k {
                break;
            }
        }
        hits += hit as u64;
    }
    hits
}

/// Attacker statistic for one world. `directions` are the orthogonal probes
/// of the diversified adversary, shared by both worlds of a trial.
fn world_statistic<R: Rng + ?Sized>(
    rng: &mut R,
    world: &WorldPair,
    b: WorldBit,
    cfg: &CoalitionConfig,
    sigma: f64,
    mode: Mode,
    directions: &[Vec<f64>],
) -> f64 {
    let n = cfg.n_per_account;
    let kn = cfg.k as u64 * n;
    let reach = cfg.regime.reaches_victim();
    let mu = if reach { world.planted_score(b) } else { 0.0 };
    match cfg.adversary {
        Adversary::PooledMean | Adversary::InstrumentedScore => gaussian_sum(rng, mu, sigma, kn, mode) / kn as f64,
        Adversary::BayesLr => {
            let mu_in = world.planted_score(WorldBit::In);
            let mu_out = world.planted_score(WorldBit::Out);
            let sum = gaussian_sum(rng, mu, sigma, kn, mode);
            ((mu_in - mu_out) * sum - kn as f64 * (mu_in * mu_in - mu_out * mu_out) / 2.0) / (sigma * sigma)
        }
        Adversary::Diversified { pooling, .. } => {
            let r = cfg.target_accounts() as u64;
            let target_sum = gaussian_sum(rng, mu, sigma, r * n, mode);
            match pooling {
                Pooling::TargetOnly => target_sum / (r * n) as f64,
                Pooling::AllAccounts => {
                    let planted = world.planted(b);
                    let mut total = target_sum;
                    for u in directions {
                        let m = if reach { dot(u, planted) } else { 0.0 };
                        total += gaussian_sum(rng, m, sigma, n, mode);
                    }
                    total / kn as f64
                }
            }
        }
        Adversary::TopkHit => {
            if !reach {
                return 0.0;
            }
            let bg: Vec<f64> = world.base.scores(&world.probe);
            topk_hit_count(rng, &bg, mu, sigma, cfg.top_k, kn) as f64
        }
    }
}

/// One paired trial driven by an existing generator.
pub fn run_trial_with<R: Rng + ?Sized>(
    rng: &mut R,
    world: &WorldPair,
    cfg: &CoalitionConfig,
    sigma: f64,
    mode: Mode,
) -> Result<TrialOutcome> {
    if mode == Mode::SufficientStat && cfg.adversary == Adversary::TopkHit {
        return Err(Error::Unsupported(
            "the top-K hit count has no closed-form sufficient statistic".into(),
        ));
    }
    let directions: Vec<Vec<f64>> = match cfg.adversary {
        Adversary::Diversified {
            pooling: Pooling::AllAccounts,
            ..
        } => (cfg.target_accounts()..cfg.k)
            .map(|_| random_orthogonal(rng, &[&world.probe]))
            .collect(),
        _ => Vec::new(),
    };
    let statistic_in = world_statistic(rng, world, WorldBit::In, cfg, sigma, mode, &directions);
    let statistic_out = world_statistic(rng, world, WorldBit::Out, cfg, sigma, mode, &directions);
    Ok(TrialOutcome {
        statistic_in,
        statistic_out,
    })
}

/// Check that `policy` is calibrated for this coalition and world.
pub fn check_trial_policy(world: &WorldPair, cfg: &CoalitionConfig, policy: &PolicyParams) -> Result<()> {
    cfg.validate()?;
    if policy.n_queries != cfg.n_per_account {
        return Err(Error::InvalidInput(format!(
            "policy covers {} queries per account, coalition issues {}",
            policy.n_queries, cfg.n_per_account
        )));
    }
    policy.check_calibration(world.delta_gap, 1e-9)
}

/// One paired trial: the coalition's statistic under the target world and
/// under the decoy world.
pub fn run_trial(
    world: &WorldPair,
    cfg: &CoalitionConfig,
    policy: &PolicyParams,
    seed: u64,
    mode: Mode,
) -> Result<TrialOutcome> {
    check_trial_policy(world, cfg, policy)?;
    run_trial_with(&mut ChaCha8Rng::seed_from_u64(seed), world, cfg, policy.sigma, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::{make_world_pair, select_topk};

    fn policy(eps: f64, n: u64) -> PolicyParams {
        PolicyParams::calibrated(eps, 1e-6, n, 1.0, 20, 1e-4, "w").unwrap()
    }

    #[test]
    fn noiseless_pooled_mean_separates() {
        let w = make_world_pair(8, 1.0, 3, 1).unwrap();
        let cfg = CoalitionConfig::new(3, 4, Adversary::PooledMean);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for mode in [Mode::FullSim, Mode::SufficientStat] {
            let o = run_trial_with(&mut rng, &w, &cfg, 1e-12, mode).unwrap();
            assert!((o.statistic_in - 1.0).abs() < 1e-9);
            assert!(o.statistic_out.abs() < 1e-9);
        }
    }

    #[test]
    fn calibration_is_enforced() {
        let w = make_world_pair(8, 1.0, 3, 1).unwrap();
        let cfg = CoalitionConfig::new(2, 100, Adversary::PooledMean);
        assert!(run_trial(&w, &cfg, &policy(1.0, 100), 1, Mode::FullSim).is_ok());
        assert!(run_trial(&w, &cfg, &policy(1.0, 99), 1, Mode::FullSim).is_err());
        let mut p = policy(1.0, 100);
        p.sigma *= 0.5;
        assert!(matches!(
            run_trial(&w, &cfg, &p, 1, Mode::FullSim),
            Err(Error::CalibrationMismatch { .. })
        ));
    }

    #[test]
    fn topk_sufficient_stat_is_rejected() {
        let w = make_world_pair(8, 1.0, 10, 1).unwrap();
        let cfg = CoalitionConfig::new(1, 10, Adversary::TopkHit);
        assert!(matches!(
            run_trial(&w, &cfg, &policy(4.0, 10), 0, Mode::SufficientStat),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn early_exit_matches_full_ranking() {
        // Same seed, same draw order: the lazy scan consumes a prefix of the full draw.
        let w = make_world_pair(16, 1.0, 12, 9).unwrap();
        let bg = w.base.scores(&w.probe);
        let sigma = 0.6;
        for q in 0..400u64 {
            let mut a = ChaCha8Rng::seed_from_u64(q);
            let mut b = ChaCha8Rng::seed_from_u64(q);
            let lazy = topk_hit_count(&mut a, &bg, 1.0, sigma, 4, 1);
            let slot = 1.0 + sigma * normal(&mut b);
            let mut scores: Vec<f64> = bg.iter().map(|c| c + sigma * normal(&mut b)).collect();
            scores.push(slot);
            let full = select_topk(&scores, 4).contains(&12) as u64;
            assert_eq!(lazy, full, "query {q}");
        }
    }

    #[test]
    fn isolated_regime_sees_nothing() {
        let w = make_world_pair(8, 1.0, 10, 2).unwrap();
        let cfg = CoalitionConfig::new(2, 5, Adversary::TopkHit).with_regime(Regime::ExternalIsolated);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let o = run_trial_with(&mut rng, &w, &cfg, 1.0, Mode::FullSim).unwrap();
        assert_eq!((o.statistic_in, o.statistic_out), (0.0, 0.0));
    }

    #[test]
    fn diversified_split_counts() {
        let c = |rho: f64, k| CoalitionConfig::new(k, 1, Adversary::Diversified { rho, pooling: Pooling::TargetOnly });
        assert_eq!(c(0.5, 20).target_accounts(), 10);
        assert_eq!(c(0.25, 20).target_accounts(), 5);
        assert_eq!(c(0.01, 3).target_accounts(), 1);
        assert_eq!(c(1.0, 7).target_accounts(), 7);
        assert!(c(0.0, 3).validate().is_err());
    }
}
