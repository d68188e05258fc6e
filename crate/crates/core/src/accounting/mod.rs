//! Closed-form privacy accounting for Gaussian noise-then-select retrieval.
//!
//! Covers per-query calibration, advanced composition, the k-account joint
//! bound (advanced-composition and Rényi routes), a Rényi moments accountant,
//! membership-inference bounds, AUC predictions and the audit epsilon.
//!
//! All logarithms are natural logarithms. Every function here is pure.

mod mia;
mod policy;
mod rdp;

pub use mia::{
    auc_from_gap_sigma, auc_prediction, mia_bounds, normal_cdf, MiaBounds,
};
pub use policy::{Calibration, DeltaSplit, PolicyParams};
pub use rdp::{
    default_alpha_grid, joint_epsilon_rdp, rdp_accumulate, rdp_closed_form, rdp_route_sigma,
    rdp_to_dp, RdpConversion, RdpState,
};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Per-query `(eps_q, delta_q)` obtained by inverting advanced composition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerQueryBudget {
    pub eps_q: f64,
    pub delta_q: f64,
}

/// Output of m-fold advanced composition, with both summands kept apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Composition {
    pub eps: f64,
    /// `sqrt(2 m ln(1/delta')) * eps0`
    pub leading: f64,
    /// `m * eps0 * (exp(eps0) - 1)`
    pub residual: f64,
    pub delta: f64,
}

/// Which analysis produced a joint bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundRoute {
    AdvancedComposition,
    Renyi,
}

/// A joint `(eps, delta)` bound for a k-account coalition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointBound {
    pub eps: f64,
    pub leading: f64,
    pub residual: f64,
    pub delta: f64,
    pub route: BoundRoute,
}

/// Audit epsilon in both reporting modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonAudit {
    /// Leading term plus explicit residual at `delta_comp`.
    pub full: f64,
    /// `sqrt(k_max) * eps_acc`, no log ratio, no residual.
    pub headline: f64,
    pub leading: f64,
    pub residual: f64,
    pub delta_policy: f64,
    pub delta_comp: f64,
    pub k_max: u32,
}

pub(crate) fn ln_inv(delta: f64) -> f64 {
    -delta.ln()
}

pub(crate) fn check_delta(name: &str, delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} = {delta} must lie in (0, 1)")))
    }
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{name} = {v} must be positive and finite")))
    }
}

/// Per-query budget such that n-fold advanced composition returns the
/// per-account budget.
pub fn calibrate_per_query(policy: &PolicyParams) -> Result<PerQueryBudget> {
    check_positive("eps_acc", policy.eps_acc)?;
    check_delta("delta_acc", policy.delta_acc)?;
    if policy.n_queries == 0 {
        return Err(domain("n_queries must be at least 1"));
    }
    let n = policy.n_queries as f64;
    let slack = policy.delta_split.composition_slack(policy.delta_acc);
    Ok(PerQueryBudget {
        eps_q: policy.eps_acc / (2.0 * n * ln_inv(slack)).sqrt(),
        delta_q: policy.delta_split.per_query_delta(policy.delta_acc, policy.n_queries),
    })
}

/// Noise scale calibrated so that `n` queries of sensitivity `delta_gap`
/// compose to `(eps_acc, delta_acc)`.
pub fn calibrate_sigma(eps_acc: f64, delta_acc: f64, n_queries: u64, delta_gap: f64) -> Result<f64> {
    calibrate_sigma_with_split(eps_acc, delta_acc, n_queries, delta_gap, DeltaSplit::Standard)
}

pub fn calibrate_sigma_with_split(
    eps_acc: f64,
    delta_acc: f64,
    n_queries: u64,
    delta_gap: f64,
    split: DeltaSplit,
) -> Result<f64> {
    check_positive("eps_acc", eps_acc)?;
    check_delta("delta_acc", delta_acc)?;
    if !(delta_gap > 0.0 && delta_gap <= 1.0) {
        return Err(domain(format!("delta_gap = {delta_gap} must lie in (0, 1]")));
    }
    if n_queries == 0 {
        return Err(domain("n_queries must be at least 1"));
    }
    let n = n_queries as f64;
    let slack = split.composition_slack(delta_acc);
    let delta_q = split.per_query_delta(delta_acc, n_queries);
    Ok(delta_gap * (2.0 * n * ln_inv(slack) * 2.0 * (1.25 / delta_q).ln()).sqrt() / eps_acc)
}

/// Standard Gaussian-mechanism epsilon: `gap * sqrt(2 ln(1.25/delta_q)) / sigma`.
pub fn gaussian_epsilon(delta_gap: f64, sigma: f64, delta_q: f64) -> Result<f64> {
    check_positive("sigma", sigma)?;
    check_delta("delta_q", delta_q)?;
    Ok(delta_gap * (2.0 * (1.25 / delta_q).ln()).sqrt() / sigma)
}

/// m-fold adaptive composition of `(eps0, delta0)`-DP mechanisms.
pub fn advanced_composition(eps0: f64, delta0: f64, m: u64, delta_slack: f64) -> Result<Composition> {
    check_positive("eps0", eps0)?;
    if eps0 > 1.0 {
        return Err(domain(format!(
            "advanced composition requires eps0 <= 1, got {eps0}"
        )));
    }
    check_delta("delta0", delta0)?;
    check_delta("delta_slack", delta_slack)?;
    if m == 0 {
        return Err(domain("m must be at least 1"));
    }
    let mf = m as f64;
    let leading = (2.0 * mf * ln_inv(delta_slack)).sqrt() * eps0;
    let residual = mf * eps0 * eps0.exp_m1();
    Ok(Composition {
        eps: leading + residual,
        leading,
        residual,
        delta: mf * delta0 + delta_slack,
    })
}

/// Joint `(eps_k, delta + k delta_acc)` bound for k colluding accounts.
///
/// For `eps_acc <= 1` this is the advanced-composition bound with the
/// residual written as `2 k n eps_q^2`. Larger per-account budgets fall
/// outside that bound's hypothesis and use the Rényi route instead.
pub fn joint_epsilon_upper(policy: &PolicyParams, k: u32, delta_slack: f64) -> Result<JointBound> {
    if k == 0 {
        return Err(domain("coalition size k must be at least 1"));
    }
    check_delta("delta_slack", delta_slack)?;
    if delta_slack < policy.delta_acc {
        return Err(domain(format!(
            "delta_slack {delta_slack:e} must be at least delta_acc {:e}",
            policy.delta_acc
        )));
    }
    joint_bound_at_slack(policy, k, delta_slack)
}

fn joint_bound_at_slack(policy: &PolicyParams, k: u32, delta_slack: f64) -> Result<JointBound> {
    let budget = calibrate_per_query(policy)?;
    if policy.eps_acc > 1.0 {
        return rdp::joint_rdp_unchecked(policy, k, delta_slack);
    }
    let m = k as f64 * policy.n_queries as f64;
    let leading = (2.0 * m * ln_inv(delta_slack)).sqrt() * budget.eps_q;
    let residual = 2.0 * m * budget.eps_q * budget.eps_q;
    Ok(JointBound {
        eps: leading + residual,
        leading,
        residual,
        delta: delta_slack + k as f64 * policy.delta_acc,
        route: BoundRoute::AdvancedComposition,
    })
}

/// Audit epsilon at `k_max` with composition slack
/// `delta_comp = delta_policy - k_max * delta_acc`.
pub fn epsilon_audit(policy: &PolicyParams) -> Result<EpsilonAudit> {
    policy.check_well_formed()?;
    let delta_comp = policy.delta_comp();
    let bound = joint_bound_at_slack(policy, policy.k_max, delta_comp)?;
    Ok(EpsilonAudit {
        full: bound.eps,
        headline: (policy.k_max as f64).sqrt() * policy.eps_acc,
        leading: bound.leading,
        residual: bound.residual,
        delta_policy: policy.delta_policy,
        delta_comp,
        k_max: policy.k_max,
    })
}

impl From<EpsilonAudit> for (f64, f64) {
    fn from(a: EpsilonAudit) -> Self {
        (a.full, a.delta_policy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn policy(eps: f64, n: u64) -> PolicyParams {
        PolicyParams::calibrated(eps, 1e-6, n, 1.0, 10, 1e-5, "w").unwrap()
    }

    #[test]
    fn per_query_examples() {
        let b = calibrate_per_query(&policy(1.0, 1)).unwrap();
        assert!((b.eps_q - 0.190_239_866_550_812_6).abs() < 1e-14);
        let b = calibrate_per_query(&policy(1.0, 10_000)).unwrap();
        assert!((b.eps_q - 1.902_398_665_508_126e-3).abs() < 1e-16);
        assert!((b.delta_q - 1e-10).abs() < 1e-25);
    }

    #[test]
    fn per_query_rejects_zero_budget() {
        let mut p = policy(1.0, 1);
        p.eps_acc = 0.0;
        assert!(matches!(calibrate_per_query(&p), Err(Error::Domain(_))));
        p.eps_acc = 1.0;
        p.delta_acc = 1.0;
        assert!(calibrate_per_query(&p).is_err());
    }

    #[test]
    fn sigma_example_and_linearity() {
        let s = calibrate_sigma(4.0, 1e-6, 10_000, 1.0).unwrap();
        assert!((s - 896.098_109_469_363_6).abs() < 1e-9);
        let s2 = calibrate_sigma(4.0, 1e-6, 10_000, 0.5).unwrap();
        assert!((s / s2 - 2.0).abs() < 1e-14);
        assert!(calibrate_sigma(4.0, 1e-6, 10_000, 0.0).is_err());
        assert!(calibrate_sigma(4.0, 1e-6, 10_000, 1.5).is_err());
    }

    #[test]
    fn sigma_round_trips_through_gaussian_mechanism() {
        for &(eps, n, gap) in &[(1.0, 1u64, 1.0), (4.0, 10_000, 1.0), (0.3, 200, 0.41), (16.0, 200, 0.133)] {
            let p = PolicyParams::calibrated(eps, 1e-6, n, gap, 10, 1e-4, "w").unwrap();
            let b = calibrate_per_query(&p).unwrap();
            let eps_q = gaussian_epsilon(gap, p.sigma, b.delta_q).unwrap();
            assert!((eps_q - b.eps_q).abs() <= 1e-12 * b.eps_q.max(1.0), "{eps} {n} {gap}");
        }
    }

    #[test]
    fn advanced_composition_examples() {
        let c = advanced_composition(0.1, 1e-8, 100, 1e-6).unwrap();
        assert!((c.eps - 6.308_230_950_513_408).abs() < 1e-12);
        assert!((c.delta - (100.0 * 1e-8 + 1e-6)).abs() < 1e-20);

        let single = advanced_composition(0.5, 1e-6, 1, 1e-6).unwrap();
        let expect = (2.0 * ln_inv(1e-6)).sqrt() * 0.5 + 0.5 * 0.5f64.exp_m1();
        assert!((single.eps - expect).abs() < 1e-14);

        assert!(advanced_composition(1.5, 1e-6, 1, 1e-6).is_err());
    }

    #[test]
    fn advanced_composition_monotone_in_m() {
        let mut prev = 0.0;
        for m in 1..200 {
            let e = advanced_composition(0.05, 1e-9, m, 1e-6).unwrap().eps;
            assert!(e >= prev);
            prev = e;
        }
    }

    #[test]
    fn calibration_inverts_composition() {
        for &eps in &[0.1, 0.5, 1.0] {
            for &n in &[1u64, 10, 10_000] {
                let p = policy(eps, n);
                let b = calibrate_per_query(&p).unwrap();
                let c = advanced_composition(b.eps_q, b.delta_q, n, p.delta_acc).unwrap();
                assert!((c.leading - eps).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn joint_upper_leading_terms() {
        let p = policy(1.0, 10_000);
        let b10 = joint_epsilon_upper(&p, 10, 1e-6).unwrap();
        assert!((b10.leading - 10f64.sqrt()).abs() < 1e-12);
        assert!((b10.eps - 3.886_101_796_673_799).abs() < 1e-9);
        assert!((b10.delta - (1e-6 + 10.0 * 1e-6)).abs() < 1e-18);
        let b50 = joint_epsilon_upper(&p, 50, 1e-6).unwrap();
        assert!((b50.leading - 7.071_067_811_865_475).abs() < 1e-12);
        let b1 = joint_epsilon_upper(&p, 1, 1e-6).unwrap();
        assert!((b1.leading - 1.0).abs() < 1e-12);
        for k in [2u32, 5, 20, 100] {
            let bk = joint_epsilon_upper(&p, k, 1e-6).unwrap();
            assert!((bk.leading / b1.leading - (k as f64).sqrt()).abs() < 1e-12);
        }
        assert!(joint_epsilon_upper(&p, 0, 1e-6).is_err());
        assert!(joint_epsilon_upper(&p, 2, 1e-7).is_err());
    }

    #[test]
    fn joint_upper_residual_matches_closed_form() {
        let p = policy(0.7, 500);
        let b = joint_epsilon_upper(&p, 7, 1e-6).unwrap();
        let expect = 7.0 * 0.49 / ln_inv(1e-6);
        assert!((b.residual - expect).abs() < 1e-12);
    }

    #[test]
    fn large_budget_falls_back_to_renyi_route() {
        let p = policy(4.0, 10_000);
        let b = joint_epsilon_upper(&p, 10, 1e-6).unwrap();
        assert_eq!(b.route, BoundRoute::Renyi);
        let r = joint_epsilon_rdp(&p, 10, 1e-6).unwrap();
        assert_eq!(b.eps, r.eps);
    }

    #[test]
    fn headline_audit_table() {
        for &(k, eps, expect) in &[(10u32, 1.0, "3.16"), (50, 1.0, "7.07"), (50, 2.0, "14.14"), (100, 1.0, "10.00")] {
            let p = PolicyParams::calibrated(eps, 1e-6, 10_000, 1.0, k, 1e-3, "w").unwrap();
            let a = epsilon_audit(&p).unwrap();
            assert_eq!(format!("{:.2}", a.headline), expect);
        }
    }

    #[test]
    fn audit_at_unit_cap_recovers_per_account_budget() {
        let p = PolicyParams::calibrated(1.0, 1e-6, 10_000, 1.0, 1, 2e-6, "w").unwrap();
        let a = epsilon_audit(&p).unwrap();
        assert!((a.delta_comp - 1e-6).abs() < 1e-20);
        let residual = 1.0 / ln_inv(1e-6);
        assert!((a.full - (1.0 + residual)).abs() < 1e-9);
    }

    #[test]
    fn audit_rejects_ill_formed_policy() {
        let p = PolicyParams::calibrated(1.0, 1e-6, 10_000, 1.0, 10, 1e-5, "w").unwrap();
        assert!(matches!(epsilon_audit(&p), Err(Error::IllFormedPolicy { .. })));
        let p = PolicyParams::calibrated(1.0, 1e-6, 10_000, 1.0, 10, 1.1e-5, "w").unwrap();
        assert!(epsilon_audit(&p).is_ok());
    }

    #[test]
    fn pure_functions_are_bit_identical() {
        let p = policy(2.0, 1234);
        let a = joint_epsilon_upper(&p, 7, 1e-6).unwrap();
        let b = joint_epsilon_upper(&p, 7, 1e-6).unwrap();
        assert_eq!(a.eps.to_bits(), b.eps.to_bits());
        assert_eq!(
            auc_prediction(&p, 7).unwrap().to_bits(),
            auc_prediction(&p, 7).unwrap().to_bits()
        );
    }

    #[test]
    fn equal_delta_split_tightens_by_small_constant() {
        let std = policy(1.0, 10_000);
        let eq = std.clone().with_delta_split(DeltaSplit::Equal).unwrap();
        let a = calibrate_per_query(&std).unwrap();
        let b = calibrate_per_query(&eq).unwrap();
        assert!((b.delta_q - 5e-11).abs() < 1e-24);
        let ratio = a.eps_q / b.eps_q;
        assert!((ratio - (ln_inv(5e-7) / ln_inv(1e-6)).sqrt()).abs() < 1e-12);
        assert!((ratio - 1.025).abs() < 0.001);
        assert!(eq.sigma > std.sigma);
    }
}
