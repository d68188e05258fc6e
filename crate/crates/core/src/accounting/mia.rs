use serde::{Deserialize, Serialize};

use super::{calibrate_per_query, check_positive, joint_epsilon_upper, ln_inv, PolicyParams};
use crate::error::{domain, Result};

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Membership-inference bounds for a k-account coalition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiaBounds {
    /// `tanh(eps_k / 2)`; excludes the additive failure term.
    pub adv_upper: f64,
    /// Additive failure term `k * delta_acc` carried alongside `adv_upper`.
    pub delta_term: f64,
    pub adv_lower: f64,
    pub auc_prediction: f64,
    /// True when `adv_upper` used `sqrt(k) eps_acc` directly (`eps_acc <= 1`).
    pub leading_order: bool,
}

/// Advantage bounds and predicted AUC for the pooled-mean adversary.
pub fn mia_bounds(policy: &PolicyParams, k: u32) -> Result<MiaBounds> {
    if k == 0 {
        return Err(domain("coalition size k must be at least 1"));
    }
    let kf = k as f64;
    let (eps_k, leading_order) = if policy.eps_acc <= 1.0 {
        (kf.sqrt() * policy.eps_acc, true)
    } else {
        (joint_epsilon_upper(policy, k, policy.delta_acc)?.eps, false)
    };
    let l_acc = ln_inv(policy.delta_acc);
    let l_q = (1.25 / policy.delta_q()).ln();
    let adv_lower = std::f64::consts::FRAC_1_SQRT_2 / std::f64::consts::PI.sqrt()
        * kf.sqrt()
        * policy.eps_acc
        / (4.0 * (l_acc * l_q).sqrt());
    Ok(MiaBounds {
        adv_upper: (0.5 * eps_k).tanh(),
        delta_term: kf * policy.delta_acc,
        adv_lower: adv_lower.min(1.0),
        auc_prediction: auc_prediction(policy, k)?,
        leading_order,
    })
}

/// Predicted pooled-mean AUC: `Phi(sqrt(k n) eps_q / (2 sqrt(ln(1.25/delta_q))))`.
///
/// Under the standard delta split this equals
/// `Phi(sqrt(k) eps_acc / (2 sqrt(2) sqrt(ln(1/delta_acc) ln(1.25/delta_q))))`.
pub fn auc_prediction(policy: &PolicyParams, k: u32) -> Result<f64> {
    let b = calibrate_per_query(policy)?;
    let kn = k as f64 * policy.n_queries as f64;
    let z = kn.sqrt() * b.eps_q / (2.0 * (1.25 / b.delta_q).ln().sqrt());
    Ok(normal_cdf(z))
}

/// `Phi(gap sqrt(m) / (sqrt(2) sigma))` for `m` pooled observations.
pub fn auc_from_gap_sigma(delta_gap: f64, sigma: f64, m: f64) -> Result<f64> {
    check_positive("sigma", sigma)?;
    if !(m >= 0.0) {
        return Err(domain(format!("observation count {m} must be nonnegative")));
    }
    Ok(normal_cdf(delta_gap * m.sqrt() / (std::f64::consts::SQRT_2 * sigma)))
}
