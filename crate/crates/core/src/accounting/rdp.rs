use serde::{Deserialize, Serialize};

use super::{check_delta, check_positive, ln_inv, BoundRoute, JointBound, PolicyParams};
use crate::error::{domain, Result};

/// Integer orders 2..=64.
pub fn default_alpha_grid() -> Vec<f64> {
    (2..=64).map(f64::from).collect()
}

/// Rényi divergence accumulated on a fixed grid of orders.
///
/// `rho[i]` is the divergence at `alpha_grid[i]`, in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdpState {
    pub alpha_grid: Vec<f64>,
    pub rho: Vec<f64>,
    pub query_count: u64,
}

impl Default for RdpState {
    fn default() -> Self {
        Self::new(default_alpha_grid()).expect("default grid is valid")
    }
}

impl RdpState {
    pub fn new(alpha_grid: Vec<f64>) -> Result<Self> {
        if let Some(a) = alpha_grid.iter().find(|a| !(**a > 1.0 && a.is_finite())) {
            return Err(domain(format!("Rényi order {a} must be finite and > 1")));
        }
        let rho = vec![0.0; alpha_grid.len()];
        Ok(RdpState {
            alpha_grid,
            rho,
            query_count: 0,
        })
    }

    /// Add `m` Gaussian releases with sensitivity `delta_gap` and noise `sigma`.
    pub fn accumulate_many(&mut self, delta_gap: f64, sigma: f64, m: u64) -> Result<()> {
        check_positive("sigma", sigma)?;
        let per = delta_gap * delta_gap / (2.0 * sigma * sigma);
        for (r, a) in self.rho.iter_mut().zip(&self.alpha_grid) {
            *r += m as f64 * a * per;
        }
        self.query_count += m;
        Ok(())
    }

    pub fn rho_at(&self, alpha: f64) -> Option<f64> {
        self.alpha_grid
            .iter()
            .position(|a| *a == alpha)
            .map(|i| self.rho[i])
    }
}

/// One Gaussian release folded into the accountant.
pub fn rdp_accumulate(state: &RdpState, delta_gap: f64, sigma: f64) -> Result<RdpState> {
    let mut next = state.clone();
    next.accumulate_many(delta_gap, sigma, 1)?;
    Ok(next)
}

/// Best `(eps, alpha)` from the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdpConversion {
    pub eps: f64,
    pub alpha: f64,
}

/// `min_alpha rho(alpha) + ln(1/delta)/(alpha - 1)`.
pub fn rdp_to_dp(state: &RdpState, delta: f64) -> Result<RdpConversion> {
    check_delta("delta", delta)?;
    let l = ln_inv(delta);
    state
        .alpha_grid
        .iter()
        .zip(&state.rho)
        .map(|(a, r)| RdpConversion {
            eps: r + l / (a - 1.0),
            alpha: *a,
        })
        .min_by(|x, y| x.eps.total_cmp(&y.eps))
        .ok_or_else(|| domain("empty Rényi order grid"))
}

/// Continuous-order optimum after `m` Gaussian releases:
/// `gap * sqrt(2 m ln(1/delta)) / sigma + m gap^2 / (2 sigma^2)`.
pub fn rdp_closed_form(delta_gap: f64, sigma: f64, m: f64, delta: f64) -> f64 {
    delta_gap * (2.0 * m * ln_inv(delta)).sqrt() / sigma + m * delta_gap * delta_gap / (2.0 * sigma * sigma)
}

/// Noise scale at which n Gaussian releases of the given gap reach `eps_acc`
/// to leading order in the Rényi analysis: `gap * sqrt(2 n ln(1/delta_acc)) / eps_acc`.
pub fn rdp_route_sigma(policy: &PolicyParams, delta_gap: f64) -> f64 {
    delta_gap * (2.0 * policy.n_queries as f64 * ln_inv(policy.delta_acc)).sqrt() / policy.eps_acc
}

/// Rényi-route joint bound for k accounts at failure probability `delta`.
pub fn joint_epsilon_rdp(policy: &PolicyParams, k: u32, delta: f64) -> Result<JointBound> {
    if k == 0 {
        return Err(domain("coalition size k must be at least 1"));
    }
    joint_rdp_unchecked(policy, k, delta)
}

pub(super) fn joint_rdp_unchecked(policy: &PolicyParams, k: u32, delta: f64) -> Result<JointBound> {
    check_positive("eps_acc", policy.eps_acc)?;
    check_delta("delta_acc", policy.delta_acc)?;
    check_delta("delta", delta)?;
    let kf = k as f64;
    let l_acc = ln_inv(policy.delta_acc);
    let leading = kf.sqrt() * policy.eps_acc * (ln_inv(delta) / l_acc).sqrt();
    let residual = kf * policy.eps_acc * policy.eps_acc / (4.0 * l_acc);
    Ok(JointBound {
        eps: leading + residual,
        leading,
        residual,
        delta,
        route: BoundRoute::Renyi,
    })
}
