use serde::{Deserialize, Serialize};

use super::{calibrate_sigma_with_split, check_delta, check_positive};
use crate::error::{domain, Error, Result};

/// How the per-account failure probability is divided between the
/// per-query mechanisms and the composition slack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaSplit {
    /// `delta_q = delta_acc / n`, slack `delta_acc`.
    #[default]
    Standard,
    /// `delta_q = delta_acc / (2n)`, slack `delta_acc / 2`; totals exactly `delta_acc`.
    Equal,
}

impl DeltaSplit {
    pub fn per_query_delta(self, delta_acc: f64, n: u64) -> f64 {
        match self {
            DeltaSplit::Standard => delta_acc / n as f64,
            DeltaSplit::Equal => delta_acc / (2.0 * n as f64),
        }
    }

    pub fn composition_slack(self, delta_acc: f64) -> f64 {
        match self {
            DeltaSplit::Standard => delta_acc,
            DeltaSplit::Equal => delta_acc / 2.0,
        }
    }
}

/// Whether `sigma` came from [`calibrate_sigma`](super::calibrate_sigma).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Calibration {
    Calibrated { delta_gap: f64 },
    Uncalibrated,
}

/// The audited per-window contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub eps_acc: f64,
    pub delta_acc: f64,
    pub n_queries: u64,
    pub sigma: f64,
    pub k_max: u32,
    pub delta_policy: f64,
    pub window_id: String,
    pub calibration: Calibration,
    #[serde(default)]
    pub delta_split: DeltaSplit,
}

impl PolicyParams {
    /// Build a policy whose `sigma` is the calibrated noise scale for score gap `delta_gap`.
    pub fn calibrated(
        eps_acc: f64,
        delta_acc: f64,
        n_queries: u64,
        delta_gap: f64,
        k_max: u32,
        delta_policy: f64,
        window_id: impl Into<String>,
    ) -> Result<Self> {
        let sigma = calibrate_sigma_with_split(eps_acc, delta_acc, n_queries, delta_gap, DeltaSplit::Standard)?;
        let p = PolicyParams {
            eps_acc,
            delta_acc,
            n_queries,
            sigma,
            k_max,
            delta_policy,
            window_id: window_id.into(),
            calibration: Calibration::Calibrated { delta_gap },
            delta_split: DeltaSplit::Standard,
        };
        p.check_domain()?;
        Ok(p)
    }

    /// Build a policy with an arbitrary `sigma`; flagged uncalibrated.
    pub fn free_form(
        eps_acc: f64,
        delta_acc: f64,
        n_queries: u64,
        sigma: f64,
        k_max: u32,
        delta_policy: f64,
        window_id: impl Into<String>,
    ) -> Result<Self> {
        let p = PolicyParams {
            eps_acc,
            delta_acc,
            n_queries,
            sigma,
            k_max,
            delta_policy,
            window_id: window_id.into(),
            calibration: Calibration::Uncalibrated,
            delta_split: DeltaSplit::Standard,
        };
        p.check_domain()?;
        Ok(p)
    }

    /// Switch the delta split; a calibrated policy is recalibrated.
    pub fn with_delta_split(mut self, split: DeltaSplit) -> Result<Self> {
        self.delta_split = split;
        if let Calibration::Calibrated { delta_gap } = self.calibration {
            self.sigma =
                calibrate_sigma_with_split(self.eps_acc, self.delta_acc, self.n_queries, delta_gap, split)?;
        }
        Ok(self)
    }

    pub fn is_calibrated(&self) -> bool {
        matches!(self.calibration, Calibration::Calibrated { .. })
    }

    pub fn delta_q(&self) -> f64 {
        self.delta_split.per_query_delta(self.delta_acc, self.n_queries)
    }

    /// `delta_policy - k_max * delta_acc`.
    pub fn delta_comp(&self) -> f64 {
        self.delta_policy - self.k_max as f64 * self.delta_acc
    }

    pub fn check_domain(&self) -> Result<()> {
        check_positive("eps_acc", self.eps_acc)?;
        check_delta("delta_acc", self.delta_acc)?;
        check_positive("sigma", self.sigma)?;
        check_delta("delta_policy", self.delta_policy)?;
        if self.n_queries == 0 {
            return Err(domain("n_queries must be at least 1"));
        }
        if self.k_max == 0 {
            return Err(domain("k_max must be at least 1"));
        }
        Ok(())
    }

    /// `delta_policy > k_max * delta_acc`.
    pub fn check_well_formed(&self) -> Result<()> {
        self.check_domain()?;
        if self.delta_comp() > 1e-12 * self.delta_policy {
            Ok(())
        } else {
            Err(Error::IllFormedPolicy {
                delta_policy: self.delta_policy,
                k_max: self.k_max,
                delta_acc: self.delta_acc,
            })
        }
    }

    /// Check `sigma` against the calibrated value for `delta_gap` to relative tolerance `rtol`.
    pub fn check_calibration(&self, delta_gap: f64, rtol: f64) -> Result<()> {
        let expect = calibrate_sigma_with_split(
            self.eps_acc,
            self.delta_acc,
            self.n_queries,
            delta_gap,
            self.delta_split,
        )?;
        if (self.sigma - expect).abs() <= rtol * expect {
            Ok(())
        } else {
            Err(Error::CalibrationMismatch {
                policy_sigma: self.sigma,
                calibrated_sigma: expect,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_formedness_gate() {
        let ok = PolicyParams::calibrated(1.0, 1e-6, 100, 1.0, 10, 2e-5, "w").unwrap();
        ok.check_well_formed().unwrap();
        let bad = PolicyParams::calibrated(1.0, 1e-6, 100, 1.0, 10, 1e-5, "w").unwrap();
        assert!(matches!(bad.check_well_formed(), Err(Error::IllFormedPolicy { k_max: 10, .. })));
    }

    #[test]
    fn calibration_flag_and_check() {
        let p = PolicyParams::calibrated(2.0, 1e-6, 100, 0.5, 4, 1e-4, "w").unwrap();
        assert!(p.is_calibrated());
        p.check_calibration(0.5, 1e-12).unwrap();
        assert!(matches!(
            p.check_calibration(1.0, 1e-12),
            Err(Error::CalibrationMismatch { .. })
        ));
        let f = PolicyParams::free_form(2.0, 1e-6, 100, 3.0, 4, 1e-4, "w").unwrap();
        assert!(!f.is_calibrated());
        assert!(PolicyParams::free_form(2.0, 1e-6, 100, 0.0, 4, 1e-4, "w").is_err());
    }

    #[test]
    fn json_roundtrip() {
        let p = PolicyParams::calibrated(4.0, 1e-6, 10_000, 1.0, 20, 1e-4, "w-7").unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let back: PolicyParams = serde_json::from_str(&s).unwrap();
        assert_eq!(p, back);
        assert_eq!(p.sigma.to_bits(), back.sigma.to_bits());
    }
}
