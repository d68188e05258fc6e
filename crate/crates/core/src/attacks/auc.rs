//! Mann-Whitney AUC and its DeLong standard error, both from midranks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// AUC with its DeLong standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AucEstimate {
    pub auc: f64,
    pub delong_se: f64,
}

/// 1-based midranks of `v` (ties share the average rank).
pub fn midranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_unstable_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && v[order[j]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &o in &order[i..j] {
            ranks[o] = r;
        }
        i = j;
    }
    ranks
}

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} contains a non-finite value")))
    }
}

/// `Pr[in > out] + Pr[in = out] / 2` over all pairs.
pub fn mann_whitney_auc(in_stats: &[f64], out_stats: &[f64]) -> Result<f64> {
    if in_stats.is_empty() || out_stats.is_empty() {
        return Err(Error::InvalidInput("AUC needs nonempty samples".into()));
    }
    check_finite(in_stats, "in sample")?;
    check_finite(out_stats, "out sample")?;
    let m = in_stats.len() as f64;
    let n = out_stats.len() as f64;
    let all: Vec<f64> = in_stats.iter().chain(out_stats).copied().collect();
    let r = midranks(&all);
    let r_in: f64 = r[..in_stats.len()].iter().sum();
    Ok((r_in - m * (m + 1.0) / 2.0) / (m * n))
}

/// DeLong standard error `sqrt(S10/m + S01/n)` from placement values.
pub fn delong_se(in_stats: &[f64], out_stats: &[f64]) -> Result<f64> {
    Ok(auc_with_se(in_stats, out_stats)?.delong_se)
}

/// AUC and DeLong s.e. sharing one sort of the pooled sample.
pub fn auc_with_se(in_stats: &[f64], out_stats: &[f64]) -> Result<AucEstimate> {
    let (m, n) = (in_stats.len(), out_stats.len());
    if m < 2 || n < 2 {
        return Err(Error::InvalidInput("DeLong needs at least two observations per sample".into()));
    }
    check_finite(in_stats, "in sample")?;
    check_finite(out_stats, "out sample")?;
    let all: Vec<f64> = in_stats.iter().chain(out_stats).copied().collect();
    let r_all = midranks(&all);
    let r_in = midranks(in_stats);
    let r_out = midranks(out_stats);
    let (mf, nf) = (m as f64, n as f64);
    // fraction of out below each in (ties half), and of in above each out
    let v10: Vec<f64> = (0..m).map(|i| (r_all[i] - r_in[i]) / nf).collect();
    let v01: Vec<f64> = (0..n).map(|j| 1.0 - (r_all[m + j] - r_out[j]) / mf).collect();
    let auc = v10.iter().sum::<f64>() / mf;
    let s10 = sample_var(&v10, auc);
    let s01 = sample_var(&v01, auc);
    Ok(AucEstimate {
        auc,
        delong_se: (s10 / mf + s01 / nf).sqrt(),
    })
}

fn sample_var(v: &[f64], mean: f64) -> f64 {
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for x in a {
            for y in b {
                s += if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 };
            }
        }
        s / (a.len() * b.len()) as f64
    }

    #[test]
    fn small_cases() {
        assert_eq!(mann_whitney_auc(&[3.0; 4], &[3.0; 5]).unwrap(), 0.5);
        assert_eq!(mann_whitney_auc(&[1.0, 2.0], &[0.0]).unwrap(), 1.0);
        assert_eq!(mann_whitney_auc(&[0.0, 1.0, 2.0], &[1.0, 1.0]).unwrap(), 0.5);
        assert!(mann_whitney_auc(&[], &[1.0]).is_err());
        assert!(delong_se(&[1.0], &[0.0, 2.0]).is_err());
    }

    #[test]
    fn matches_pairwise_count() {
        let a = [0.3, 1.2, 1.2, -0.4, 2.0, 0.3];
        let b = [0.3, 0.0, 1.2, 5.0];
        assert!((mann_whitney_auc(&a, &b).unwrap() - brute(&a, &b)).abs() < 1e-15);
        assert!((auc_with_se(&a, &b).unwrap().auc - brute(&a, &b)).abs() < 1e-15);
    }

    #[test]
    fn separated_samples_have_zero_se() {
        let e = auc_with_se(&[5.0, 6.0, 7.0], &[1.0, 2.0]).unwrap();
        assert_eq!(e.auc, 1.0);
        assert_eq!(e.delong_se, 0.0);
    }

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[2.0, 1.0, 2.0, 3.0]), vec![2.5, 1.0, 2.5, 4.0]);
    }
}
