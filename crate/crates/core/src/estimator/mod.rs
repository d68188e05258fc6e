//! Query-correlation coalition-size estimator and its ledger-bound certificate.

mod calibration;

use std::collections::{HashMap, HashSet};

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::digest::{CanonicalWriter, Digest};
use crate::error::{Error, Result};
use crate::ledger::Ledger;

pub use calibration::{
    calibrate, default_theta_grid, CalibrationConfig, CalibrationReport, Pattern, PatternCell,
};

const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorParams {
    pub theta: f64,
    /// Maximum timestamp gap for a cosine edge; `None` means the whole window.
    #[serde(default)]
    pub window_tau: Option<u64>,
    #[serde(default = "default_min_accounts")]
    pub min_cluster_accounts: usize,
}

fn default_min_accounts() -> usize {
    2
}

impl EstimatorParams {
    pub fn new(theta: f64) -> Result<Self> {
        let p = EstimatorParams {
            theta,
            window_tau: None,
            min_cluster_accounts: 2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.theta) {
            return Err(Error::Domain(format!("theta {} outside [-1, 1]", self.theta)));
        }
        if self.min_cluster_accounts < 2 {
            return Err(Error::Domain("min_cluster_accounts must be at least 2".into()));
        }
        Ok(())
    }

    /// Digest bound into the commitment bundle.
    pub fn digest(&self) -> Digest {
        let mut w = CanonicalWriter::new();
        w.str("estimator-params").f64(self.theta);
        match self.window_tau {
            Some(t) => w.u64(1).u64(t),
            None => w.u64(0).u64(0),
        };
        w.u64(self.min_cluster_accounts as u64).hash()
    }
}

/// One query as seen by the estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayQuery {
    pub account_id: String,
    pub embedding: Vec<f64>,
    pub timestamp: u64,
}

/// Digest of a query embedding as stored in a ledger record.
pub fn query_digest(embedding: &[f64]) -> Digest {
    CanonicalWriter::new().str("query").f64_list(embedding).hash()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    pub k_hat: usize,
    /// `c`: distinct accounts in the largest multi-account component, 1 if none.
    pub largest_cluster_accounts: usize,
    /// Accounts of that component, sorted; empty when `c = 1`.
    pub cluster_accounts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoalitionEstimate {
    pub k_hat: usize,
    pub largest_cluster_accounts: usize,
    pub cluster_accounts: Vec<String>,
    pub certificate_digest: Digest,
}

/// Dot product of two unit vectors with eight independent partial sums.
///
/// Calibration and [`cluster`] both go through this so their edge sets agree bit for bit.
/// The AVX build computes the same lane sums in the same order (no fused multiply-add),
/// so both paths return identical bits.
pub(crate) fn cosine(a: &[f64], b: &[f64]) -> f64 {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx") {
            // SAFETY: the feature was detected at runtime.
            return unsafe { cosine_avx_kernel(a, b) };
        }
    }
    cosine_portable(a, b)
}

/// `out[j] = cosine(a, row j)` over a row-major matrix of `a.len()`-wide rows.
pub(crate) fn cosine_row(a: &[f64], rows: &[f64], out: &mut Vec<f64>) {
    out.clear();
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx") {
            // SAFETY: the feature was detected at runtime.
            unsafe { cosine_row_avx(a, rows, out) };
            return;
        }
    }
    cosine_row_portable(a, rows, out)
}

fn cosine_row_portable(a: &[f64], rows: &[f64], out: &mut Vec<f64>) {
    out.resize(rows.len() / a.len(), 0.0);
    for (o, b) in out.iter_mut().zip(rows.chunks_exact(a.len())) {
        *o = cosine_portable(a, b);
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
unsafe fn cosine_row_avx(a: &[f64], rows: &[f64], out: &mut Vec<f64>) {
    let d = a.len();
    out.resize(rows.len() / d, 0.0);
    for (o, b) in out.iter_mut().zip(rows.chunks_exact(d)) {
        *o = cosine_avx_kernel(a, b);
    }
}

/// Same lane sums and reduction order as [`cosine_portable`].
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
#[inline]
unsafe fn cosine_avx_kernel(a: &[f64], b: &[f64]) -> f64 {
    use std::arch::x86_64::*;
    let n8 = a.len() / 8 * 8;
    let (mut lo, mut hi) = (_mm256_setzero_pd(), _mm256_setzero_pd());
    let (pa, pb) = (a.as_ptr(), b.as_ptr());
    let mut i = 0;
    while i < n8 {
        lo = _mm256_add_pd(lo, _mm256_mul_pd(_mm256_loadu_pd(pa.add(i)), _mm256_loadu_pd(pb.add(i))));
        hi = _mm256_add_pd(hi, _mm256_mul_pd(_mm256_loadu_pd(pa.add(i + 4)), _mm256_loadu_pd(pb.add(i + 4))));
        i += 8;
    }
    let mut t = [0.0f64; 4];
    _mm256_storeu_pd(t.as_mut_ptr(), _mm256_add_pd(lo, hi));
    let tail: f64 = a[n8..].iter().zip(&b[n8..]).map(|(x, y)| x * y).sum();
    ((t[0] + t[1]) + (t[2] + t[3])) + tail
}

#[inline(always)]
fn cosine_portable(a: &[f64], b: &[f64]) -> f64 {
    let mut s = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        let (x, y): (&[f64; 8], &[f64; 8]) = (x.try_into().unwrap(), y.try_into().unwrap());
        for l in 0..8 {
            s[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (((s[0] + s[4]) + (s[1] + s[5])) + ((s[2] + s[6]) + (s[3] + s[7]))) + tail
}


fn check_queries(queries: &[ReplayQuery]) -> Result<()> {
    let Some(first) = queries.first() else { return Ok(()) };
    let d = first.embedding.len();
    for (i, q) in queries.iter().enumerate() {
        if q.embedding.len() != d {
            return Err(Error::InvalidInput(format!("query {i} has dimension {}, expected {d}", q.embedding.len())));
        }
        let n = cosine(&q.embedding, &q.embedding).sqrt();
        if !((n - 1.0).abs() <= UNIT_TOL) {
            return Err(Error::InvalidInput(format!("query {i} has norm {n}, expected 1")));
        }
    }
    Ok(())
}

/// Connected components of the cosine graph; `k_hat = c`.
///
/// Identical embeddings are joined as hash collisions regardless of `theta`;
/// `window_tau` applies to every edge as a pairwise timestamp gap.
pub fn cluster(queries: &[ReplayQuery], params: &EstimatorParams) -> Result<Clustering> {
    params.validate()?;
    check_queries(queries)?;
    let n = queries.len();
    let in_window = |i: usize, j: usize| match params.window_tau {
        Some(t) => queries[i].timestamp.abs_diff(queries[j].timestamp) <= t,
        None => true,
    };
    let mut uf = UnionFind::<usize>::new(n);

    let mut by_digest: HashMap<Digest, Vec<usize>> = HashMap::new();
    for (i, q) in queries.iter().enumerate() {
        by_digest.entry(query_digest(&q.embedding)).or_default().push(i);
    }
    for mut group in by_digest.into_values() {
        // consecutive-in-time links give the same components as all pairwise gaps
        group.sort_by_key(|&i| queries[i].timestamp);
        for w in group.windows(2) {
            if in_window(w[0], w[1]) {
                uf.union(w[0], w[1]);
            }
        }
    }
    let flat: Vec<f64> = queries.iter().flat_map(|q| q.embedding.iter().copied()).collect();
    let d = queries.first().map_or(1, |q| q.embedding.len().max(1));
    let mut row = Vec::with_capacity(n);
    for i in 0..n {
        cosine_row(&queries[i].embedding, &flat[(i + 1) * d..], &mut row);
        for (off, c) in row.iter().enumerate() {
            let j = i + 1 + off;
            if *c >= params.theta && in_window(i, j) {
                uf.union(i, j);
            }
        }
    }

    let mut members: HashMap<usize, HashSet<&str>> = HashMap::new();
    for (i, q) in queries.iter().enumerate() {
        members.entry(uf.find_mut(i)).or_default().insert(q.account_id.as_str());
    }
    let best = members
        .into_values()
        .filter(|s| s.len() >= params.min_cluster_accounts)
        .max_by(|a, b| {
            a.len().cmp(&b.len()).then_with(|| {
                // deterministic tie-break: lexicographically smallest account set wins
                let (mut x, mut y): (Vec<_>, Vec<_>) = (a.iter().collect(), b.iter().collect());
                x.sort();
                y.sort();
                y.cmp(&x)
            })
        });
    Ok(match best {
        Some(set) => {
            let mut accounts: Vec<String> = set.into_iter().map(str::to_owned).collect();
            accounts.sort();
            Clustering {
                k_hat: accounts.len(),
                largest_cluster_accounts: accounts.len(),
                cluster_accounts: accounts,
            }
        }
        None => Clustering {
            k_hat: 1,
            largest_cluster_accounts: 1,
            cluster_accounts: Vec::new(),
        },
    })
}

/// Digest binding a ledger root, the estimator parameters and its output.
pub fn certify(ledger_root: &Digest, params_digest: &Digest, k_hat: usize, largest_cluster_accounts: usize) -> Digest {
    CanonicalWriter::new()
        .str("coalition-certificate")
        .digest(ledger_root)
        .digest(params_digest)
        .u64(k_hat as u64)
        .u64(largest_cluster_accounts as u64)
        .hash()
}

/// Run the estimator and bind the result to `ledger_root`.
pub fn estimate(queries: &[ReplayQuery], params: &EstimatorParams, ledger_root: &Digest) -> Result<CoalitionEstimate> {
    let c = cluster(queries, params)?;
    Ok(CoalitionEstimate {
        certificate_digest: certify(ledger_root, &params.digest(), c.k_hat, c.largest_cluster_accounts),
        k_hat: c.k_hat,
        largest_cluster_accounts: c.largest_cluster_accounts,
        cluster_accounts: c.cluster_accounts,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "result")]
pub enum CertificateCheck {
    Valid,
    ParamsMismatch { committed: Digest, supplied: Digest },
    EstimateMismatch { claimed_k_hat: usize, recomputed_k_hat: usize },
    DigestMismatch,
    ReplayMismatch { position: u64, reason: String },
}

impl CertificateCheck {
    pub fn is_valid(&self) -> bool {
        matches!(self, CertificateCheck::Valid)
    }
}

/// Re-run the estimator on `replay` and compare against the certified estimate.
pub fn verify_certificate(
    ledger_root: &Digest,
    committed_params: &Digest,
    params: &EstimatorParams,
    estimate: &CoalitionEstimate,
    replay: &[ReplayQuery],
) -> Result<CertificateCheck> {
    let supplied = params.digest();
    if &supplied != committed_params {
        return Ok(CertificateCheck::ParamsMismatch {
            committed: *committed_params,
            supplied,
        });
    }
    let c = cluster(replay, params)?;
    if c.k_hat != estimate.k_hat || c.largest_cluster_accounts != estimate.largest_cluster_accounts {
        return Ok(CertificateCheck::EstimateMismatch {
            claimed_k_hat: estimate.k_hat,
            recomputed_k_hat: c.k_hat,
        });
    }
    if certify(ledger_root, &supplied, c.k_hat, c.largest_cluster_accounts) != estimate.certificate_digest {
        return Ok(CertificateCheck::DigestMismatch);
    }
    Ok(CertificateCheck::Valid)
}

/// Check that `replay` is exactly the ledger's queries: same length, accounts,
/// timestamps and query digests, in ledger order.
pub fn check_replay(ledger: &Ledger, replay: &[ReplayQuery]) -> CertificateCheck {
    let records = ledger.records();
    if records.len() != replay.len() {
        return CertificateCheck::ReplayMismatch {
            position: records.len().min(replay.len()) as u64,
            reason: format!("ledger has {} records, replay has {}", records.len(), replay.len()),
        };
    }
    for (i, (r, q)) in records.iter().zip(replay).enumerate() {
        let reason = if r.account_id != q.account_id {
            "account differs"
        } else if r.timestamp != q.timestamp {
            "timestamp differs"
        } else if r.query_digest != query_digest(&q.embedding) {
            "query digest differs"
        } else {
            continue;
        };
        return CertificateCheck::ReplayMismatch {
            position: i as u64,
            reason: reason.into(),
        };
    }
    CertificateCheck::Valid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::random_unit;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(account: &str, e: Vec<f64>, t: u64) -> ReplayQuery {
        ReplayQuery {
            account_id: account.into(),
            embedding: e,
            timestamp: t,
        }
    }

    fn random_queries(accounts: usize, per: usize, d: usize, seed: u64) -> Vec<ReplayQuery> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for a in 0..accounts {
            for i in 0..per {
                out.push(q(&format!("a{a:02}"), random_unit(&mut rng, d), (a * per + i) as u64));
            }
        }
        out
    }

    #[test]
    fn single_account_is_no_coalition() {
        let qs: Vec<_> = random_queries(1, 50, 8, 1);
        let c = cluster(&qs, &EstimatorParams::new(-1.0).unwrap()).unwrap();
        assert_eq!((c.k_hat, c.largest_cluster_accounts), (1, 1));
        assert!(c.cluster_accounts.is_empty());
    }

    #[test]
    fn complete_graph_at_minus_one() {
        let qs = random_queries(30, 5, 32, 2);
        let c = cluster(&qs, &EstimatorParams::new(-1.0).unwrap()).unwrap();
        assert_eq!(c.k_hat, 30);
    }

    #[test]
    fn identical_probe_recovers_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in [2usize, 5, 10, 20] {
            let mut qs = random_queries(30, 100, 32, 10 + k as u64);
            let probe = random_unit(&mut rng, 32);
            for qq in qs.iter_mut().filter(|qq| qq.account_id.as_str() < format!("a{k:02}").as_str()) {
                qq.embedding = probe.clone();
            }
            let c = cluster(&qs, &EstimatorParams::new(0.80).unwrap()).unwrap();
            assert_eq!(c.k_hat, k);
        }
    }

    #[test]
    fn identical_queries_join_even_at_theta_one() {
        let e = vec![0.6, 0.8];
        let qs = vec![q("x", e.clone(), 1), q("y", e, 2)];
        assert_eq!(cluster(&qs, &EstimatorParams::new(1.0).unwrap()).unwrap().k_hat, 2);
    }

    #[test]
    fn window_gap_cuts_edges() {
        let e = vec![1.0, 0.0];
        let qs = vec![q("x", e.clone(), 1), q("y", e.clone(), 10), q("z", e, 11)];
        let mut p = EstimatorParams::new(0.5).unwrap();
        p.window_tau = Some(5);
        let c = cluster(&qs, &p).unwrap();
        assert_eq!(c.cluster_accounts, vec!["y".to_string(), "z".to_string()]);
        p.window_tau = Some(9);
        assert_eq!(cluster(&qs, &p).unwrap().k_hat, 3);
    }

    #[test]
    fn rejects_non_unit_and_bad_theta() {
        let qs = vec![q("x", vec![1.0, 1.0], 1)];
        assert!(cluster(&qs, &EstimatorParams::new(0.5).unwrap()).is_err());
        assert!(EstimatorParams::new(1.5).is_err());
    }

    #[test]
    fn certificate_roundtrip_and_tamper() {
        let qs = random_queries(6, 10, 4, 5);
        let p = EstimatorParams::new(0.9).unwrap();
        let root = crate::digest::sha256(b"root");
        let est = estimate(&qs, &p, &root).unwrap();
        assert!(verify_certificate(&root, &p.digest(), &p, &est, &qs).unwrap().is_valid());

        let mut inflated = est.clone();
        inflated.k_hat += 1;
        assert!(matches!(
            verify_certificate(&root, &p.digest(), &p, &inflated, &qs).unwrap(),
            CertificateCheck::EstimateMismatch { .. }
        ));
        let other_root = crate::digest::sha256(b"other");
        assert_eq!(
            verify_certificate(&other_root, &p.digest(), &p, &est, &qs).unwrap(),
            CertificateCheck::DigestMismatch
        );
        let p2 = EstimatorParams::new(0.8).unwrap();
        assert!(matches!(
            verify_certificate(&root, &p.digest(), &p2, &est, &qs).unwrap(),
            CertificateCheck::ParamsMismatch { .. }
        ));
    }

    #[test]
    fn perturbation_matters_only_across_threshold() {
        // two accounts: a pair at cosine 0.9, theta = 0.85
        let a = vec![1.0, 0.0, 0.0];
        let b = vec![0.9, (1.0f64 - 0.81).sqrt(), 0.0];
        let qs = vec![q("x", a.clone(), 1), q("y", b, 2)];
        let p = EstimatorParams::new(0.85).unwrap();
        let root = crate::digest::sha256(b"r");
        let est = estimate(&qs, &p, &root).unwrap();
        assert_eq!(est.k_hat, 2);

        let nudge = |c: f64| vec![c, (1.0 - c * c).sqrt(), 0.0];
        let small = vec![qs[0].clone(), q("y", nudge(0.88), 2)];
        assert!(verify_certificate(&root, &p.digest(), &p, &est, &small).unwrap().is_valid());
        let across = vec![qs[0].clone(), q("y", nudge(0.80), 2)];
        assert!(!verify_certificate(&root, &p.digest(), &p, &est, &across).unwrap().is_valid());
    }

    #[test]
    fn k_hat_nonincreasing_in_theta() {
        let qs = random_queries(10, 20, 6, 9);
        let mut prev = usize::MAX;
        for i in 0..=40 {
            let theta = -1.0 + i as f64 * 0.05;
            let k = cluster(&qs, &EstimatorParams::new(theta).unwrap()).unwrap().k_hat;
            assert!(k <= prev);
            prev = k;
        }
    }

    #[test]
    fn params_json_is_strict() {
        let p: EstimatorParams = serde_json::from_str(r#"{"theta":0.8}"#).unwrap();
        assert_eq!(p.min_cluster_accounts, 2);
        assert!(serde_json::from_str::<EstimatorParams>(r#"{"theta":0.8,"tau":3}"#).is_err());
    }

    #[test]
    fn dispatch_matches_portable_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [1usize, 3, 8, 13, 32, 384] {
            let rows: Vec<f64> = (0..20).flat_map(|_| random_unit(&mut rng, d)).collect();
            let a = random_unit(&mut rng, d);
            let mut out = Vec::new();
            cosine_row(&a, &rows, &mut out);
            for (j, b) in rows.chunks_exact(d).enumerate() {
                assert_eq!(out[j].to_bits(), cosine_portable(&a, b).to_bits());
                assert_eq!(cosine(&a, b).to_bits(), cosine_portable(&a, b).to_bits());
            }
        }
    }
}
