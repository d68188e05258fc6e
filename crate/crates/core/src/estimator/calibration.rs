//! Threshold calibration on a null arm and three coalition query patterns.
//!
//! Every trial draws one null population and reuses it for all alternative arms,
//! which replace the first `k_true` accounts. Pairwise cosines are computed once
//! and bucketed by grid threshold, so one descending pass of union-find yields
//! `k_hat` at every grid point.

use petgraph::unionfind::UnionFind;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cosine_row;
use crate::digest::CanonicalWriter;
use crate::error::{Error, Result};
use crate::mechanism::{normalize, random_unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    /// Every colluder query is the same probe.
    IdenticalProbe,
    /// `normalize(probe + jitter * N(0, I))` per query.
    JitteredProbe,
    /// Each query drawn uniformly from a small fixed set of intents.
    IntentSet,
}

impl Pattern {
    pub const ALL: [Pattern; 3] = [Pattern::IdenticalProbe, Pattern::JitteredProbe, Pattern::IntentSet];

    pub fn label(self) -> &'static str {
        match self {
            Pattern::IdenticalProbe => "P-A",
            Pattern::JitteredProbe => "P-B",
            Pattern::IntentSet => "P-C",
        }
    }
}

/// 16 points 0.20, 0.25, ..., 0.95.
pub fn default_theta_grid() -> Vec<f64> {
    (0..16).map(|j| (20 + 5 * j) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    pub accounts: usize,
    pub queries_per_account: usize,
    pub dim: usize,
    pub theta_grid: Vec<f64>,
    pub trials: usize,
    pub jitter: f64,
    pub intents: usize,
    pub k_true: Vec<usize>,
    pub target_fpr: f64,
    pub master_seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            accounts: 30,
            queries_per_account: 100,
            dim: 32,
            theta_grid: default_theta_grid(),
            trials: 200,
            jitter: 0.10,
            intents: 5,
            k_true: vec![2, 5, 10, 20],
            target_fpr: 0.05,
            master_seed: 42,
        }
    }
}

impl CalibrationConfig {
    fn validate(&self) -> Result<()> {
        if self.accounts < 2 || self.accounts > 64 {
            return Err(Error::InvalidInput(format!("accounts must be in 2..=64, got {}", self.accounts)));
        }
        if self.queries_per_account == 0 || self.dim == 0 || self.trials == 0 || self.intents == 0 {
            return Err(Error::InvalidInput("queries, dim, trials and intents must be positive".into()));
        }
        if self.theta_grid.is_empty() || self.theta_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("theta grid must be nonempty and strictly increasing".into()));
        }
        if let Some(k) = self.k_true.iter().find(|k| **k < 1 || **k > self.accounts) {
            return Err(Error::InvalidInput(format!("k_true {k} outside 1..={}", self.accounts)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternCell {
    pub pattern: Pattern,
    pub k_true: usize,
    pub theta: f64,
    pub mean_khat: f64,
    /// Fraction of trials with `k_hat >= 2`.
    pub tpr: f64,
    /// Fraction of trials with `k_hat == k_true`.
    pub exact_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub theta_grid: Vec<f64>,
    pub null_fpr: Vec<f64>,
    pub null_mean_khat: Vec<f64>,
    pub cells: Vec<PatternCell>,
    /// Smallest grid theta with null FPR at or below the target.
    pub operating_theta: Option<f64>,
    pub trials: usize,
}

impl CalibrationReport {
    pub fn cell(&self, pattern: Pattern, k_true: usize, theta: f64) -> Option<&PatternCell> {
        self.cells
            .iter()
            .find(|c| c.pattern == pattern && c.k_true == k_true && c.theta == theta)
    }

    pub fn null_fpr_at(&self, theta: f64) -> Option<f64> {
        self.theta_grid.iter().position(|t| *t == theta).map(|i| self.null_fpr[i])
    }
}

/// Deduplicated vertex: an embedding and the bitmask of accounts that issued it.
pub(crate) struct Node {
    pub embedding: Vec<f64>,
    pub accounts: u64,
}

pub(crate) struct TrialDraw {
    pub null: Vec<Vec<f64>>,
    /// `(pattern, k_true, colluder nodes)` in config order.
    pub arms: Vec<(Pattern, usize, Vec<Node>)>,
}

fn trial_rng(cfg: &CalibrationConfig, trial: usize) -> ChaCha8Rng {
    let seed = CanonicalWriter::new()
        .str("estimator-calibration")
        .u64(cfg.master_seed)
        .hash();
    let mut rng = ChaCha8Rng::from_seed(*seed.as_bytes());
    rng.set_stream(trial as u64);
    rng
}

pub(crate) fn draw_trial(cfg: &CalibrationConfig, trial: usize) -> TrialDraw {
    let mut rng = trial_rng(cfg, trial);
    let (d, n) = (cfg.dim, cfg.queries_per_account);
    let null = (0..cfg.accounts * n).map(|_| random_unit(&mut rng, d)).collect();
    let mut arms = Vec::new();
    for pattern in Pattern::ALL {
        for &k in &cfg.k_true {
            let all = if k == 64 { u64::MAX } else { (1u64 << k) - 1 };
            let nodes = match pattern {
                Pattern::IdenticalProbe => vec![Node {
                    embedding: random_unit(&mut rng, d),
                    accounts: all,
                }],
                Pattern::JitteredProbe => {
                    let probe = random_unit(&mut rng, d);
                    let mut v = Vec::with_capacity(k * n);
                    for a in 0..k {
                        for _ in 0..n {
                            let raw: Vec<f64> = probe
                                .iter()
                                .map(|p| p + cfg.jitter * rng.sample::<f64, _>(StandardNormal))
                                .collect();
                            v.push(Node {
                                embedding: normalize(raw).expect("jittered probe is nonzero"),
                                accounts: 1 << a,
                            });
                        }
                    }
                    v
                }
                Pattern::IntentSet => {
                    let mut v: Vec<Node> = (0..cfg.intents)
                        .map(|_| Node {
                            embedding: random_unit(&mut rng, d),
                            accounts: 0,
                        })
                        .collect();
                    for a in 0..k {
                        for _ in 0..n {
                            let i = rng.random_range(0..cfg.intents);
                            v[i].accounts |= 1 << a;
                        }
                    }
                    v.retain(|x| x.accounts != 0);
                    v
                }
            };
            arms.push((pattern, k, nodes));
        }
    }
    TrialDraw { null, arms }
}

/// Largest grid index `j` with `grid[j] <= c`.
#[inline]
fn bucket(grid: &[f64], c: f64) -> Option<usize> {
    if c < grid[0] {
        return None;
    }
    grid.partition_point(|t| *t <= c).checked_sub(1)
}

type Buckets = Vec<Vec<(u32, u32)>>;

/// `k_hat` at every grid threshold for one arm.
/// Null edges with an endpoint below `cut` are skipped.
fn profile(masks: &[u64], grid_len: usize, null_edges: &Buckets, cut: u32, extra: Option<&Buckets>) -> Vec<usize> {
    let live = masks.iter().fold(0u64, |acc, m| acc | m).count_ones() as usize;
    let mut comp = masks.to_vec();
    let mut uf = UnionFind::<u32>::new(masks.len());
    let mut best = masks
        .iter()
        .map(|m| m.count_ones() as usize)
        .filter(|c| *c >= 2)
        .max()
        .unwrap_or(1);
    let mut out = vec![0; grid_len];
    for j in (0..grid_len).rev() {
        if best < live {
            let kept = null_edges[j].iter().filter(|(a, _)| *a >= cut);
            for (a, b) in kept.chain(extra.into_iter().flat_map(|e| e[j].iter())) {
                let (ra, rb) = (uf.find_mut(*a), uf.find_mut(*b));
                if ra != rb {
                    uf.union(ra, rb);
                    let r = uf.find_mut(ra);
                    let m = comp[ra as usize] | comp[rb as usize];
                    comp[r as usize] = m;
                    let c = m.count_ones() as usize;
                    if c >= 2 && c > best {
                        best = c;
                    }
                }
            }
        }
        out[j] = best;
    }
    out
}

struct TrialResult {
    null: Vec<usize>,
    arms: Vec<Vec<usize>>,
}

/// Maximum spanning tree of the complete cosine graph on the rows (dense Prim).
///
/// Components of `{cos >= theta}` are the same whether computed from all pairs or
/// from these `V - 1` edges.
fn max_spanning_tree(flat: &[f64], d: usize) -> Vec<(u32, u32, f64)> {
    let v = flat.len() / d;
    let mut edges = Vec::with_capacity(v.saturating_sub(1));
    if v < 2 {
        return edges;
    }
    let mut ids: Vec<u32> = (1..v as u32).collect();
    let mut rows = flat[d..].to_vec();
    let mut parent = vec![0u32; v - 1];
    let mut key = Vec::with_capacity(v);
    cosine_row(&flat[..d], &rows, &mut key);
    let mut buf = vec![0.0; d];
    let mut row = Vec::with_capacity(v);
    while !ids.is_empty() {
        let mut at = 0;
        for (i, k) in key.iter().enumerate() {
            if *k > key[at] {
                at = i;
            }
        }
        let u = ids[at];
        edges.push((parent[at], u, key[at]));
        buf.copy_from_slice(&rows[at * d..(at + 1) * d]);
        let last = ids.len() - 1;
        ids.swap_remove(at);
        parent.swap_remove(at);
        key.swap_remove(at);
        if at != last {
            rows.copy_within(last * d..(last + 1) * d, at * d);
        }
        rows.truncate(last * d);
        cosine_row(&buf, &rows, &mut row);
        for (i, c) in row.iter().enumerate() {
            if *c > key[i] {
                key[i] = *c;
                parent[i] = u;
            }
        }
    }
    edges
}

fn run_trial(cfg: &CalibrationConfig, trial: usize) -> TrialResult {
    let draw = draw_trial(cfg, trial);
    let grid = &cfg.theta_grid;
    let (g, d) = (grid.len(), cfg.dim);
    let n0 = draw.null.len();
    let per = cfg.queries_per_account;
    let null_flat: Vec<f64> = draw.null.iter().flatten().copied().collect();

    let mut row = Vec::with_capacity(n0);
    let mut null_edges: Buckets = vec![Vec::new(); g];
    for i in 0..n0 {
        cosine_row(&draw.null[i], &null_flat[(i + 1) * d..], &mut row);
        for (off, c) in row.iter().enumerate() {
            if let Some(b) = bucket(grid, *c) {
                null_edges[b].push((i as u32, (i + 1 + off) as u32));
            }
        }
    }
    let null_masks: Vec<u64> = (0..n0).map(|i| 1u64 << (i / per)).collect();
    let null = profile(&null_masks, g, &null_edges, 0, None);

    let arms = draw
        .arms
        .iter()
        .map(|(_, k, nodes)| {
            let cut = k * per;
            let mut extra: Buckets = vec![Vec::new(); g];
            for (m, node) in nodes.iter().enumerate() {
                let id = (n0 + m) as u32;
                cosine_row(&node.embedding, &null_flat[cut * d..], &mut row);
                for (off, c) in row.iter().enumerate() {
                    if let Some(b) = bucket(grid, *c) {
                        extra[b].push((id, (cut + off) as u32));
                    }
                }
            }
            let colluders: Vec<f64> = nodes.iter().flat_map(|x| x.embedding.iter().copied()).collect();
            for (a, b, c) in max_spanning_tree(&colluders, d) {
                if let Some(j) = bucket(grid, c) {
                    extra[j].push((n0 as u32 + a, n0 as u32 + b));
                }
            }
            let mut masks = null_masks.clone();
            masks[..cut].iter_mut().for_each(|m| *m = 0);
            masks.extend(nodes.iter().map(|x| x.accounts));
            profile(&masks, g, &null_edges, cut as u32, Some(&extra))
        })
        .collect();
    TrialResult { null, arms }
}

pub fn calibrate(cfg: &CalibrationConfig) -> Result<CalibrationReport> {
    cfg.validate()?;
    let results: Vec<TrialResult> = (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, t)).collect();
    let g = cfg.theta_grid.len();
    let t = cfg.trials as f64;
    let frac = |f: &dyn Fn(&TrialResult) -> bool| results.iter().filter(|r| f(r)).count() as f64 / t;
    let mean = |f: &dyn Fn(&TrialResult) -> usize| results.iter().map(|r| f(r) as f64).sum::<f64>() / t;

    let null_fpr: Vec<f64> = (0..g).map(|j| frac(&|r| r.null[j] >= 2)).collect();
    let null_mean_khat = (0..g).map(|j| mean(&|r| r.null[j])).collect();
    let mut cells = Vec::new();
    let arm_keys: Vec<(Pattern, usize)> = Pattern::ALL
        .iter()
        .flat_map(|p| cfg.k_true.iter().map(move |k| (*p, *k)))
        .collect();
    for (a, (pattern, k)) in arm_keys.into_iter().enumerate() {
        for (j, theta) in cfg.theta_grid.iter().enumerate() {
            cells.push(PatternCell {
                pattern,
                k_true: k,
                theta: *theta,
                mean_khat: mean(&|r| r.arms[a][j]),
                tpr: frac(&|r| r.arms[a][j] >= 2),
                exact_fraction: frac(&|r| r.arms[a][j] == k),
            });
        }
    }
    let operating_theta = cfg
        .theta_grid
        .iter()
        .zip(&null_fpr)
        .find(|(_, f)| **f <= cfg.target_fpr)
        .map(|(t, _)| *t);
    Ok(CalibrationReport {
        theta_grid: cfg.theta_grid.clone(),
        null_fpr,
        null_mean_khat,
        cells,
        operating_theta,
        trials: cfg.trials,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{cluster, EstimatorParams, ReplayQuery};
    use super::*;

    fn small() -> CalibrationConfig {
        CalibrationConfig {
            accounts: 8,
            queries_per_account: 12,
            dim: 6,
            trials: 4,
            k_true: vec![2, 5],
            ..Default::default()
        }
    }

    fn arm_queries(cfg: &CalibrationConfig, draw: &TrialDraw, arm: Option<usize>) -> Vec<ReplayQuery> {
        let per = cfg.queries_per_account;
        let cut = arm.map_or(0, |a| draw.arms[a].1 * per);
        let mut out: Vec<ReplayQuery> = draw.null[cut..]
            .iter()
            .enumerate()
            .map(|(i, e)| ReplayQuery {
                account_id: format!("a{:02}", (i + cut) / per),
                embedding: e.clone(),
                timestamp: 0,
            })
            .collect();
        if let Some(a) = arm {
            for node in &draw.arms[a].2 {
                for acct in 0..64 {
                    if node.accounts >> acct & 1 == 1 {
                        out.push(ReplayQuery {
                            account_id: format!("a{acct:02}"),
                            embedding: node.embedding.clone(),
                            timestamp: 0,
                        });
                    }
                }
            }
        }
        out
    }

    #[test]
    fn grid_is_sixteen_points() {
        let g = default_theta_grid();
        assert_eq!(g.len(), 16);
        assert_eq!((g[0], g[10], g[12], g[15]), (0.2, 0.7, 0.8, 0.95));
    }

    #[test]
    fn bucketing_matches_thresholds() {
        let g = default_theta_grid();
        assert_eq!(bucket(&g, 0.1), None);
        assert_eq!(bucket(&g, 0.2), Some(0));
        assert_eq!(bucket(&g, 0.8), Some(12));
        assert_eq!(bucket(&g, 0.799_999), Some(11));
        assert_eq!(bucket(&g, 1.0), Some(15));
    }

    #[test]
    fn fast_path_agrees_with_direct_clustering() {
        let cfg = small();
        for trial in 0..cfg.trials {
            let res = run_trial(&cfg, trial);
            let draw = draw_trial(&cfg, trial);
            for (j, theta) in cfg.theta_grid.iter().enumerate() {
                let p = EstimatorParams::new(*theta).unwrap();
                assert_eq!(res.null[j], cluster(&arm_queries(&cfg, &draw, None), &p).unwrap().k_hat);
                for a in 0..draw.arms.len() {
                    let direct = cluster(&arm_queries(&cfg, &draw, Some(a)), &p).unwrap().k_hat;
                    assert_eq!(res.arms[a][j], direct, "trial {trial} arm {a} theta {theta}");
                }
            }
        }
    }

    #[test]
    fn deterministic_and_shaped() {
        let cfg = small();
        let a = calibrate(&cfg).unwrap();
        assert_eq!(a, calibrate(&cfg).unwrap());
        assert_eq!(a.cells.len(), 3 * 2 * 16);
        for w in a.null_fpr.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }
}
