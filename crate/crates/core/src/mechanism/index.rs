use serde::{Deserialize, Serialize};

use super::noise::NoiseSeedRecord;
use crate::error::{Error, Result};

const UNIT_TOL: f64 = 1e-9;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalize(mut v: Vec<f64>) -> Result<Vec<f64>> {
    let n = norm(&v);
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::InvalidInput("cannot normalize a zero or non-finite vector".into()));
    }
    v.iter_mut().for_each(|x| *x /= n);
    Ok(v)
}

pub(crate) fn check_unit(v: &[f64], what: &str) -> Result<()> {
    let n = norm(v);
    if (n - 1.0).abs() <= UNIT_TOL {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} has norm {n}, expected 1")))
    }
}

/// One tenant's document embeddings, in index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TenantIndex {
    pub tenant_id: String,
    pub dim: usize,
    pub embeddings: Vec<Vec<f64>>,
    pub doc_ids: Vec<String>,
}

impl TenantIndex {
    pub fn new(tenant_id: impl Into<String>, embeddings: Vec<Vec<f64>>, doc_ids: Vec<String>) -> Result<Self> {
        if embeddings.len() != doc_ids.len() {
            return Err(Error::InvalidInput(format!(
                "{} embeddings but {} doc ids",
                embeddings.len(),
                doc_ids.len()
            )));
        }
        let dim = embeddings.first().map_or(0, Vec::len);
        for (i, e) in embeddings.iter().enumerate() {
            if e.len() != dim {
                return Err(Error::InvalidInput(format!("embedding {i} has dimension {}, expected {dim}", e.len())));
            }
            check_unit(e, &format!("embedding {i}"))?;
        }
        Ok(TenantIndex {
            tenant_id: tenant_id.into(),
            dim,
            embeddings,
            doc_ids,
        })
    }

    /// Doc ids default to `doc-<position>`.
    pub fn from_embeddings(tenant_id: impl Into<String>, embeddings: Vec<Vec<f64>>) -> Result<Self> {
        let ids = (0..embeddings.len()).map(|i| format!("doc-{i}")).collect();
        Self::new(tenant_id, embeddings, ids)
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn scores(&self, query: &[f64]) -> Vec<f64> {
        self.embeddings.iter().map(|e| dot(e, query)).collect()
    }
}

/// What an account sees from one retrieval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalOutput {
    pub topk_positions: Vec<usize>,
    pub topk_doc_ids: Vec<String>,
}

/// Operator-side view: the account output plus the full noisy score vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentedOutput {
    pub output: RetrievalOutput,
    pub noisy_scores: Vec<f64>,
}

/// Positions of the `k` largest scores, descending; ties go to the lower position.
pub fn select_topk(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    let cmp = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
    if k < idx.len() {
        idx.select_nth_unstable_by(k, cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(cmp);
    idx
}

fn noisy_scores(index: &TenantIndex, query: &[f64], noise: &NoiseSeedRecord) -> Result<Vec<f64>> {
    if query.len() != index.dim && !index.is_empty() {
        return Err(Error::InvalidInput(format!(
            "query dimension {} does not match index dimension {}",
            query.len(),
            index.dim
        )));
    }
    Ok(index
        .scores(query)
        .into_iter()
        .enumerate()
        .map(|(i, s)| s + noise.draw(i as u64))
        .collect())
}

fn check_k(index: &TenantIndex, k: usize) -> Result<()> {
    if k > index.len() {
        return Err(Error::InvalidInput(format!("K = {k} exceeds index size {}", index.len())));
    }
    Ok(())
}

fn output_for(index: &TenantIndex, positions: Vec<usize>) -> RetrievalOutput {
    let topk_doc_ids = positions.iter().map(|&p| index.doc_ids[p].clone()).collect();
    RetrievalOutput {
        topk_positions: positions,
        topk_doc_ids,
    }
}

/// Noise-then-select retrieval. Coordinate `i` receives `noise.draw(i)`.
pub fn topk_retrieve(index: &TenantIndex, query: &[f64], k: usize, noise: &NoiseSeedRecord) -> Result<RetrievalOutput> {
    Ok(topk_retrieve_instrumented(index, query, k, noise)?.output)
}

/// Same computation as [`topk_retrieve`], also returning the noisy scores.
/// Only operator and experiment code should call this.
pub fn topk_retrieve_instrumented(
    index: &TenantIndex,
    query: &[f64],
    k: usize,
    noise: &NoiseSeedRecord,
) -> Result<InstrumentedOutput> {
    check_k(index, k)?;
    let noisy = noisy_scores(index, query, noise)?;
    let positions = select_topk(&noisy, k);
    Ok(InstrumentedOutput {
        output: output_for(index, positions),
        noisy_scores: noisy,
    })
}

/// Insecure ordering: rank on clean scores, then noise only the winners.
/// Kept to exercise the re-execution check that rejects it.
pub fn select_then_noise(index: &TenantIndex, query: &[f64], k: usize) -> Result<RetrievalOutput> {
    check_k(index, k)?;
    let positions = select_topk(&index.scores(query), k);
    Ok(output_for(index, positions))
}
