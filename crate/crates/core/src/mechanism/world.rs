use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::index::{dot, normalize, TenantIndex};
use super::noise::NoiseSeedRecord;
use crate::error::{Error, Result};

/// Uniform draw from the unit sphere in `d` dimensions.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if let Ok(u) = normalize(v) {
            return u;
        }
    }
}

/// Random unit vector orthogonal to every vector in `basis` (assumed orthonormal).
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, basis: &[&[f64]]) -> Vec<f64> {
    let d = basis[0].len();
    loop {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for b in basis {
            let c = dot(&v, b);
            v.iter_mut().zip(b.iter()).for_each(|(x, y)| *x -= c * y);
        }
        if let Ok(u) = normalize(v) {
            return u;
        }
    }
}

/// Which member of a world pair is live.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WorldBit {
    /// Target present.
    In = 0,
    /// Decoy in the target's slot.
    Out = 1,
}

/// Neighbouring indices that differ only in the last slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldPair {
    pub base: TenantIndex,
    pub target: Vec<f64>,
    pub decoy: Vec<f64>,
    pub probe: Vec<f64>,
    pub delta_gap: f64,
}

impl WorldPair {
    pub fn dim(&self) -> usize {
        self.probe.len()
    }

    /// Slot holding the target or decoy.
    pub fn slot(&self) -> usize {
        self.base.len()
    }

    pub fn planted(&self, b: WorldBit) -> &[f64] {
        match b {
            WorldBit::In => &self.target,
            WorldBit::Out => &self.decoy,
        }
    }

    /// Probe score of the planted document.
    pub fn planted_score(&self, b: WorldBit) -> f64 {
        dot(&self.probe, self.planted(b))
    }

    /// `base` plus the planted document at the last position.
    pub fn index(&self, b: WorldBit) -> TenantIndex {
        let mut idx = self.base.clone();
        idx.embeddings.push(self.planted(b).to_vec());
        idx.doc_ids.push("planted".into());
        idx
    }
}

/// Build a world pair with `probe = target` and realized gap `delta_gap`.
pub fn make_world_pair(d: usize, delta_gap: f64, n_background: usize, seed: u64) -> Result<WorldPair> {
    make_world_pair_with(&mut ChaCha8Rng::seed_from_u64(seed), d, delta_gap, n_background)
}

pub fn make_world_pair_with<R: Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    delta_gap: f64,
    n_background: usize,
) -> Result<WorldPair> {
    if d < 2 {
        return Err(Error::Domain(format!("dimension {d} must be at least 2")));
    }
    if !(delta_gap > 0.0 && delta_gap <= 1.0) {
        return Err(Error::Domain(format!("delta_gap = {delta_gap} must lie in (0, 1]")));
    }
    let background: Vec<Vec<f64>> = (0..n_background).map(|_| random_unit(rng, d)).collect();
    let target = random_unit(rng, d);
    let ortho = random_orthogonal(rng, &[&target]);
    // decoy keeps cosine 1 - gap with the probe
    let c = 1.0 - delta_gap;
    let s = (1.0 - c * c).max(0.0).sqrt();
    let decoy = normalize(target.iter().zip(&ortho).map(|(t, o)| c * t + s * o).collect())?;
    let world = WorldPair {
        base: TenantIndex::from_embeddings("victim", background)?,
        probe: target.clone(),
        target,
        decoy,
        delta_gap: 0.0,
    };
    Ok(WorldPair {
        delta_gap: score_gap(&world),
        ..world
    })
}

/// Realized `<probe, target> - <probe, decoy>`.
pub fn score_gap(world: &WorldPair) -> f64 {
    world.planted_score(WorldBit::In) - world.planted_score(WorldBit::Out)
}

/// One release of the scalar mechanism: planted score plus coordinate-0 noise.
pub fn scalar_mechanism(world: &WorldPair, b: WorldBit, noise: &NoiseSeedRecord) -> f64 {
    world.planted_score(b) + noise.draw(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digest::sha256;

    #[test]
    fn unit_gap_construction() {
        let w = make_world_pair(32, 1.0, 50, 3).unwrap();
        assert!((w.planted_score(WorldBit::In) - 1.0).abs() < 1e-12);
        assert!(w.planted_score(WorldBit::Out).abs() < 1e-12);
        assert_eq!(w.base.len(), 50);
        assert_eq!(w.slot(), 50);
        assert_eq!(w.index(WorldBit::Out).len(), 51);
    }

    #[test]
    fn realized_gap_matches_request() {
        for gap in [0.1, 0.41, 0.5] {
            let w = make_world_pair(16, gap, 4, 11).unwrap();
            assert!((score_gap(&w) - gap).abs() <= 1e-9);
        }
        assert!(make_world_pair(16, 0.0, 4, 1).is_err());
        assert!(make_world_pair(1, 0.5, 4, 1).is_err());
    }

    #[test]
    fn noiseless_scalar_separates() {
        let w = make_world_pair(8, 1.0, 0, 5).unwrap();
        let n = NoiseSeedRecord::new([2; 32], sha256(b"r"), 1e-300);
        assert!((scalar_mechanism(&w, WorldBit::In, &n) - 1.0).abs() < 1e-12);
        assert!(scalar_mechanism(&w, WorldBit::Out, &n).abs() < 1e-12);
        let n2 = NoiseSeedRecord::new([2; 32], sha256(b"r"), 0.7);
        assert_eq!(
            scalar_mechanism(&w, WorldBit::In, &n2).to_bits(),
            scalar_mechanism(&w, WorldBit::In, &n2).to_bits()
        );
    }
}
