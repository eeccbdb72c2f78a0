//! Zero-momentum sector of translation-invariant Hamiltonians.
//!
//! Basis states are normalized orbit sums `|r⟩ = N_r^{-1/2} Σ_s |s⟩` over the
//! rotations `s` of a representative `r` (the smallest word in its orbit).

use faer::Mat;

use crate::lattice::Ring;
use crate::model::SparseOperator;
use crate::states::StateVector;
use crate::{Error, Result, C64};

/// Largest ring for which the sector matrix is built densely.
pub const MAX_SITES: usize = 16;

#[derive(Clone, Debug)]
pub struct MomentumSector {
    ring: Ring,
    reps: Vec<u32>,
    orbit_len: Vec<u32>,
    /// Sector index of the orbit containing each configuration.
    position: Vec<u32>,
}

impl MomentumSector {
    pub fn new(ring: Ring) -> Result<Self> {
        if ring.sites() > MAX_SITES {
            return Err(Error::DenseCap {
                sites: ring.sites(),
                cap: MAX_SITES,
            });
        }
        let dim = ring.dim();
        let mut position = vec![u32::MAX; dim];
        let mut reps = Vec::new();
        let mut orbit_len = Vec::new();
        for c in 0..dim as u32 {
            if position[c as usize] != u32::MAX {
                continue;
            }
            // c is the smallest member of a fresh orbit
            let k = reps.len() as u32;
            let start = ring.config(c as u64)?;
            let mut s = start;
            let mut len = 0;
            loop {
                position[s.index()] = k;
                len += 1;
                s = ring.rotate(s, 1);
                if s == start {
                    break;
                }
            }
            reps.push(c);
            orbit_len.push(len);
        }
        Ok(MomentumSector {
            ring,
            reps,
            orbit_len,
            position,
        })
    }

    pub fn dim(&self) -> usize {
        self.reps.len()
    }

    /// Dense sector matrix of `op`. Fails if the diagonal is not translation
    /// invariant (bond disorder).
    pub fn hamiltonian(&self, op: &SparseOperator) -> Result<Mat<f64>> {
        if op.ring() != self.ring {
            return Err(Error::DimensionMismatch {
                expected: self.ring.dim(),
                actual: op.dim(),
            });
        }
        let diag = op.diagonal();
        let scale = op.norm_bound().max(1.0);
        for c in 0..self.ring.dim() {
            let r = self.reps[self.position[c] as usize] as usize;
            if (diag[c] - diag[r]).abs() > 1e-12 * scale {
                return Err(Error::InvalidModel(
                    "the momentum sector needs a translation-invariant Hamiltonian".into(),
                ));
            }
        }
        let n = self.dim();
        let amp = op.flip_amplitude();
        let mut m = Mat::<f64>::zeros(n, n);
        for (a, &r) in self.reps.iter().enumerate() {
            m[(a, a)] += diag[r as usize];
            for i in 0..self.ring.sites() {
                let b = self.position[(r ^ (1 << i)) as usize] as usize;
                m[(b, a)] += amp * (self.orbit_len[a] as f64 / self.orbit_len[b] as f64).sqrt();
            }
        }
        Ok(m)
    }

    /// Sector coordinates `⟨r|ψ⟩` of a translation-invariant state.
    pub fn coordinates(&self, psi: &StateVector) -> Result<Vec<C64>> {
        if psi.dim() != self.ring.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ring.dim(),
                actual: psi.dim(),
            });
        }
        let amps = psi.amplitudes();
        let mut sums = vec![C64::new(0.0, 0.0); self.dim()];
        for (c, a) in amps.iter().enumerate() {
            sums[self.position[c] as usize] += a;
        }
        let coords: Vec<C64> = sums
            .iter()
            .zip(&self.orbit_len)
            .map(|(s, &n)| s / (n as f64).sqrt())
            .collect();
        let inside: f64 = coords.iter().map(|c| c.norm_sqr()).sum();
        let total = psi.norm().powi(2);
        if (total - inside).abs() > 1e-10 * total.max(1.0) {
            return Err(Error::InvalidModel(format!(
                "state is not translation invariant ({:.2e} of its weight lies outside the zero-momentum sector)",
                total - inside
            )));
        }
        Ok(coords)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_hamiltonian, DisorderSpec, ModelSpec};
    use crate::states::{false_vacuum, symmetric_pattern_state, FlipPattern};

    #[test]
    fn necklace_counts() {
        for (l, count) in [(4, 6), (8, 36), (12, 352), (14, 1182)] {
            assert_eq!(MomentumSector::new(Ring::new(l).unwrap()).unwrap().dim(), count);
        }
    }

    #[test]
    fn sector_matrix_is_symmetric_and_reproduces_expectations() {
        let spec = ModelSpec::nearest_neighbor(8, 0.3, 0.45);
        let op = build_hamiltonian(&spec).unwrap();
        let sector = MomentumSector::new(op.ring()).unwrap();
        let m = sector.hamiltonian(&op).unwrap();
        for a in 0..sector.dim() {
            for b in 0..sector.dim() {
                assert!((m[(a, b)] - m[(b, a)]).abs() < 1e-14);
            }
        }
        let fv = false_vacuum(&spec).unwrap();
        let s3 = symmetric_pattern_state(8, &FlipPattern::bubble(3)).unwrap();
        let x = sector.coordinates(&fv).unwrap();
        let y = sector.coordinates(&s3).unwrap();
        let hy = op.apply(&s3).unwrap();
        let full = crate::states::overlap(&fv, &hy).unwrap();
        let mut reduced = C64::new(0.0, 0.0);
        for a in 0..sector.dim() {
            for b in 0..sector.dim() {
                reduced += x[a].conj() * m[(a, b)] * y[b];
            }
        }
        assert!((full - reduced).norm() < 1e-12);
    }

    #[test]
    fn rejects_asymmetric_input() {
        let spec = ModelSpec::nearest_neighbor(8, 0.3, 0.45);
        let op = build_hamiltonian(&spec).unwrap();
        let sector = MomentumSector::new(op.ring()).unwrap();
        let psi = StateVector::basis(op.ring(), op.ring().flip_down([0]));
        assert!(sector.coordinates(&psi).is_err());
        let disordered = build_hamiltonian(&spec.with_disorder(Some(DisorderSpec {
            sigma: 0.1,
            seed: 3,
            realization_index: 0,
        })))
        .unwrap();
        assert!(sector.hamiltonian(&disordered).is_err());
        assert!(MomentumSector::new(Ring::new(17).unwrap()).is_err());
    }
}
