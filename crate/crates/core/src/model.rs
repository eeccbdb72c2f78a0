//! The Ising ring Hamiltonian and its variants as a matrix-free operator.
//!
//! ```text
//! H = − Σ_b J_b σᶻ_i σᶻ_j − g Σ_i σˣ_i + h Σ_i σᶻ_i − (βJ/L)(Σ_i σᶻ_i)²
//! ```
//!
//! The bond set `b = (i, j)` is the nearest-neighbour ring (optionally with
//! Gaussian-disordered couplings) or all pairs with weight `J / d(i,j)^α`
//! under the minimal-image distance. The squeeze term is present only for
//! [`InteractionKind::NearestNeighborWithSqueeze`].
//!
//! Only the diagonal is stored. The transverse term connects configurations
//! differing by one spin flip with the uniform amplitude `−g`, so the
//! off-diagonal part is generated on the fly from bit toggles.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::lattice::{Ring, SpinConfig};
use crate::par::{fill_chunks, Amplitude, Execution};
use crate::states::StateVector;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InteractionKind {
    #[default]
    NearestNeighbor,
    /// All pairs, weight `J / d^exponent`.
    PowerLaw {
        #[serde(default = "default_exponent")]
        exponent: f64,
    },
    /// Nearest-neighbour bonds plus `−(βJ/L)(Σσᶻ)²`.
    #[serde(rename = "squeeze")]
    NearestNeighborWithSqueeze { beta: f64 },
}

fn default_exponent() -> f64 {
    3.0
}

fn default_coupling() -> f64 {
    1.0
}

impl InteractionKind {
    pub fn name(&self) -> &'static str {
        match self {
            InteractionKind::NearestNeighbor => "nearest_neighbor",
            InteractionKind::PowerLaw { .. } => "power_law",
            InteractionKind::NearestNeighborWithSqueeze { .. } => "squeeze",
        }
    }
}

/// Gaussian bond disorder, `J_i ~ N(J, (σJ)²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    /// Standard deviation in units of `J`.
    pub sigma: f64,
    pub seed: u64,
    #[serde(rename = "realization", default)]
    pub realization_index: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(rename = "L")]
    pub sites: usize,
    #[serde(rename = "J", default = "default_coupling")]
    pub coupling: f64,
    #[serde(rename = "g")]
    pub transverse_field: f64,
    #[serde(rename = "h")]
    pub longitudinal_field: f64,
    #[serde(default)]
    pub interaction: InteractionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disorder: Option<DisorderSpec>,
}

impl ModelSpec {
    /// Clean nearest-neighbour ring with `J = 1`.
    pub fn nearest_neighbor(sites: usize, g: f64, h: f64) -> Self {
        ModelSpec {
            sites,
            coupling: 1.0,
            transverse_field: g,
            longitudinal_field: h,
            interaction: InteractionKind::NearestNeighbor,
            disorder: None,
        }
    }

    pub fn power_law(sites: usize, exponent: f64, g: f64, h: f64) -> Self {
        ModelSpec {
            interaction: InteractionKind::PowerLaw { exponent },
            ..Self::nearest_neighbor(sites, g, h)
        }
    }

    pub fn with_fields(&self, g: f64, h: f64) -> Self {
        ModelSpec {
            transverse_field: g,
            longitudinal_field: h,
            ..self.clone()
        }
    }

    pub fn with_disorder(&self, disorder: Option<DisorderSpec>) -> Self {
        ModelSpec {
            disorder,
            ..self.clone()
        }
    }

    pub fn ring(&self) -> Result<Ring> {
        Ring::new(self.sites)
    }

    pub fn validate(&self) -> Result<Ring> {
        let ring = self.ring()?;
        let finite = [self.coupling, self.transverse_field, self.longitudinal_field]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidModel("couplings and fields must be finite".into()));
        }
        if self.coupling <= 0.0 {
            return Err(Error::InvalidModel(format!(
                "ferromagnetic coupling J > 0 required, got {}",
                self.coupling
            )));
        }
        match self.interaction {
            InteractionKind::PowerLaw { exponent } if !(exponent > 0.0 && exponent.is_finite()) => {
                return Err(Error::InvalidModel(format!(
                    "power-law exponent must be positive, got {exponent}"
                )));
            }
            InteractionKind::NearestNeighborWithSqueeze { beta } if !beta.is_finite() => {
                return Err(Error::InvalidModel("squeeze strength must be finite".into()));
            }
            _ => {}
        }
        if let Some(d) = self.disorder {
            if !(d.sigma >= 0.0 && d.sigma.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "disorder sigma must be non-negative, got {}",
                    d.sigma
                )));
            }
            if d.sigma > 0.0 && self.interaction != InteractionKind::NearestNeighbor {
                return Err(Error::InvalidModel(
                    "bond disorder is only defined for the nearest-neighbour interaction".into(),
                ));
            }
        }
        Ok(ring)
    }

    /// Ising bonds with their weights, each unordered pair listed once.
    pub fn bonds(&self) -> Result<Vec<Bond>> {
        let ring = self.validate()?;
        let l = ring.sites();
        let bonds = match self.interaction {
            InteractionKind::NearestNeighbor | InteractionKind::NearestNeighborWithSqueeze { .. } => {
                let couplings = match self.disorder {
                    Some(d) => sample_couplings(l, self.coupling, &d),
                    None => vec![self.coupling; l],
                };
                (0..l)
                    .map(|i| Bond {
                        a: i,
                        b: (i + 1) % l,
                        weight: couplings[i],
                    })
                    .collect()
            }
            InteractionKind::PowerLaw { exponent } => {
                let mut bonds = Vec::with_capacity(l * (l - 1) / 2);
                for a in 0..l {
                    for b in a + 1..l {
                        let d = ring.minimal_distance(a, b) as f64;
                        bonds.push(Bond {
                            a,
                            b,
                            weight: self.coupling / d.powf(exponent),
                        });
                    }
                }
                bonds
            }
        };
        Ok(bonds)
    }

    /// Coefficient of `(Σσᶻ)²`.
    pub fn squeeze_coefficient(&self) -> f64 {
        match self.interaction {
            InteractionKind::NearestNeighborWithSqueeze { beta } => {
                -beta * self.coupling / self.sites as f64
            }
            _ => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Bond couplings `J_i` for the nearest-neighbour ring.
///
/// Bond `i` draws two uniforms from its own fixed position in the ChaCha20
/// stream selected by `(seed, realization_index)`, and converts them with
/// the Box–Muller transform. The result does not depend on evaluation order.
pub fn sample_couplings(sites: usize, coupling: f64, disorder: &DisorderSpec) -> Vec<f64> {
    if disorder.sigma == 0.0 {
        return vec![coupling; sites];
    }
    let mut rng = ChaCha20Rng::seed_from_u64(disorder.seed);
    rng.set_stream(disorder.realization_index);
    (0..sites)
        .map(|bond| {
            // two u64 draws = four 32-bit words per bond
            rng.set_word_pos(4 * bond as u128);
            let u1 = unit_open(rng.next_u64());
            let u2 = unit_open(rng.next_u64());
            let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            coupling * (1.0 + disorder.sigma * z)
        })
        .collect()
}

/// Uniform in `(0, 1]` from the top 53 bits.
fn unit_open(x: u64) -> f64 {
    ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Hermitian, real operator in the `2^L` computational basis.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    ring: Ring,
    diagonal: Vec<f64>,
    flip_amplitude: f64,
}

pub fn build_hamiltonian(spec: &ModelSpec) -> Result<SparseOperator> {
    let ring = spec.validate()?;
    let bonds = spec.bonds()?;
    let field = spec.longitudinal_field;
    let squeeze = spec.squeeze_coefficient();
    let l = ring.sites() as i64;
    let mut diagonal = vec![0.0; ring.dim()];
    fill_chunks(&mut diagonal, Execution::default(), |start, block| {
        for (k, d) in block.iter_mut().enumerate() {
            let c = (start + k) as u32;
            let mut ising = 0.0;
            for bond in &bonds {
                let aligned = (c >> bond.a ^ c >> bond.b) & 1 == 0;
                ising += if aligned { bond.weight } else { -bond.weight };
            }
            let m = 2 * c.count_ones() as i64 - l;
            *d = -ising + field * m as f64 + squeeze * (m * m) as f64;
        }
    });
    Ok(SparseOperator {
        ring,
        diagonal,
        flip_amplitude: -spec.transverse_field,
    })
}

impl SparseOperator {
    pub fn ring(&self) -> Ring {
        self.ring
    }

    pub fn sites(&self) -> usize {
        self.ring.sites()
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// Matrix element between configurations differing by one flip (`−g`).
    pub fn flip_amplitude(&self) -> f64 {
        self.flip_amplitude
    }

    pub fn element(&self, row: SpinConfig, col: SpinConfig) -> f64 {
        if row == col {
            self.diagonal[row.index()]
        } else if (row.bits() ^ col.bits()).count_ones() == 1 {
            self.flip_amplitude
        } else {
            0.0
        }
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        let mut out = vec![crate::C64::new(0.0, 0.0); self.dim()];
        self.apply_into(psi.amplitudes(), &mut out)?;
        Ok(StateVector::from_amplitudes_unchecked(out))
    }

    /// `out = H·input`.
    pub fn apply_into<T: Amplitude>(&self, input: &[T], out: &mut [T]) -> Result<()> {
        self.apply_with(input, out, Execution::default())
    }

    pub fn apply_with<T: Amplitude>(&self, input: &[T], out: &mut [T], exec: Execution) -> Result<()> {
        let dim = self.dim();
        for len in [input.len(), out.len()] {
            if len != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: len,
                });
            }
        }
        let sites = self.sites();
        let amp = self.flip_amplitude;
        let diag = &self.diagonal;
        fill_chunks(out, exec, |start, block| {
            for (k, o) in block.iter_mut().enumerate() {
                let c = start + k;
                let mut flips = T::zero();
                for i in 0..sites {
                    flips += input[c ^ (1 << i)];
                }
                *o = input[c] * diag[c] + flips * amp;
            }
        });
        Ok(())
    }

    /// Gershgorin enclosure `[lo, hi]` of the spectrum.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let radius = self.sites() as f64 * self.flip_amplitude.abs();
        let (lo, hi) = self
            .diagonal
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| (lo.min(d), hi.max(d)));
        (lo - radius, hi + radius)
    }

    /// Upper bound on the operator 2-norm.
    pub fn norm_bound(&self) -> f64 {
        let (lo, hi) = self.spectral_bounds();
        lo.abs().max(hi.abs())
    }

    /// `⟨ψ|H|ψ⟩` (real for Hermitian `H`).
    pub fn expectation(&self, psi: &StateVector) -> Result<f64> {
        let h_psi = self.apply(psi)?;
        Ok(crate::par::dot(psi.amplitudes(), h_psi.amplitudes()).re)
    }

    /// Dense row-major copy, for oracles and full diagonalization.
    pub fn to_dense(&self) -> faer::Mat<f64> {
        let dim = self.dim();
        let mut m = faer::Mat::<f64>::zeros(dim, dim);
        for c in 0..dim {
            m[(c, c)] = self.diagonal[c];
            for i in 0..self.sites() {
                m[(c ^ (1 << i), c)] = self.flip_amplitude;
            }
        }
        m
    }
}
