//! Closed-form Schrieffer–Wolff reduction of the clean nearest-neighbour ring
//! near the three-bubble resonance.
//!
//! The five symmetric states `{Ω, S₁, S₂, S₂', S₃}` (all-up, one flip, two
//! adjacent flips, two flips at distance two, three adjacent flips) carry the
//! unperturbed energies and transverse-field couplings below. Eliminating the
//! couplings to third order in `g` leaves a 2×2 model on `{Ω, S₃}`.

use std::f64::consts::PI;

use nalgebra::Matrix5;
use serde::Serialize;

use crate::states::{symmetric_pattern_state, FlipPattern, StateVector};
use crate::{Error, Result};

/// Index of each basis state in the 5×5 matrices.
pub const OMEGA: usize = 0;
pub const S1: usize = 1;
pub const S2: usize = 2;
pub const S2_PRIME: usize = 3;
pub const S3: usize = 4;

/// Smallest ring on which the five states are distinct and non-wrapping.
pub const MIN_SITES: usize = 7;

/// Distance from a pole below which closed forms are refused.
pub const POLE_GUARD: f64 = 1e-6;

/// The ordered basis `{Ω, S₁, S₂, S₂', S₃}`.
pub fn subspace_basis(sites: usize) -> Result<[StateVector; 5]> {
    check_sites(sites)?;
    let ring = crate::lattice::Ring::new(sites)?;
    let pattern = |text: &str| -> Result<StateVector> {
        let p: FlipPattern = text.parse()?;
        symmetric_pattern_state(sites, &p)
    };
    Ok([
        StateVector::all_up(ring),
        pattern("offsets:0")?,
        pattern("bubble:2")?,
        pattern("offsets:0,2")?,
        pattern("bubble:3")?,
    ])
}

fn check_sites(sites: usize) -> Result<()> {
    if sites < MIN_SITES {
        return Err(Error::OutOfRange(format!(
            "the five-state reduction needs L >= {MIN_SITES}, got {sites}"
        )));
    }
    Ok(())
}

/// Refuse `h` within [`POLE_GUARD`] of any of the poles `0, 1, ±2`.
fn guard(h: f64) -> Result<()> {
    let factors: [(&'static str, f64); 4] = [("h", h), ("h - 1", h - 1.0), ("h - 2", h - 2.0), ("h + 2", h + 2.0)];
    for (name, value) in factors {
        if value.abs() < POLE_GUARD {
            return Err(Error::SingularParameter {
                denominator: name,
                value,
                field: h,
            });
        }
    }
    Ok(())
}

/// Unperturbed (`g = 0`) energies on the diagonal.
pub fn projected_h0(sites: usize, h: f64) -> Result<Matrix5<f64>> {
    check_sites(sites)?;
    let l = sites as f64;
    Ok(Matrix5::from_diagonal(&nalgebra::Vector5::new(
        -l + l * h,
        4.0 - l + (l - 2.0) * h,
        4.0 - l + (l - 4.0) * h,
        8.0 - l + (l - 4.0) * h,
        4.0 - l + (l - 6.0) * h,
    )))
}

/// Transverse-field couplings between the five states.
pub fn projected_h1(sites: usize, g: f64) -> Result<Matrix5<f64>> {
    check_sites(sites)?;
    let r = (sites as f64).sqrt();
    #[rustfmt::skip]
    let pattern = Matrix5::new(
        0.0, r,   0.0, 0.0, 0.0,
        r,   0.0, 2.0, 2.0, 0.0,
        0.0, 2.0, 0.0, 0.0, 2.0,
        0.0, 2.0, 0.0, 0.0, 1.0,
        0.0, 0.0, 2.0, 1.0, 0.0,
    );
    Ok(pattern * -g)
}

/// First- and second-order generators `(S⁽¹⁾, S⁽²⁾)`, both real antisymmetric.
pub fn swt_generators(sites: usize, h: f64, g: f64) -> Result<(Matrix5<f64>, Matrix5<f64>)> {
    check_sites(sites)?;
    guard(h)?;
    let r = (sites as f64).sqrt();
    #[rustfmt::skip]
    let s1 = Matrix5::new(
        0.0, r / (2.0 * (h - 2.0)), 0.0, 0.0, 0.0,
        -r / (2.0 * h - 4.0), 0.0, 1.0 / h, 1.0 / (h - 2.0), 0.0,
        0.0, -1.0 / h, 0.0, 0.0, 1.0 / h,
        0.0, -1.0 / (h - 2.0), 0.0, 0.0, 1.0 / (2.0 * (h + 2.0)),
        0.0, 0.0, -1.0 / h, -1.0 / (2.0 * h + 4.0), 0.0,
    ) * -g;
    let a = 4.0 * r / (h * (16.0 * h * h - 48.0 * h + 32.0));
    let b = 2.0 / (h * (4.0 * h * h - 16.0));
    let c = (16.0 * h * h + 48.0 * h - 32.0) / (h * (64.0 * h * h - 256.0));
    #[rustfmt::skip]
    let s2 = Matrix5::new(
        0.0, 0.0, a, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0, b,
        -a, 0.0, 0.0, c, 0.0,
        0.0, 0.0, -c, 0.0, 0.0,
        0.0, -b, 0.0, 0.0, 0.0,
    ) * (g * g);
    Ok((s1, s2))
}

/// Coefficient of the third-order `Ω ↔ S₃` coupling.
pub fn kappa(h: f64) -> Result<f64> {
    guard(h)?;
    Ok((h * (9.0 * h - 10.0) - 8.0) / (12.0 * (h - 2.0).powi(2) * h * h * (h * h + h - 2.0)))
}

/// `H_eff = E₀·1 + [[Δ, coupling], [coupling, diag2]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EffectiveTwoLevel {
    pub e0: f64,
    pub delta: f64,
    pub coupling: f64,
    pub diag2: f64,
}

impl EffectiveTwoLevel {
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [
            [self.e0 + self.delta, self.coupling],
            [self.coupling, self.e0 + self.diag2],
        ]
    }

    /// Diagonal mismatch `δ`.
    pub fn detuning(&self) -> f64 {
        self.delta - self.diag2
    }

    /// Eigen-gap `√(δ² + 4Ω²)`.
    pub fn gap(&self) -> f64 {
        self.detuning().hypot(2.0 * self.coupling)
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let mid = self.e0 + 0.5 * (self.delta + self.diag2);
        [mid - 0.5 * self.gap(), mid + 0.5 * self.gap()]
    }

    /// Amplitude of the `Ω → S₃` transfer, `4Ω²/gap²`.
    pub fn max_transfer(&self) -> f64 {
        let gap = self.gap();
        if gap == 0.0 {
            return 1.0;
        }
        (2.0 * self.coupling / gap).powi(2)
    }
}

/// Third-order effective model on `{Ω, S₃}`, including the `O(g²)` self-energy.
pub fn effective_two_level(sites: usize, h: f64, g: f64) -> Result<EffectiveTwoLevel> {
    check_sites(sites)?;
    let k = kappa(h)?;
    let l = sites as f64;
    let shift = (5.0 * h + 8.0) / (2.0 * h * (h + 2.0));
    Ok(EffectiveTwoLevel {
        e0: -g * g * shift + l * (h - 1.0),
        delta: g * g * (l / (2.0 * h - 4.0) + shift),
        coupling: -k * l.sqrt() * g.powi(3),
        diag2: 4.0 - 6.0 * h,
    })
}

/// Earlier two-level model without self-energy and without the `√L` factor.
pub fn legacy_two_level(sites: usize, h: f64, g: f64) -> Result<EffectiveTwoLevel> {
    check_sites(sites)?;
    Ok(EffectiveTwoLevel {
        e0: sites as f64 * (h - 1.0),
        delta: 0.0,
        coupling: -81.0 / 64.0 * g.powi(3),
        diag2: 4.0 - 6.0 * h,
    })
}

/// Oscillation periods implied by an effective model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PeriodPrediction {
    /// `π/|coupling|`: the period with the two diagonal entries equal.
    pub resonant: f64,
    /// `2π/gap` of the 2×2 model at the given `h` (an off-resonant
    /// generalization; the detuning includes the self-energy).
    pub two_level: f64,
}

impl PeriodPrediction {
    pub fn of(model: &EffectiveTwoLevel) -> Self {
        PeriodPrediction {
            resonant: PI / model.coupling.abs(),
            two_level: 2.0 * PI / model.gap(),
        }
    }
}

pub fn predicted_period(sites: usize, h: f64, g: f64) -> Result<PeriodPrediction> {
    Ok(PeriodPrediction::of(&effective_two_level(sites, h, g)?))
}

/// The `h` near 2/3 at which the two diagonal entries of the effective model
/// coincide. Tends to 2/3 as `g → 0`.
pub fn resonant_field(sites: usize, g: f64) -> Result<f64> {
    check_sites(sites)?;
    let mismatch = |h: f64| effective_two_level(sites, h, g).map(|m| m.detuning());
    let (mut lo, mut hi) = (0.5, 0.85);
    let (mut flo, fhi) = (mismatch(lo)?, mismatch(hi)?);
    if flo.signum() == fhi.signum() {
        return Err(Error::OutOfRange(format!(
            "no resonance of the effective model in h ∈ [{lo}, {hi}] at g = {g}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = mismatch(mid)?;
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
