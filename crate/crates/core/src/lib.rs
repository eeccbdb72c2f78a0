//! Numerical engine for coherent two-state oscillations in the false vacuum
//! decay regime of the periodic Ising chain in transverse and longitudinal
//! fields.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`]: bit-encoded spin configurations on a periodic ring.
//! * [`model`]: the Hamiltonian family (nearest-neighbour, power-law,
//!   global squeezing, bond disorder) as a matrix-free sparse operator.
//! * [`states`]: false vacuum preparation and translation-symmetric
//!   bubble states.
//! * [`dynamics`]: Krylov time propagation, Loschmidt echo and diagonal
//!   observables along a time grid.
//! * [`spectra`]: dense eigen-analysis, overlap spectroscopy and the
//!   two-level fit; zero-momentum-sector and FFT routes to spectral weights
//!   for larger rings.
//! * [`sector`]: the translation-invariant subspace as a dense matrix.
//! * [`effective`]: the closed-form Schrieffer–Wolff two-level model on the
//!   five-state symmetric subspace.
//! * [`analytics`]: exact combinatorial predictions for bubble states.
//! * [`scan`]: phase-diagram sweeps, resonance finding and disorder
//!   ensembles.
//!
//! Data parallelism (matvec, sweeps, ensembles) is provided by rayon behind
//! the default `parallel` feature. All reductions use a fixed chunking so the
//! results are bitwise identical for any worker count, and identical to the
//! sequential build.

pub mod analytics;
pub mod dynamics;
pub mod effective;
mod error;
pub mod krylov;
pub mod lattice;
pub mod model;
pub mod par;
pub mod scan;
pub mod sector;
pub mod spectra;
pub mod states;

pub use error::{Error, Result};

/// Complex amplitude type used for all state vectors.
pub type C64 = num_complex::Complex64;
