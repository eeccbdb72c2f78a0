//! Overlap spectroscopy: the weights `P_l = |⟨ψ|E_l⟩|²` of a reference state
//! over the eigenbasis, the sub-leading weight and the two-level fit.
//!
//! Three routes produce an [`OverlapSpectrum`]:
//!
//! * dense diagonalization, capped at [`DENSE_MAX_SITES`];
//! * a Gaussian-windowed Fourier transform of the Loschmidt amplitude
//!   `G(t) = Σ_l P_l e^{−iE_l t}` (approximate, any size the propagator
//!   reaches);
//! * dense diagonalization inside the zero-momentum sector, exact for
//!   translation-invariant reference states and much smaller than the full
//!   space (352 states at `L = 12`).

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use faer::Mat;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::effective;
use crate::krylov::{self, PropagatorOptions};
use crate::model::{InteractionKind, ModelSpec, SparseOperator};
use crate::sector::{self, MomentumSector};
use crate::states::{overlap, StateVector};
use crate::{Error, Result, C64};

pub const DENSE_MAX_SITES: usize = 14;
/// Largest ring for which [`SpectrumMethod::Auto`] picks the full dense path.
pub const AUTO_DENSE_MAX_SITES: usize = 10;
/// Top-two weight needed for the two-level fit.
pub const TWO_LEVEL_THRESHOLD: f64 = 0.9;
/// Smallest weight reported by the FFT path.
pub const FFT_MIN_WEIGHT: f64 = 0.01;
/// Fallback FFT record length when no effective-model period applies.
pub const FFT_DEFAULT_T_MAX: f64 = 8192.0;
/// Record length in units of the predicted oscillation period.
pub const FFT_PERIODS: f64 = 20.0;
/// Dominant peaks closer than this many `2π/t_max` trigger a warning.
pub const FFT_RESOLUTION_FACTOR: f64 = 4.0;

/// Full eigensystem with ascending eigenvalues. Each eigenvector is signed so
/// that its largest-magnitude entry is positive.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    values: Vec<f64>,
    vectors: Mat<f64>,
}

pub fn eigen_decompose(op: &SparseOperator) -> Result<EigenSystem> {
    if op.sites() > DENSE_MAX_SITES {
        return Err(Error::DenseCap {
            sites: op.sites(),
            cap: DENSE_MAX_SITES,
        });
    }
    let eig = op
        .to_dense()
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let values: Vec<f64> = eig.S().column_vector().iter().copied().collect();
    let mut vectors = eig.U().to_owned();
    let dim = values.len();
    for j in 0..dim {
        let mut pivot = 0;
        for i in 1..dim {
            if vectors[(i, j)].abs() > vectors[(pivot, j)].abs() + 1e-12 {
                pivot = i;
            }
        }
        if vectors[(pivot, j)] < 0.0 {
            for i in 0..dim {
                vectors[(i, j)] = -vectors[(i, j)];
            }
        }
    }
    Ok(EigenSystem { values, vectors })
}

impl EigenSystem {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, j: usize) -> Vec<f64> {
        self.vectors.col(j).iter().copied().collect()
    }

    /// `max_j ‖H v_j − λ_j v_j‖`.
    pub fn residual(&self, op: &SparseOperator) -> Result<f64> {
        let mut worst: f64 = 0.0;
        let mut hv = vec![0.0; self.dim()];
        for j in 0..self.dim() {
            let v = self.vector(j);
            op.apply_into(&v, &mut hv)?;
            let r: f64 = hv.iter().zip(&v).map(|(a, b)| (a - self.values[j] * b).powi(2)).sum();
            worst = worst.max(r.sqrt());
        }
        Ok(worst)
    }

    /// `⟨E_j|ψ⟩` for every eigenvector.
    pub fn project(&self, psi: &StateVector) -> Result<Vec<C64>> {
        if psi.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: psi.dim(),
            });
        }
        let n = self.dim();
        let re = Mat::from_fn(n, 1, |i, _| psi.amplitudes()[i].re);
        let im = Mat::from_fn(n, 1, |i, _| psi.amplitudes()[i].im);
        let ut = self.vectors.transpose();
        let pr = ut * &re;
        let pi = ut * &im;
        Ok((0..n).map(|j| C64::new(pr[(j, 0)], pi[(j, 0)])).collect())
    }

    /// Exact `e^{−iHt}ψ` through the eigenbasis.
    pub fn evolve(&self, psi: &StateVector, t: f64) -> Result<StateVector> {
        let coeffs = self.project(psi)?;
        let n = self.dim();
        let rotated: Vec<C64> = coeffs
            .iter()
            .zip(&self.values)
            .map(|(c, e)| c * C64::from_polar(1.0, -e * t))
            .collect();
        let re = Mat::from_fn(n, 1, |j, _| rotated[j].re);
        let im = Mat::from_fn(n, 1, |j, _| rotated[j].im);
        let out_re = &self.vectors * &re;
        let out_im = &self.vectors * &im;
        Ok(StateVector::from_amplitudes_unchecked(
            (0..n).map(|i| C64::new(out_re[(i, 0)], out_im[(i, 0)])).collect(),
        ))
    }
}

/// One eigenvalue and the weight of the reference state on it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralLine {
    pub energy: f64,
    pub weight: f64,
    /// Position in the ascending dense eigenvalue list, when known.
    pub index: Option<usize>,
}

/// Lines sorted by descending weight (ties by ascending energy).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OverlapSpectrum {
    entries: Vec<SpectralLine>,
}

impl OverlapSpectrum {
    pub fn new(mut entries: Vec<SpectralLine>) -> Self {
        entries.sort_by(|a, b| b.weight.total_cmp(&a.weight).then(a.energy.total_cmp(&b.energy)));
        OverlapSpectrum { entries }
    }

    pub fn entries(&self) -> &[SpectralLine] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn leading(&self) -> f64 {
        self.entries.first().map_or(0.0, |e| e.weight)
    }

    pub fn sub_leading(&self) -> f64 {
        self.entries.get(1).map_or(0.0, |e| e.weight)
    }

    pub fn total_weight(&self) -> f64 {
        self.entries.iter().map(|e| e.weight).sum()
    }

    /// Columns `rank, energy, weight`; `header` lines are prefixed by `# `.
    pub fn write_csv<W: Write>(&self, mut w: W, header: &[String]) -> std::io::Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "rank,energy,weight")?;
        for (k, e) in self.entries.iter().enumerate() {
            writeln!(w, "{},{},{}", k + 1, e.energy, e.weight)?;
        }
        Ok(())
    }
}

/// Second-largest weight (0 for a single line).
pub fn sub_leading(spectrum: &OverlapSpectrum) -> f64 {
    spectrum.sub_leading()
}

/// Merge lines whose energies agree to `tol`, keeping the first index.
fn merge_degenerate(mut lines: Vec<SpectralLine>, tol: f64) -> Vec<SpectralLine> {
    lines.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    let mut merged: Vec<SpectralLine> = Vec::with_capacity(lines.len());
    for line in lines {
        match merged.last_mut() {
            Some(last) if (line.energy - last.energy).abs() <= tol => last.weight += line.weight,
            _ => merged.push(line),
        }
    }
    merged
}

fn degeneracy_tol(values: &[f64]) -> f64 {
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    1e-9 * scale
}

/// Weights of `ψ` on every eigenvalue. Degenerate eigenvalues are reported
/// once with the weight of the projection onto their eigenspace, which does
/// not depend on the basis chosen inside it.
pub fn overlap_spectrum(psi: &StateVector, eigen: &EigenSystem) -> Result<OverlapSpectrum> {
    let coeffs = eigen.project(psi)?;
    let lines = coeffs
        .iter()
        .zip(&eigen.values)
        .enumerate()
        .map(|(j, (c, &e))| SpectralLine {
            energy: e,
            weight: c.norm_sqr(),
            index: Some(j),
        })
        .collect();
    Ok(OverlapSpectrum::new(merge_degenerate(lines, degeneracy_tol(&eigen.values))))
}

/// Exact weights of a translation-invariant `ψ` from the zero-momentum
/// sector. Agrees with [`overlap_spectrum`] on the full eigensystem.
pub fn sector_spectrum(op: &SparseOperator, psi: &StateVector) -> Result<OverlapSpectrum> {
    let sector = MomentumSector::new(op.ring())?;
    let coords = sector.coordinates(psi)?;
    let eig = sector
        .hamiltonian(op)?
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let values: Vec<f64> = eig.S().column_vector().iter().copied().collect();
    let u = eig.U();
    let lines = (0..values.len())
        .map(|j| {
            let c: C64 = (0..coords.len()).map(|a| coords[a] * u[(a, j)]).sum();
            SpectralLine {
                energy: values[j],
                weight: c.norm_sqr(),
                index: None,
            }
        })
        .collect();
    Ok(OverlapSpectrum::new(merge_degenerate(lines, degeneracy_tol(&values))))
}

/// The two dominant peaks of an FFT spectrum overlap or nearly do.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolutionWarning {
    /// Distance between the two dominant peaks, if both were found.
    pub separation: Option<f64>,
    /// `2π/t_max`.
    pub resolution: f64,
    pub t_max: f64,
    pub suggested_t_max: f64,
}

impl fmt::Display for ResolutionWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.separation {
            Some(sep) => write!(
                f,
                "unresolved peak cluster: dominant peaks {sep:.3e} apart with resolution {:.3e} at t_max = {}",
                self.resolution, self.t_max
            )?,
            None => write!(
                f,
                "unresolved peak cluster: dominant peak broader than the window at t_max = {}",
                self.t_max
            )?,
        }
        write!(f, "; rerun with t_max >= {:.0}", self.suggested_t_max.ceil())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FftSpectrum {
    pub spectrum: OverlapSpectrum,
    pub warning: Option<ResolutionWarning>,
}

/// Largest safe sample spacing after shifting the spectrum to the centre of
/// its Gershgorin interval.
pub fn max_fft_dt(op: &SparseOperator) -> f64 {
    let (lo, hi) = op.spectral_bounds();
    PI / (0.5 * (hi - lo)).max(1e-12)
}

pub fn default_fft_dt(op: &SparseOperator) -> f64 {
    0.9 * max_fft_dt(op)
}

/// Record length for the FFT path: [`FFT_PERIODS`] oscillation periods of
/// the effective two-level model when it applies (clean nearest-neighbour
/// ring, `g ≤ 0.3`, `h` within 0.1 of 2/3), else [`FFT_DEFAULT_T_MAX`].
pub fn default_fft_t_max(spec: &ModelSpec) -> f64 {
    let applies = matches!(spec.interaction, InteractionKind::NearestNeighbor)
        && spec.disorder.is_none()
        && spec.sites >= effective::MIN_SITES
        && spec.transverse_field > 0.0
        && spec.transverse_field <= 0.3
        && (spec.longitudinal_field - 2.0 / 3.0).abs() < 0.1;
    if applies {
        let scaled = |h: f64, g: f64| effective::predicted_period(spec.sites, h / spec.coupling, g / spec.coupling);
        if let Ok(p) = scaled(spec.longitudinal_field, spec.transverse_field) {
            let t = FFT_PERIODS * p.two_level / spec.coupling;
            if t.is_finite() && t > 0.0 {
                return t;
            }
        }
    }
    FFT_DEFAULT_T_MAX
}

/// Spectral weights from a Gaussian-windowed Fourier transform of `G(t)`
/// sampled at spacing `dt` up to `t_max`.
///
/// The window `exp(−t²/2σ²)` with `σ = t_max/4` turns each eigenvalue into a
/// Gaussian peak of height `P_l·Σ_k w(t_k)`; peak positions and heights come
/// from a parabola through `ln|F|` at the three highest samples, which is
/// exact for an isolated Gaussian. A real `ψ` is propagated only to
/// `t_max/2` using `G(2t) = Σ_c ψ(t)_c²`.
pub fn spectral_weights_fft(op: &SparseOperator, psi: &StateVector, t_max: f64, dt: f64) -> Result<FftSpectrum> {
    spectral_weights_fft_with(op, psi, t_max, dt, FFT_MIN_WEIGHT, PropagatorOptions::default())
}

pub fn spectral_weights_fft_with(
    op: &SparseOperator,
    psi: &StateVector,
    t_max: f64,
    dt: f64,
    min_weight: f64,
    opts: PropagatorOptions,
) -> Result<FftSpectrum> {
    if psi.dim() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            actual: psi.dim(),
        });
    }
    let limit = max_fft_dt(op);
    if !(dt > 0.0 && dt < limit) {
        return Err(Error::InvalidGrid(format!(
            "fft sample spacing must lie in (0, {limit:.4}) to avoid aliasing, got {dt}"
        )));
    }
    let n = (t_max / dt + 1e-9).floor() as usize + 1;
    if !t_max.is_finite() || n < 16 {
        return Err(Error::InvalidGrid(format!("fft record needs at least 16 samples, got t_max = {t_max}")));
    }
    let t_max = (n - 1) as f64 * dt;
    let times: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
    let amplitude = if psi.is_real(0.0) {
        let half: Vec<f64> = times.iter().map(|t| 0.5 * t).collect();
        krylov::loschmidt_doubled(op, psi.amplitudes(), &half, opts)?
    } else {
        krylov::loschmidt(op, psi.amplitudes(), &times, opts)?
    };

    let (lo, hi) = op.spectral_bounds();
    let centre = 0.5 * (lo + hi);
    let sigma = t_max / 4.0;
    let size = (8 * n).next_power_of_two();
    let mut buffer = vec![C64::new(0.0, 0.0); size];
    for (k, (&t, g)) in times.iter().zip(&amplitude).enumerate() {
        let x = g * C64::from_polar((-0.5 * (t / sigma).powi(2)).exp(), centre * t);
        buffer[k] = x;
        if k > 0 {
            buffer[size - k] = x.conj();
        }
    }
    FftPlanner::new().plan_fft_inverse(size).process(&mut buffer);
    // a line at a sample frequency peaks at P·Σ_k w(t_k)
    let window_sum: f64 = times
        .iter()
        .enumerate()
        .map(|(k, t)| (if k == 0 { 1.0 } else { 2.0 }) * (-0.5 * (t / sigma).powi(2)).exp())
        .sum();
    let norm = 1.0 / window_sum;
    let magnitude: Vec<f64> = buffer.iter().map(|x| x.norm() * norm).collect();
    let step = 2.0 * PI / (size as f64 * dt);
    let omega = |j: usize| -> f64 {
        if j < size / 2 {
            j as f64 * step
        } else {
            (j as f64 - size as f64) * step
        }
    };

    struct Peak {
        line: SpectralLine,
        curvature: f64,
    }
    let mut peaks: Vec<Peak> = Vec::new();
    for j in 0..size {
        let y0 = magnitude[j];
        if y0 < min_weight {
            continue;
        }
        let ym = magnitude[(j + size - 1) % size];
        let yp = magnitude[(j + 1) % size];
        if !(y0 > ym && y0 >= yp) {
            continue;
        }
        let (lm, l0, lp) = (ym.max(1e-300).ln(), y0.ln(), yp.max(1e-300).ln());
        let denom = lm - 2.0 * l0 + lp;
        let (shift, height) = if denom < 0.0 {
            let d = 0.5 * (lm - lp) / denom;
            (d, l0 - 0.25 * (lm - lp) * d)
        } else {
            (0.0, l0)
        };
        let weight = height.exp();
        if weight < min_weight {
            continue;
        }
        peaks.push(Peak {
            line: SpectralLine {
                energy: omega(j) + shift * step + centre,
                weight,
                index: None,
            },
            curvature: denom / (step * step),
        });
    }
    peaks.sort_by(|a, b| b.line.weight.total_cmp(&a.line.weight));

    let resolution = 2.0 * PI / t_max;
    let mut warning = None;
    // an isolated peak has ln-curvature −σ²; a merged pair is flatter
    let broadened = peaks.iter().take(2).any(|p| p.curvature > -0.8 * sigma * sigma);
    if peaks.len() >= 2 {
        let sep = (peaks[0].line.energy - peaks[1].line.energy).abs();
        if sep < FFT_RESOLUTION_FACTOR * resolution {
            warning = Some(ResolutionWarning {
                separation: Some(sep),
                resolution,
                t_max,
                suggested_t_max: 2.0 * FFT_RESOLUTION_FACTOR * 2.0 * PI / sep.max(1e-300),
            });
        }
    }
    if warning.is_none() && broadened {
        warning = Some(ResolutionWarning {
            separation: None,
            resolution,
            t_max,
            suggested_t_max: 4.0 * t_max,
        });
    }
    Ok(FftSpectrum {
        spectrum: OverlapSpectrum::new(peaks.into_iter().map(|p| p.line).collect()),
        warning,
    })
}

/// How overlap weights are computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumMethod {
    Dense,
    Fft,
    Sector,
    /// Dense up to [`AUTO_DENSE_MAX_SITES`], then the sector path for clean
    /// translation-invariant inputs, else FFT.
    Auto,
}

impl SpectrumMethod {
    /// Concrete method [`compute_spectrum`] will use for `Auto`.
    pub fn resolve(self, spec: &ModelSpec, psi: &StateVector) -> SpectrumMethod {
        if self != SpectrumMethod::Auto {
            return self;
        }
        if spec.sites <= AUTO_DENSE_MAX_SITES {
            return SpectrumMethod::Dense;
        }
        let invariant = psi
            .translated(1)
            .ok()
            .and_then(|t| overlap(&t, psi).ok())
            .is_some_and(|o| (o.re - psi.norm().powi(2)).abs() < 1e-10);
        if spec.disorder.is_none() && spec.sites <= sector::MAX_SITES && invariant {
            SpectrumMethod::Sector
        } else {
            SpectrumMethod::Fft
        }
    }
}

impl fmt::Display for SpectrumMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpectrumMethod::Dense => "dense",
            SpectrumMethod::Fft => "fft",
            SpectrumMethod::Sector => "sector",
            SpectrumMethod::Auto => "auto",
        })
    }
}

impl FromStr for SpectrumMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(SpectrumMethod::Dense),
            "fft" => Ok(SpectrumMethod::Fft),
            "sector" => Ok(SpectrumMethod::Sector),
            "auto" => Ok(SpectrumMethod::Auto),
            other => Err(Error::OutOfRange(format!(
                "unknown spectrum method {other:?}; expected dense, fft, sector or auto"
            ))),
        }
    }
}

/// Knobs for [`compute_spectrum`]. `None` picks the defaults above.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSettings {
    pub fft_t_max: Option<f64>,
    pub fft_dt: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumOutcome {
    pub spectrum: OverlapSpectrum,
    pub method: SpectrumMethod,
    pub warning: Option<ResolutionWarning>,
}

/// Overlap spectrum of `psi` under the Hamiltonian of `spec`.
pub fn compute_spectrum(
    spec: &ModelSpec,
    op: &SparseOperator,
    psi: &StateVector,
    method: SpectrumMethod,
    settings: SpectrumSettings,
) -> Result<SpectrumOutcome> {
    let method = method.resolve(spec, psi);
    let (spectrum, warning) = match method {
        SpectrumMethod::Auto => unreachable!("resolved above"),
        SpectrumMethod::Dense => (overlap_spectrum(psi, &eigen_decompose(op)?)?, None),
        SpectrumMethod::Sector => (sector_spectrum(op, psi)?, None),
        SpectrumMethod::Fft => {
            let t_max = settings.fft_t_max.unwrap_or_else(|| default_fft_t_max(spec));
            let dt = settings.fft_dt.unwrap_or_else(|| default_fft_dt(op));
            let out = spectral_weights_fft(op, psi, t_max, dt)?;
            (out.spectrum, out.warning)
        }
    };
    Ok(SpectrumOutcome {
        spectrum,
        method,
        warning,
    })
}

/// Two dominant lines read as a two-level system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TwoLevelFit {
    /// `|E_a − E_b|`.
    pub omega: f64,
    /// `(E_a + E_b)/2`.
    pub nu_g: f64,
    pub pair: (SpectralLine, SpectralLine),
    /// `P_a + P_b`.
    pub fidelity: f64,
}

impl TwoLevelFit {
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    /// `1 − 4P_aP_b sin²(ωt/2)`.
    pub fn predicted_return(&self, t: f64) -> f64 {
        1.0 - 4.0 * self.pair.0.weight * self.pair.1.weight * (0.5 * self.omega * t).sin().powi(2)
    }
}

pub fn two_level_fit(spectrum: &OverlapSpectrum) -> Result<TwoLevelFit> {
    let entries = spectrum.entries();
    if entries.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    let (p1, p2) = (spectrum.leading(), spectrum.sub_leading());
    if entries.len() < 2 || p1 + p2 < TWO_LEVEL_THRESHOLD {
        return Err(Error::NotTwoLevel {
            p1,
            p2,
            threshold: TWO_LEVEL_THRESHOLD,
        });
    }
    let (a, b) = (entries[0], entries[1]);
    Ok(TwoLevelFit {
        omega: (a.energy - b.energy).abs(),
        nu_g: 0.5 * (a.energy + b.energy),
        pair: (a, b),
        fidelity: p1 + p2,
    })
}
