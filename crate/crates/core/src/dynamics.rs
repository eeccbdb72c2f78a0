//! Quench dynamics: Loschmidt echo and diagonal observables along a time
//! grid, sampled from one Krylov propagation.

use std::io::Write;

use crate::krylov::{self, PropagatorOptions};
use crate::lattice::Ring;
use crate::model::SparseOperator;
use crate::par::{self, Execution};
use crate::states::StateVector;
use crate::{Error, Result, C64};

pub const DEFAULT_TOL: f64 = 1e-8;
/// Sample spacing for minimum-return scans.
pub const DEFAULT_DT: f64 = 0.25;
pub const DEFAULT_WINDOW: f64 = 400.0;

/// Samples `t_k = k·dt` for `k = 0..=⌊t_max/dt⌋`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TimeGrid {
    pub t_max: f64,
    pub dt: f64,
}

impl TimeGrid {
    /// `t_max = 0` is accepted and yields the single sample `t = 0`.
    pub fn new(t_max: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        if !(t_max >= 0.0) || !t_max.is_finite() {
            return Err(Error::InvalidGrid(format!("t_max must be non-negative, got {t_max}")));
        }
        if t_max / dt > 1e8 {
            return Err(Error::InvalidGrid(format!("{t_max}/{dt} exceeds 1e8 samples")));
        }
        Ok(TimeGrid { t_max, dt })
    }

    pub fn len(&self) -> usize {
        (self.t_max / self.dt + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| k as f64 * self.dt).collect()
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol <= 1e-4 {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("tolerance must lie in (0, 1e-4], got {tol}")))
    }
}

fn check_dims(op: &SparseOperator, psi: &StateVector) -> Result<()> {
    if op.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            actual: psi.dim(),
        });
    }
    Ok(())
}

/// `e^{−iHt}ψ₀` to within `tol` in the 2-norm. Negative `t` evolves backwards.
pub fn evolve(op: &SparseOperator, psi0: &StateVector, t: f64, tol: f64) -> Result<StateVector> {
    check_tol(tol)?;
    check_dims(op, psi0)?;
    let out = krylov::evolve(op, psi0.amplitudes(), t, PropagatorOptions::with_tol(tol))?;
    Ok(StateVector::from_amplitudes_unchecked(out))
}

/// Diagonal observable evaluated from `|ψ|²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Observable {
    /// Mean magnetization `(1/L)Σᵢ⟨Zᵢ⟩`.
    Magnetization,
    LocalZ(usize),
    /// `⟨Z₀Z_r⟩`.
    Correlator(usize),
}

impl Observable {
    pub fn label(&self) -> String {
        match self {
            Observable::Magnetization => "m".into(),
            Observable::LocalZ(i) => format!("Z{i}"),
            Observable::Correlator(r) => format!("C{r}"),
        }
    }

    fn check(&self, ring: Ring) -> Result<()> {
        match *self {
            Observable::LocalZ(i) if i >= ring.sites() => Err(Error::OutOfRange(format!(
                "site {i} outside a ring of {} sites",
                ring.sites()
            ))),
            Observable::Correlator(r) if r == 0 || r > ring.sites() / 2 => Err(Error::OutOfRange(format!(
                "correlator distance must lie in 1..={}, got {r}",
                ring.sites() / 2
            ))),
            _ => Ok(()),
        }
    }

    #[inline]
    fn value(&self, ring: Ring, c: u32) -> f64 {
        let z = |i: usize| if c >> i & 1 == 1 { 1.0 } else { -1.0 };
        match *self {
            Observable::Magnetization => (2.0 * c.count_ones() as f64 - ring.sites() as f64) / ring.sites() as f64,
            Observable::LocalZ(i) => z(i),
            Observable::Correlator(r) => z(0) * z(r),
        }
    }

    /// `⟨ψ|O|ψ⟩` for a (not necessarily normalized) amplitude vector.
    pub fn expectation(&self, ring: Ring, psi: &[C64]) -> f64 {
        par::sum_chunks(psi.len(), Execution::default(), |r| {
            let mut acc = 0.0;
            for c in r {
                acc += psi[c].norm_sqr() * self.value(ring, c as u32);
            }
            acc
        })
    }
}

/// The observables of the time-series CSV: `m, C1..C⌊L/2⌋`.
pub fn standard_observables(sites: usize) -> Vec<Observable> {
    std::iter::once(Observable::Magnetization)
        .chain((1..=sites / 2).map(Observable::Correlator))
        .collect()
}

/// Named real-valued columns over a common time axis.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub labels: Vec<String>,
    /// `values[j][k]` is column `j` at `times[k]`.
    pub values: Vec<Vec<f64>>,
}

impl TimeSeries {
    pub fn column(&self, label: &str) -> Option<&[f64]> {
        self.labels.iter().position(|l| l == label).map(|j| self.values[j].as_slice())
    }
}

/// Loschmidt amplitude `G(t) = ⟨ψ₀|e^{−iHt}|ψ₀⟩`, the return probability
/// `|G|²` and any requested observables.
#[derive(Clone, Debug, PartialEq)]
pub struct QuenchRecord {
    pub times: Vec<f64>,
    pub amplitude: Vec<C64>,
    pub return_probability: Vec<f64>,
    pub observables: TimeSeries,
}

/// Propagate once and record everything along `grid`.
pub fn quench(
    op: &SparseOperator,
    psi0: &StateVector,
    grid: TimeGrid,
    observables: &[Observable],
    tol: f64,
) -> Result<QuenchRecord> {
    check_tol(tol)?;
    check_dims(op, psi0)?;
    let ring = op.ring();
    for o in observables {
        o.check(ring)?;
    }
    let times = grid.times();
    let n = times.len();
    let opts = PropagatorOptions::with_tol(tol);
    if observables.is_empty() {
        let amplitude = echo(op, psi0, &times, opts)?;
        return Ok(QuenchRecord {
            observables: TimeSeries {
                times: times.clone(),
                labels: Vec::new(),
                values: Vec::new(),
            },
            return_probability: amplitude.iter().map(|g| g.norm_sqr()).collect(),
            times,
            amplitude,
        });
    }
    let mut amplitude = Vec::with_capacity(n);
    let mut values = vec![Vec::with_capacity(n); observables.len()];
    let start = psi0.amplitudes();
    krylov::propagate(op, start, &times, opts, |_, psi| {
        amplitude.push(par::dot(start, psi));
        for (col, o) in values.iter_mut().zip(observables) {
            col.push(o.expectation(ring, psi));
        }
        Ok(())
    })?;
    let return_probability = amplitude.iter().map(|g| g.norm_sqr()).collect();
    Ok(QuenchRecord {
        observables: TimeSeries {
            times: times.clone(),
            labels: observables.iter().map(Observable::label).collect(),
            values,
        },
        times,
        amplitude,
        return_probability,
    })
}

/// `G(t)` and `P_ret(t)` along `grid`.
pub fn loschmidt_series(op: &SparseOperator, psi0: &StateVector, grid: TimeGrid, tol: f64) -> Result<QuenchRecord> {
    quench(op, psi0, grid, &[], tol)
}

pub fn observable_series(
    op: &SparseOperator,
    psi0: &StateVector,
    grid: TimeGrid,
    observables: &[Observable],
    tol: f64,
) -> Result<TimeSeries> {
    Ok(quench(op, psi0, grid, observables, tol)?.observables)
}

/// Minimum of the sampled `P_ret` over `[0, window]`.
pub fn min_return(op: &SparseOperator, psi0: &StateVector, window: f64, dt: f64, tol: f64) -> Result<f64> {
    check_tol(tol)?;
    check_dims(op, psi0)?;
    let times = TimeGrid::new(window, dt)?.times();
    let amplitude = echo(op, psi0, &times, PropagatorOptions::with_tol(tol))?;
    Ok(amplitude.iter().map(|g| g.norm_sqr()).fold(f64::INFINITY, f64::min))
}

/// Real states only need to be propagated to `t/2`.
fn echo(op: &SparseOperator, psi0: &StateVector, times: &[f64], opts: PropagatorOptions) -> Result<Vec<C64>> {
    if psi0.is_real(0.0) {
        let half: Vec<f64> = times.iter().map(|t| 0.5 * t).collect();
        krylov::loschmidt_doubled(op, psi0.amplitudes(), &half, opts)
    } else {
        krylov::loschmidt(op, psi0.amplitudes(), times, opts)
    }
}

/// Time of the first revival of a series that dips below `threshold`: the
/// maximum between the first downward crossing and the next one, refined by
/// a parabola through the neighbouring samples.
pub fn revival_period(times: &[f64], values: &[f64], threshold: f64) -> Option<f64> {
    let below = values.iter().position(|&p| p < threshold)?;
    let risen = below + values[below..].iter().position(|&p| p > threshold)?;
    let end = values[risen..]
        .iter()
        .position(|&p| p < threshold)
        .map_or(values.len(), |k| risen + k);
    let k = (risen..end).max_by(|&a, &b| values[a].total_cmp(&values[b]))?;
    Some(refine_peak(times, values, k))
}

/// Vertex of the parabola through samples `k−1, k, k+1` on a uniform grid.
pub(crate) fn refine_peak(times: &[f64], values: &[f64], k: usize) -> f64 {
    if k == 0 || k + 1 >= values.len() {
        return times[k];
    }
    let (a, b, c) = (values[k - 1], values[k], values[k + 1]);
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        return times[k];
    }
    times[k] + 0.5 * (a - c) / denom * (times[k + 1] - times[k])
}

/// Time-series CSV: `t, Re(G), Im(G), P_ret` followed by the observable
/// columns. `header` lines are written first, each prefixed by `# `.
pub fn write_csv<W: Write>(mut w: W, record: &QuenchRecord, header: &[String]) -> std::io::Result<()> {
    for line in header {
        writeln!(w, "# {line}")?;
    }
    write!(w, "t,Re(G),Im(G),P_ret")?;
    for l in &record.observables.labels {
        write!(w, ",{l}")?;
    }
    writeln!(w)?;
    for (k, t) in record.times.iter().enumerate() {
        let g = record.amplitude[k];
        write!(w, "{t},{},{},{}", g.re, g.im, record.return_probability[k])?;
        for col in &record.observables.values {
            write!(w, ",{}", col[k])?;
        }
        writeln!(w)?;
    }
    Ok(())
}
