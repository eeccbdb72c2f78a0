//! Parameter sweeps: `(h, g)` grids, resonance search and disorder ensembles.
//!
//! Grid points are evaluated independently and written in row-major order
//! (`h` fastest), so the output does not depend on the worker count. Only the
//! wall-time column varies between runs; [`ScanResult::write_csv`] can zero it.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, Observable, TimeGrid};
use crate::model::{build_hamiltonian, DisorderSpec, InteractionKind, ModelSpec};
use crate::par;
use crate::spectra::{self, SpectrumMethod, SpectrumSettings, DENSE_MAX_SITES};
use crate::states::{InitialState, StateVector};
use crate::{Error, Result};

/// Evenly spaced axis; `steps == 1` is the single value `min`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, steps: usize) -> Result<Self> {
        let axis = Axis { min, max, steps };
        axis.validate()?;
        Ok(axis)
    }

    pub fn point(value: f64) -> Self {
        Axis {
            min: value,
            max: value,
            steps: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidGrid("an axis needs at least one step".into()));
        }
        if !self.min.is_finite() || !self.max.is_finite() || self.max < self.min {
            return Err(Error::InvalidGrid(format!(
                "axis bounds must be finite with min <= max, got {}:{}",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let span = self.max - self.min;
        (0..self.steps)
            .map(|i| self.min + span * i as f64 / (self.steps - 1) as f64)
            .collect()
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.min, self.max, self.steps)
    }
}

/// `min:max:steps`, or a single number.
impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidGrid(format!("expected min:max:steps or a number, got {s:?}"));
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let num = |t: &str| t.parse::<f64>().map_err(|_| bad());
        let axis = match parts.as_slice() {
            [x] => Axis::point(num(x)?),
            [a, b, n] => Axis {
                min: num(a)?,
                max: num(b)?,
                steps: n.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        axis.validate()?;
        Ok(axis)
    }
}

/// Quantity computed at each grid point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Metric {
    /// Minimum of `P_ret` over `[0, window]`, sampled every `dt`.
    MinReturn { window: f64, dt: f64 },
    /// Second-largest overlap weight of the reference state.
    SubLeading { method: SpectrumMethod },
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::MinReturn { .. } => "min_return",
            Metric::SubLeading { .. } => "p_sub",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub h_axis: Axis,
    pub g_axis: Axis,
    /// Everything except `g` and `h`.
    pub base: ModelSpec,
    pub metric: Metric,
    /// State whose return probability or overlap spectrum is measured.
    #[serde(default = "default_reference")]
    pub reference: InitialState,
}

fn default_reference() -> InitialState {
    InitialState::FalseVacuum
}

impl ScanGrid {
    pub fn new(base: ModelSpec, h_axis: Axis, g_axis: Axis, metric: Metric) -> Result<Self> {
        let grid = ScanGrid {
            h_axis,
            g_axis,
            base,
            metric,
            reference: InitialState::FalseVacuum,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn with_reference(mut self, reference: InitialState) -> Self {
        self.reference = reference;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.h_axis.validate()?;
        self.g_axis.validate()?;
        self.base.validate()?;
        if let Metric::MinReturn { window, dt } = self.metric {
            TimeGrid::new(window, dt)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.h_axis.steps * self.g_axis.steps
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(h, g)` in output order.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let hs = self.h_axis.values();
        self.g_axis
            .values()
            .into_iter()
            .flat_map(|g| hs.iter().map(move |&h| (h, g)))
            .collect()
    }
}

/// Metric value at one point plus diagnostics. `p1`, `p2` are the top two
/// overlap weights (NaN for [`Metric::MinReturn`]).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointOutcome {
    pub value: f64,
    pub p1: f64,
    pub p2: f64,
    pub status: String,
}

impl PointOutcome {
    fn failed(err: &Error) -> Self {
        PointOutcome {
            value: f64::NAN,
            p1: f64::NAN,
            p2: f64::NAN,
            status: format!("error: {err}").replace([',', '\n'], ";"),
        }
    }
}

/// Metric of `reference` under `spec`. Dense requests above
/// [`DENSE_MAX_SITES`] are served by the FFT path and flagged in the status.
pub fn evaluate_point(spec: &ModelSpec, reference: &StateVector, metric: Metric) -> Result<PointOutcome> {
    let op = build_hamiltonian(spec)?;
    match metric {
        Metric::MinReturn { window, dt } => Ok(PointOutcome {
            value: dynamics::min_return(&op, reference, window, dt, dynamics::DEFAULT_TOL)?,
            p1: f64::NAN,
            p2: f64::NAN,
            status: "ok".into(),
        }),
        Metric::SubLeading { method } => {
            let (method, fallback) = serving_method(method, spec.sites);
            let out = spectra::compute_spectrum(spec, &op, reference, method, SpectrumSettings::default())?;
            let lines = out.spectrum.entries();
            let weight = |k: usize| lines.get(k).map_or(0.0, |l| l.weight);
            let status = match (&out.warning, fallback) {
                (Some(_), _) => "warning: unresolved fft peaks",
                (None, true) => "fallback:fft",
                (None, false) => "ok",
            };
            Ok(PointOutcome {
                value: out.spectrum.sub_leading(),
                p1: weight(0),
                p2: weight(1),
                status: status.into(),
            })
        }
    }
}

/// Method actually used for a request, and whether it is a fallback.
fn serving_method(method: SpectrumMethod, sites: usize) -> (SpectrumMethod, bool) {
    if method == SpectrumMethod::Dense && sites > DENSE_MAX_SITES {
        (SpectrumMethod::Fft, true)
    } else {
        (method, false)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub h: f64,
    pub g: f64,
    pub sites: usize,
    pub metric: &'static str,
    pub value: f64,
    pub p1: f64,
    pub p2: f64,
    pub status: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanResult {
    pub grid: ScanGrid,
    pub rows: Vec<ScanRow>,
}

impl ScanResult {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.status.starts_with("error")).count()
    }

    /// Row with the largest finite value.
    pub fn best(&self) -> Option<&ScanRow> {
        self.rows
            .iter()
            .filter(|r| r.value.is_finite())
            .max_by(|a, b| a.value.total_cmp(&b.value))
    }

    /// `header` lines are written as `# ...` comments. With `timing` off the
    /// `seconds` column is 0 and the file is byte-reproducible.
    pub fn write_csv<W: Write>(&self, mut w: W, header: &[String], timing: bool) -> std::io::Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "h,g,L,metric_name,value,p1,p2,status,seconds")?;
        let num = |x: f64| if x.is_nan() { String::new() } else { x.to_string() };
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.h,
                r.g,
                r.sites,
                r.metric,
                num(r.value),
                num(r.p1),
                num(r.p2),
                r.status,
                if timing { r.seconds } else { 0.0 }
            )?;
        }
        Ok(())
    }

    /// Provenance record: the full grid description.
    pub fn write_sidecar<W: Write>(&self, w: W) -> serde_json::Result<()> {
        serde_json::to_writer_pretty(w, &self.grid)
    }
}

/// Evaluate every grid point on `workers` threads (0 = all cores). The
/// reference state is prepared once per `g` row. Failures are recorded in the
/// row status and never abort the scan.
pub fn grid_scan(grid: &ScanGrid, workers: usize) -> Result<ScanResult> {
    grid.validate()?;
    let gs = grid.g_axis.values();
    let points = grid.points();
    let rows = par::with_workers(workers, |exec| {
        let references: Vec<Result<StateVector>> = par::map_items(&gs, exec, |&g| {
            let spec = grid.base.with_fields(g, grid.base.longitudinal_field);
            grid.reference.prepare(&spec)
        });
        let row_len = grid.h_axis.steps;
        let indexed: Vec<usize> = (0..points.len()).collect();
        par::map_items(&indexed, exec, |&k| {
            let (h, g) = points[k];
            let spec = grid.base.with_fields(g, h);
            let start = Instant::now();
            let outcome = match &references[k / row_len] {
                Ok(psi) => evaluate_point(&spec, psi, grid.metric).unwrap_or_else(|e| PointOutcome::failed(&e)),
                Err(e) => PointOutcome::failed(e),
            };
            ScanRow {
                h,
                g,
                sites: spec.sites,
                metric: grid.metric.name(),
                value: outcome.value,
                p1: outcome.p1,
                p2: outcome.p2,
                status: outcome.status,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
    });
    Ok(ScanResult {
        grid: grid.clone(),
        rows,
    })
}

/// Location and height of a maximum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Maximize `f` on `[lo, hi]`: uniform grid of `points` samples, then golden
/// section between the neighbours of the best sample until the bracket is
/// narrower than `tol`. A best sample on the window edge is a
/// [`Error::Bracketing`] failure.
pub fn maximize<F>(mut f: F, lo: f64, hi: f64, points: usize, tol: f64) -> Result<Maximum>
where
    F: FnMut(f64) -> Result<f64>,
{
    if points < 3 || !(lo < hi) || !(tol > 0.0) {
        return Err(Error::InvalidGrid(format!(
            "maximize needs lo < hi, at least 3 points and tol > 0 (got [{lo}, {hi}], {points}, {tol})"
        )));
    }
    let xs = Axis { min: lo, max: hi, steps: points }.values();
    let mut ys = Vec::with_capacity(points);
    for &x in &xs {
        ys.push(f(x)?);
    }
    let mut evaluations = points;
    let i = (0..points).fold(0, |b, k| if ys[k] > ys[b] { k } else { b });
    if i == 0 || i == points - 1 {
        return Err(Error::Bracketing {
            lo,
            hi,
            at: xs[i],
            value: ys[i],
        });
    }
    let mut best = (xs[i], ys[i]);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (xs[i - 1], xs[i + 1]);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    evaluations += 2;
    while b - a > tol {
        for (x, y) in [(c, fc), (d, fd)] {
            if y > best.1 {
                best = (x, y);
            }
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d)?;
        }
        evaluations += 1;
    }
    for (x, y) in [(c, fc), (d, fd)] {
        if y > best.1 {
            best = (x, y);
        }
    }
    Ok(Maximum {
        x: best.0,
        value: best.1,
        evaluations,
    })
}

/// Options for [`find_resonance`].
#[derive(Clone, Debug, PartialEq)]
pub struct ResonanceSearch {
    pub grid_points: usize,
    pub tol: f64,
    pub method: SpectrumMethod,
    pub reference: InitialState,
}

impl Default for ResonanceSearch {
    fn default() -> Self {
        ResonanceSearch {
            grid_points: 65,
            tol: 1e-7,
            method: SpectrumMethod::Auto,
            reference: InitialState::FalseVacuum,
        }
    }
}

/// `h*` maximizing `P_sub` over `window` at the `g` of `base`.
pub fn find_resonance(base: &ModelSpec, window: (f64, f64), search: &ResonanceSearch) -> Result<Maximum> {
    let psi = search.reference.prepare(base)?;
    let metric = Metric::SubLeading { method: search.method };
    maximize(
        |h| Ok(evaluate_point(&base.with_fields(base.transverse_field, h), &psi, metric)?.value),
        window.0,
        window.1,
        search.grid_points,
        search.tol,
    )
}

/// Disorder strength, number of realizations and base seed. The realization
/// count has no default.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub sigma: f64,
    pub realizations: usize,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn new(sigma: f64, realizations: usize, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::OutOfRange(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        if realizations == 0 {
            return Err(Error::OutOfRange("an ensemble needs at least one realization".into()));
        }
        Ok(EnsembleSpec {
            sigma,
            realizations,
            seed,
        })
    }

    pub fn disorder(&self, index: usize) -> DisorderSpec {
        DisorderSpec {
            sigma: self.sigma,
            seed: self.seed,
            realization_index: index as u64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RealizationFailure {
    pub index: usize,
    pub message: String,
}

/// Per-time mean and standard error across realizations. Column 0 is `P_ret`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleSeries {
    pub times: Vec<f64>,
    pub labels: Vec<String>,
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    pub completed: usize,
    pub failures: Vec<RealizationFailure>,
}

impl EnsembleSeries {
    /// `(mean, standard error)` of a column.
    pub fn column(&self, label: &str) -> Option<(&[f64], &[f64])> {
        let k = self.labels.iter().position(|l| l == label)?;
        Some((&self.mean[k], &self.stderr[k]))
    }

    pub fn write_csv<W: Write>(&self, mut w: W, header: &[String]) -> std::io::Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        let mut cols = vec!["t".to_string()];
        for l in &self.labels {
            cols.push(l.clone());
            cols.push(format!("{l}_se"));
        }
        writeln!(w, "{}", cols.join(","))?;
        for (i, t) in self.times.iter().enumerate() {
            let mut row = vec![t.to_string()];
            for (m, s) in self.mean.iter().zip(&self.stderr) {
                row.push(m[i].to_string());
                row.push(s[i].to_string());
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Quench each disorder realization of a nearest-neighbour `spec` from the
/// state `initial` (prepared on the clean model) and average. Realization `k`
/// uses `DisorderSpec(seed, k)`, so the result does not depend on `workers`.
pub fn disorder_ensemble(
    spec: &ModelSpec,
    ensemble: &EnsembleSpec,
    initial: &InitialState,
    grid: TimeGrid,
    observables: &[Observable],
    tol: f64,
    workers: usize,
) -> Result<EnsembleSeries> {
    if !matches!(spec.interaction, InteractionKind::NearestNeighbor) {
        return Err(Error::InvalidModel(
            "disorder ensembles are defined for the nearest-neighbour model only".into(),
        ));
    }
    let clean = spec.with_disorder(None);
    clean.validate()?;
    let psi0 = initial.prepare(&clean)?;
    let indices: Vec<usize> = (0..ensemble.realizations).collect();
    let runs = par::with_workers(workers, |exec| {
        par::map_items(&indices, exec, |&k| -> Result<Vec<Vec<f64>>> {
            let op = build_hamiltonian(&clean.with_disorder(Some(ensemble.disorder(k))))?;
            let rec = dynamics::quench(&op, &psi0, grid, observables, tol)?;
            let mut cols = vec![rec.return_probability];
            cols.extend(rec.observables.values);
            Ok(cols)
        })
    });
    let times = grid.times();
    let ncols = observables.len() + 1;
    let mut mean = vec![vec![0.0; times.len()]; ncols];
    let mut m2 = vec![vec![0.0; times.len()]; ncols];
    let mut completed = 0usize;
    let mut failures = Vec::new();
    // Welford in realization order: bitwise reproducible, exact for
    // identical inputs.
    for (index, run) in runs.into_iter().enumerate() {
        match run {
            Ok(cols) => {
                completed += 1;
                let n = completed as f64;
                for (c, col) in cols.iter().enumerate() {
                    for (i, &x) in col.iter().enumerate() {
                        let delta = x - mean[c][i];
                        mean[c][i] += delta / n;
                        m2[c][i] += delta * (x - mean[c][i]);
                    }
                }
            }
            Err(e) => failures.push(RealizationFailure {
                index,
                message: e.to_string(),
            }),
        }
    }
    if completed == 0 {
        return Err(Error::Propagation(format!(
            "all {} realizations failed; first error: {}",
            ensemble.realizations, failures[0].message
        )));
    }
    let n = completed as f64;
    let stderr = m2
        .iter()
        .map(|col| {
            col.iter()
                .map(|&s| if completed > 1 { (s / (n - 1.0) / n).sqrt() } else { 0.0 })
                .collect()
        })
        .collect();
    let mut labels = vec!["P_ret".to_string()];
    labels.extend(observables.iter().map(Observable::label));
    Ok(EnsembleSeries {
        times,
        labels,
        mean,
        stderr,
        completed,
        failures,
    })
}

/// Peak-to-trough swing of the first revival: the deepest dip within the
/// first `period`, and the highest value within one `period` after it.
pub fn first_revival_amplitude(times: &[f64], values: &[f64], period: f64) -> Option<f64> {
    let (dip_at, dip) = times
        .iter()
        .zip(values)
        .take_while(|(t, _)| **t <= period)
        .fold(None, |best: Option<(f64, f64)>, (&t, &v)| match best {
            Some((_, b)) if b <= v => best,
            _ => Some((t, v)),
        })?;
    let peak = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t > dip_at && **t <= dip_at + period)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    peak.is_finite().then_some(peak - dip)
}
