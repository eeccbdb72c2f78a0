use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tlfim::analytics::{self, BubblePrediction, Rational64};
use tlfim::dynamics::{self, TimeGrid};
use tlfim::effective;
use tlfim::model::{build_hamiltonian, InteractionKind, ModelSpec};
use tlfim::scan::{self, Axis, EnsembleSpec, Metric, ScanGrid};
use tlfim::spectra::{self, SpectrumMethod, SpectrumSettings};
use tlfim::states::InitialState;

use crate::config::{self, ConfigDoc};
use crate::CliError;

pub struct Context<'a> {
    pub spec: ModelSpec,
    pub doc: &'a ConfigDoc,
    pub out: Option<PathBuf>,
    pub jobs: usize,
}

impl Context<'_> {
    /// Config options apply only when they were written for `command`.
    fn options<T: Serialize + serde::de::DeserializeOwned>(&self, command: &str, flags: &T) -> Result<T, CliError> {
        match self.doc.command.as_deref() {
            Some(c) if c != command => config::resolve_options(&ConfigDoc::default(), flags),
            _ => config::resolve_options(self.doc, flags),
        }
    }

    fn writer(&self) -> Result<Box<dyn Write>, CliError> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    /// `<out><suffix>`, when writing to a file.
    fn sidecar(&self, suffix: &str) -> Option<PathBuf> {
        self.out.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(suffix);
            PathBuf::from(s)
        })
    }

    fn write_json(&self, command: &str, options: &impl Serialize, body: Value) -> Result<(), CliError> {
        let mut doc = serde_json::Map::new();
        doc.insert("provenance".into(), config::provenance(command, &self.spec, options)?);
        if let Value::Object(fields) = body {
            doc.extend(fields);
        }
        let mut w = self.writer()?;
        serde_json::to_writer_pretty(&mut w, &doc)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct EvolveOpts {
    /// fv, all-up or pattern:<grammar> (bubble:n, offsets:a,b, union:(..)|(..)).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<InitialState>,
    /// Final time.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tmax: Option<f64>,
    /// Sampling interval.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Propagator error tolerance.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

pub fn evolve(ctx: &Context, flags: EvolveOpts) -> Result<(), CliError> {
    let o = ctx.options("evolve", &flags)?;
    let o = EvolveOpts {
        state: Some(o.state.unwrap_or(InitialState::FalseVacuum)),
        tmax: Some(o.tmax.unwrap_or(dynamics::DEFAULT_WINDOW)),
        dt: Some(o.dt.unwrap_or(dynamics::DEFAULT_DT)),
        tol: Some(o.tol.unwrap_or(dynamics::DEFAULT_TOL)),
    };
    let (state, tmax, dt, tol) = (o.state.clone().unwrap(), o.tmax.unwrap(), o.dt.unwrap(), o.tol.unwrap());
    let grid = TimeGrid::new(tmax, dt)?;
    let psi = state.prepare(&ctx.spec)?;
    let op = build_hamiltonian(&ctx.spec)?;
    let record = dynamics::quench(&op, &psi, grid, &dynamics::standard_observables(ctx.spec.sites), tol)?;
    let header = [config::header_line("evolve", &ctx.spec, &o)?];
    let mut w = ctx.writer()?;
    dynamics::write_csv(&mut w, &record, &header)?;
    w.flush()?;
    Ok(())
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    /// Minimum return probability over a time window.
    Minret,
    /// Sub-leading overlap weight.
    Psub,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScanOpts {
    /// h axis as min:max:steps (or one value).
    #[arg(long = "h", allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<Axis>,
    /// g axis as min:max:steps (or one value).
    #[arg(long = "g", allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<Axis>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricKind>,
    /// Time window of the minret metric.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    /// Sampling interval of the minret metric.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// dense, fft, sector or auto (psub only).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<SpectrumMethod>,
    /// Record wall time per point (the output then differs between runs).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub timing: bool,
}

const MINRET_DT: f64 = 0.5;

fn axes(ctx: &Context, h: Option<Axis>, g: Option<Axis>) -> (Axis, Axis) {
    (
        h.unwrap_or(Axis::point(ctx.spec.longitudinal_field)),
        g.unwrap_or(Axis::point(ctx.spec.transverse_field)),
    )
}

fn run_grid(ctx: &Context, grid: &ScanGrid, header: String, timing: bool) -> Result<(), CliError> {
    let result = scan::grid_scan(grid, ctx.jobs)?;
    let mut w = ctx.writer()?;
    result.write_csv(&mut w, &[header], timing)?;
    w.flush()?;
    if let Some(path) = ctx.sidecar(".json") {
        result.write_sidecar(BufWriter::new(File::create(path)?))?;
    }
    if let Some(best) = result.best() {
        eprintln!(
            "max {} = {:.6} at h = {}, g = {} ({} of {} points failed)",
            best.metric,
            best.value,
            best.h,
            best.g,
            result.failures(),
            result.rows.len()
        );
    }
    Ok(())
}

pub fn scan(ctx: &Context, flags: ScanOpts) -> Result<(), CliError> {
    let o = ctx.options("scan", &flags)?;
    let (h, g) = axes(ctx, o.h, o.g);
    let kind = o.metric.unwrap_or(MetricKind::Psub);
    let o = match kind {
        MetricKind::Minret => ScanOpts {
            h: Some(h),
            g: Some(g),
            metric: Some(kind),
            window: Some(o.window.unwrap_or(dynamics::DEFAULT_WINDOW)),
            dt: Some(o.dt.unwrap_or(MINRET_DT)),
            method: None,
            timing: o.timing,
        },
        MetricKind::Psub => ScanOpts {
            h: Some(h),
            g: Some(g),
            metric: Some(kind),
            window: None,
            dt: None,
            method: Some(o.method.unwrap_or(SpectrumMethod::Auto)),
            timing: o.timing,
        },
    };
    let metric = match kind {
        MetricKind::Minret => Metric::MinReturn {
            window: o.window.unwrap(),
            dt: o.dt.unwrap(),
        },
        MetricKind::Psub => Metric::SubLeading {
            method: o.method.unwrap(),
        },
    };
    let grid = ScanGrid::new(ctx.spec.clone(), h, g, metric)?;
    run_grid(ctx, &grid, config::header_line("scan", &ctx.spec, &o)?, o.timing)
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct OrbitalOpts {
    /// Reference state, e.g. pattern:bubble:3.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<InitialState>,
    #[arg(long = "h", allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<Axis>,
    #[arg(long = "g", allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<Axis>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<SpectrumMethod>,
    #[arg(long)]
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub timing: bool,
}

pub fn orbital(ctx: &Context, flags: OrbitalOpts) -> Result<(), CliError> {
    let o = ctx.options("orbital", &flags)?;
    let reference = o
        .reference
        .clone()
        .ok_or_else(|| CliError::Usage("orbital needs --reference, e.g. pattern:bubble:3".into()))?;
    let (h, g) = axes(ctx, o.h, o.g);
    let method = o.method.unwrap_or(SpectrumMethod::Auto);
    let o = OrbitalOpts {
        reference: Some(reference.clone()),
        h: Some(h),
        g: Some(g),
        method: Some(method),
        timing: o.timing,
    };
    let grid = ScanGrid::new(ctx.spec.clone(), h, g, Metric::SubLeading { method })?.with_reference(reference);
    run_grid(ctx, &grid, config::header_line("orbital", &ctx.spec, &o)?, o.timing)
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct SpectrumOpts {
    /// fv, all-up or pattern:<grammar>.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<InitialState>,
    /// dense, fft, sector or auto.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<SpectrumMethod>,
    /// Record length of the fft method.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fft_tmax: Option<f64>,
    /// Sampling interval of the fft method.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fft_dt: Option<f64>,
}

pub fn spectrum(ctx: &Context, flags: SpectrumOpts) -> Result<(), CliError> {
    let o = ctx.options("spectrum", &flags)?;
    let state = o.state.clone().unwrap_or(InitialState::FalseVacuum);
    let psi = state.prepare(&ctx.spec)?;
    let method = o.method.unwrap_or(SpectrumMethod::Auto).resolve(&ctx.spec, &psi);
    let op = build_hamiltonian(&ctx.spec)?;
    let (fft_tmax, fft_dt) = match method {
        SpectrumMethod::Fft => (
            Some(o.fft_tmax.unwrap_or_else(|| spectra::default_fft_t_max(&ctx.spec))),
            Some(o.fft_dt.unwrap_or_else(|| spectra::default_fft_dt(&op))),
        ),
        _ => (None, None),
    };
    let o = SpectrumOpts {
        state: Some(state),
        method: Some(method),
        fft_tmax,
        fft_dt,
    };
    let settings = SpectrumSettings { fft_t_max: fft_tmax, fft_dt };
    let outcome = spectra::compute_spectrum(&ctx.spec, &op, &psi, method, settings)?;
    let mut header = vec![config::header_line("spectrum", &ctx.spec, &o)?];
    if let Some(warning) = &outcome.warning {
        eprintln!("warning: {warning}");
        header.push(format!("warning: {warning}"));
    }
    let fit = spectra::two_level_fit(&outcome.spectrum).ok();
    let mut w = ctx.writer()?;
    outcome.spectrum.write_csv(&mut w, &header)?;
    if let Some(fit) = &fit {
        let body = json!({ "two_level_fit": fit, "period": fit.period() });
        match ctx.sidecar(".fit.json") {
            Some(path) => {
                let mut f = BufWriter::new(File::create(path)?);
                serde_json::to_writer_pretty(&mut f, &body)?;
                writeln!(f)?;
            }
            None => writeln!(w, "# two_level_fit {body}")?,
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct SwtOpts {
    /// Also report the earlier model without self-energy and without √L.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub legacy: bool,
}

pub fn swt(ctx: &Context, flags: SwtOpts) -> Result<(), CliError> {
    let o = ctx.options("swt", &flags)?;
    let spec = &ctx.spec;
    if !matches!(spec.interaction, InteractionKind::NearestNeighbor) || spec.disorder.is_some() {
        return Err(CliError::Usage(
            "swt describes the clean nearest-neighbour model only".into(),
        ));
    }
    // the closed form is written in units of J
    let (h, g) = (spec.longitudinal_field / spec.coupling, spec.transverse_field / spec.coupling);
    let model = effective::effective_two_level(spec.sites, h, g)?;
    let period = effective::PeriodPrediction::of(&model);
    let mut body = json!({
        "L": spec.sites,
        "h": h,
        "g": g,
        "kappa": effective::kappa(h)?,
        "e0": model.e0,
        "delta": model.delta,
        "coupling": model.coupling,
        "diag2": model.diag2,
        "matrix": model.matrix(),
        "eigenvalues": model.eigenvalues(),
        "gap": model.gap(),
        "max_transfer": model.max_transfer(),
        "period": period.resonant,
        "period_two_level": period.two_level,
        "resonant_field": effective::resonant_field(spec.sites, g).ok(),
    });
    if o.legacy {
        let legacy = effective::legacy_two_level(spec.sites, h, g)?;
        let p = effective::PeriodPrediction::of(&legacy);
        body["legacy"] = json!({
            "model": legacy,
            "period": p.resonant,
            "period_two_level": p.two_level,
        });
    }
    ctx.write_json("swt", &o, body)
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct PredictOpts {
    /// Bubble size.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Single correlator distance (all distances if absent).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
}

fn rational(x: Rational64) -> Value {
    json!({ "exact": x.to_string(), "value": analytics::to_f64(x) })
}

pub fn predict(ctx: &Context, flags: PredictOpts) -> Result<(), CliError> {
    let o = ctx.options("predict", &flags)?;
    let n = o.n.ok_or_else(|| CliError::Usage("predict needs --n".into()))?;
    let b = BubblePrediction::new(ctx.spec.sites, n)?;
    let distances: Vec<usize> = match o.r {
        Some(r) => vec![r],
        None => (1..=ctx.spec.sites / 2).collect(),
    };
    let mut correlators = Vec::new();
    for r in distances {
        let c = b.correlator(r)?;
        let mut entry = rational(c);
        entry["r"] = json!(r);
        entry["opposite_pairs"] = json!(b.opposite_pairs(r)?);
        correlators.push(entry);
    }
    let body = json!({
        "L": ctx.spec.sites,
        "n": n,
        "magnetization": rational(b.magnetization()),
        "correlators": correlators,
    });
    ctx.write_json("predict", &o, body)
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct DisorderOpts {
    /// Bond disorder strength in units of J.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Number of realizations (required).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub realizations: Option<usize>,
    /// Base seed; realization k uses (seed, k).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Initial state, prepared on the clean model.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<InitialState>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tmax: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

pub fn disorder(ctx: &Context, flags: DisorderOpts) -> Result<(), CliError> {
    let o = ctx.options("disorder", &flags)?;
    let realizations = o
        .realizations
        .ok_or_else(|| CliError::Usage("disorder needs --realizations".into()))?;
    let o = DisorderOpts {
        sigma: Some(o.sigma.or(ctx.spec.disorder.map(|d| d.sigma)).unwrap_or(0.0)),
        realizations: Some(realizations),
        seed: Some(o.seed.or(ctx.spec.disorder.map(|d| d.seed)).unwrap_or(0)),
        state: Some(o.state.unwrap_or(InitialState::FalseVacuum)),
        tmax: Some(o.tmax.unwrap_or(dynamics::DEFAULT_WINDOW)),
        dt: Some(o.dt.unwrap_or(dynamics::DEFAULT_DT)),
        tol: Some(o.tol.unwrap_or(dynamics::DEFAULT_TOL)),
    };
    let ensemble = EnsembleSpec::new(o.sigma.unwrap(), realizations, o.seed.unwrap())?;
    let grid = TimeGrid::new(o.tmax.unwrap(), o.dt.unwrap())?;
    let series = scan::disorder_ensemble(
        &ctx.spec,
        &ensemble,
        o.state.as_ref().unwrap(),
        grid,
        &[dynamics::Observable::Magnetization],
        o.tol.unwrap(),
        ctx.jobs,
    )?;
    let mut header = vec![
        config::header_line("disorder", &ctx.spec, &o)?,
        format!("realizations completed: {}, failed: {}", series.completed, series.failures.len()),
    ];
    for f in &series.failures {
        header.push(format!("realization {} failed: {}", f.index, f.message));
    }
    let mut w = ctx.writer()?;
    series.write_csv(&mut w, &header)?;
    w.flush()?;
    Ok(())
}
