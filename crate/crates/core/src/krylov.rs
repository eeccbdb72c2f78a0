//! Lanczos machinery shared by the ground-state solver and the time
//! propagator.
//!
//! All bases are built with full reorthogonalization.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::model::SparseOperator;
use crate::par::{self, Amplitude};
use crate::{Error, Result, C64};

/// Orthonormal Krylov basis `V` with `VᴴHV = T` tridiagonal.
pub(crate) struct Lanczos<T> {
    pub vectors: Vec<Vec<T>>,
    pub alpha: Vec<f64>,
    /// `beta[k]` couples `v_k` and `v_{k+1}`; the last entry is the norm of
    /// the residual that would start the next vector.
    pub beta: Vec<f64>,
    /// The Krylov space is invariant under `H` (last residual negligible).
    pub closed: bool,
    pending: Option<Vec<T>>,
}

impl<T: Amplitude> Lanczos<T> {
    /// Build up to `max_dim` vectors from `start` (normalized internally).
    pub fn build(op: &SparseOperator, start: &[T], max_dim: usize) -> Result<Self> {
        let start_norm = par::norm(start);
        if start_norm == 0.0 || !start_norm.is_finite() {
            return Err(Error::Propagation("cannot build a Krylov space from a zero vector".into()));
        }
        let mut v0 = start.to_vec();
        par::scale(&mut v0, 1.0 / start_norm);
        let mut basis = Lanczos {
            vectors: Vec::with_capacity(max_dim),
            alpha: Vec::with_capacity(max_dim),
            beta: Vec::with_capacity(max_dim),
            closed: false,
            pending: Some(v0),
        };
        basis.extend(op, max_dim)?;
        Ok(basis)
    }

    /// Continue the recursion until the basis holds `max_dim` vectors or
    /// closes.
    pub fn extend(&mut self, op: &SparseOperator, max_dim: usize) -> Result<()> {
        let breakdown = 1e-12 * op.norm_bound().max(1.0);
        while self.dim() < max_dim && !self.closed {
            let Some(v) = self.pending.take() else { break };
            self.vectors.push(v);
            let k = self.vectors.len() - 1;
            let mut w = vec![T::zero(); op.dim()];
            op.apply_into(&self.vectors[k], &mut w)?;
            let a = par::dot(&self.vectors[k], &w).real();
            self.alpha.push(a);
            par::sub_scaled(&mut w, T::from_real(a), &self.vectors[k]);
            if k > 0 {
                par::sub_scaled(&mut w, T::from_real(self.beta[k - 1]), &self.vectors[k - 1]);
            }
            // twice is enough
            for _ in 0..2 {
                for v in &self.vectors {
                    let c = par::dot(v, &w);
                    par::sub_scaled(&mut w, c, v);
                }
            }
            let b = par::norm(&w);
            self.beta.push(b);
            if b < breakdown {
                self.closed = true;
            } else {
                par::scale(&mut w, 1.0 / b);
                self.pending = Some(w);
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn residual_beta(&self) -> f64 {
        if self.closed {
            0.0
        } else {
            *self.beta.last().unwrap_or(&0.0)
        }
    }

    pub fn tridiagonal_eigen(&self) -> SymmetricEigen<f64, nalgebra::Dyn> {
        let m = self.dim();
        let mut t = DMatrix::<f64>::zeros(m, m);
        for k in 0..m {
            t[(k, k)] = self.alpha[k];
            if k + 1 < m {
                t[(k, k + 1)] = self.beta[k];
                t[(k + 1, k)] = self.beta[k];
            }
        }
        SymmetricEigen::new(t)
    }

    /// `Σ_k coeffs[k]·v_k`.
    pub fn combine(&self, coeffs: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.vectors[0].len()];
        for (v, &c) in self.vectors.iter().zip(coeffs) {
            par::add_scaled(&mut out, c, v);
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct GroundState {
    pub energy: f64,
    pub vector: Vec<f64>,
    /// `‖Hx − Ex‖`.
    pub residual: f64,
    /// Ritz gap from the first Lanczos cycle, within the symmetry sector of the
    /// start vector. `None` when the start vector was already an eigenvector.
    pub gap_estimate: Option<f64>,
}

/// Restarted Lanczos for the lowest eigenpair reachable from `start`.
pub fn ground_state(op: &SparseOperator, start: &[f64], tol: f64) -> Result<GroundState> {
    const CYCLE: usize = 60;
    const MAX_CYCLES: usize = 400;
    let mut x = start.to_vec();
    let mut gap_estimate = None;
    let mut hx = vec![0.0; x.len()];
    for cycle in 0..MAX_CYCLES {
        let basis = Lanczos::build(op, &x, CYCLE.min(x.len()))?;
        let eig = basis.tridiagonal_eigen();
        let order = ascending(eig.eigenvalues.as_slice());
        let low = order[0];
        if cycle == 0 && order.len() > 1 {
            gap_estimate = Some(eig.eigenvalues[order[1]] - eig.eigenvalues[low]);
        }
        let y: Vec<f64> = eig.eigenvectors.column(low).iter().copied().collect();
        x = basis.combine(&y);
        let n = par::norm(&x);
        par::scale(&mut x, 1.0 / n);
        op.apply_into(&x, &mut hx)?;
        let energy = par::dot(&x, &hx);
        par::sub_scaled(&mut hx, energy, &x);
        let residual = par::norm(&hx);
        if residual <= tol || (basis.closed && residual <= 1e3 * tol.max(1e-13)) {
            return Ok(GroundState {
                energy,
                vector: x,
                residual,
                gap_estimate,
            });
        }
    }
    Err(Error::Eigensolver(format!(
        "ground-state Lanczos did not reach residual {tol:.1e} in {MAX_CYCLES} cycles"
    )))
}

fn ascending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    order
}

#[derive(Clone, Copy, Debug)]
pub struct PropagatorOptions {
    /// Bound on `‖ψ(t) − e^{−iHt}ψ₀‖` over the whole run.
    pub tol: f64,
    pub max_dim: usize,
    pub max_steps: usize,
}

impl Default for PropagatorOptions {
    fn default() -> Self {
        PropagatorOptions {
            tol: 1e-8,
            max_dim: 30,
            max_steps: 10_000_000,
        }
    }
}

impl PropagatorOptions {
    pub fn with_tol(tol: f64) -> Self {
        PropagatorOptions {
            tol,
            ..Default::default()
        }
    }
}

/// Local error estimates are heuristics; spend only this fraction of `tol`.
const SAFETY: f64 = 0.05;

/// Receives the propagated state at each sample time.
pub(crate) trait Sink {
    /// Samples at `t = 0`, before any Krylov step.
    fn initial(&mut self, index: usize, psi: &[C64]) -> Result<()>;
    /// Samples inside one step: `ψ(t_index) = Σ_k coeffs[k]·basis.vectors[k]`.
    fn step(&mut self, basis: &Lanczos<C64>, samples: &[(usize, Vec<C64>)]) -> Result<()>;
}

struct StateSink<F>(F);

impl<F: FnMut(usize, &[C64]) -> Result<()>> Sink for StateSink<F> {
    fn initial(&mut self, index: usize, psi: &[C64]) -> Result<()> {
        (self.0)(index, psi)
    }

    fn step(&mut self, basis: &Lanczos<C64>, samples: &[(usize, Vec<C64>)]) -> Result<()> {
        for (index, y) in samples {
            (self.0)(*index, &basis.combine(y))?;
        }
        Ok(())
    }
}

/// Adaptive Lanczos propagation of `ψ₀` through `times`, calling `visit` with
/// `e^{−iHt}ψ₀` at each. Times must be sorted by increasing `|t|` and share a
/// sign. Samples inside one Krylov step are produced from the same basis.
pub fn propagate<F>(op: &SparseOperator, psi0: &[C64], times: &[f64], opts: PropagatorOptions, visit: F) -> Result<()>
where
    F: FnMut(usize, &[C64]) -> Result<()>,
{
    drive(op, psi0, times, opts, &mut StateSink(visit))
}

/// Bilinear functional of the propagated state evaluated in the Krylov
/// coordinates of each step.
struct OverlapSink<'a> {
    bra: &'a [C64],
    doubled: bool,
    out: Vec<C64>,
}

impl Sink for OverlapSink<'_> {
    fn initial(&mut self, index: usize, psi: &[C64]) -> Result<()> {
        self.out[index] = if self.doubled {
            psi.iter().map(|a| a * a).sum()
        } else {
            par::dot(self.bra, psi)
        };
        Ok(())
    }

    fn step(&mut self, basis: &Lanczos<C64>, samples: &[(usize, Vec<C64>)]) -> Result<()> {
        let m = basis.dim();
        if self.doubled {
            // Gram matrix without conjugation: Σ_c v_i[c]·v_j[c]
            let mut gram = vec![C64::new(0.0, 0.0); m * m];
            for i in 0..m {
                let conj_i: Vec<C64> = basis.vectors[i].iter().map(|a| a.conj()).collect();
                for j in 0..=i {
                    let g = par::dot(&conj_i, &basis.vectors[j]);
                    gram[i * m + j] = g;
                    gram[j * m + i] = g;
                }
            }
            for (index, y) in samples {
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..m {
                    let row: C64 = (0..m).map(|j| gram[i * m + j] * y[j]).sum();
                    acc += y[i] * row;
                }
                self.out[*index] = acc;
            }
        } else {
            let proj: Vec<C64> = basis.vectors.iter().map(|v| par::dot(self.bra, v)).collect();
            for (index, y) in samples {
                self.out[*index] = proj.iter().zip(y).map(|(p, c)| p * c).sum();
            }
        }
        Ok(())
    }
}

/// `⟨ψ₀|e^{−iHt}|ψ₀⟩` at each of `times`.
pub fn loschmidt(op: &SparseOperator, psi0: &[C64], times: &[f64], opts: PropagatorOptions) -> Result<Vec<C64>> {
    let mut sink = OverlapSink {
        bra: psi0,
        doubled: false,
        out: vec![C64::new(0.0, 0.0); times.len()],
    };
    drive(op, psi0, times, opts, &mut sink)?;
    Ok(sink.out)
}

/// `G(2t)` at each of `times` for a real `ψ₀`, using
/// `⟨ψ₀|e^{−2iHt}|ψ₀⟩ = Σ_c ψ(t)_c²` (valid because `H` is real symmetric).
/// Halves the propagation time.
pub fn loschmidt_doubled(op: &SparseOperator, psi0: &[C64], times: &[f64], opts: PropagatorOptions) -> Result<Vec<C64>> {
    if psi0.iter().any(|a| a.im != 0.0) {
        return Err(Error::Propagation("time doubling needs a real initial state".into()));
    }
    let mut sink = OverlapSink {
        bra: psi0,
        doubled: true,
        out: vec![C64::new(0.0, 0.0); times.len()],
    };
    drive(op, psi0, times, opts, &mut sink)?;
    Ok(sink.out)
}

fn drive<S: Sink>(op: &SparseOperator, psi0: &[C64], times: &[f64], opts: PropagatorOptions, sink: &mut S) -> Result<()> {
    if psi0.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            actual: psi0.len(),
        });
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Propagation(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let Some(&last) = times.last() else {
        return Ok(());
    };
    let direction = if times.iter().any(|&t| t < 0.0) { -1.0 } else { 1.0 };
    let span: Vec<f64> = times.iter().map(|&t| t * direction).collect();
    if span.iter().any(|&s| s < 0.0 || !s.is_finite()) || span.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidGrid(
            "sample times must be monotone in |t| and share a sign".into(),
        ));
    }
    let total = last.abs();
    let rate = SAFETY * opts.tol / total.max(1.0);
    let scale = op.norm_bound().max(1e-300);

    let mut next = 0;
    while next < span.len() && span[next] == 0.0 {
        sink.initial(next, psi0)?;
        next += 1;
    }
    let mut phi = psi0.to_vec();
    let mut now = 0.0;
    let mut steps = 0;
    let mut tau_guess = 1.0 / scale;
    let mut samples = Vec::new();
    while next < span.len() {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Propagation(format!(
                "exceeded {} Krylov steps before t = {}",
                opts.max_steps, times[next]
            )));
        }
        let norm0 = par::norm(&phi);
        let basis = Lanczos::build(op, &phi, opts.max_dim.min(phi.len()))?;
        let eig = basis.tridiagonal_eigen();
        let m = basis.dim();
        let beta = basis.residual_beta();
        let theta: Vec<f64> = eig.eigenvalues.iter().map(|e| e * direction).collect();
        let first: Vec<f64> = (0..m).map(|j| eig.eigenvectors[(0, j)]).collect();
        let lastrow: Vec<f64> = (0..m).map(|j| eig.eigenvectors[(m - 1, j)]).collect();
        let coeffs = |tau: f64| -> Vec<C64> {
            let phases: Vec<C64> = (0..m)
                .map(|j| C64::from_polar(first[j] * norm0, -theta[j] * tau))
                .collect();
            (0..m)
                .map(|k| (0..m).map(|j| phases[j] * eig.eigenvectors[(k, j)]).sum())
                .collect()
        };
        let error = |tau: f64| -> f64 {
            let s: C64 = (0..m)
                .map(|j| C64::from_polar(lastrow[j] * first[j], -theta[j] * tau))
                .sum();
            beta * norm0 * s.norm()
        };
        let remaining = span[span.len() - 1] - now;
        let ok = |tau: f64| error(tau) <= rate * tau;
        let tau = if beta == 0.0 || ok(remaining) {
            remaining
        } else {
            let mut tau = tau_guess.min(remaining);
            while !ok(tau) {
                tau *= 0.5;
                if tau < 1e-14 * total.max(1.0) {
                    return Err(Error::Propagation(format!(
                        "Krylov step collapsed at t = {}",
                        now * direction
                    )));
                }
            }
            while tau * 2.0 < remaining && ok(tau * 2.0) {
                tau *= 2.0;
            }
            let (mut lo, mut hi) = (tau, (tau * 2.0).min(remaining));
            for _ in 0..12 {
                let mid = 0.5 * (lo + hi);
                if ok(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        tau_guess = tau;
        let end = now + tau;
        samples.clear();
        while next < span.len() && span[next] <= end {
            samples.push((next, coeffs(span[next] - now)));
            next += 1;
        }
        if !samples.is_empty() {
            sink.step(&basis, &samples)?;
        }
        if next < span.len() {
            phi = basis.combine(&coeffs(tau));
        }
        now = end;
    }
    Ok(())
}

/// `e^{−iHt}ψ₀` for a single time.
pub fn evolve(op: &SparseOperator, psi0: &[C64], t: f64, opts: PropagatorOptions) -> Result<Vec<C64>> {
    let mut out = None;
    propagate(op, psi0, &[t], opts, |_, psi| {
        out = Some(psi.to_vec());
        Ok(())
    })?;
    Ok(out.expect("single sample visited"))
}
