//! State vectors: false vacuum preparation and translation-symmetric
//! superpositions of flip patterns.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::krylov;
use crate::lattice::{Ring, SpinConfig};
use crate::model::{build_hamiltonian, ModelSpec};
use crate::par;
use crate::{Error, Result, C64};

/// Longitudinal field used to prepare the false vacuum.
pub const PREP_FIELD: f64 = -0.01;

/// Rings up to this size prepare the vacuum by full diagonalization; larger
/// rings use restarted Lanczos.
pub const DENSE_GROUND_STATE_MAX_SITES: usize = 10;

const GROUND_STATE_TOL: f64 = 1e-10;
const DEGENERACY_GAP: f64 = 1e-10;

/// Complex amplitudes over the `2^L` spin configurations.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// Wrap and normalize raw amplitudes.
    pub fn normalized(mut amplitudes: Vec<C64>) -> Result<Self> {
        if !amplitudes.len().is_power_of_two() || amplitudes.len() < 8 {
            return Err(Error::DimensionMismatch {
                expected: amplitudes.len().next_power_of_two().max(8),
                actual: amplitudes.len(),
            });
        }
        let n = par::norm(&amplitudes);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidModel("state has zero or non-finite norm".into()));
        }
        par::scale(&mut amplitudes, 1.0 / n);
        Ok(StateVector { amplitudes })
    }

    pub(crate) fn from_amplitudes_unchecked(amplitudes: Vec<C64>) -> Self {
        StateVector { amplitudes }
    }

    pub fn basis(ring: Ring, config: SpinConfig) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); ring.dim()];
        amplitudes[config.index()] = C64::new(1.0, 0.0);
        StateVector { amplitudes }
    }

    pub fn all_up(ring: Ring) -> Self {
        Self::basis(ring, ring.all_up())
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn sites(&self) -> usize {
        self.amplitudes.len().trailing_zeros() as usize
    }

    pub fn norm(&self) -> f64 {
        par::norm(&self.amplitudes)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// All imaginary parts vanish (to `tol`).
    pub fn is_real(&self, tol: f64) -> bool {
        self.amplitudes.iter().all(|a| a.im.abs() <= tol)
    }

    /// Amplitudes permuted by a ring translation: the amplitude of `c` moves
    /// to `translate(c, shift)`.
    pub fn translated(&self, shift: isize) -> Result<Self> {
        let ring = Ring::new(self.sites())?;
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        for (c, a) in self.amplitudes.iter().enumerate() {
            out[ring.rotate(ring.config(c as u64)?, shift).index()] = *a;
        }
        Ok(StateVector { amplitudes: out })
    }
}

/// `⟨a|b⟩`.
pub fn overlap(a: &StateVector, b: &StateVector) -> Result<C64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(par::dot(&a.amplitudes, &b.amplitudes))
}

/// Ground state of `spec` with `h` replaced by [`PREP_FIELD`] and any bond
/// disorder removed. The all-up amplitude is made real and non-negative.
pub fn false_vacuum(spec: &ModelSpec) -> Result<StateVector> {
    let prep = spec
        .with_fields(spec.transverse_field, PREP_FIELD)
        .with_disorder(None);
    ground_state(&prep)
}

/// Ground state of an arbitrary clean model, phase-fixed like the vacuum.
pub fn ground_state(spec: &ModelSpec) -> Result<StateVector> {
    let op = build_hamiltonian(spec)?;
    let ring = op.ring();
    let all_up = ring.all_up().index();
    let vector: Vec<f64> = if ring.sites() <= DENSE_GROUND_STATE_MAX_SITES {
        let eig = op
            .to_dense()
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let values = eig.S().column_vector();
        let gap = values[1] - values[0];
        if gap < DEGENERACY_GAP {
            return Err(Error::DegenerateGroundState { gap });
        }
        eig.U().col(0).iter().copied().collect()
    } else {
        let mut start = vec![0.0; ring.dim()];
        start[all_up] = 1.0;
        let gs = krylov::ground_state(&op, &start, GROUND_STATE_TOL)?;
        if let Some(gap) = gs.gap_estimate {
            if gap < DEGENERACY_GAP {
                return Err(Error::DegenerateGroundState { gap });
            }
        }
        gs.vector
    };
    let amplitudes = fix_phase(vector, all_up);
    StateVector::normalized(amplitudes)
}

/// Flip the sign so that `reference` (or, failing that, the first
/// non-negligible entry) is positive.
pub(crate) fn fix_phase(mut v: Vec<f64>, reference: usize) -> Vec<C64> {
    let pivot = if v[reference].abs() > 1e-12 {
        reference
    } else {
        v.iter().position(|x| x.abs() > 1e-12).unwrap_or(reference)
    };
    if v[pivot] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v.into_iter().map(|x| C64::new(x, 0.0)).collect()
}

/// A set of offset sets; each lists the sites (relative to an anchor) flipped
/// down from all-up. Negative offsets are taken modulo `L`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlipPattern {
    sets: Vec<Vec<isize>>,
}

impl FlipPattern {
    pub fn new(sets: Vec<Vec<isize>>) -> Result<Self> {
        let pattern = FlipPattern { sets };
        if pattern.sets.is_empty() || pattern.sets.iter().any(|s| s.is_empty()) {
            return Err(Error::InvalidPattern {
                pattern: pattern.to_string(),
                reason: "every offset set must flip at least one spin".into(),
            });
        }
        Ok(pattern)
    }

    /// Contiguous bubble of `n` flipped spins.
    pub fn bubble(n: usize) -> Self {
        FlipPattern {
            sets: vec![(0..n.max(1) as isize).collect()],
        }
    }

    pub fn offsets(offsets: &[isize]) -> Result<Self> {
        Self::new(vec![offsets.to_vec()])
    }

    pub fn sets(&self) -> &[Vec<isize>] {
        &self.sets
    }

    /// Offset sets reduced onto the ring, each sorted.
    pub fn resolve(&self, ring: Ring) -> Result<Vec<Vec<usize>>> {
        let mut resolved: Vec<Vec<usize>> = Vec::with_capacity(self.sets.len());
        for set in &self.sets {
            let mut sites: Vec<usize> = set.iter().map(|&o| ring.site(o)).collect();
            sites.sort_unstable();
            let before = sites.len();
            sites.dedup();
            if sites.len() != before {
                return Err(Error::InvalidPattern {
                    pattern: self.to_string(),
                    reason: format!("offsets coincide modulo L = {}", ring.sites()),
                });
            }
            if resolved.contains(&sites) {
                return Err(Error::InvalidPattern {
                    pattern: self.to_string(),
                    reason: format!("offset sets coincide modulo L = {}", ring.sites()),
                });
            }
            resolved.push(sites);
        }
        Ok(resolved)
    }
}

impl fmt::Display for FlipPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |s: &Vec<isize>| s.iter().map(|o| o.to_string()).collect::<Vec<_>>().join(",");
        if self.sets.len() == 1 {
            let s = &self.sets[0];
            if !s.is_empty() && s.iter().enumerate().all(|(k, &o)| o == k as isize) {
                return write!(f, "bubble:{}", s.len());
            }
            return write!(f, "offsets:{}", join(s));
        }
        let parts: Vec<String> = self.sets.iter().map(|s| format!("({})", join(s))).collect();
        write!(f, "union:{}", parts.join("|"))
    }
}

pub const PATTERN_GRAMMAR: &str =
    "bubble:<n> | offsets:<o1>,<o2>,... | union:(<offsets>)|(<offsets>)...";

impl FromStr for FlipPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: &str| Error::InvalidPattern {
            pattern: s.to_string(),
            reason: format!("{reason}; expected {PATTERN_GRAMMAR}"),
        };
        let parse_list = |list: &str| -> Result<Vec<isize>> {
            list.split(',')
                .map(|x| x.trim().parse::<isize>().map_err(|_| bad("offsets must be integers")))
                .collect()
        };
        let (kind, body) = s.trim().split_once(':').ok_or_else(|| bad("missing ':'"))?;
        match kind.trim() {
            "bubble" => {
                let n: usize = body.trim().parse().map_err(|_| bad("bubble size must be a positive integer"))?;
                if n == 0 {
                    return Err(bad("bubble size must be a positive integer"));
                }
                Ok(FlipPattern::bubble(n))
            }
            "offsets" => FlipPattern::new(vec![parse_list(body)?]),
            "union" => {
                let sets = body
                    .split('|')
                    .map(|part| {
                        let part = part.trim();
                        let inner = part
                            .strip_prefix('(')
                            .and_then(|p| p.strip_suffix(')'))
                            .ok_or_else(|| bad("union members must be parenthesised"))?;
                        parse_list(inner)
                    })
                    .collect::<Result<Vec<_>>>()?;
                FlipPattern::new(sets)
            }
            _ => Err(bad("unknown pattern kind")),
        }
    }
}

impl Serialize for FlipPattern {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FlipPattern {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Equal-weight superposition of every translation of every offset set,
/// normalized by the computed norm.
pub fn symmetric_pattern_state(sites: usize, pattern: &FlipPattern) -> Result<StateVector> {
    let ring = Ring::new(sites)?;
    let sets = pattern.resolve(ring)?;
    let mut amplitudes = vec![C64::new(0.0, 0.0); ring.dim()];
    for set in &sets {
        for shift in 0..sites as isize {
            let c = ring.flip_down(set.iter().map(|&o| o as isize + shift));
            amplitudes[c.index()] += C64::new(1.0, 0.0);
        }
    }
    StateVector::normalized(amplitudes)
}

/// Initial state of a quench or reference state of a spectrum.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    FalseVacuum,
    AllUp,
    Pattern(FlipPattern),
}

impl InitialState {
    pub fn prepare(&self, spec: &ModelSpec) -> Result<StateVector> {
        match self {
            InitialState::FalseVacuum => false_vacuum(spec),
            InitialState::AllUp => Ok(StateVector::all_up(spec.ring()?)),
            InitialState::Pattern(p) => symmetric_pattern_state(spec.sites, p),
        }
    }
}

impl fmt::Display for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialState::FalseVacuum => f.write_str("fv"),
            InitialState::AllUp => f.write_str("all-up"),
            InitialState::Pattern(p) => write!(f, "pattern:{p}"),
        }
    }
}

impl FromStr for InitialState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "fv" | "vacuum" | "false-vacuum" => Ok(InitialState::FalseVacuum),
            "all-up" => Ok(InitialState::AllUp),
            other => {
                let body = other.strip_prefix("pattern:").unwrap_or(other);
                Ok(InitialState::Pattern(body.parse()?))
            }
        }
    }
}

impl Serialize for InitialState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for InitialState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InteractionKind;

    fn ring(l: usize) -> Ring {
        Ring::new(l).unwrap()
    }

    #[test]
    fn classical_vacuum_is_all_up() {
        for l in [6, 8, 11, 13] {
            let fv = false_vacuum(&ModelSpec::nearest_neighbor(l, 0.0, 0.67)).unwrap();
            assert_eq!(fv, StateVector::all_up(ring(l)));
            let op = build_hamiltonian(&ModelSpec::nearest_neighbor(l, 0.0, PREP_FIELD)).unwrap();
            let e = op.expectation(&fv).unwrap();
            assert!((e - (-(l as f64) + l as f64 * PREP_FIELD)).abs() < 1e-12);
        }
    }

    #[test]
    fn weak_field_vacuum_is_mostly_all_up() {
        let fv = false_vacuum(&ModelSpec::nearest_neighbor(8, 0.11, 0.67)).unwrap();
        let p = fv.amplitudes()[0xff];
        assert!(p.re > 0.0 && p.im == 0.0);
        assert!(p.norm_sqr() > 0.9);
        assert!((fv.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn strong_field_vacuum_is_dressed() {
        let fv = false_vacuum(&ModelSpec::nearest_neighbor(12, 0.8, 0.1)).unwrap();
        assert!((fv.norm() - 1.0).abs() < 1e-10);
        let r = ring(12);
        let m: f64 = fv
            .probabilities()
            .iter()
            .enumerate()
            .map(|(c, p)| p * r.magnetization(r.config(c as u64).unwrap()))
            .sum();
        assert!(m < 0.99 && m > 0.5, "m = {m}");
    }

    #[test]
    fn dense_and_lanczos_vacua_agree() {
        let spec = ModelSpec::nearest_neighbor(10, 0.5, 0.3);
        let dense = false_vacuum(&spec).unwrap();
        let op = build_hamiltonian(&spec.with_fields(0.5, PREP_FIELD)).unwrap();
        let mut start = vec![0.0; op.dim()];
        start[op.dim() - 1] = 1.0;
        let gs = krylov::ground_state(&op, &start, 1e-10).unwrap();
        let lanczos = StateVector::normalized(fix_phase(gs.vector, op.dim() - 1)).unwrap();
        let ov = overlap(&dense, &lanczos).unwrap();
        assert!((ov.norm() - 1.0).abs() < 1e-12);
        assert!(ov.re > 0.0);
    }

    #[test]
    fn vacuum_ignores_disorder_and_keeps_interaction() {
        let base = ModelSpec::power_law(8, 3.0, 0.2, 0.9);
        let disordered = ModelSpec::nearest_neighbor(8, 0.2, 0.9).with_disorder(Some(crate::model::DisorderSpec {
            sigma: 0.3,
            seed: 1,
            realization_index: 2,
        }));
        assert_eq!(
            false_vacuum(&disordered).unwrap(),
            false_vacuum(&ModelSpec::nearest_neighbor(8, 0.2, 0.0)).unwrap()
        );
        assert_ne!(
            false_vacuum(&base).unwrap(),
            false_vacuum(&ModelSpec::nearest_neighbor(8, 0.2, 0.0)).unwrap()
        );
        assert!(matches!(base.interaction, InteractionKind::PowerLaw { .. }));
    }

    #[test]
    fn three_bubble_state() {
        let s3 = symmetric_pattern_state(8, &FlipPattern::bubble(3)).unwrap();
        assert!((s3.norm() - 1.0).abs() < 1e-14);
        let amp = 1.0 / 8f64.sqrt();
        let support: Vec<usize> = (0..256).filter(|&c| s3.amplitudes()[c].norm() > 0.0).collect();
        assert_eq!(support.len(), 8);
        for c in support {
            assert!((s3.amplitudes()[c].re - amp).abs() < 1e-15);
            assert_eq!((c as u32).count_ones(), 5);
        }
        assert!(s3.amplitudes()[0xff & !0b111].re > 0.0);
        for s in 1..8 {
            assert_eq!(s3.translated(s).unwrap(), s3);
        }
    }

    #[test]
    fn single_flip_state() {
        let s1 = symmetric_pattern_state(8, &FlipPattern::offsets(&[0]).unwrap()).unwrap();
        for i in 0..8 {
            assert!((s1.amplitudes()[0xff & !(1 << i)].re - 1.0 / 8f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn two_bubble_resonant_state() {
        let p: FlipPattern = "union:(0,1,2,4,5)|(0,1,2,-3,-2)".parse().unwrap();
        let s = symmetric_pattern_state(8, &p).unwrap();
        let support: Vec<usize> = (0..256).filter(|&c| s.amplitudes()[c].norm() > 0.0).collect();
        assert_eq!(support.len(), 16);
        for c in support {
            assert!((s.amplitudes()[c].re - 1.0 / 16f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn stabilized_pattern_uses_computed_norm() {
        // {0, 4} on an 8-ring is invariant under a shift by 4
        let s = symmetric_pattern_state(8, &FlipPattern::offsets(&[0, 4]).unwrap()).unwrap();
        let support: Vec<usize> = (0..256).filter(|&c| s.amplitudes()[c].norm() > 0.0).collect();
        assert_eq!(support.len(), 4);
        assert!((s.norm() - 1.0).abs() < 1e-14);
        assert!((s.amplitudes()[support[0]].re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn overlaps() {
        let r = ring(8);
        let s2 = symmetric_pattern_state(8, &FlipPattern::bubble(2)).unwrap();
        let s2p = symmetric_pattern_state(8, &"offsets:0,2".parse().unwrap()).unwrap();
        assert_eq!(overlap(&s2, &s2p).unwrap().norm(), 0.0);
        assert!((overlap(&s2, &s2).unwrap().re - 1.0).abs() < 1e-14);
        let s3 = symmetric_pattern_state(8, &FlipPattern::bubble(3)).unwrap();
        let fv = false_vacuum(&ModelSpec::nearest_neighbor(8, 0.0, 0.6)).unwrap();
        assert_eq!(overlap(&s3, &fv).unwrap().norm(), 0.0);
        let small = StateVector::all_up(ring(4));
        assert!(matches!(overlap(&small, &StateVector::all_up(r)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn pattern_grammar() {
        assert_eq!("bubble:3".parse::<FlipPattern>().unwrap(), FlipPattern::bubble(3));
        assert_eq!(
            "offsets:0,2".parse::<FlipPattern>().unwrap().sets(),
            &[vec![0, 2]]
        );
        let u: FlipPattern = "union:(0,1,2,4,5)|(0,1,2,-3,-2)".parse().unwrap();
        assert_eq!(u.sets().len(), 2);
        for text in ["bubble:3", "offsets:0,2", "union:(0,1,2,4,5)|(0,1,2,-3,-2)"] {
            assert_eq!(text.parse::<FlipPattern>().unwrap().to_string(), text);
        }
        for bad in ["bubble:0", "blob:3", "offsets:", "offsets:a", "union:0,1|(2)", "bubble"] {
            let err = bad.parse::<FlipPattern>().unwrap_err();
            assert!(err.to_string().contains("bubble:<n>"), "{bad}: {err}");
        }
        // duplicates modulo L
        let dup: FlipPattern = "offsets:0,8".parse().unwrap();
        assert!(symmetric_pattern_state(8, &dup).is_err());
        let same: FlipPattern = "union:(0,1,2,4,5)|(0,1,2,-4,-3)".parse().unwrap();
        assert!(symmetric_pattern_state(8, &same).is_err());
    }

    #[test]
    fn initial_state_grammar() {
        assert_eq!("fv".parse::<InitialState>().unwrap(), InitialState::FalseVacuum);
        assert_eq!("all-up".parse::<InitialState>().unwrap(), InitialState::AllUp);
        assert_eq!(
            "pattern:bubble:3".parse::<InitialState>().unwrap(),
            InitialState::Pattern(FlipPattern::bubble(3))
        );
        assert_eq!(InitialState::Pattern(FlipPattern::bubble(3)).to_string(), "pattern:bubble:3");
    }
}
