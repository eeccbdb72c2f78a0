use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration {config:#b} has bits set above site {max_site}")]
    InvalidConfiguration { config: u64, max_site: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("ring of {sites} sites exceeds the cap of {cap} sites")]
    ResourceCap { sites: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid flip pattern {pattern:?}: {reason}")]
    InvalidPattern { pattern: String, reason: String },

    #[error("ground state is degenerate (gap {gap:.3e})")]
    DegenerateGroundState { gap: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("propagation failed: {0}")]
    Propagation(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("dense eigendecomposition capped at {cap} sites (got {sites}); use the sector or fft spectral-weight path")]
    DenseCap { sites: usize, cap: usize },

    #[error("state is not in the two-level regime: top weights {p1:.4} + {p2:.4} < {threshold}")]
    NotTwoLevel { p1: f64, p2: f64, threshold: f64 },

    #[error("singular parameter: denominator `{denominator}` = {value:.3e} at h = {field}")]
    SingularParameter {
        denominator: &'static str,
        value: f64,
        field: f64,
    },

    #[error("no interior maximum in window [{lo}, {hi}]: best value {value:.4} at the edge h = {at}")]
    Bracketing { lo: f64, hi: f64, at: f64, value: f64 },

    #[error("empty spectrum")]
    EmptySpectrum,

    #[error("out of range: {0}")]
    OutOfRange(String),
}

impl Error {
    /// True for failures caused by numerics (poles, convergence) rather than
    /// bad input or resource limits.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateGroundState { .. }
                | Error::Eigensolver(_)
                | Error::Propagation(_)
                | Error::NotTwoLevel { .. }
                | Error::SingularParameter { .. }
                | Error::Bracketing { .. }
        )
    }

    pub fn is_resource(&self) -> bool {
        matches!(self, Error::ResourceCap { .. } | Error::DenseCap { .. })
    }
}
