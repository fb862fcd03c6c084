use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("truncated tail mass {tail:.3e} exceeds the limit {limit:.1e}; raise the truncation")]
    TailMassTooLarge { tail: f64, limit: f64 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("state has zero norm")]
    ZeroVector,

    #[error("beam splitter output leaves the truncated space (lost probability {lost:.3e})")]
    TruncationLoss { lost: f64 },

    #[error("gain {gain} raised to photon number {n} overflows f64")]
    Overflow { gain: f64, n: usize },

    #[error("Hermite order {n} exceeds the supported maximum {max}")]
    HermiteOrderOutOfRange { n: usize, max: usize },

    #[error("pre- and post-selection are orthogonal (|overlap| = {overlap:.3e}); weak value undefined")]
    VanishingOverlap { overlap: f64 },

    #[error("measurement is not complete: max deviation from identity {deviation:.3e} (tolerance {tolerance:.1e})")]
    IncompletePom { deviation: f64, tolerance: f64 },

    #[error("observable is not Hermitian (max asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("success window [{lo}, {hi}] is not contained in the grid [{min}, {max}]")]
    WindowOutsideGrid { lo: f64, hi: f64, min: f64, max: f64 },

    #[error("gain {gain} is below sqrt(2); two clones cannot be extracted")]
    GainTooSmall { gain: f64 },

    #[error("outcome p = {p} lies outside the success window [{lo}, {hi}]")]
    OutsideWindow { p: f64, lo: f64, hi: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
