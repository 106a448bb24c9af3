use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid must have an even number of points, at least 8 (got {0})")]
    OddOrTooSmallGrid(usize),

    #[error("fractional exponent must be positive and finite (got {0})")]
    InvalidAlpha(f64),

    #[error("operator is singular at c = {c}, alpha = {alpha}: symbol vanishes on mode n = ±{mode}")]
    ResonantSpeed { c: f64, alpha: f64, mode: i64 },

    #[error("fields live on different grids ({left} vs {right} points)")]
    GridMismatch { left: usize, right: usize },

    #[error("sample vector has length {got}, grid expects {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("Green function requires alpha > 1/2 (got {0})")]
    AlphaTooSmall(f64),

    #[error("elliptic modulus must lie in [0, 1 - 1e-10] (got {0})")]
    ModulusOutOfRange(f64),

    #[error("wave speed {0} is outside the admissible range")]
    SpeedOutOfRange(f64),

    #[error("Lambda_2 has a pole at alpha_0; alpha = {0} is too close")]
    PoleAtAlpha0(f64),

    #[error("Petviashvili quotient denominator vanishes: |<w^2, w>| = {value:e} <= {threshold:e}")]
    VanishingDenominator { value: f64, threshold: f64 },

    #[error("wave is under-resolved: Fourier tail {tail:e} at the mode cutoff exceeds 1e-12")]
    UnderResolvedWave { tail: f64 },

    #[error("wave profile is not even (odd part {odd:e})")]
    WaveNotEven { odd: f64 },

    #[error("could not identify the {label} eigenpair (eigenvector correlation {correlation:.6})")]
    TaggingFailed { label: &'static str, correlation: f64 },

    #[error("no complex eigenvalue track in the sweep")]
    NoComplexTrack,

    #[error("no closed-form wave for alpha = {0}")]
    NoClosedForm(f64),

    #[error("empty parameter range")]
    EmptyRange,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),
}

pub type Result<T> = std::result::Result<T, Error>;
