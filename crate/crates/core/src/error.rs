use thiserror::Error;

/// Errors raised by validation and calibration.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("K must be >= 2 (got {0})")]
    TooFewStreams(usize),
    #[error("rho out of range: expected 0 <= rho < 1, got {0}")]
    RhoOutOfRange(f64),
    #[error("mu must be positive and finite (got {0})")]
    NonPositiveMu(f64),
    #[error("signal set is not a subset of the {k} streams: index {index} out of range")]
    SignalOutOfRange { index: usize, k: usize },
    #[error("length mismatch: expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("rank {rank} out of range 1..={max}")]
    RankOutOfRange { rank: usize, max: usize },
    #[error("invalid SPRT configuration: {0}")]
    InvalidSprt(String),
    #[error(
        "Wald ASN under H0 is undefined for the one-sided SPRT (delta = 0); use asn_asymptotic"
    )]
    OneSidedWaldAsn,
    #[error("invalid error level {name} = {value}: must lie in (0, 1)")]
    InvalidLevel { name: &'static str, value: f64 },
    #[error("invalid rule bounds: {0}")]
    InvalidBounds(String),
    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),
    #[error("grid must be nonempty")]
    EmptyGrid,
    #[error("grid must be sorted in decreasing order")]
    UnsortedGrid,
    #[error("no trials to aggregate")]
    NoTrials,
}

pub type Result<T> = std::result::Result<T, Error>;
