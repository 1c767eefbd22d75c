use thiserror::Error;

/// Errors raised by the simulation engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{field} {reason}")]
    InvalidParameter { field: &'static str, reason: &'static str },

    #[error("no dissipative steady state (gamma = 0)")]
    NoDissipativeSteadyState,

    #[error("no stable steady state: drift matrix is not Hurwitz")]
    NotHurwitz,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("cutoff {cutoff} too small for n_th = {n_th}: truncated tail mass {tail:.3e} exceeds 1e-6 (try cutoff >= {suggested})")]
    InsufficientCutoff {
        cutoff: usize,
        n_th: f64,
        tail: f64,
        suggested: usize,
    },

    #[error("increase cutoff: top Fock level population {population:.3e} exceeds 1e-6 at t = {time}")]
    CutoffExhausted { time: f64, population: f64 },

    #[error("step size {dt} too large: dt * max|eigenvalue| = {product:.3} exceeds 0.1")]
    StepTooLarge { dt: f64, product: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(&'static str),

    #[error("series of length {len} is shorter than the window {window}")]
    SeriesTooShort { len: usize, window: usize },

    #[error("wigner grid exceeds what the cutoff resolves (displaced-parity element modulus {modulus:.3e} > 1)")]
    WignerGridTooLarge { modulus: f64 },

    #[error("time samples must be strictly increasing (got {next} after {prev})")]
    NonIncreasingTime { prev: f64, next: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
