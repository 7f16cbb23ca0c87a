//! Error type shared by every stage of the pipeline.

use thiserror::Error;

/// Unified error for series arithmetic, averaging, classification,
/// asymptotics, and simulation.
#[derive(Debug, Error)]
pub enum Error {
    /// Reciprocal of a series whose constant term vanishes.
    #[error("series reciprocal: constant term {value:e} is below threshold")]
    ZeroConstantTerm { value: f64 },

    /// A mean that must be real carries a non-negligible imaginary part.
    #[error("mean has imaginary part of norm {imag_norm:e}")]
    NonRealMean { imag_norm: f64 },

    /// A coefficient that must be bounded away from zero is not, or two
    /// candidate leading values are too close to order reliably.
    #[error("degenerate coefficient: {what}")]
    DegenerateCoefficient { what: String },

    /// A Fourier denominator `k1*omega + k2*s0` vanishes (or nearly so).
    #[error("resonance at mode ({k1},{k2}): denominator {denom:e}")]
    ResonanceDetected { k1: i32, k2: i32, denom: f64 },

    /// A right-hand side that must be mean-free is not.
    #[error("nonzero mean of norm {norm:e} where a mean-free term is required")]
    NonzeroMean { norm: f64 },

    /// Division by `r` of a series whose constant radial coefficient is
    /// not negligible.
    #[error("division by r: mode ({k1},{k2}) has constant coefficient {coeff:e}")]
    DivisionByR { k1: i32, k2: i32, coeff: f64 },

    /// Evaluation outside the validated radius.
    #[error("radius {r} outside validated domain (r_star = {r_star})")]
    OutOfDomain { r: f64, r_star: f64 },

    /// An iteration or degree bound was exhausted before settling.
    #[error("no convergence: {what}")]
    NoConvergence { what: String },

    /// Too few samples for a requested fit or scan.
    #[error("insufficient samples: got {got}, need at least {need}")]
    InsufficientSamples { got: usize, need: usize },

    /// A quantity that must be positive (or a log of one) is not.
    #[error("non-positive value for {what}: {value}")]
    NonPositiveValue { what: String, value: f64 },

    /// Adaptive step size collapsed below resolution.
    #[error("step size underflow at t = {t} (dt = {dt:e})")]
    StepSizeUnderflow { t: f64, dt: f64 },

    /// State stopped being finite during integration.
    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    /// Polar integration reached the coordinate singularity at r = 0.
    #[error("polar singularity at t = {t} (r = {r:e})")]
    PolarSingularity { t: f64, r: f64 },

    /// A structural hypothesis on the input system fails.
    #[error("assumption violated: {what}")]
    AssumptionViolated { what: String },

    /// An escape scan ran out of horizon without the expected crossing.
    #[error("horizon {t_max} exceeded without crossing; max weighted deviation {max_deviation:e}")]
    HorizonExceeded { t_max: f64, max_deviation: f64 },

    /// Malformed configuration or command-line input.
    #[error("config: {what}")]
    Config { what: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    ///
    /// 2 resonance, 3 invalid input or violated hypothesis, 4 integration
    /// failure. Probe contradictions exit 5 but are not errors of this type.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ResonanceDetected { .. } => 2,
            Error::ZeroConstantTerm { .. }
            | Error::NonRealMean { .. }
            | Error::DegenerateCoefficient { .. }
            | Error::NonzeroMean { .. }
            | Error::DivisionByR { .. }
            | Error::OutOfDomain { .. }
            | Error::InsufficientSamples { .. }
            | Error::NonPositiveValue { .. }
            | Error::AssumptionViolated { .. }
            | Error::Config { .. } => 3,
            Error::NoConvergence { .. }
            | Error::StepSizeUnderflow { .. }
            | Error::NonFiniteState { .. }
            | Error::PolarSingularity { .. }
            | Error::HorizonExceeded { .. } => 4,
            Error::Io(_) | Error::Json(_) => 3,
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
