//! Numeric thresholds shared across the pipeline.
//!
//! Everything here is an absolute or relative floating-point guard, not a
//! model parameter. Callers that need a different zero threshold pass one
//! explicitly; these are the defaults.

/// Coefficients with absolute value below this are treated as zero when
/// deciding leading orders, mean-freeness, and division by `r`.
pub const ZERO_COEFF: f64 = 1e-11;

/// Two candidate leading values closer than `NEAR_EQ_FACTOR * ZERO_COEFF`
/// are considered indistinguishable and classification refuses to choose.
pub const NEAR_EQ_FACTOR: f64 = 10.0;

/// Acceptable residual when a solved identity is substituted back
/// (homological equations, chart identities, linear ODE solutions).
pub const RESIDUAL: f64 = 1e-10;

/// Bisection half-width for scalar root finding.
pub const ROOT: f64 = 1e-12;

/// Fixed-point tolerance for inverting the averaging transform.
pub const INVERSE: f64 = 1e-12;

/// Grid points used when scanning denominators or root brackets.
pub const SCAN_GRID: usize = 1000;

/// Safety factor applied to the scanned non-resonance radius.
pub const RADIUS_SAFETY: f64 = 0.9;

/// `t_star` is the first sample where the remainder estimate falls below
/// this fraction of `r_star`.
pub const T_STAR_FRACTION: f64 = 0.1;

/// Default truncation order for radial polynomials.
pub const RADIAL_TRUNC: usize = 8;

/// Fourier products drop modes with `|k1|` above this band limit.
pub const K1_CLIP: i32 = 16;

/// Degree cap for log-polynomials; growth past this aborts the builder.
pub const LOG_DEGREE_CAP: usize = 16;

/// Polar integration refuses to continue below this radius.
pub const R_MIN: f64 = 1e-6;
