//! Averaging, regime classification, and long-time asymptotics for planar
//! oscillatory systems with decaying, non-resonant perturbations.
//!
//! The crate works with systems written in amplitude/phase form
//!
//! ```text
//!   dr/dt  = sum_k t^(-k/q) f_k(r, phi, S(t)),
//!   dphi/dt = omega(r) + r^(-1) sum_k t^(-k/q) g_k(r, phi, S(t)),
//! ```
//!
//! where each `f_k`, `g_k` is a finite Fourier sum in `(phi, S)` with
//! radial-polynomial coefficients and `S(t)` is an unbounded, slowly
//! shifting phase. The pipeline:
//!
//! * [`series`]: truncated radial/Fourier series arithmetic and the scalar
//!   log-polynomial ODE solver used by the asymptotic builders.
//! * [`averaging`]: near-identity change of variables that removes the
//!   oscillatory part order by order and yields the averaged radial
//!   equation `drho/dt ~ sum_k t^(-k/q) Lambda_k(rho)`.
//! * [`regime`]: classification of the averaged equation into the
//!   contraction / balance / drift regions and stability verdicts.
//! * [`asymptotics`]: explicit long-time expansions of the averaged
//!   amplitude in powers of `t^(-1/q)` (with log corrections where the
//!   linearization is marginal).
//! * [`sim`]: an embedded Runge-Kutta integrator, decay-exponent fits, and
//!   ensemble probes that check predicted stability against simulation.
//! * [`systems`]: ready-made example systems, including a pendulum in
//!   energy-angle coordinates built from a series chart.
//!
//! Each major capability has a runnable program under `examples/`.

pub mod asymptotics;
pub mod averaging;
pub mod cli;
pub mod config;
pub mod error;
pub mod regime;
pub mod report;
pub mod series;
pub mod sim;
pub mod system;
pub mod systems;
pub mod tol;

pub use error::Error;
pub use system::{PhaseLaw, SystemSpec};
