//! Open-system simulation of a mechanical oscillator squeezed by a
//! dispersively coupled, repeatedly measured and reset qubit.
//!
//! The crate is `no_std` (with `alloc`) and holds only the numerical engines:
//!
//! - [`params`]: physical parameters and the closed-form stationary moments
//!   of the effective model,
//! - [`gaussian`]: drift/diffusion moment dynamics and Lyapunov steady states,
//! - [`fock`]: truncated-Fock master-equation integration of the full
//!   qubit⊗oscillator system,
//! - [`feedback`]: the measure–flip–evolve loop and its `Δt` sweep,
//! - [`observables`]: moments, purity, Wigner grids and dB conventions.
//!
//! File formats, configuration and the command line live in `qsqueeze-cli`.

#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod feedback;
pub mod fock;
pub mod gaussian;
pub mod linalg;
pub mod observables;
pub mod params;
pub mod series;

pub use error::{Error, Result};
pub use feedback::{FeedbackSchedule, ProtocolRecord};
pub use fock::{DensityMatrix, FockSpace, OperatorSet};
pub use gaussian::{DriftDiffusion, GaussianState, QubitSign};
pub use observables::{QuadratureMoments, WignerGrid};
pub use params::{SteadyStateMoments, SystemParams};
pub use series::{TimeSeries, TimeSeriesRow};
