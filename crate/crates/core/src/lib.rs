//! Energy-conserving quadratic ODE systems: logic gates, dyadic cascade
//! models, an adaptive explicit integrator with event location, trajectory
//! diagnostics, and the trilinear-symbol non-degeneracy audit.
//!
//! The crate is `no_std` and only needs `alloc`. All transcendental
//! functions go through [`libm`], which keeps results identical across
//! platforms and independent of the host C library.
#![cfg_attr(not(feature = "std"), no_std)]
// Validation writes `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod circuit;
pub mod diagnostics;
pub mod error;
pub mod gates;
pub mod integrator;
pub mod math;
pub mod models;
pub mod trilinear;

pub use circuit::{
    assemble_rhs, check_cancellation_numeric, check_cancellation_structural, total_energy,
    CancellationReport, CircuitSpec, InteractionTerm, ModeId, NumericCancellation, StateVector,
};
pub use error::{Error, Result};
pub use integrator::{integrate, integrate_until, IntegratorConfig, ModeSelector, Trajectory};
