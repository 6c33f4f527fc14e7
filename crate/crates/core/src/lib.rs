//! Coherent dynamics of inhomogeneously broadened four-level (double-Λ)
//! emitter ensembles.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerics:
//!
//! - [`levels`], [`state`], [`hamiltonian`], [`lindblad`] and [`integrate`]
//!   assemble the rotating-wave Hamiltonian of one emitter and integrate the
//!   Lindblad master equation with state-validity diagnostics,
//! - [`pulses`] builds drive envelopes and timelines,
//! - [`ensemble`] discretises the Gaussian inhomogeneous line and forms
//!   weighted averages over emitters,
//! - [`experiments`] drives the Ramsey, Hahn-echo, optical-pumping and
//!   Raman-transfer protocols and fits their outputs,
//! - [`fwm`] propagates signal, Stokes and spin-wave amplitudes through a thin
//!   medium under a strong control field.
//!
//! Units throughout: time in ns, frequencies in GHz (ordinary, not angular),
//! Rabi frequencies in rad/ns. The single 2π conversion happens when the
//! Hamiltonian is assembled.
//!
//! Work that can run in parallel (ensemble nodes, delay grids) is expressed
//! through the [`exec::Executor`] trait; the companion `dlambda-sim` crate
//! provides a thread-pool implementation.

#![no_std]
// `!(x > 0.0)` is how NaN gets rejected along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod ensemble;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod fit;
pub mod fwm;
pub mod hamiltonian;
pub mod integrate;
pub mod levels;
pub mod linalg;
pub mod lindblad;
pub mod pulses;
pub mod quadrature;
pub mod state;

pub use error::Error;
pub use levels::{LevelSystem, Transition};
pub use linalg::C64;
pub use state::DensityMatrix;

/// Planck constant over Boltzmann constant, in K/GHz.
pub const H_OVER_KB: f64 = 0.047_992_430_73;

/// Gaussian FWHM to standard deviation ratio, `2·sqrt(2·ln 2)`.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;
