//! Full counting statistics of quanta exchanged between a quantum harmonic
//! oscillator and N Markovian baths.
//!
//! The crate is organised around one physical model ([`model::SystemModel`])
//! and four ways of computing the scaled cumulant generating function θ(s) of
//! the counted quanta:
//!
//! * [`analytic`]: closed-form θ(s), branch points, activity and Mandel Q.
//! * [`moments`]: time integration of the Gaussian-parameter ODEs and a
//!   long-time slope fit of ln A(t).
//! * [`fock`]: leading eigenvalue of the tilted Lindblad generator on a
//!   truncated Fock space.
//! * [`jump`]: quantum-jump Monte Carlo with per-channel counters.
//!
//! Units are ħ = k_B = 1 throughout.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod fock;
pub mod jet;
pub mod jump;
pub mod model;
pub mod moments;
pub mod ode;

pub use analytic::{BranchInterval, LdfError, LdfResult};
pub use model::{BathChannel, CountingMode, DerivedRates, DriveSpec, ModelError, SystemModel};
