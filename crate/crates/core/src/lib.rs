//! Spectral-Galerkin simulator for slow-fast stochastic convective
//! Brinkman-Forchheimer systems on the 2D periodic torus.
//!
//! The crate is organised bottom-up:
//!
//! * [`fields`]: divergence-free Fourier basis, velocity fields, the Stokes,
//!   convection and damping operators, coupling functions and model constants.
//! * [`stochastic`]: trace-class Q-Wiener increments drawn from counter-based,
//!   replayable noise streams.
//! * [`dynamics`]: exponential tamed integrators for the coupled, frozen,
//!   auxiliary and averaged equations.
//! * [`averaging`]: ergodic estimators for the averaged drift and the
//!   invariant measure of the frozen equation, plus the block-anchored and
//!   heterogeneous-multiscale drivers.
//! * [`experiments`]: Monte Carlo studies producing pass/fail statistics.
//! * [`config`] and [`cli`]: the `mscbf` command-line entry point.

pub mod averaging;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod stats;
pub mod stochastic;

pub use error::{Error, Result};
pub use fields::{
    CouplingSpec, DiagonalMultiplier, GridField, ModelParams, NormKind, StokesBasis, VelocityField,
};
pub use stochastic::{Channel, CovarianceSpec, NoiseStream};
