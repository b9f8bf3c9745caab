//! Divergence-free spectral basis on the 2pi torus, velocity fields, the
//! deterministic operators (Stokes, convection, damping, Leray projection),
//! coupling functions and model constants.

mod basis;
mod coupling;
mod field;
mod ops;
mod params;
pub mod snapshot;

pub use basis::{damping_order, required_grid, Mode, StokesBasis, LAMBDA_1};
pub use coupling::{
    eval_coupling, Component, ConstantSigmaCoupling, CouplingConstants, CouplingFamily,
    CouplingSpec, CouplingValue, DiagonalMultiplier, LinearCoupling, TanhCoupling,
};
pub use field::{GridField, VelocityField};
pub(crate) use ops::damping_coeffs;
pub use ops::{
    apply_convection, apply_damping, apply_g, apply_stokes, leray_project, lp_integral, norm,
    to_grid, NormKind,
};
pub use params::{monotonicity_constant, validate_assumptions, ModelParams, ValidationReport};
