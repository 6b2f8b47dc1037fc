//! A numerical laboratory for linear kinetic equations of the form
//! `∂t f + (1/Kn) T f = (1/Kn^p) L f` on a periodic torus in one space and
//! one velocity dimension, with a scattering coefficient that may depend on
//! a scalar random parameter `z`.
//!
//! The crate builds the discrete transport and collision operators in the
//! weighted `L²(dx dv / F)` geometry, measures the coercivity constants of
//! the assembled matrices, evaluates closed-form exponential decay-rate
//! certificates together with their Knudsen-number scalings, integrates the
//! equation with an IMEX splitting, and solves the triangular hierarchy of
//! `z`-derivatives with its companion theoretical bounds.
//!
//! Everything numeric is generic over the scalar type through [`Real`];
//! concrete `f64` aliases are exported at the crate root.

pub mod error;
pub mod operators;
pub mod phase_space;
pub mod rates;
pub mod scalar;
pub mod solver;
pub mod uq;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` phase-space grid.
pub type Grid64 = phase_space::PhaseGrid<f64>;
/// `f64` distribution field.
pub type Field64 = phase_space::Field<f64>;
/// `f64` dense operator.
pub type Operator64 = operators::KineticOperator<f64>;
/// `f64` coercivity constants.
pub type Constants64 = operators::CoercivityConstants<f64>;
/// `f64` scenario description.
pub type Scenario64 = solver::Scenario<f64>;
/// `f64` trajectory record.
pub type Trajectory64 = solver::Trajectory<f64>;
/// `f64` scattering-coefficient model.
pub type SigmaModel64 = uq::SigmaModel<f64>;
/// `f64` derivative hierarchy.
pub type Hierarchy64 = uq::Hierarchy<f64>;
