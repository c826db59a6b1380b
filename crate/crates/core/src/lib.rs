//! Finite-dimensional equivariant models of delocalized eta invariants.
//!
//! Operators are dense complex matrices acted on by a finite group of
//! unitaries. Every analytic object (heat operators, contour projectors,
//! eta integrals, b-cylinder cocycles) is computed along two independent
//! routes so each identity can be checked numerically.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bcyl;
pub mod error;
pub mod eta;
pub mod exec;
pub mod funcalc;
pub mod heatflow;
pub mod linalg;
pub mod opmodel;
pub mod quad;
pub mod zoo;

pub use error::{ForgeError, Result};
pub use exec::Exec;
pub use linalg::{CMat, C64};
pub use opmodel::{EquivariantModel, OperatorValue};
