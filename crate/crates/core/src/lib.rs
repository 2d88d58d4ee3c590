//! Linearly singular differential equations `A(x)·ẋ = f(x)` and generalized
//! nonholonomic systems built from them.
//!
//! All geometry is realized pointwise in one global chart:
//!
//! - [`expr`]: the expression language (parsing, exact derivatives).
//! - [`linalg`]: rank-revealing linear algebra and subspace tests.
//! - [`linsing`]: linearly singular systems, consistency and the constraint algorithm.
//! - [`nonholo`]: restriction to a submanifold plus quotient by constraint forces.
//! - [`lagrangian`]: Lagrange 2-form, energy and Chetaev forces from a lagrangian.
//! - [`dynamics`]: projected fixed-step integration and conservation monitors.
//! - [`symmetry`]: finite and infinitesimal symmetries and constants of motion.

pub mod dynamics;
pub mod error;
pub mod expr;
pub mod lagrangian;
pub mod linalg;
pub mod linsing;
pub mod nonholo;
pub mod sampling;
pub mod symmetry;

pub use error::{Error, Result};
pub use linalg::Tolerances;
