//! P1 finite elements for steady convection-diffusion-reaction problems with
//! algebraic stabilization on adaptively refined triangulations.

pub mod adapt;
pub mod assembly;
pub mod bench;
pub mod checks;
pub mod constraints;
pub mod error;
pub mod estimator;
pub mod mesh;
pub mod problem;
pub mod quadrature;
pub mod scalar;
pub mod solver;
pub mod sparse;
pub mod stabilization;

pub use error::{Error, Result};
pub use scalar::{Real, Scalar};
pub use sparse::{CsrMatrix, SparseSystem};

/// Double-precision matrix used by assembly and the solver.
pub type Matrix = CsrMatrix<f64>;
/// Single-precision matrix.
pub type MatrixF32 = CsrMatrix<f32>;
/// Exact rational matrix for constraint-transform oracles.
pub type ExactMatrix = CsrMatrix<num_rational::Rational64>;
pub type ExactConstraintSet = mesh::ConstraintSet<num_rational::Rational64>;
pub type Constraints = mesh::ConstraintSet<f64>;
pub type Limiters = stabilization::LimiterField<f64>;
