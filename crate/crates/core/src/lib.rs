//! Optimal control of a one-dimensional elliptic problem with a
//! total-variation penalty on the control, discretized by lowest-order
//! Raviart-Thomas mixed finite elements.
//!
//! The control is a piecewise constant function with finitely many jumps.
//! [`support::run_outer`] alternates between solving a finite-dimensional
//! convex problem on a fixed candidate jump set ([`reduced::ReducedProblem`])
//! and reading a new candidate set off the sign pattern of the adjoint.

pub mod analytic_examples;
pub mod bv_control;
pub mod checks;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod mixed_fem;
pub mod quadrature;
pub mod reduced;
pub mod study;
pub mod support;

pub use analytic_examples::{example1, example2, ExampleSpec};
pub use bv_control::{phi_from_p, Jump, JumpControl};
pub use error::{Error, Result};
pub use mesh::Mesh;
pub use mixed_fem::{Coefficients, MixedSystem, P0Function, P1Function};
pub use reduced::{ProxOptions, ReducedProblem, ReducedSolution};
pub use study::{run_study, StudyOptions, StudyReport};
pub use support::{run_outer, OuterConfig, OuterResult, Termination};
