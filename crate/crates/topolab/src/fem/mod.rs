//! P1 finite elements: assembly, linear solvers and the three problem classes.

pub mod assemble;
pub(crate) mod field;
mod nonlinearity;
mod problem;
mod solver;
mod sparse;

pub use field::{integrate, norm, visit_points, Sample, Difference, Field, FieldLike, NormKind, NormSpec};
pub use nonlinearity::Nonlinearity;
pub use problem::{Discretization, Linearized, NewtonReport, ProblemSpec, MIN_RESOLUTION};
pub(crate) use problem::resolution_check;
pub use solver::{conjugate_gradient, reverse_cuthill_mckee, EnvelopeCholesky, PreparedSolver, SolverChoice, CG_TOL, DIRECT_LIMIT};
pub use sparse::CsrMatrix;
