//! C0 interior penalty finite elements for the two-dimensional
//! Monge–Ampère equation `det D²u = f` with Dirichlet data, solved by
//! Newton's method or by a two-grid scheme.

pub mod analysis;
pub mod assembly;
pub mod cli;
pub mod error;
pub mod felements;
pub mod geometry;
pub mod linsolve;
pub mod quadrature;
pub mod solvers;
pub mod tensor;

pub use error::{Error, Result};
pub use felements::{FeFunction, FeSpace};
pub use geometry::{build_uniform_mesh, Mesh};
pub use solvers::{newton_solve, two_grid_solve, ProblemSpec, SolverConfig};
