//! Optimal control of a two-species Lotka–Volterra reaction–diffusion system.
//!
//! Conforming P1/P2 finite elements in space, discontinuous Galerkin dG(0)/dG(1)
//! in time, discrete adjoints for the reduced gradient, and a projected
//! Fletcher–Reeves conjugate-gradient optimizer. Both distributed control
//! (homogeneous Dirichlet boundary) and Robin boundary control are covered.

pub mod error;
pub mod dynamics;
pub mod fem;
pub mod adjoint;
pub mod discretization;
pub mod mesh;
pub mod model;
pub mod objective;
pub mod ode;
pub mod optimizer;
pub mod state;
pub mod time;

pub use error::{Error, Result};
