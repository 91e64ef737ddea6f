//! Lagrange finite elements of degree 1 and 2 on triangulations.

pub mod assembly;
pub mod element;
pub mod quadrature;
pub mod space;
pub mod sparse;

pub use assembly::{
    assemble_boundary_mass, assemble_mass, assemble_mass_with, assemble_stiffness, assemble_trace_mass,
    assemble_weighted_reaction, load_vector,
};
pub use space::{BoundaryCondition, FeSpace, FemVector};
pub use sparse::{solve_sparse, LuAnalysis, SparseLu, SparseMatrix, SparsePattern};
