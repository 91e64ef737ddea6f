//! Scalar Lagrange spaces on a triangulation.

use std::collections::HashMap;
use std::sync::Arc;

use super::element::{self, Geometry};
use super::sparse::SparsePattern;
use crate::error::{Error, Result};
use crate::mesh::{boundary_trace_map, Triangulation};

/// Coefficient vector of a finite-element function.
pub type FemVector = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    /// Homogeneous Dirichlet data: boundary DOFs are eliminated.
    DirichletZero,
    /// No essential condition (natural or Robin boundary).
    Free,
}

/// One boundary edge with the DOFs living on it.
#[derive(Debug, Clone, Copy)]
pub struct BoundarySegment {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub length: f64,
    /// Volume DOFs: start, end, then midpoint for degree 2.
    pub dofs: [usize; 3],
    /// Positions of the same DOFs in the boundary vector.
    pub trace_dofs: [usize; 3],
}

#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Arc<Triangulation>,
    degree: usize,
    bc: BoundaryCondition,
    n_dofs: usize,
    n_local: usize,
    cell_dofs: Vec<usize>,
    coords: Vec<[f64; 2]>,
    trace: Vec<usize>,
    boundary_mask: Vec<bool>,
    dirichlet: Vec<usize>,
    dirichlet_mask: Vec<bool>,
    segments: Vec<BoundarySegment>,
    pattern: Arc<SparsePattern>,
}

impl FeSpace {
    pub fn new(mesh: Arc<Triangulation>, degree: usize, bc: BoundaryCondition) -> Result<Self> {
        if !(1..=2).contains(&degree) {
            return Err(Error::InvalidArgument(format!(
                "polynomial degree must be 1 or 2, got {degree}"
            )));
        }
        let nv = mesh.n_vertices();
        let n_dofs = if degree == 1 { nv } else { nv + mesh.n_edges() };
        let n_local = element::local_count(degree);
        let mut cell_dofs = Vec::with_capacity(mesh.n_triangles() * n_local);
        for (t, tri) in mesh.triangles.iter().enumerate() {
            cell_dofs.extend_from_slice(tri);
            if degree == 2 {
                cell_dofs.extend(mesh.triangle_edges(t).iter().map(|e| nv + e));
            }
        }
        let mut coords = mesh.vertices.clone();
        if degree == 2 {
            for &[a, b] in mesh.edges() {
                let (p, q) = (mesh.vertices[a], mesh.vertices[b]);
                coords.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
            }
        }
        let trace = boundary_trace_map(&mesh, degree)?;
        let mut boundary_mask = vec![false; n_dofs];
        let mut position = HashMap::with_capacity(trace.len());
        for (k, &d) in trace.iter().enumerate() {
            boundary_mask[d] = true;
            position.insert(d, k);
        }
        let mut segments = Vec::with_capacity(mesh.boundary_edges.len());
        for &[a, b] in &mesh.boundary_edges {
            let (start, end) = (mesh.vertices[a], mesh.vertices[b]);
            let length = ((end[0] - start[0]).powi(2) + (end[1] - start[1]).powi(2)).sqrt();
            let mut dofs = [a, b, usize::MAX];
            if degree == 2 {
                dofs[2] = nv + mesh.edge_index(a, b).expect("boundary edge is a mesh edge");
            }
            let mut trace_dofs = [usize::MAX; 3];
            for i in 0..degree + 1 {
                trace_dofs[i] = *position.get(&dofs[i]).ok_or_else(|| {
                    Error::InvalidState("boundary edges do not form closed loops".into())
                })?;
            }
            segments.push(BoundarySegment {
                start,
                end,
                length,
                dofs,
                trace_dofs,
            });
        }
        let (dirichlet, dirichlet_mask) = match bc {
            BoundaryCondition::DirichletZero => {
                let mut d: Vec<usize> = trace.clone();
                d.sort_unstable();
                (d, boundary_mask.clone())
            }
            BoundaryCondition::Free => (Vec::new(), vec![false; n_dofs]),
        };
        let pattern = Arc::new(SparsePattern::from_cells(n_dofs, &cell_dofs, n_local));
        Ok(Self {
            mesh,
            degree,
            bc,
            n_dofs,
            n_local,
            cell_dofs,
            coords,
            trace,
            boundary_mask,
            dirichlet,
            dirichlet_mask,
            segments,
            pattern,
        })
    }

    pub fn mesh(&self) -> &Arc<Triangulation> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn boundary_condition(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_local(&self) -> usize {
        self.n_local
    }

    pub fn n_cells(&self) -> usize {
        self.mesh.n_triangles()
    }

    pub fn cell_dofs(&self, t: usize) -> &[usize] {
        &self.cell_dofs[t * self.n_local..(t + 1) * self.n_local]
    }

    pub fn geometry(&self, t: usize) -> Geometry {
        let tri = self.mesh.triangles[t];
        Geometry::new([
            self.mesh.vertices[tri[0]],
            self.mesh.vertices[tri[1]],
            self.mesh.vertices[tri[2]],
        ])
    }

    /// Sparsity pattern of all operators assembled on this space.
    pub fn pattern(&self) -> &Arc<SparsePattern> {
        &self.pattern
    }

    pub fn dof_coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    /// Volume DOF of each boundary DOF, in boundary order.
    pub fn trace_map(&self) -> &[usize] {
        &self.trace
    }

    pub fn n_boundary_dofs(&self) -> usize {
        self.trace.len()
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary_mask
    }

    pub fn dirichlet_dofs(&self) -> &[usize] {
        &self.dirichlet
    }

    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet_mask
    }

    pub fn boundary_segments(&self) -> &[BoundarySegment] {
        &self.segments
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(&self, f: impl Fn([f64; 2]) -> f64) -> Result<FemVector> {
        self.coords
            .iter()
            .map(|&x| {
                let v = f(x);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::InvalidData(format!("non-finite value {v} at node {x:?}")))
                }
            })
            .collect()
    }

    /// Restriction of a volume vector to the boundary DOFs.
    pub fn trace(&self, v: &[f64]) -> FemVector {
        self.trace.iter().map(|&d| v[d]).collect()
    }

    /// Extension of a boundary vector by zero into the volume.
    pub fn extend(&self, b: &[f64]) -> FemVector {
        let mut v = vec![0.0; self.n_dofs];
        for (k, &d) in self.trace.iter().enumerate() {
            v[d] = b[k];
        }
        v
    }

    /// Sets the Dirichlet DOFs of `v` to zero.
    pub fn zero_dirichlet(&self, v: &mut [f64]) {
        for &d in &self.dirichlet {
            v[d] = 0.0;
        }
    }

    pub fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_dofs {
            return Err(Error::DimensionMismatch {
                expected: self.n_dofs,
                got: v.len(),
            });
        }
        Ok(())
    }
}
