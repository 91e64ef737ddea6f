//! Assembly of mass, stiffness, boundary-mass and reaction operators and of
//! load vectors.

use std::sync::Arc;

use super::element::{self, MAX_LOCAL};
use super::quadrature::{LineRule, TriangleRule};
use super::space::{BoundaryCondition, FeSpace};
use super::sparse::{SparseMatrix, SparsePattern};
use crate::error::{Error, Result};

/// Volume rule exact for products of three basis functions.
pub fn reaction_rule(space: &FeSpace) -> TriangleRule {
    TriangleRule::exact_for(3 * space.degree())
}

/// Basis values of `space` at every point of `rule`.
pub fn tabulate(space: &FeSpace, rule: &TriangleRule) -> Vec<[f64; MAX_LOCAL]> {
    rule.points.iter().map(|&l| element::values(space.degree(), l)).collect()
}

fn assemble_cells(
    space: &FeSpace,
    mut local: impl FnMut(usize, &mut [[f64; MAX_LOCAL]; MAX_LOCAL]),
) -> SparseMatrix {
    let mut m = SparseMatrix::zeros(space.pattern().clone());
    let nl = space.n_local();
    let mut buf = [[0.0; MAX_LOCAL]; MAX_LOCAL];
    for t in 0..space.n_cells() {
        buf.iter_mut().for_each(|r| r.fill(0.0));
        local(t, &mut buf);
        let dofs = space.cell_dofs(t);
        for a in 0..nl {
            for b in 0..nl {
                m.add(dofs[a], dofs[b], buf[a][b]);
            }
        }
    }
    m
}

/// Consistent mass matrix `∫ φᵢ φⱼ`.
pub fn assemble_mass(space: &FeSpace) -> SparseMatrix {
    assemble_mass_with(space, &TriangleRule::degree4())
}

/// Mass matrix with an explicit rule; the vertex rule yields the lumped
/// (diagonal) mass for degree 1.
pub fn assemble_mass_with(space: &FeSpace, rule: &TriangleRule) -> SparseMatrix {
    let phi = tabulate(space, rule);
    let nl = space.n_local();
    assemble_cells(space, |t, loc| {
        let area = space.geometry(t).area;
        for (q, p) in phi.iter().enumerate() {
            let w = rule.weights[q] * area;
            for a in 0..nl {
                for b in 0..nl {
                    loc[a][b] += w * p[a] * p[b];
                }
            }
        }
    })
}

/// Stiffness matrix `∫ ∇φᵢ · ∇φⱼ`.
pub fn assemble_stiffness(space: &FeSpace) -> SparseMatrix {
    let rule = TriangleRule::degree4();
    let nl = space.n_local();
    let deg = space.degree();
    assemble_cells(space, |t, loc| {
        let g = space.geometry(t);
        for (q, &l) in rule.points.iter().enumerate() {
            let w = rule.weights[q] * g.area;
            let gr = element::gradients(deg, l, &g);
            for a in 0..nl {
                for b in 0..nl {
                    loc[a][b] += w * (gr[a][0] * gr[b][0] + gr[a][1] * gr[b][1]);
                }
            }
        }
    })
}

/// Boundary mass `∫_Γ φᵢ φⱼ ds` on the volume DOFs.
pub fn assemble_boundary_mass(space: &FeSpace) -> Result<SparseMatrix> {
    if space.boundary_condition() == BoundaryCondition::DirichletZero {
        return Err(Error::InvalidState(
            "boundary mass requested on a space with eliminated boundary DOFs".into(),
        ));
    }
    let mut m = SparseMatrix::zeros(space.pattern().clone());
    for_each_segment_block(space, false, |i, j, v| m.add(i, j, v));
    Ok(m)
}

/// Boundary mass acting on boundary vectors (ordering of
/// [`FeSpace::trace_map`]). With `lumped`, the trapezoidal/Simpson nodal
/// weights are used and the matrix is diagonal.
pub fn assemble_trace_mass(space: &FeSpace, lumped: bool) -> SparseMatrix {
    let mut rows = vec![Vec::new(); space.n_boundary_dofs()];
    let nb = space.degree() + 1;
    for seg in space.boundary_segments() {
        for a in 0..nb {
            rows[seg.trace_dofs[a]].extend_from_slice(&seg.trace_dofs[..nb]);
        }
    }
    let mut m = SparseMatrix::zeros(Arc::new(SparsePattern::from_rows(rows)));
    for_each_segment_block(space, true, |i, j, v| {
        if !lumped {
            m.add(i, j, v);
        } else {
            // row sums onto the diagonal
            m.add(i, i, v);
        }
    });
    m
}

fn for_each_segment_block(space: &FeSpace, trace_index: bool, mut add: impl FnMut(usize, usize, f64)) {
    let rule = LineRule::gauss(3);
    let deg = space.degree();
    let nb = deg + 1;
    for seg in space.boundary_segments() {
        let idx = if trace_index { seg.trace_dofs } else { seg.dofs };
        let mut loc = [[0.0; 3]; 3];
        for (&s, &w) in rule.points.iter().zip(&rule.weights) {
            let v = element::edge_values(deg, s);
            for a in 0..nb {
                for b in 0..nb {
                    loc[a][b] += w * seg.length * v[a] * v[b];
                }
            }
        }
        for a in 0..nb {
            for b in 0..nb {
                add(idx[a], idx[b], loc[a][b]);
            }
        }
    }
}

/// `∫ (shift + w) φᵢ φⱼ` for a coefficient field `w` in the same space.
pub fn assemble_weighted_reaction(space: &FeSpace, w: &[f64], shift: f64) -> Result<SparseMatrix> {
    space.check_len(w)?;
    let rule = reaction_rule(space);
    let phi = tabulate(space, &rule);
    let nl = space.n_local();
    Ok(assemble_cells(space, |t, loc| {
        let area = space.geometry(t).area;
        let dofs = space.cell_dofs(t);
        for (q, p) in phi.iter().enumerate() {
            let wq: f64 = (0..nl).map(|a| p[a] * w[dofs[a]]).sum();
            let c = rule.weights[q] * area * (shift + wq);
            for a in 0..nl {
                for b in 0..nl {
                    loc[a][b] += c * p[a] * p[b];
                }
            }
        }
    }))
}

/// Load vector `∫ f φᵢ` using the reaction rule.
pub fn load_vector(space: &FeSpace, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    let rule = reaction_rule(space);
    let phi = tabulate(space, &rule);
    let nl = space.n_local();
    let mut out = vec![0.0; space.n_dofs()];
    for t in 0..space.n_cells() {
        let g = space.geometry(t);
        let dofs = space.cell_dofs(t);
        for (q, p) in phi.iter().enumerate() {
            let c = rule.weights[q] * g.area * f(g.point(rule.points[q]));
            for a in 0..nl {
                out[dofs[a]] += c * p[a];
            }
        }
    }
    out
}

/// `∫_Ω f` using the reaction rule.
pub fn integrate(space: &FeSpace, f: impl Fn([f64; 2]) -> f64) -> f64 {
    let rule = reaction_rule(space);
    (0..space.n_cells())
        .map(|t| {
            let g = space.geometry(t);
            rule.points
                .iter()
                .zip(&rule.weights)
                .map(|(&l, &w)| w * f(g.point(l)))
                .sum::<f64>()
                * g.area
        })
        .sum()
}
