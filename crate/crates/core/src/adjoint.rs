//! Backward adjoint sweep and forward tangent sweep.
//!
//! Both reuse the interval Jacobian at the converged state. The adjoint
//! solves with its transpose, so the resulting gradient is exact for the
//! discrete cost when the cross-species couplings are kept.

use crate::discretization::Discretization;
use crate::error::Result;
use crate::objective::ControlPair;
use crate::state::{stack_controls, StatePair};
use crate::time::SpaceTimeField;

/// Residual target for the linear interval solves of the sweeps.
const LINEAR_TOL: f64 = 1e-12;

/// Reaction couplings kept in the adjoint operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdjointMode {
    /// Only `(a − b y₂) μ₁` and `(c y₁ − d) μ₂`.
    Diagonal,
    /// Exact transpose of the linearized state operator.
    Full,
}

/// Discrete adjoints `(μ₁, μ₂)`; the value after the last knot is zero.
#[derive(Debug, Clone)]
pub struct AdjointPair {
    pub mu1: SpaceTimeField,
    pub mu2: SpaceTimeField,
    pub mode: AdjointMode,
}

impl AdjointPair {
    pub fn species(&self, s: usize) -> &SpaceTimeField {
        [&self.mu1, &self.mu2][s]
    }
}

pub fn solve_adjoint(disc: &Discretization, state: &StatePair, mode: AdjointMode) -> Result<AdjointPair> {
    let mut mu1 = disc.zero_field();
    let mut mu2 = disc.zero_field();
    let mut next = vec![0.0; disc.block_len()];
    for n in (0..disc.n_intervals()).rev() {
        let y = disc.stack(&state.y1, &state.y2, n);
        let lin = disc.linearize(&y);
        let mut rhs = disc.tracking_gradient(n, &y);
        for (r, j) in rhs.iter_mut().zip(disc.backward_jump_source(&next)) {
            *r += j;
        }
        disc.zero_dirichlet_rows(&mut rhs);
        let l = disc.solve_jacobian(n, &lin, true, mode == AdjointMode::Full, &rhs, LINEAR_TOL)?;
        disc.unstack(&l, &mut mu1, &mut mu2, n);
        next = l;
    }
    Ok(AdjointPair { mu1, mu2, mode })
}

/// Linearized state `z_v` in direction `v`, with `z(0) = 0`.
pub fn solve_tangent(disc: &Discretization, state: &StatePair, v: &ControlPair) -> Result<StatePair> {
    v.check(disc)?;
    let mut z1 = disc.zero_field();
    let mut z2 = disc.zero_field();
    let nd = disc.n_dofs();
    let mut prev = [vec![0.0; nd], vec![0.0; nd]];
    for n in 0..disc.n_intervals() {
        let y = disc.stack(&state.y1, &state.y2, n);
        let lin = disc.linearize(&y);
        let mut rhs = disc.jump_source([&prev[0], &prev[1]]);
        disc.apply_control(n, &stack_controls(v, n), 1.0, &mut rhs);
        disc.zero_dirichlet_rows(&mut rhs);
        let z = disc.solve_jacobian(n, &lin, false, true, &rhs, LINEAR_TOL)?;
        disc.unstack(&z, &mut z1, &mut z2, n);
        prev = [disc.end_block(&z, 0).to_vec(), disc.end_block(&z, 1).to_vec()];
    }
    Ok(StatePair {
        y1: z1,
        y2: z2,
        newton_iterations: vec![0; disc.n_intervals()],
    })
}
