//! Forward sweep: one damped Newton solve per time interval.

use crate::discretization::{norm, Discretization};
use crate::error::{Error, Result};
use crate::objective::ControlPair;
use crate::time::SpaceTimeField;

/// Newton residual tolerance (discrete ℓ²).
pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_IT: usize = 25;
/// States larger than this in max norm are treated as a blow-up.
pub const BLOW_UP: f64 = 1e6;

/// Discrete prey and predator densities.
#[derive(Debug, Clone)]
pub struct StatePair {
    pub y1: SpaceTimeField,
    pub y2: SpaceTimeField,
    /// Newton iterations used on each interval.
    pub newton_iterations: Vec<usize>,
}

impl StatePair {
    pub fn max_newton_iterations(&self) -> usize {
        self.newton_iterations.iter().copied().max().unwrap_or(0)
    }

    pub fn species(&self, s: usize) -> &SpaceTimeField {
        [&self.y1, &self.y2][s]
    }
}

/// Stacks the control coefficients of interval `n`.
pub(crate) fn stack_controls(g: &ControlPair, n: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(2 * g.g1.interval(n).len());
    v.extend_from_slice(g.g1.interval(n));
    v.extend_from_slice(g.g2.interval(n));
    v
}

/// Solves the state equation for the given controls.
pub fn solve_state(disc: &Discretization, controls: &ControlPair) -> Result<StatePair> {
    controls.check(disc)?;
    let mut y1 = disc.zero_field();
    let mut y2 = disc.zero_field();
    let mut iterations = Vec::with_capacity(disc.n_intervals());
    let mut prev = disc.y0.clone();
    for n in 0..disc.n_intervals() {
        let g = stack_controls(controls, n);
        let (y, its) = newton_interval(disc, n, [&prev[0], &prev[1]], &g)?;
        disc.unstack(&y, &mut y1, &mut y2, n);
        prev = [disc.end_block(&y, 0).to_vec(), disc.end_block(&y, 1).to_vec()];
        iterations.push(its);
    }
    Ok(StatePair {
        y1,
        y2,
        newton_iterations: iterations,
    })
}

/// Damped Newton iteration on one interval, started from the previous end
/// value (with Dirichlet entries zeroed) at every temporal node.
pub fn newton_interval(disc: &Discretization, n: usize, prev: [&[f64]; 2], g: &[f64]) -> Result<(Vec<f64>, usize)> {
    let nd = disc.n_dofs();
    let nn = disc.n_nodes();
    let mut y = vec![0.0; disc.block_len()];
    for s in 0..2 {
        for a in 0..nn {
            let start = (s * nn + a) * nd;
            y[start..start + nd].copy_from_slice(prev[s]);
        }
    }
    disc.zero_dirichlet_rows(&mut y);
    let mut r = disc.residual(n, &y, prev, g);
    let mut rn = norm(&r);
    for it in 0..NEWTON_MAX_IT {
        if !rn.is_finite() {
            break;
        }
        let lin = disc.linearize(&y);
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let dy = disc.solve_jacobian(n, &lin, false, true, &rhs, 1e-11)?;
        let mut alpha = 1.0;
        let (mut y_new, mut r_new, mut rn_new);
        loop {
            y_new = y.iter().zip(&dy).map(|(a, b)| a + alpha * b).collect::<Vec<_>>();
            r_new = disc.residual(n, &y_new, prev, g);
            rn_new = norm(&r_new);
            if rn_new <= rn || alpha < 1e-3 || rn_new <= NEWTON_TOL {
                break;
            }
            alpha *= 0.5;
        }
        let step = alpha * dy.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        y = y_new;
        r = r_new;
        rn = rn_new;
        let ymax = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(ymax <= BLOW_UP) {
            return Err(Error::BlowUpDetected { interval: n, max_abs: ymax });
        }
        if rn <= NEWTON_TOL && step <= 1e-8 * ymax.max(1.0) {
            return Ok((y, it + 1));
        }
    }
    Err(Error::NonlinearSolverFailure { interval: n, residual: rn })
}
