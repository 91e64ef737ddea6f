//! Cost functional, reduced gradient, box projection and second-order value.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adjoint::AdjointPair;
use crate::discretization::{dot, Discretization};
use crate::error::{Error, Result};
use crate::state::StatePair;
use crate::time::SpaceTimeField;

/// Control pair `(g₁, g₂)` on the control space of a discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPair {
    pub g1: SpaceTimeField,
    pub g2: SpaceTimeField,
    pub bounds: Option<(f64, f64)>,
}

impl ControlPair {
    pub fn zeros(disc: &Discretization) -> Self {
        Self {
            g1: disc.zero_control_field(),
            g2: disc.zero_control_field(),
            bounds: disc.params.bounds,
        }
    }

    /// Constant control on every free control DOF; fixed DOFs stay 0.
    pub fn constant(disc: &Discretization, value: f64) -> Self {
        let mut g = Self::zeros(disc);
        g.g1.data_mut().fill(value);
        g.g2.data_mut().fill(value);
        g.zero_fixed(disc);
        g
    }

    pub fn species(&self, s: usize) -> &SpaceTimeField {
        [&self.g1, &self.g2][s]
    }

    pub fn species_mut(&mut self, s: usize) -> &mut SpaceTimeField {
        if s == 0 {
            &mut self.g1
        } else {
            &mut self.g2
        }
    }

    pub fn check(&self, disc: &Discretization) -> Result<()> {
        let want = disc.zero_control_field();
        for g in [&self.g1, &self.g2] {
            if !g.same_shape(&want) {
                return Err(Error::DimensionMismatch {
                    expected: want.data().len(),
                    got: g.data().len(),
                });
            }
        }
        Ok(())
    }

    /// Sets the DOFs that the control space pins to zero.
    pub fn zero_fixed(&mut self, disc: &Discretization) {
        let fixed = &disc.control.fixed;
        let nc = fixed.len();
        for g in [&mut self.g1, &mut self.g2] {
            for chunk in g.data_mut().chunks_mut(nc) {
                for (v, &f) in chunk.iter_mut().zip(fixed) {
                    if f {
                        *v = 0.0;
                    }
                }
            }
        }
    }

    pub fn axpy(&mut self, alpha: f64, x: &Self) {
        self.g1.axpy(alpha, &x.g1);
        self.g2.axpy(alpha, &x.g2);
    }

    pub fn scale(&mut self, alpha: f64) {
        self.g1.scale(alpha);
        self.g2.scale(alpha);
    }

    pub fn max_abs(&self) -> f64 {
        self.g1.max_abs().max(self.g2.max_abs())
    }

    /// Whether every coefficient lies in the box (always true without bounds).
    pub fn is_admissible(&self) -> bool {
        match self.bounds {
            None => true,
            Some((lo, hi)) => self.g1.data().iter().chain(self.g2.data()).all(|&v| lo <= v && v <= hi),
        }
    }
}

/// Cost split into its contributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown {
    /// `½‖yₛ − yₛ_d‖²` per species.
    pub tracking: [f64; 2],
    /// `γₛ/2 ‖gₛ‖²` per species.
    pub control: [f64; 2],
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.tracking.iter().sum::<f64>() + self.control.iter().sum::<f64>()
    }

    /// Space-time L² distances `‖yₛ − yₛ_d‖`.
    pub fn distances(&self) -> [f64; 2] {
        self.tracking.map(|t| (2.0 * t.max(0.0)).sqrt())
    }
}

/// Space-time L² inner product of two control fields.
pub fn control_inner(disc: &Discretization, a: &SpaceTimeField, b: &SpaceTimeField) -> f64 {
    let tm = disc.temporal_mass();
    let nn = disc.n_nodes();
    let mut total = 0.0;
    for n in 0..disc.n_intervals() {
        let tau = disc.grid.tau(n);
        for j in 0..nn {
            let mb = disc.control.mass.mul_vec(b.node(n, j));
            for i in 0..nn {
                total += tau * tm[i][j] * dot(a.node(n, i), &mb);
            }
        }
    }
    total
}

/// `Σₛ (gₛ, hₛ)` in the space-time control inner product.
pub fn inner(disc: &Discretization, a: &ControlPair, b: &ControlPair) -> f64 {
    control_inner(disc, &a.g1, &b.g1) + control_inner(disc, &a.g2, &b.g2)
}

pub fn cost(disc: &Discretization, state: &StatePair, controls: &ControlPair) -> CostBreakdown {
    let mut tracking = [0.0; 2];
    for n in 0..disc.n_intervals() {
        let y = disc.stack(&state.y1, &state.y2, n);
        let t = disc.tracking(n, &y);
        tracking[0] += t[0];
        tracking[1] += t[1];
    }
    let control = [0, 1].map(|s| 0.5 * disc.params.gamma(s) * control_inner(disc, controls.species(s), controls.species(s)));
    CostBreakdown { tracking, control }
}

pub fn evaluate_j(disc: &Discretization, state: &StatePair, controls: &ControlPair) -> f64 {
    cost(disc, state, controls).total()
}

/// Riesz representative of the reduced derivative in the control inner
/// product: `γₛ gₛ + μₛ` (distributed) or `γₛ gₛ + λₛ μₛ|_Γ` (Robin).
pub fn gradient(disc: &Discretization, adjoint: &AdjointPair, controls: &ControlPair) -> ControlPair {
    let mut out = ControlPair::zeros(disc);
    for s in 0..2 {
        let mu = adjoint.species(s);
        let g = controls.species(s);
        let gamma = disc.params.gamma(s);
        let field = out.species_mut(s);
        for n in 0..disc.n_intervals() {
            for a in 0..disc.n_nodes() {
                let cm = disc.control_adjoint(s, mu.node(n, a));
                for ((o, c), gv) in field.node_mut(n, a).iter_mut().zip(&cm).zip(g.node(n, a)) {
                    *o = gamma * gv + c;
                }
            }
        }
    }
    out.zero_fixed(disc);
    out
}

/// Componentwise clamp into the box; identity without bounds.
pub fn project(controls: &ControlPair) -> ControlPair {
    let mut out = controls.clone();
    if let Some((lo, hi)) = controls.bounds {
        for v in out.g1.data_mut().iter_mut().chain(out.g2.data_mut()) {
            *v = v.clamp(lo, hi);
        }
    }
    out
}

/// Nodal projection formula `clamp(−Cᵀμ/γ)`, the fixed point of a
/// constrained optimum.
pub fn projected_adjoint(disc: &Discretization, adjoint: &AdjointPair) -> ControlPair {
    let mut zero = ControlPair::zeros(disc);
    let grad = gradient(disc, adjoint, &zero);
    for s in 0..2 {
        let gamma = disc.params.gamma(s);
        let f = zero.species_mut(s);
        for (o, v) in f.data_mut().iter_mut().zip(grad.species(s).data()) {
            *o = -v / gamma;
        }
    }
    project(&zero)
}

/// Largest violation of the variational inequality `(∇J, u − g) ≥ 0` over
/// the probe set: the two bound constants, their midpoint and eight random
/// admissible fields drawn from `seed`. Fixed DOFs follow `g`.
pub fn vi_residual(disc: &Discretization, controls: &ControlPair, grad: &ControlPair, seed: u64) -> Result<f64> {
    let (lo, hi) = controls
        .bounds
        .ok_or_else(|| Error::InvalidArgument("variational inequality needs control bounds".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probes: Vec<ControlPair> = [lo, hi, 0.5 * (lo + hi)]
        .iter()
        .map(|&v| {
            let mut u = controls.clone();
            u.g1.data_mut().fill(v);
            u.g2.data_mut().fill(v);
            u
        })
        .collect();
    for _ in 0..8 {
        let mut u = controls.clone();
        for v in u.g1.data_mut().iter_mut().chain(u.g2.data_mut()) {
            *v = rng.random_range(lo..=hi);
        }
        probes.push(u);
    }
    let fixed = &disc.control.fixed;
    let nc = fixed.len();
    let mut worst = 0.0f64;
    for mut u in probes {
        for s in 0..2 {
            let g = controls.species(s).data();
            for (i, v) in u.species_mut(s).data_mut().iter_mut().enumerate() {
                if fixed[i % nc] {
                    *v = g[i];
                }
            }
        }
        u.axpy(-1.0, controls);
        worst = worst.max(-inner(disc, grad, &u));
    }
    Ok(worst)
}

/// Which terms enter the second directional derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondOrderMode {
    /// Tracking and control curvature only: `‖z_v‖² + γ‖v‖²`.
    Formula,
    /// Adds the adjoint-weighted curvature of the bilinear reaction, giving
    /// the exact second derivative of the discrete reduced cost.
    Exact,
}

/// `J''(g)[v, v]` from the tangent `z_v` (and, in exact mode, the full adjoint).
pub fn second_directional(
    disc: &Discretization,
    adjoint: &AdjointPair,
    tangent: &StatePair,
    v: &ControlPair,
    mode: SecondOrderMode,
) -> f64 {
    let mut total = 0.0;
    for n in 0..disc.n_intervals() {
        let z = disc.stack(&tangent.y1, &tangent.y2, n);
        total += disc.interval_mass_norm(n, &z);
        if mode == SecondOrderMode::Exact {
            let l = disc.stack(&adjoint.mu1, &adjoint.mu2, n);
            total -= disc.reaction_curvature(n, &z, &l);
        }
    }
    for s in 0..2 {
        total += disc.params.gamma(s) * control_inner(disc, v.species(s), v.species(s));
    }
    total
}
