//! Fully discrete problem: spaces, operators, cached data and the per-interval
//! algebra shared by the state, adjoint and tangent sweeps.
//!
//! On interval `n` the unknowns of both species are stacked as
//! `[y₁ node 0, …, y₁ node k, y₂ node 0, …, y₂ node k]`, each block a
//! finite-element coefficient vector. Rows belonging to Dirichlet DOFs are
//! replaced by the identity and the matching columns dropped, so every
//! per-interval operator stays consistent with its transpose.

use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::fem::assembly::{self, reaction_rule, tabulate};
use crate::fem::element::MAX_LOCAL;
use crate::fem::quadrature::{LineRule, TriangleRule};
use crate::fem::{BoundaryCondition, FeSpace, SparseLu, SparseMatrix, SparsePattern};
use crate::mesh::Triangulation;
use crate::model::{ControlKind, ModelParams, ProblemData};
use crate::time::{data_rule, SpaceTimeField, TemporalBasis, TimeGrid};

/// Mass matrix used for the control norm and the control-to-state coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlMass {
    Consistent,
    /// Nodal (vertex or trapezoidal) quadrature; degree 1 only. Makes the
    /// mass-weighted gradient and the nodal projection formula coincide.
    Lumped,
}

/// Discrete control space: volume DOFs (distributed) or boundary DOFs (Robin).
#[derive(Debug, Clone)]
pub struct ControlSpace {
    pub kind: ControlKind,
    pub mass: SparseMatrix,
    /// DOFs held at zero (the Dirichlet boundary for distributed control).
    pub fixed: Vec<bool>,
}

impl ControlSpace {
    pub fn n_dofs(&self) -> usize {
        self.mass.n()
    }
}

/// Quadrature data for the reaction terms.
#[derive(Debug, Clone)]
struct ReactionQuadrature {
    n_q: usize,
    phi: Vec<[f64; MAX_LOCAL]>,
    /// Quadrature weight times cell area, `[cell][q]`.
    weights: Vec<f64>,
}

/// Reaction Jacobian frozen at one iterate: `∂Nₛ/∂yₛ'` times quadrature
/// weight, stored `[time point][cell][q]`.
#[derive(Debug, Clone)]
pub struct Linearization {
    coeffs: Vec<[f64; 4]>,
}

/// Species-decoupled linear part of the interval operator, factored.
struct Preconditioner {
    tau: f64,
    lu: [SparseLu; 2],
}

pub struct Discretization {
    pub params: ModelParams,
    pub data: ProblemData,
    pub space: FeSpace,
    pub grid: TimeGrid,
    pub basis: TemporalBasis,
    pub mass: SparseMatrix,
    pub stiffness: SparseMatrix,
    pub boundary_mass: Option<SparseMatrix>,
    pub control: ControlSpace,
    /// Nodal interpolants of the initial data.
    pub y0: [Vec<f64>; 2],
    transport: [[f64; 2]; 2],
    tmass: [[f64; 2]; 2],
    reaction_time: LineRule,
    quad: ReactionQuadrature,
    /// `∫ f ψ_b φ dt dx` per species, stored like a state field.
    forcing: [SpaceTimeField; 2],
    /// Target loads `∫ y_d φ` at the data time points, `[interval][point][dof]`.
    target_loads: [Vec<f64>; 2],
    /// `∫ y_d²` at the data time points, `[interval][point]`.
    target_sq: [Vec<f64>; 2],
    block_pattern: Arc<SparsePattern>,
    precond: Mutex<Vec<Arc<Preconditioner>>>,
}

impl std::fmt::Debug for Discretization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Discretization")
            .field("degree", &self.space.degree())
            .field("k", &self.basis.degree())
            .field("n_dofs", &self.space.n_dofs())
            .field("n_intervals", &self.grid.n_intervals())
            .finish_non_exhaustive()
    }
}

impl Discretization {
    pub fn new(
        params: ModelParams,
        data: ProblemData,
        mesh: Arc<Triangulation>,
        degree: usize,
        k: usize,
        grid: TimeGrid,
        control_mass: ControlMass,
    ) -> Result<Self> {
        params.validate()?;
        data.validate()?;
        if (grid.final_time() - data.final_time).abs() > 1e-12 * data.final_time {
            return Err(Error::InvalidArgument(format!(
                "time grid ends at {} but the problem horizon is {}",
                grid.final_time(),
                data.final_time
            )));
        }
        let basis = TemporalBasis::new(k)?;
        let bc = match params.control_kind {
            ControlKind::Distributed => BoundaryCondition::DirichletZero,
            ControlKind::Robin => BoundaryCondition::Free,
        };
        let space = FeSpace::new(mesh, degree, bc)?;
        if control_mass == ControlMass::Lumped && degree != 1 {
            return Err(Error::InvalidArgument("lumped control mass requires degree 1".into()));
        }
        let mass = assembly::assemble_mass(&space);
        let stiffness = assembly::assemble_stiffness(&space);
        let boundary_mass = match params.control_kind {
            ControlKind::Robin => {
                let free = FeSpace::new(space.mesh().clone(), degree, BoundaryCondition::Free)?;
                Some(assembly::assemble_boundary_mass(&free)?)
            }
            ControlKind::Distributed => None,
        };
        let control = match params.control_kind {
            ControlKind::Distributed => ControlSpace {
                kind: ControlKind::Distributed,
                mass: match control_mass {
                    ControlMass::Consistent => mass.clone(),
                    ControlMass::Lumped => assembly::assemble_mass_with(&space, &TriangleRule::vertices()),
                },
                fixed: space.dirichlet_mask().to_vec(),
            },
            ControlKind::Robin => ControlSpace {
                kind: ControlKind::Robin,
                mass: assembly::assemble_trace_mass(&space, control_mass == ControlMass::Lumped),
                fixed: vec![false; space.n_boundary_dofs()],
            },
        };
        let y0 = [space.interpolate(|x| (data.y10)(x))?, space.interpolate(|x| (data.y20)(x))?];

        let rule = reaction_rule(&space);
        let phi = tabulate(&space, &rule);
        let mut weights = Vec::with_capacity(space.n_cells() * rule.len());
        for t in 0..space.n_cells() {
            let area = space.geometry(t).area;
            weights.extend(rule.weights.iter().map(|w| w * area));
        }
        let quad = ReactionQuadrature {
            n_q: rule.len(),
            phi,
            weights,
        };

        let nd = space.n_dofs();
        let nn = basis.n_nodes();
        let n_int = grid.n_intervals();
        let drule = data_rule();
        let mut forcing = [
            SpaceTimeField::zeros(k, nd, n_int),
            SpaceTimeField::zeros(k, nd, n_int),
        ];
        let mut target_loads = [
            Vec::with_capacity(n_int * drule.points.len() * nd),
            Vec::with_capacity(n_int * drule.points.len() * nd),
        ];
        let mut target_sq = [Vec::new(), Vec::new()];
        let f = [data.f1.clone(), data.f2.clone()];
        let yd = [data.y1d.clone(), data.y2d.clone()];
        for n in 0..n_int {
            let (t0, tau) = (grid.knots()[n], grid.tau(n));
            for (&s, &w) in drule.points.iter().zip(&drule.weights) {
                let t = t0 + s * tau;
                for sp in 0..2 {
                    let load = assembly::load_vector(&space, |x| (f[sp])(t, x));
                    for b in 0..nn {
                        let c = tau * w * basis.value(b, s);
                        for (o, l) in forcing[sp].node_mut(n, b).iter_mut().zip(&load) {
                            *o += c * l;
                        }
                    }
                    target_loads[sp].extend(assembly::load_vector(&space, |x| (yd[sp])(t, x)));
                    target_sq[sp].push(assembly::integrate(&space, |x| (yd[sp])(t, x).powi(2)));
                }
            }
        }

        let block_pattern = Arc::new(block_pattern(space.pattern(), 2 * nn));
        Ok(Self {
            params,
            data,
            transport: basis.transport_matrix(),
            tmass: basis.mass_matrix(),
            reaction_time: basis.reaction_rule(),
            space,
            grid,
            basis,
            mass,
            stiffness,
            boundary_mass,
            control,
            y0,
            quad,
            forcing,
            target_loads,
            target_sq,
            block_pattern,
            precond: Mutex::new(Vec::new()),
        })
    }

    pub fn k(&self) -> usize {
        self.basis.degree()
    }

    pub fn n_nodes(&self) -> usize {
        self.basis.n_nodes()
    }

    pub fn n_dofs(&self) -> usize {
        self.space.n_dofs()
    }

    pub fn n_intervals(&self) -> usize {
        self.grid.n_intervals()
    }

    /// Length of the stacked per-interval vector.
    pub fn block_len(&self) -> usize {
        2 * self.n_nodes() * self.n_dofs()
    }

    pub fn h(&self) -> f64 {
        self.space.mesh().h
    }

    /// Temporal mass matrix `∫ψₐψ_b`.
    pub fn temporal_mass(&self) -> [[f64; 2]; 2] {
        self.tmass
    }

    pub fn zero_field(&self) -> SpaceTimeField {
        SpaceTimeField::zeros(self.k(), self.n_dofs(), self.n_intervals())
    }

    pub fn zero_control_field(&self) -> SpaceTimeField {
        SpaceTimeField::zeros(self.k(), self.control.n_dofs(), self.n_intervals())
    }

    fn species_block<'a>(&self, v: &'a [f64], s: usize) -> &'a [f64] {
        let len = self.n_nodes() * self.n_dofs();
        &v[s * len..(s + 1) * len]
    }

    fn node_block<'a>(&self, v: &'a [f64], s: usize, a: usize) -> &'a [f64] {
        let nd = self.n_dofs();
        let start = (s * self.n_nodes() + a) * nd;
        &v[start..start + nd]
    }

    fn node_block_mut<'a>(&self, v: &'a mut [f64], s: usize, a: usize) -> &'a mut [f64] {
        let nd = self.n_dofs();
        let start = (s * self.n_nodes() + a) * nd;
        &mut v[start..start + nd]
    }

    /// Stacks the coefficients of interval `n` of two fields.
    pub fn stack(&self, f1: &SpaceTimeField, f2: &SpaceTimeField, n: usize) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.block_len());
        v.extend_from_slice(f1.interval(n));
        v.extend_from_slice(f2.interval(n));
        v
    }

    pub fn unstack(&self, v: &[f64], f1: &mut SpaceTimeField, f2: &mut SpaceTimeField, n: usize) {
        f1.interval_mut(n).copy_from_slice(self.species_block(v, 0));
        f2.interval_mut(n).copy_from_slice(self.species_block(v, 1));
    }

    /// `out += alpha · (ε_s K + λ_s B) x`.
    fn apply_spatial(&self, s: usize, alpha: f64, x: &[f64], out: &mut [f64]) {
        self.stiffness.mul_add(alpha * self.params.eps(s), x, out);
        if let Some(b) = &self.boundary_mass {
            b.mul_add(alpha * self.params.lambda(s), x, out);
        }
    }

    /// Linear part of the interval operator (or its transpose) applied to `x`,
    /// accumulated into `out`.
    fn apply_linear(&self, tau: f64, transpose: bool, x: &[f64], out: &mut [f64]) {
        let nn = self.n_nodes();
        let nd = self.n_dofs();
        let mut mx = vec![0.0; nd];
        let mut lx = vec![0.0; nd];
        for s in 0..2 {
            for a in 0..nn {
                let xa = self.node_block(x, s, a);
                mx.fill(0.0);
                lx.fill(0.0);
                self.mass.mul_add(1.0, xa, &mut mx);
                self.apply_spatial(s, 1.0, xa, &mut lx);
                for b in 0..nn {
                    let (ct, cm) = if transpose {
                        (self.transport[a][b], self.tmass[a][b])
                    } else {
                        (self.transport[b][a], self.tmass[b][a])
                    };
                    let o = self.node_block_mut(out, s, b);
                    for i in 0..nd {
                        o[i] += ct * mx[i] + tau * cm * lx[i];
                    }
                }
            }
        }
    }

    /// Values of both species at the reaction time points of an interval.
    fn time_values(&self, x: &[f64]) -> Vec<[Vec<f64>; 2]> {
        let nn = self.n_nodes();
        let nd = self.n_dofs();
        self.reaction_time
            .points
            .iter()
            .map(|&st| {
                let mut out = [vec![0.0; nd], vec![0.0; nd]];
                for (s, o) in out.iter_mut().enumerate() {
                    for a in 0..nn {
                        let w = self.basis.value(a, st);
                        for (oi, xi) in o.iter_mut().zip(self.node_block(x, s, a)) {
                            *oi += w * xi;
                        }
                    }
                }
                out
            })
            .collect()
    }

    /// Scatters `-τ wⱼ ψ_b(sⱼ) r` into every node block of species `s`.
    fn scatter_time(&self, tau: f64, j: usize, s: usize, r: &[f64], out: &mut [f64]) {
        let st = self.reaction_time.points[j];
        let wj = self.reaction_time.weights[j];
        for b in 0..self.n_nodes() {
            let c = -tau * wj * self.basis.value(b, st);
            for (o, ri) in self.node_block_mut(out, s, b).iter_mut().zip(r) {
                *o += c * ri;
            }
        }
    }

    /// Full interval residual. `prev` holds the left limits of both species
    /// at the left knot and `g` the stacked control coefficients.
    pub fn residual(&self, n: usize, y: &[f64], prev: [&[f64]; 2], g: &[f64]) -> Vec<f64> {
        let tau = self.grid.tau(n);
        let nn = self.n_nodes();
        let nd = self.n_dofs();
        let mut out = vec![0.0; self.block_len()];
        self.apply_linear(tau, false, y, &mut out);
        let mut mp = vec![0.0; nd];
        for s in 0..2 {
            mp.fill(0.0);
            self.mass.mul_add(1.0, prev[s], &mut mp);
            for b in 0..nn {
                let w0 = self.basis.value(b, 0.0);
                let f = self.forcing[s].node(n, b);
                let o = self.node_block_mut(&mut out, s, b);
                for i in 0..nd {
                    o[i] -= w0 * mp[i] + f[i];
                }
            }
        }
        self.apply_control(n, g, -1.0, &mut out);
        // reaction
        let p = &self.params;
        let nl = self.space.n_local();
        for (j, yv) in self.time_values(y).iter().enumerate() {
            let mut r = [vec![0.0; nd], vec![0.0; nd]];
            for t in 0..self.space.n_cells() {
                let dofs = self.space.cell_dofs(t);
                for q in 0..self.quad.n_q {
                    let ph = &self.quad.phi[q];
                    let (mut y1, mut y2) = (0.0, 0.0);
                    for a in 0..nl {
                        y1 += ph[a] * yv[0][dofs[a]];
                        y2 += ph[a] * yv[1][dofs[a]];
                    }
                    let w = self.quad.weights[t * self.quad.n_q + q];
                    let nv = p.reaction(y1, y2);
                    for a in 0..nl {
                        r[0][dofs[a]] += w * nv[0] * ph[a];
                        r[1][dofs[a]] += w * nv[1] * ph[a];
                    }
                }
            }
            for s in 0..2 {
                self.scatter_time(tau, j, s, &r[s], &mut out);
            }
        }
        self.fix_dirichlet_rows(y, &mut out);
        out
    }

    /// `out += scale · τ Σₐ Tm[b][a] C gₐ` for both species.
    pub fn apply_control(&self, n: usize, g: &[f64], scale: f64, out: &mut [f64]) {
        let tau = self.grid.tau(n);
        let nn = self.n_nodes();
        let nc = self.control.n_dofs();
        let mut cg = vec![0.0; nc];
        for s in 0..2 {
            for a in 0..nn {
                let ga = &g[(s * nn + a) * nc..(s * nn + a + 1) * nc];
                cg.fill(0.0);
                self.control.mass.mul_add(1.0, ga, &mut cg);
                let vol = match self.control.kind {
                    ControlKind::Distributed => cg.clone(),
                    ControlKind::Robin => {
                        let mut v = self.space.extend(&cg);
                        v.iter_mut().for_each(|x| *x *= self.params.lambda(s));
                        v
                    }
                };
                for b in 0..nn {
                    let c = scale * tau * self.tmass[b][a];
                    for (o, v) in self.node_block_mut(out, s, b).iter_mut().zip(&vol) {
                        *o += c * v;
                    }
                }
            }
        }
    }

    /// Riesz representative of `Cᵀλ` in the control inner product:
    /// `λ` itself (distributed) or `λₛ · trace(λ)` (Robin).
    pub fn control_adjoint(&self, s: usize, lambda: &[f64]) -> Vec<f64> {
        match self.control.kind {
            ControlKind::Distributed => {
                let mut v = lambda.to_vec();
                for (x, &f) in v.iter_mut().zip(&self.control.fixed) {
                    if f {
                        *x = 0.0;
                    }
                }
                v
            }
            ControlKind::Robin => {
                let mut v = self.space.trace(lambda);
                v.iter_mut().for_each(|x| *x *= self.params.lambda(s));
                v
            }
        }
    }

    /// Dirichlet rows: `out_i = x_i`.
    fn fix_dirichlet_rows(&self, x: &[f64], out: &mut [f64]) {
        let nd = self.n_dofs();
        for blk in 0..2 * self.n_nodes() {
            for &d in self.space.dirichlet_dofs() {
                out[blk * nd + d] = x[blk * nd + d];
            }
        }
    }

    fn mask_dirichlet(&self, x: &mut [f64]) {
        let nd = self.n_dofs();
        for blk in 0..2 * self.n_nodes() {
            for &d in self.space.dirichlet_dofs() {
                x[blk * nd + d] = 0.0;
            }
        }
    }

    /// Sets Dirichlet entries of a stacked interval vector to zero.
    pub fn zero_dirichlet_rows(&self, x: &mut [f64]) {
        self.mask_dirichlet(x);
    }

    /// Reaction Jacobian at the iterate `y` of interval `n`.
    pub fn linearize(&self, y: &[f64]) -> Linearization {
        let p = &self.params;
        let nl = self.space.n_local();
        let nq = self.quad.n_q;
        let mut coeffs = Vec::with_capacity(self.reaction_time.points.len() * self.space.n_cells() * nq);
        for yv in self.time_values(y) {
            for t in 0..self.space.n_cells() {
                let dofs = self.space.cell_dofs(t);
                for q in 0..nq {
                    let ph = &self.quad.phi[q];
                    let (mut y1, mut y2) = (0.0, 0.0);
                    for a in 0..nl {
                        y1 += ph[a] * yv[0][dofs[a]];
                        y2 += ph[a] * yv[1][dofs[a]];
                    }
                    let w = self.quad.weights[t * nq + q];
                    let j = p.reaction_jacobian(y1, y2);
                    coeffs.push([w * j[0][0], w * j[0][1], w * j[1][0], w * j[1][1]]);
                }
            }
        }
        Linearization { coeffs }
    }

    /// Interval Jacobian (or its transpose) applied to `x`. With
    /// `cross = false` the off-diagonal species couplings of the reaction
    /// Jacobian are dropped.
    pub fn apply_jacobian(
        &self,
        n: usize,
        lin: &Linearization,
        transpose: bool,
        cross: bool,
        x: &[f64],
    ) -> Vec<f64> {
        let tau = self.grid.tau(n);
        let nd = self.n_dofs();
        let nl = self.space.n_local();
        let nq = self.quad.n_q;
        let mut xm = x.to_vec();
        self.mask_dirichlet(&mut xm);
        let mut out = vec![0.0; self.block_len()];
        self.apply_linear(tau, transpose, &xm, &mut out);
        let ncell = self.space.n_cells();
        for (j, zv) in self.time_values(&xm).iter().enumerate() {
            let mut r = [vec![0.0; nd], vec![0.0; nd]];
            for t in 0..ncell {
                let dofs = self.space.cell_dofs(t);
                for q in 0..nq {
                    let ph = &self.quad.phi[q];
                    let (mut z1, mut z2) = (0.0, 0.0);
                    for a in 0..nl {
                        z1 += ph[a] * zv[0][dofs[a]];
                        z2 += ph[a] * zv[1][dofs[a]];
                    }
                    let c = lin.coeffs[(j * ncell + t) * nq + q];
                    let (c12, c21) = match (cross, transpose) {
                        (false, _) => (0.0, 0.0),
                        (true, false) => (c[1], c[2]),
                        (true, true) => (c[2], c[1]),
                    };
                    let v1 = c[0] * z1 + c12 * z2;
                    let v2 = c21 * z1 + c[3] * z2;
                    for a in 0..nl {
                        r[0][dofs[a]] += v1 * ph[a];
                        r[1][dofs[a]] += v2 * ph[a];
                    }
                }
            }
            for s in 0..2 {
                self.scatter_time(tau, j, s, &r[s], &mut out);
            }
        }
        self.fix_dirichlet_rows(x, &mut out);
        out
    }

    /// Assembled interval Jacobian (Dirichlet rows and columns eliminated).
    pub fn assemble_jacobian(&self, n: usize, lin: &Linearization, cross: bool) -> SparseMatrix {
        let tau = self.grid.tau(n);
        let nd = self.n_dofs();
        let nn = self.n_nodes();
        let mut m = SparseMatrix::zeros(self.block_pattern.clone());
        let add_block = |m: &mut SparseMatrix, bi: usize, bj: usize, src: &SparseMatrix, c: f64| {
            let p = src.pattern();
            for i in 0..nd {
                for (kk, &j) in p.row(i).iter().enumerate() {
                    let v = src.values()[p.row_ptr()[i] + kk];
                    m.add(bi * nd + i, bj * nd + j, c * v);
                }
            }
        };
        for s in 0..2 {
            let mut l = self.stiffness.clone();
            l.scale(self.params.eps(s));
            if let Some(b) = &self.boundary_mass {
                l.axpy(self.params.lambda(s), b).expect("shared pattern");
            }
            for b in 0..nn {
                for a in 0..nn {
                    add_block(&mut m, s * nn + b, s * nn + a, &self.mass, self.transport[b][a]);
                    add_block(&mut m, s * nn + b, s * nn + a, &l, tau * self.tmass[b][a]);
                }
            }
        }
        // reaction blocks
        let nl = self.space.n_local();
        let nq = self.quad.n_q;
        let ncell = self.space.n_cells();
        for (j, (&st, &wj)) in self.reaction_time.points.iter().zip(&self.reaction_time.weights).enumerate() {
            for (s, s2, idx) in [(0, 0, 0), (0, 1, 1), (1, 0, 2), (1, 1, 3)] {
                if !cross && s != s2 {
                    continue;
                }
                for b in 0..nn {
                    for a in 0..nn {
                        let c = -tau * wj * self.basis.value(b, st) * self.basis.value(a, st);
                        for t in 0..ncell {
                            let dofs = self.space.cell_dofs(t);
                            for q in 0..nq {
                                let ph = &self.quad.phi[q];
                                let w = c * lin.coeffs[(j * ncell + t) * nq + q][idx];
                                for r in 0..nl {
                                    for cc in 0..nl {
                                        m.add(
                                            (s * nn + b) * nd + dofs[r],
                                            (s2 * nn + a) * nd + dofs[cc],
                                            w * ph[r] * ph[cc],
                                        );
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        let mut mask = vec![false; self.block_len()];
        for blk in 0..2 * nn {
            for &d in self.space.dirichlet_dofs() {
                mask[blk * nd + d] = true;
            }
        }
        m.eliminate(&mask);
        m
    }

    fn preconditioner(&self, tau: f64) -> Result<Arc<Preconditioner>> {
        let mut cache = self.precond.lock().expect("preconditioner cache poisoned");
        if let Some(p) = cache.iter().find(|p| (p.tau - tau).abs() <= 1e-6 * tau) {
            return Ok(p.clone());
        }
        let nd = self.n_dofs();
        let nn = self.n_nodes();
        let single = Arc::new(block_pattern(self.space.pattern(), nn));
        let mut mask = vec![false; nn * nd];
        for a in 0..nn {
            for &d in self.space.dirichlet_dofs() {
                mask[a * nd + d] = true;
            }
        }
        let mut lus = Vec::with_capacity(2);
        for s in 0..2 {
            let mut l = self.stiffness.clone();
            l.scale(self.params.eps(s));
            if let Some(b) = &self.boundary_mass {
                l.axpy(self.params.lambda(s), b)?;
            }
            let mut m = SparseMatrix::zeros(single.clone());
            for b in 0..nn {
                for a in 0..nn {
                    for (src, c) in [(&self.mass, self.transport[b][a]), (&l, tau * self.tmass[b][a])] {
                        let p = src.pattern();
                        for i in 0..nd {
                            for kk in p.row_ptr()[i]..p.row_ptr()[i + 1] {
                                m.add(b * nd + i, a * nd + p.col_idx()[kk], c * src.values()[kk]);
                            }
                        }
                    }
                }
            }
            m.eliminate(&mask);
            lus.push(SparseLu::new(&m)?);
        }
        let lu1 = lus.pop().expect("two factors");
        let lu0 = lus.pop().expect("two factors");
        let p = Arc::new(Preconditioner { tau, lu: [lu0, lu1] });
        cache.push(p.clone());
        Ok(p)
    }

    /// Solves `J x = rhs` (or `Jᵀ x = rhs`) for the interval Jacobian.
    ///
    /// Richardson iteration preconditioned by the factored linear part; the
    /// reaction contributes `O(τ)` so the iteration contracts quickly. If it
    /// stalls, the assembled Jacobian is factored directly.
    pub fn solve_jacobian(
        &self,
        n: usize,
        lin: &Linearization,
        transpose: bool,
        cross: bool,
        rhs: &[f64],
        rel_tol: f64,
    ) -> Result<Vec<f64>> {
        const MAX_IT: usize = 60;
        let tau = self.grid.tau(n);
        let pc = self.preconditioner(tau)?;
        let half = self.n_nodes() * self.n_dofs();
        let apply_pc = |v: &mut [f64]| {
            for s in 0..2 {
                let blk = &mut v[s * half..(s + 1) * half];
                if transpose {
                    pc.lu[s].solve_transpose_in_place(blk);
                } else {
                    pc.lu[s].solve_in_place(blk);
                }
            }
        };
        let bnorm = norm(rhs);
        if bnorm == 0.0 {
            return Ok(vec![0.0; rhs.len()]);
        }
        let mut x = rhs.to_vec();
        apply_pc(&mut x);
        let mut prev = f64::INFINITY;
        for _ in 0..MAX_IT {
            let ax = self.apply_jacobian(n, lin, transpose, cross, &x);
            let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let rn = norm(&r);
            if rn <= rel_tol * bnorm {
                return Ok(x);
            }
            if !rn.is_finite() || rn > 0.5 * prev {
                // stalled at the rounding floor: close enough for Newton
                if rn <= 1e-9 * bnorm {
                    return Ok(x);
                }
                break;
            }
            prev = rn;
            apply_pc(&mut r);
            for (xi, di) in x.iter_mut().zip(&r) {
                *xi += di;
            }
        }
        self.solve_jacobian_direct(n, lin, transpose, cross, rhs)
    }

    fn solve_jacobian_direct(
        &self,
        n: usize,
        lin: &Linearization,
        transpose: bool,
        cross: bool,
        rhs: &[f64],
    ) -> Result<Vec<f64>> {
        let m = self.assemble_jacobian(n, lin, cross);
        let lu = SparseLu::new(&m)?;
        let mut x = rhs.to_vec();
        if transpose {
            lu.solve_transpose_in_place(&mut x);
        } else {
            lu.solve_in_place(&mut x);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SolverFailure {
                reason: format!("interval {n} Jacobian is singular"),
                residual: f64::NAN,
                condition: f64::INFINITY,
            });
        }
        Ok(x)
    }

    /// Tracking part `½ Σₛ ∫∫ |yₛ − y_{s,d}|²` for each species on interval `n`.
    pub fn tracking(&self, n: usize, y: &[f64]) -> [f64; 2] {
        let tau = self.grid.tau(n);
        let drule = data_rule();
        let np = drule.points.len();
        let nd = self.n_dofs();
        let mut out = [0.0; 2];
        for (j, (&st, &w)) in drule.points.iter().zip(&drule.weights).enumerate() {
            for (s, o) in out.iter_mut().enumerate() {
                let ys = self.value_at(y, s, st);
                let bd = &self.target_loads[s][(n * np + j) * nd..(n * np + j + 1) * nd];
                let cd = self.target_sq[s][n * np + j];
                let val = self.mass.bilinear(&ys, &ys) - 2.0 * dot(&ys, bd) + cd;
                *o += 0.5 * tau * w * val;
            }
        }
        out
    }

    /// Gradient of the tracking term with respect to the stacked coefficients.
    pub fn tracking_gradient(&self, n: usize, y: &[f64]) -> Vec<f64> {
        let tau = self.grid.tau(n);
        let drule = data_rule();
        let np = drule.points.len();
        let nd = self.n_dofs();
        let mut out = vec![0.0; self.block_len()];
        for (j, (&st, &w)) in drule.points.iter().zip(&drule.weights).enumerate() {
            for s in 0..2 {
                let ys = self.value_at(y, s, st);
                let bd = &self.target_loads[s][(n * np + j) * nd..(n * np + j + 1) * nd];
                let mut r = self.mass.mul_vec(&ys);
                for (ri, b) in r.iter_mut().zip(bd) {
                    *ri -= b;
                }
                for a in 0..self.n_nodes() {
                    let c = tau * w * self.basis.value(a, st);
                    for (o, ri) in self.node_block_mut(&mut out, s, a).iter_mut().zip(&r) {
                        *o += c * ri;
                    }
                }
            }
        }
        out
    }

    /// `∫_I ∫_Ω zᵀ M z` for a stacked interval vector, exact in time.
    pub fn interval_mass_norm(&self, n: usize, z: &[f64]) -> f64 {
        let tau = self.grid.tau(n);
        let nn = self.n_nodes();
        let mut total = 0.0;
        for s in 0..2 {
            for a in 0..nn {
                let ma = self.mass.mul_vec(self.node_block(z, s, a));
                for b in 0..nn {
                    total += tau * self.tmass[b][a] * dot(self.node_block(z, s, b), &ma);
                }
            }
        }
        total
    }

    /// `τ ∫ 2 z₁ z₂ (b λ₁ − c λ₂)` over interval `n`: the adjoint-weighted
    /// second derivative of the reaction residual.
    pub fn reaction_curvature(&self, n: usize, z: &[f64], lambda: &[f64]) -> f64 {
        let tau = self.grid.tau(n);
        let (b, c) = (self.params.b, self.params.c);
        let nl = self.space.n_local();
        let nq = self.quad.n_q;
        let zv = self.time_values(z);
        let lv = self.time_values(lambda);
        let mut total = 0.0;
        for (j, &wj) in self.reaction_time.weights.iter().enumerate() {
            let mut acc = 0.0;
            for t in 0..self.space.n_cells() {
                let dofs = self.space.cell_dofs(t);
                for q in 0..nq {
                    let ph = &self.quad.phi[q];
                    let (mut z1, mut z2, mut l1, mut l2) = (0.0, 0.0, 0.0, 0.0);
                    for a in 0..nl {
                        let d = dofs[a];
                        z1 += ph[a] * zv[j][0][d];
                        z2 += ph[a] * zv[j][1][d];
                        l1 += ph[a] * lv[j][0][d];
                        l2 += ph[a] * lv[j][1][d];
                    }
                    acc += self.quad.weights[t * nq + q] * 2.0 * z1 * z2 * (b * l1 - c * l2);
                }
            }
            total += tau * wj * acc;
        }
        total
    }

    fn value_at(&self, y: &[f64], s: usize, st: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dofs()];
        for a in 0..self.n_nodes() {
            let w = self.basis.value(a, st);
            for (o, v) in out.iter_mut().zip(self.node_block(y, s, a)) {
                *o += w * v;
            }
        }
        out
    }

    /// End value of species `s` in a stacked interval vector.
    pub fn end_block<'a>(&self, y: &'a [f64], s: usize) -> &'a [f64] {
        self.node_block(y, s, self.k())
    }

    /// `ψ_b(0) M x_s` placed into node blocks of species `s`, for both species.
    pub fn jump_source(&self, prev: [&[f64]; 2]) -> Vec<f64> {
        let mut out = vec![0.0; self.block_len()];
        for s in 0..2 {
            let mp = self.mass.mul_vec(prev[s]);
            for b in 0..self.n_nodes() {
                let w0 = self.basis.value(b, 0.0);
                for (o, v) in self.node_block_mut(&mut out, s, b).iter_mut().zip(&mp) {
                    *o += w0 * v;
                }
            }
        }
        out
    }

    /// Adjoint coupling to the previous interval:
    /// `ψₐ(1) M Σ_b ψ_b(0) λ_b` for every node `a`.
    pub fn backward_jump_source(&self, next: &[f64]) -> Vec<f64> {
        let nd = self.n_dofs();
        let mut out = vec![0.0; self.block_len()];
        for s in 0..2 {
            let mut sum = vec![0.0; nd];
            for b in 0..self.n_nodes() {
                let w0 = self.basis.value(b, 0.0);
                for (o, v) in sum.iter_mut().zip(self.node_block(next, s, b)) {
                    *o += w0 * v;
                }
            }
            let ms = self.mass.mul_vec(&sum);
            for a in 0..self.n_nodes() {
                let w1 = self.basis.value(a, 1.0);
                for (o, v) in self.node_block_mut(&mut out, s, a).iter_mut().zip(&ms) {
                    *o += w1 * v;
                }
            }
        }
        out
    }
}

/// Pattern of an `nb × nb` block matrix whose blocks all share `base`.
fn block_pattern(base: &SparsePattern, nb: usize) -> SparsePattern {
    let nd = base.n();
    let mut rows = Vec::with_capacity(nb * nd);
    for _bi in 0..nb {
        for i in 0..nd {
            let mut r = Vec::with_capacity(nb * base.row(i).len());
            for bj in 0..nb {
                r.extend(base.row(i).iter().map(|&j| bj * nd + j));
            }
            rows.push(r);
        }
    }
    SparsePattern::from_rows(rows)
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
