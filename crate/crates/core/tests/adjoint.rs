mod common;

use std::sync::Arc;

use common::{direction, experiment, frozen, params, rel};
use lv_optctl::adjoint::{solve_adjoint, solve_tangent, AdjointMode};
use lv_optctl::discretization::ControlMass;
use lv_optctl::model::{constant_fn, ControlKind, ModelParams, ProblemData};
use lv_optctl::objective::{control_inner, gradient, inner, ControlPair};
use lv_optctl::state::solve_state;
use nalgebra::{DMatrix, DVector};

#[test]
fn matching_targets_give_zero_adjoint() {
    for k in [0, 1] {
        let disc = frozen([16.0, 25.0], [16.0, 25.0], 4, k);
        let st = solve_state(&disc, &ControlPair::zeros(&disc)).unwrap();
        for mode in [AdjointMode::Diagonal, AdjointMode::Full] {
            let adj = solve_adjoint(&disc, &st, mode).unwrap();
            assert!(adj.mu1.max_abs() < 1e-10 && adj.mu2.max_abs() < 1e-10);
        }
    }
}

#[test]
fn zero_source_sweep_is_exactly_zero() {
    let disc = frozen([0.0, 0.0], [0.0, 0.0], 3, 1);
    let st = solve_state(&disc, &ControlPair::zeros(&disc)).unwrap();
    let adj = solve_adjoint(&disc, &st, AdjointMode::Full).unwrap();
    assert!(adj.mu1.data().iter().chain(adj.mu2.data()).all(|&v| v == 0.0));
}

/// P1 matrices of a triangulation assembled from the element formulas.
fn hand_matrices(mesh: &lv_optctl::mesh::Triangulation) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let nv = mesh.n_vertices();
    let mut m = DMatrix::zeros(nv, nv);
    let mut k = DMatrix::zeros(nv, nv);
    let mut b = DMatrix::zeros(nv, nv);
    for tri in &mesh.triangles {
        let p: Vec<[f64; 2]> = tri.iter().map(|&v| mesh.vertices[v]).collect();
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let area = 0.5 * det.abs();
        // gradient of the hat function at vertex i: rotated opposite edge / (2·signed area)
        let grads: Vec<[f64; 2]> = (0..3)
            .map(|i| {
                let (a, c) = (p[(i + 1) % 3], p[(i + 2) % 3]);
                [(a[1] - c[1]) / det, (c[0] - a[0]) / det]
            })
            .collect();
        for i in 0..3 {
            for j in 0..3 {
                let (vi, vj) = (tri[i], tri[j]);
                m[(vi, vj)] += area / 12.0 * if i == j { 2.0 } else { 1.0 };
                k[(vi, vj)] += area * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
            }
        }
    }
    for e in &mesh.boundary_edges {
        let (pa, pb) = (mesh.vertices[e[0]], mesh.vertices[e[1]]);
        let len = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
        for (i, j, w) in [(e[0], e[0], 2.0), (e[1], e[1], 2.0), (e[0], e[1], 1.0), (e[1], e[0], 1.0)] {
            b[(i, j)] += len / 6.0 * w;
        }
    }
    (m, k, b)
}

#[test]
fn one_step_adjoint_matches_hand_assembled_system() {
    // no cross kinetics: the reaction Jacobian is diag(a, −d)
    let p = ModelParams {
        b: 0.0,
        c: 0.0,
        control_kind: ControlKind::Robin,
        ..ModelParams::default()
    };
    let data = ProblemData {
        f1: constant_fn(0.0),
        f2: constant_fn(0.0),
        y10: Arc::new(|x| 16.0 + x[0]),
        y20: Arc::new(|x| 25.0 - x[1]),
        y1d: constant_fn(1.0),
        y2d: constant_fn(20.0),
        final_time: 0.1,
    };
    let disc = common::build(p.clone(), data, 1, 1, 0, 1, ControlMass::Consistent);
    let st = solve_state(&disc, &ControlPair::zeros(&disc)).unwrap();
    let adj = solve_adjoint(&disc, &st, AdjointMode::Full).unwrap();

    let (m, k, b) = hand_matrices(disc.space.mesh());
    let tau = 0.1;
    let targets = [1.0, 20.0];
    let coeff = [p.a, -p.d];
    for s in 0..2 {
        let a = &m + (&k * p.eps(s) + &b * p.lambda(s)) * tau - &m * (tau * coeff[s]);
        let y = DVector::from_column_slice(st.species(s).node(0, 0));
        let rhs = &m * (y - DVector::from_element(m.nrows(), targets[s])) * tau;
        let mu = a.transpose().lu().solve(&rhs).unwrap();
        let got = adj.species(s).node(0, 0);
        for i in 0..mu.len() {
            assert!((got[i] - mu[i]).abs() < 1e-12 * mu.amax(), "species {s} dof {i}: {} vs {}", got[i], mu[i]);
        }
    }
}

#[test]
fn tangent_is_linear_and_vanishes_for_zero_direction() {
    let disc = experiment(params(ControlKind::Robin), 3, 1, 1, 4);
    let g = ControlPair::constant(&disc, 1.0);
    let st = solve_state(&disc, &g).unwrap();
    let z0 = solve_tangent(&disc, &st, &ControlPair::zeros(&disc)).unwrap();
    assert!(z0.y1.max_abs() == 0.0 && z0.y2.max_abs() == 0.0);
    let v = direction(&disc, 11);
    let mut v2 = v.clone();
    v2.scale(2.0);
    let z = solve_tangent(&disc, &st, &v).unwrap();
    let z2 = solve_tangent(&disc, &st, &v2).unwrap();
    let scale = z.y1.max_abs().max(z.y2.max_abs());
    for (a, b) in z2.y1.data().iter().zip(z.y1.data()).chain(z2.y2.data().iter().zip(z.y2.data())) {
        assert!((a - 2.0 * b).abs() <= 1e-10 * scale);
    }
}

#[test]
fn tangent_matches_state_difference_quotients() {
    for kind in [ControlKind::Distributed, ControlKind::Robin] {
        let disc = experiment(params(kind), 4, 1, 0, 6);
        let g = ControlPair::constant(&disc, 1.0);
        let st = solve_state(&disc, &g).unwrap();
        // large direction so the O(ε) remainder dominates the Newton tolerance
        let mut v = direction(&disc, 5);
        v.scale(300.0);
        let z = solve_tangent(&disc, &st, &v).unwrap();
        let errs: Vec<f64> = [1e-3, 1e-4]
            .iter()
            .map(|&e| {
                let mut gp = g.clone();
                gp.axpy(e, &v);
                let sp = solve_state(&disc, &gp).unwrap();
                let mut err = 0.0f64;
                for s in 0..2 {
                    for ((a, b), c) in sp.species(s).data().iter().zip(st.species(s).data()).zip(z.species(s).data()) {
                        err = err.max(((a - b) / e - c).abs());
                    }
                }
                err
            })
            .collect();
        let ratio = errs[0] / errs[1];
        assert!((7.0..13.0).contains(&ratio), "{kind:?}: errors {errs:?}");
    }
}

#[test]
fn discrete_adjoint_identity() {
    for kind in [ControlKind::Distributed, ControlKind::Robin] {
        for (degree, k) in [(1, 0), (2, 1)] {
            let disc = experiment(params(kind), 3, degree, k, 4);
            let g = ControlPair::constant(&disc, 1.0);
            let st = solve_state(&disc, &g).unwrap();
            let adj = solve_adjoint(&disc, &st, AdjointMode::Full).unwrap();
            let v = direction(&disc, 17);
            let z = solve_tangent(&disc, &st, &v).unwrap();
            // derivative through the tangent: tracking weight · z + γ (g, v)
            let mut via_tangent = 0.0;
            for n in 0..disc.n_intervals() {
                let y = disc.stack(&st.y1, &st.y2, n);
                let zn = disc.stack(&z.y1, &z.y2, n);
                via_tangent += disc
                    .tracking_gradient(n, &y)
                    .iter()
                    .zip(&zn)
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            }
            for s in 0..2 {
                via_tangent += disc.params.gamma(s) * control_inner(&disc, g.species(s), v.species(s));
            }
            let via_adjoint = inner(&disc, &gradient(&disc, &adj, &g), &v);
            assert!(
                rel(via_adjoint, via_tangent) <= 1e-8,
                "{kind:?} P{degree} dG({k}): {via_adjoint} vs {via_tangent}"
            );
        }
    }
}
