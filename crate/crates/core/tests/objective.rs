mod common;

use common::{direction, experiment, frozen, params, rel};
use lv_optctl::adjoint::{solve_adjoint, solve_tangent, AdjointMode, AdjointPair};
use lv_optctl::discretization::Discretization;
use lv_optctl::fem::quadrature::LineRule;
use lv_optctl::model::ControlKind;
use lv_optctl::objective::*;
use lv_optctl::state::solve_state;
use proptest::prelude::*;

fn reduced_j(disc: &Discretization, g: &ControlPair) -> f64 {
    evaluate_j(disc, &solve_state(disc, g).unwrap(), g)
}

#[test]
fn cost_vanishes_on_target() {
    let disc = frozen([16.0, 25.0], [16.0, 25.0], 4, 1);
    let g = ControlPair::zeros(&disc);
    assert!(reduced_j(&disc, &g).abs() < 1e-10);
}

#[test]
fn unit_misfit_cost() {
    // y − y_d ≡ 1 for both species over (0, 0.1) on the unit square
    let disc = frozen([16.0, 25.0], [15.0, 24.0], 4, 0);
    let j = reduced_j(&disc, &ControlPair::zeros(&disc));
    assert!((j - 0.1).abs() < 1e-12, "{j}");
    let c = cost(&disc, &solve_state(&disc, &ControlPair::zeros(&disc)).unwrap(), &ControlPair::zeros(&disc));
    for d in c.distances() {
        assert!((d - 0.1f64.sqrt()).abs() < 1e-12);
    }
}

#[test]
fn gradient_without_adjoint_is_gamma_g() {
    let disc = frozen([16.0, 25.0], [16.0, 25.0], 3, 1);
    let g = direction(&disc, 2);
    let st = solve_state(&disc, &g).unwrap();
    let adj = solve_adjoint(&disc, &st, AdjointMode::Full).unwrap();
    let grad = gradient(&disc, &adj, &g);
    for (a, b) in grad.g1.data().iter().zip(g.g1.data()) {
        assert!((a - 0.01 * b).abs() < 1e-14);
    }
}

#[test]
fn gradient_matches_central_differences() {
    for kind in [ControlKind::Distributed, ControlKind::Robin] {
        for (degree, k) in [(1, 0), (1, 1), (2, 1)] {
            let disc = experiment(params(kind), 3, degree, k, 4);
            let g = ControlPair::constant(&disc, 1.0);
            let st = solve_state(&disc, &g).unwrap();
            let adj = solve_adjoint(&disc, &st, AdjointMode::Full).unwrap();
            let grad = gradient(&disc, &adj, &g);
            for seed in 0..3 {
                let v = direction(&disc, seed);
                let e = 1e-5;
                let mut gp = g.clone();
                gp.axpy(e, &v);
                let mut gm = g.clone();
                gm.axpy(-e, &v);
                let fd = (reduced_j(&disc, &gp) - reduced_j(&disc, &gm)) / (2.0 * e);
                let an = inner(&disc, &grad, &v);
                assert!(rel(an, fd) <= 1e-4, "{kind:?} P{degree} dG({k}): {an} vs {fd}");
            }
        }
    }
}

#[test]
fn diagonal_adjoint_misses_the_cross_terms() {
    let disc = experiment(params(ControlKind::Robin), 4, 1, 0, 6);
    let g = ControlPair::constant(&disc, 1.0);
    let st = solve_state(&disc, &g).unwrap();
    let full = gradient(&disc, &solve_adjoint(&disc, &st, AdjointMode::Full).unwrap(), &g);
    let diag = gradient(&disc, &solve_adjoint(&disc, &st, AdjointMode::Diagonal).unwrap(), &g);
    let mut d = full.clone();
    d.axpy(-1.0, &diag);
    assert!(inner(&disc, &d, &d).sqrt() > 1e-3 * inner(&disc, &full, &full).sqrt());
}

fn bounded(values: &[f64]) -> ControlPair {
    let disc = frozen([1.0, 1.0], [1.0, 1.0], 1, 0);
    let mut g = ControlPair::zeros(&disc);
    g.bounds = Some((0.0, 0.1));
    for (x, v) in g.g1.data_mut().iter_mut().zip(values.iter().cycle()) {
        *x = *v;
    }
    g
}

#[test]
fn projection_examples() {
    let p = project(&bounded(&[0.5, -3.0, 0.05]));
    assert_eq!(&p.g1.data()[..3], &[0.1, 0.0, 0.05]);
    assert_eq!(project(&p), p);
    assert!(p.is_admissible());
    let mut free = bounded(&[7.0]);
    free.bounds = None;
    assert_eq!(project(&free), free);
}

proptest! {
    #[test]
    fn projection_is_idempotent_and_nonexpansive(
        a in prop::collection::vec(-1.0f64..1.0, 4),
        b in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let (ga, gb) = (bounded(&a), bounded(&b));
        let (pa, pb) = (project(&ga), project(&gb));
        prop_assert_eq!(project(&pa), pa.clone());
        let mut d = pa.clone();
        d.axpy(-1.0, &pb);
        let mut e = ga.clone();
        e.axpy(-1.0, &gb);
        prop_assert!(d.max_abs() <= e.max_abs() + 1e-15);
    }

    #[test]
    fn gradient_is_jointly_linear(s in -3.0f64..3.0, t in -3.0f64..3.0, seed in 0u64..50) {
        let disc = frozen([2.0, 3.0], [0.0, 0.0], 2, 1);
        let g1 = direction(&disc, seed);
        let g2 = direction(&disc, seed + 100);
        let field = |seed: u64| {
            let mut f = disc.zero_field();
            for (i, x) in f.data_mut().iter_mut().enumerate() {
                *x = ((i as f64 + 1.0) * (seed as f64 + 0.5)).sin();
            }
            f
        };
        let adj = |m1, m2| AdjointPair { mu1: m1, mu2: m2, mode: AdjointMode::Full };
        let (a1, a2) = (adj(field(seed + 1), field(seed + 2)), adj(field(seed + 3), field(seed + 4)));
        let mut gc = g1.clone();
        gc.scale(s);
        gc.axpy(t, &g2);
        let mut mc1 = a1.mu1.clone();
        mc1.scale(s);
        mc1.axpy(t, &a2.mu1);
        let mut mc2 = a1.mu2.clone();
        mc2.scale(s);
        mc2.axpy(t, &a2.mu2);
        let lhs = gradient(&disc, &adj(mc1, mc2), &gc);
        let mut rhs = gradient(&disc, &a1, &g1);
        rhs.scale(s);
        rhs.axpy(t, &gradient(&disc, &a2, &g2));
        let mut d = lhs;
        d.axpy(-1.0, &rhs);
        prop_assert!(d.max_abs() <= 1e-12);
    }
}

#[test]
fn variational_inequality_residual() {
    let disc = frozen([16.0, 25.0], [16.0, 25.0], 3, 0);
    // interior point where the gradient vanishes
    let mut g = ControlPair::zeros(&disc);
    g.bounds = Some((-1.0, 1.0));
    let mut grad = ControlPair::zeros(&disc);
    assert!(vi_residual(&disc, &g, &grad, 1).unwrap() <= 1e-6);
    // at the lower bound with a positive gradient
    g.bounds = Some((0.0, 0.1));
    grad.g1.data_mut().fill(0.3);
    grad.g2.data_mut().fill(0.2);
    assert_eq!(vi_residual(&disc, &g, &grad, 1).unwrap(), 0.0);
    // mid-box point with a nonzero gradient is not stationary
    let mut mid = ControlPair::constant(&disc, 0.05);
    mid.bounds = Some((0.0, 0.1));
    assert!(vi_residual(&disc, &mid, &grad, 1).unwrap() > 0.0);
    // no bounds: not defined
    let mut nb = g.clone();
    nb.bounds = None;
    assert!(vi_residual(&disc, &nb, &grad, 1).is_err());
}

#[test]
fn second_directional_basic_properties() {
    let disc = experiment(params(ControlKind::Robin), 3, 1, 0, 4);
    let g = ControlPair::constant(&disc, 1.0);
    let st = solve_state(&disc, &g).unwrap();
    let adj = solve_adjoint(&disc, &st, AdjointMode::Full).unwrap();
    let zero = ControlPair::zeros(&disc);
    let z0 = solve_tangent(&disc, &st, &zero).unwrap();
    for mode in [SecondOrderMode::Formula, SecondOrderMode::Exact] {
        assert_eq!(second_directional(&disc, &adj, &z0, &zero, mode), 0.0);
    }
    let v = direction(&disc, 9);
    let z = solve_tangent(&disc, &st, &v).unwrap();
    let vv = inner(&disc, &v, &v);
    let val = second_directional(&disc, &adj, &z, &v, SecondOrderMode::Formula);
    assert!(val >= 0.01 * vv && vv > 0.0);
}

#[test]
fn second_directional_matches_second_differences() {
    for kind in [ControlKind::Distributed, ControlKind::Robin] {
        let disc = experiment(params(kind), 4, 1, 0, 6);
        let g = ControlPair::constant(&disc, 1.0);
        let st = solve_state(&disc, &g).unwrap();
        let j0 = evaluate_j(&disc, &st, &g);
        let adj = solve_adjoint(&disc, &st, AdjointMode::Full).unwrap();
        let v = direction(&disc, 4);
        let z = solve_tangent(&disc, &st, &v).unwrap();
        let e = 1e-3;
        let mut gp = g.clone();
        gp.axpy(e, &v);
        let mut gm = g.clone();
        gm.axpy(-e, &v);
        let sd = (reduced_j(&disc, &gp) - 2.0 * j0 + reduced_j(&disc, &gm)) / (e * e);
        let exact = second_directional(&disc, &adj, &z, &v, SecondOrderMode::Exact);
        assert!(rel(exact, sd) <= 1e-3, "{kind:?}: {exact} vs {sd}");
    }
}

#[test]
fn cost_is_independent_of_exact_quadrature_choice() {
    // dG(1): the integrands are quadratic in time, so a 3-point rule must agree
    let disc = experiment(params(ControlKind::Robin), 3, 1, 1, 4);
    let g = direction(&disc, 21);
    let st = solve_state(&disc, &g).unwrap();
    let c = cost(&disc, &st, &g);
    let rule = LineRule::gauss(3);
    let mut tracking = [0.0; 2];
    let mut control = [0.0; 2];
    let targets = [0.0, 20.0];
    for n in 0..disc.n_intervals() {
        let tau = disc.grid.tau(n);
        for (&s, &w) in rule.points.iter().zip(&rule.weights) {
            for sp in 0..2 {
                let y: Vec<f64> = st.species(sp).value_at(n, s).iter().map(|v| v - targets[sp]).collect();
                tracking[sp] += 0.5 * tau * w * disc.mass.bilinear(&y, &y);
                let gv = g.species(sp).value_at(n, s);
                control[sp] += 0.5 * 0.01 * tau * w * disc.control.mass.bilinear(&gv, &gv);
            }
        }
    }
    for s in 0..2 {
        assert!(rel(c.tracking[s], tracking[s]) < 1e-12);
        assert!(rel(c.control[s], control[s]) < 1e-12);
    }
}
