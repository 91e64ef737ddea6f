#![allow(dead_code)]

use std::sync::Arc;

use lv_optctl::discretization::{ControlMass, Discretization};
use lv_optctl::mesh::build_structured;
use lv_optctl::model::{constant_fn, ControlKind, InitialData, ModelParams, ProblemData};
use lv_optctl::objective::ControlPair;
use lv_optctl::time::TimeGrid;

pub fn params(kind: ControlKind) -> ModelParams {
    ModelParams {
        control_kind: kind,
        ..ModelParams::default()
    }
}

/// Experiment data on an `n × n` mesh with `n_int` uniform intervals.
pub fn experiment(p: ModelParams, n: usize, degree: usize, k: usize, n_int: usize) -> Discretization {
    let data = ProblemData::experiment(&p, InitialData::Smooth);
    build(p, data, n, degree, k, n_int, ControlMass::Consistent)
}

pub fn build(
    p: ModelParams,
    data: ProblemData,
    n: usize,
    degree: usize,
    k: usize,
    n_int: usize,
    mass: ControlMass,
) -> Discretization {
    let mesh = Arc::new(build_structured(n).unwrap());
    let grid = TimeGrid::uniform(data.final_time, n_int).unwrap();
    Discretization::new(p, data, mesh, degree, k, grid, mass).unwrap()
}

/// Robin setting without kinetics, forcing or boundary exchange: constant
/// initial data `(v1, v2)` stay constant; targets `(t1, t2)`.
pub fn frozen(v: [f64; 2], targets: [f64; 2], n_int: usize, k: usize) -> Discretization {
    let p = ModelParams {
        a: 0.0,
        b: 0.0,
        c: 0.0,
        d: 0.0,
        lambda1: 0.0,
        lambda2: 0.0,
        control_kind: ControlKind::Robin,
        ..ModelParams::default()
    };
    let data = ProblemData {
        f1: constant_fn(0.0),
        f2: constant_fn(0.0),
        y10: Arc::new(move |_| v[0]),
        y20: Arc::new(move |_| v[1]),
        y1d: constant_fn(targets[0]),
        y2d: constant_fn(targets[1]),
        final_time: 0.1,
    };
    build(p, data, 3, 1, k, n_int, ControlMass::Consistent)
}

/// Deterministic pseudo-random direction on the free control DOFs.
pub fn direction(disc: &Discretization, seed: u64) -> ControlPair {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut v = ControlPair::zeros(disc);
    for x in v.g1.data_mut().iter_mut().chain(v.g2.data_mut()) {
        *x = rng.random_range(-1.0..1.0);
    }
    v.zero_fixed(disc);
    v
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
