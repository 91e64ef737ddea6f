//! Finite-difference checks of the reduced gradient and of the second
//! directional derivative.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lv_optctl::adjoint::{solve_adjoint, solve_tangent, AdjointMode};
use lv_optctl::discretization::Discretization;
use lv_optctl::model::ControlKind;
use lv_optctl::objective::{evaluate_j, gradient, inner, second_directional, ControlPair, SecondOrderMode};
use lv_optctl::state::solve_state;

use crate::error::CliResult;
use crate::preset::{ExperimentPreset, PresetName};

pub const GRADIENT_TOL: f64 = 1e-4;
pub const SECOND_ORDER_TOL: f64 = 1e-3;
const GRADIENT_STEP: f64 = 1e-5;
const SECOND_ORDER_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckSetup {
    pub kind: ControlKind,
    pub n: usize,
    pub degree: usize,
    pub k: usize,
    pub directions: usize,
    pub seed: u64,
    /// Base control value on the free DOFs.
    pub base: f64,
}

impl CheckSetup {
    pub fn coarse(kind: ControlKind, seed: u64) -> Self {
        Self {
            kind,
            n: 4,
            degree: 1,
            k: 0,
            directions: 10,
            seed,
            base: 1.0,
        }
    }

    /// Unbounded experiment data of the matching kind (smooth initial data,
    /// τ ≤ h²/8 distributed, τ ≤ h²/2 Robin).
    pub fn discretization(&self) -> CliResult<Discretization> {
        let mut p = ExperimentPreset::new(match self.kind {
            ControlKind::Distributed => PresetName::B,
            ControlKind::Robin => PresetName::E1,
        });
        p.degree = self.degree;
        p.k = self.k;
        p.params.bounds = None;
        p.discretization(self.n)
    }
}

/// Random directions on the free control DOFs, entries uniform in (−1, 1).
pub fn random_directions(disc: &Discretization, count: usize, seed: u64) -> Vec<ControlPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut v = ControlPair::zeros(disc);
            for x in v.g1.data_mut().iter_mut().chain(v.g2.data_mut()) {
                *x = rng.random_range(-1.0..1.0);
            }
            v.zero_fixed(disc);
            v
        })
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn reduced_j(disc: &Discretization, g: &ControlPair) -> CliResult<f64> {
    Ok(evaluate_j(disc, &solve_state(disc, g)?, g))
}

fn shifted(g: &ControlPair, e: f64, v: &ControlPair) -> ControlPair {
    let mut out = g.clone();
    out.axpy(e, v);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientSample {
    pub finite_difference: f64,
    pub full: f64,
    pub diagonal: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub setup: CheckSetup,
    pub samples: Vec<GradientSample>,
}

impl GradientCheck {
    pub fn max_rel(&self, mode: AdjointMode) -> f64 {
        self.samples
            .iter()
            .map(|s| {
                let v = match mode {
                    AdjointMode::Full => s.full,
                    AdjointMode::Diagonal => s.diagonal,
                };
                rel(v, s.finite_difference)
            })
            .fold(0.0, f64::max)
    }

    pub fn passed(&self, mode: AdjointMode) -> bool {
        self.max_rel(mode) <= GRADIENT_TOL
    }
}

/// `(∇J, v)` from both adjoint modes against central differences of `J`.
pub fn gradient_check(setup: &CheckSetup) -> CliResult<GradientCheck> {
    let disc = setup.discretization()?;
    let g = ControlPair::constant(&disc, setup.base);
    let state = solve_state(&disc, &g)?;
    let full = gradient(&disc, &solve_adjoint(&disc, &state, AdjointMode::Full)?, &g);
    let diagonal = gradient(&disc, &solve_adjoint(&disc, &state, AdjointMode::Diagonal)?, &g);
    let mut samples = Vec::with_capacity(setup.directions);
    for v in random_directions(&disc, setup.directions, setup.seed) {
        let e = GRADIENT_STEP;
        let fd = (reduced_j(&disc, &shifted(&g, e, &v))? - reduced_j(&disc, &shifted(&g, -e, &v))?) / (2.0 * e);
        samples.push(GradientSample {
            finite_difference: fd,
            full: inner(&disc, &full, &v),
            diagonal: inner(&disc, &diagonal, &v),
        });
    }
    Ok(GradientCheck {
        setup: setup.clone(),
        samples,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderSample {
    pub second_difference: f64,
    pub formula: f64,
    pub exact: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderCheck {
    pub setup: CheckSetup,
    pub samples: Vec<SecondOrderSample>,
}

impl SecondOrderCheck {
    pub fn max_rel(&self, mode: SecondOrderMode) -> f64 {
        self.samples
            .iter()
            .map(|s| {
                let v = match mode {
                    SecondOrderMode::Formula => s.formula,
                    SecondOrderMode::Exact => s.exact,
                };
                rel(v, s.second_difference)
            })
            .fold(0.0, f64::max)
    }

    pub fn passed(&self, mode: SecondOrderMode) -> bool {
        self.max_rel(mode) <= SECOND_ORDER_TOL
    }
}

/// `J''(g)[v, v]` in both modes against the central second difference.
pub fn second_order_check(setup: &CheckSetup) -> CliResult<SecondOrderCheck> {
    let disc = setup.discretization()?;
    let g = ControlPair::constant(&disc, setup.base);
    let state = solve_state(&disc, &g)?;
    let j0 = evaluate_j(&disc, &state, &g);
    let adjoint = solve_adjoint(&disc, &state, AdjointMode::Full)?;
    let mut samples = Vec::with_capacity(setup.directions);
    for v in random_directions(&disc, setup.directions, setup.seed) {
        let e = SECOND_ORDER_STEP;
        let sd = (reduced_j(&disc, &shifted(&g, e, &v))? - 2.0 * j0 + reduced_j(&disc, &shifted(&g, -e, &v))?) / (e * e);
        let z = solve_tangent(&disc, &state, &v)?;
        samples.push(SecondOrderSample {
            second_difference: sd,
            formula: second_directional(&disc, &adjoint, &z, &v, SecondOrderMode::Formula),
            exact: second_directional(&disc, &adjoint, &z, &v, SecondOrderMode::Exact),
        });
    }
    Ok(SecondOrderCheck {
        setup: setup.clone(),
        samples,
    })
}
