//! Physical parameters and problem data.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Where the control acts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlKind {
    /// Source term on Ω; the states vanish on Γ.
    Distributed,
    /// Robin data `ε ∂y/∂n + λ y = λ g` on Γ.
    Robin,
}

/// Scalar parameters of the controlled system
///
/// `y₁ₜ = ε₁Δy₁ + (a − b y₂) y₁ + f₁ (+ g₁)`, `y₂ₜ = ε₂Δy₂ + (c y₁ − d) y₂ + f₂ (+ g₂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Box constraints `g_lo ≤ gᵢ ≤ g_hi`, shared by both controls.
    pub bounds: Option<(f64, f64)>,
    pub control_kind: ControlKind,
}

impl Default for ModelParams {
    /// Hare–lynx kinetics with `ε = (0.1, 0.01)`, `λ = 1`, `γ = 0.01`, no bounds.
    fn default() -> Self {
        Self {
            a: 0.47,
            b: 0.024,
            c: 0.023,
            d: 0.76,
            eps1: 0.1,
            eps2: 0.01,
            lambda1: 1.0,
            lambda2: 1.0,
            gamma1: 0.01,
            gamma2: 0.01,
            bounds: None,
            control_kind: ControlKind::Distributed,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.a, self.b, self.c, self.d, self.eps1, self.eps2, self.lambda1, self.lambda2, self.gamma1,
            self.gamma2,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("model parameters must be finite".into()));
        }
        if self.eps1 < 0.0 || self.eps2 < 0.0 {
            return Err(Error::InvalidArgument("diffusivities must be non-negative".into()));
        }
        if !(self.gamma1 > 0.0 && self.gamma2 > 0.0) {
            return Err(Error::InvalidArgument("control penalties must be positive".into()));
        }
        if let Some((lo, hi)) = self.bounds {
            if !(lo < hi) {
                return Err(Error::InvalidArgument(format!("empty control box [{lo}, {hi}]")));
            }
            if self.control_kind == ControlKind::Distributed && !(lo <= 0.0 && 0.0 <= hi) {
                return Err(Error::InvalidArgument(
                    "distributed controls vanish on the boundary, so the box must contain 0".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn eps(&self, species: usize) -> f64 {
        [self.eps1, self.eps2][species]
    }

    pub fn lambda(&self, species: usize) -> f64 {
        [self.lambda1, self.lambda2][species]
    }

    pub fn gamma(&self, species: usize) -> f64 {
        [self.gamma1, self.gamma2][species]
    }

    /// Reaction terms `((a − b y₂) y₁, (c y₁ − d) y₂)`.
    pub fn reaction(&self, y1: f64, y2: f64) -> [f64; 2] {
        [(self.a - self.b * y2) * y1, (self.c * y1 - self.d) * y2]
    }

    /// Jacobian of [`Self::reaction`], row-major.
    pub fn reaction_jacobian(&self, y1: f64, y2: f64) -> [[f64; 2]; 2] {
        [
            [self.a - self.b * y2, -self.b * y1],
            [self.c * y2, self.c * y1 - self.d],
        ]
    }
}

/// Space-time scalar function `(t, x) ↦ value`.
pub type SpaceTimeFn = Arc<dyn Fn(f64, [f64; 2]) -> f64 + Send + Sync>;
/// Spatial scalar function.
pub type SpaceFn = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;

/// Forcing, initial data and targets.
#[derive(Clone)]
pub struct ProblemData {
    pub f1: SpaceTimeFn,
    pub f2: SpaceTimeFn,
    pub y10: SpaceFn,
    pub y20: SpaceFn,
    pub y1d: SpaceTimeFn,
    pub y2d: SpaceTimeFn,
    pub final_time: f64,
}

impl std::fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemData").field("final_time", &self.final_time).finish_non_exhaustive()
    }
}

/// Initial data families used by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialData {
    /// `y₁ = 16 + (x₁² + x₂²)/4`, `y₂ = 25`.
    Smooth,
    /// Prey disc of radius 1/4 around the centre, predators outside radius 1/2.
    Rough,
}

impl InitialData {
    pub fn functions(self) -> (SpaceFn, SpaceFn) {
        match self {
            InitialData::Smooth => (
                Arc::new(|x: [f64; 2]| 16.0 + 0.25 * (x[0] * x[0] + x[1] * x[1])),
                Arc::new(|_| 25.0),
            ),
            InitialData::Rough => {
                let r2 = |x: [f64; 2]| (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2);
                (
                    Arc::new(move |x| if r2(x) <= 1.0 / 16.0 { 10.0 } else { 1.0 }),
                    Arc::new(move |x| if r2(x) >= 0.25 { 10.0 } else { 1.0 }),
                )
            }
        }
    }
}

pub fn constant_fn(v: f64) -> SpaceTimeFn {
    Arc::new(move |_, _| v)
}

/// Forcing used in all control experiments, with `x = x₁`, `y = x₂`.
///
/// The expressions are kept term by term, including the repeated terms of
/// the prey forcing.
pub fn experiment_forcing(p: &ModelParams) -> (SpaceTimeFn, SpaceTimeFn) {
    let (a, b, c, d, eps1) = (p.a, p.b, p.c, p.d, p.eps1);
    let f1 = move |t: f64, x: [f64; 2]| {
        let (x, y) = (x[0], x[1]);
        let (st, ct) = (t.sin(), t.cos());
        let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
        let (x2, y2) = (x * x, y * y);
        -(b * ct * st * sx * y2 * sy + b * ct * st * x2 * sx * sy + 64.0 * b * st * sx * sy + st * y2
            - 25.0 * b * ct * y2
            + 64.0 * b * st * sx * sy
            + st * y2
            - 25.0 * b * ct * y2
            + a * ct * y2
            + st * x2
            - 25.0 * b * ct * x2
            + a * ct * x2
            + 4.0 * eps1 * ct
            - 1600.0 * b
            + 64.0 * a)
            / 4.0
    };
    let f2 = move |t: f64, x: [f64; 2]| {
        let (x, y) = (x[0], x[1]);
        let (st, ct) = (t.sin(), t.cos());
        let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
        let (x2, y2) = (x * x, y * y);
        (c * ct * st * sx * y2 * sy + c * ct * st * x2 * sx * sy + 64.0 * c * st * sx * sy
            - 8.0 * PI * PI * eps1 * st * sx * sy
            - 4.0 * d * st * sx * sy
            - 4.0 * ct * sx * sy
            - 25.0 * c * ct * y2
            - 25.0 * c * ct * x2
            - 1600.0 * c
            + 100.0 * d)
            / 4.0
    };
    (Arc::new(f1), Arc::new(f2))
}

impl ProblemData {
    /// Experiment data: the forcing above, targets `(0, 20)`, `T = 0.1`.
    pub fn experiment(p: &ModelParams, initial: InitialData) -> Self {
        let (f1, f2) = experiment_forcing(p);
        let (y10, y20) = initial.functions();
        Self {
            f1,
            f2,
            y10,
            y20,
            y1d: constant_fn(0.0),
            y2d: constant_fn(20.0),
            final_time: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.final_time > 0.0 && self.final_time.is_finite()) {
            return Err(Error::InvalidArgument(format!("final time must be positive, got {}", self.final_time)));
        }
        Ok(())
    }
}
