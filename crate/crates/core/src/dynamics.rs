//! Local predator–prey kinetics: fixed points, linear stability,
//! nullclines and phase-plane orbits, optionally with constant controls.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::ode::Dopri5;

/// Reaction constants plus constant control offsets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticsParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub g1: f64,
    pub g2: f64,
}

impl KineticsParams {
    pub fn from_model(p: &ModelParams) -> Self {
        Self {
            a: p.a,
            b: p.b,
            c: p.c,
            d: p.d,
            g1: 0.0,
            g2: 0.0,
        }
    }

    pub fn with_control(self, g1: f64, g2: f64) -> Self {
        Self { g1, g2, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.a, self.b, self.c, self.d, self.g1, self.g2];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("kinetic parameters must be finite".into()));
        }
        if self.b == 0.0 || self.c == 0.0 {
            return Err(Error::InvalidArgument("b and c must be nonzero".into()));
        }
        Ok(())
    }

    /// `(φ₁ + g₁, φ₂ + g₂)` with `φ₁ = (a − b y₂) y₁`, `φ₂ = (c y₁ − d) y₂`.
    pub fn rates(&self, y: [f64; 2]) -> [f64; 2] {
        [
            (self.a - self.b * y[1]) * y[0] + self.g1,
            (self.c * y[0] - self.d) * y[1] + self.g2,
        ]
    }

    pub fn jacobian(&self, y: [f64; 2]) -> [[f64; 2]; 2] {
        [
            [self.a - self.b * y[1], -self.b * y[0]],
            [self.c * y[1], self.c * y[0] - self.d],
        ]
    }

    /// Conserved quantity of the uncontrolled kinetics on the positive quadrant.
    pub fn first_integral(&self, y: [f64; 2]) -> f64 {
        self.c * y[0] - self.d * y[0].ln() + self.b * y[1] - self.a * y[1].ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPointClass {
    Saddle,
    StableNode,
    UnstableNode,
    StableSpiral,
    UnstableSpiral,
    /// Vanishing trace (linear center) or vanishing determinant: the
    /// linearization does not decide stability.
    CenterBorderline,
}

impl FixedPointClass {
    pub fn label(self) -> &'static str {
        match self {
            FixedPointClass::Saddle => "saddle",
            FixedPointClass::StableNode => "stable-node",
            FixedPointClass::UnstableNode => "unstable-node",
            FixedPointClass::StableSpiral => "stable-spiral",
            FixedPointClass::UnstableSpiral => "unstable-spiral",
            FixedPointClass::CenterBorderline => "center-borderline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointReport {
    pub location: [f64; 2],
    pub jacobian: [[f64; 2]; 2],
    pub trace: f64,
    pub determinant: f64,
    pub discriminant: f64,
    pub class: FixedPointClass,
}

/// Relative size of the trace band treated as zero.
pub const TRACE_BAND: f64 = 1e-12;

/// Linear stability of `point` from trace, determinant and `D = T² − 4Δ`.
pub fn classify(p: &KineticsParams, point: [f64; 2]) -> FixedPointReport {
    let j = p.jacobian(point);
    let trace = j[0][0] + j[1][1];
    let determinant = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let discriminant = trace * trace - 4.0 * determinant;
    let scale = j.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let class = if determinant < 0.0 {
        FixedPointClass::Saddle
    } else if determinant == 0.0 || trace.abs() <= TRACE_BAND * scale {
        FixedPointClass::CenterBorderline
    } else if discriminant < 0.0 {
        if trace < 0.0 {
            FixedPointClass::StableSpiral
        } else {
            FixedPointClass::UnstableSpiral
        }
    } else if trace < 0.0 {
        FixedPointClass::StableNode
    } else {
        FixedPointClass::UnstableNode
    };
    FixedPointReport {
        location: point,
        jacobian: j,
        trace,
        determinant,
        discriminant,
        class,
    }
}

/// Two-dimensional Newton iteration for `rates(y) = 0`.
pub fn newton_root(p: &KineticsParams, start: [f64; 2]) -> Result<[f64; 2]> {
    let mut y = start;
    for _ in 0..100 {
        let r = p.rates(y);
        let j = p.jacobian(y);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(Error::RootFindFailure(format!("singular Jacobian at ({}, {})", y[0], y[1])));
        }
        let dy = [
            (j[1][1] * r[0] - j[0][1] * r[1]) / det,
            (j[0][0] * r[1] - j[1][0] * r[0]) / det,
        ];
        y = [y[0] - dy[0], y[1] - dy[1]];
        let rn = p.rates(y);
        if rn[0].abs().max(rn[1].abs()) <= 1e-12 * (1.0 + y[0].abs() + y[1].abs()) {
            return Ok(y);
        }
    }
    Err(Error::RootFindFailure(format!(
        "Newton did not converge from ({}, {}) for g = ({}, {})",
        start[0], start[1], p.g1, p.g2
    )))
}

/// Fixed points of the kinetics. Without control: `(0, 0)` and
/// `(d/c, a/b)`. With control: every root in the open positive quadrant,
/// the first being the one reached by Newton from `(d/c, a/b)`.
pub fn fixed_points(p: &KineticsParams) -> Result<Vec<FixedPointReport>> {
    p.validate()?;
    let interior = [p.d / p.c, p.a / p.b];
    if p.g1 == 0.0 && p.g2 == 0.0 {
        return Ok(vec![classify(p, [0.0, 0.0]), classify(p, interior)]);
    }
    let mut roots: Vec<[f64; 2]> = Vec::new();
    if let Ok(r) = newton_root(p, interior) {
        roots.push(r);
    }
    // Eliminating y₁ = g₁/(b y₂ − a) leaves −bd y₂² + (c g₁ + ad + b g₂) y₂ − a g₂ = 0.
    let (qa, qb, qc) = (-p.b * p.d, p.c * p.g1 + p.a * p.d + p.b * p.g2, -p.a * p.g2);
    let disc = qb * qb - 4.0 * qa * qc;
    if disc >= 0.0 {
        for sgn in [-1.0, 1.0] {
            let y2 = (-qb + sgn * disc.sqrt()) / (2.0 * qa);
            let den = p.b * y2 - p.a;
            if den == 0.0 {
                continue;
            }
            if let Ok(r) = newton_root(p, [p.g1 / den, y2]) {
                roots.push(r);
            }
        }
    }
    let mut out: Vec<FixedPointReport> = Vec::new();
    for r in roots {
        if !(r[0] > 0.0 && r[1] > 0.0) {
            continue;
        }
        let dup = out
            .iter()
            .any(|q| (q.location[0] - r[0]).abs() + (q.location[1] - r[1]).abs() <= 1e-8 * (1.0 + r[0].abs()));
        if !dup {
            out.push(classify(p, r));
        }
    }
    if out.is_empty() {
        return Err(Error::RootFindFailure(format!(
            "no positive fixed point for g = ({}, {})",
            p.g1, p.g2
        )));
    }
    Ok(out)
}

/// Rectangle `[y1_min, y1_max] × [y2_min, y2_max]` in the phase plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseBox {
    pub y1: (f64, f64),
    pub y2: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nullcline {
    /// `1` for the curve where the prey rate vanishes, `2` for the predator.
    pub species: usize,
    pub branch: usize,
    pub points: Vec<[f64; 2]>,
}

/// Number of samples per nullcline branch.
pub const NULLCLINE_SAMPLES: usize = 400;

/// Nullclines sampled inside the box.
pub fn nullclines(p: &KineticsParams, bx: PhaseBox) -> Vec<Nullcline> {
    let m = NULLCLINE_SAMPLES;
    let lin = |(lo, hi): (f64, f64), i: usize| lo + (hi - lo) * i as f64 / (m - 1) as f64;
    let inside = |y: [f64; 2]| {
        y[0] >= bx.y1.0 && y[0] <= bx.y1.1 && y[1] >= bx.y2.0 && y[1] <= bx.y2.1 && y[0].is_finite() && y[1].is_finite()
    };
    let mut out = Vec::new();
    let mut push = |species, branch, pts: Vec<[f64; 2]>| {
        let pts: Vec<[f64; 2]> = pts.into_iter().filter(|&y| inside(y)).collect();
        if !pts.is_empty() {
            out.push(Nullcline {
                species,
                branch,
                points: pts,
            });
        }
    };
    if p.g1 == 0.0 {
        push(1, 0, (0..m).map(|i| [0.0, lin(bx.y2, i)]).collect());
        push(1, 1, (0..m).map(|i| [lin(bx.y1, i), p.a / p.b]).collect());
    } else {
        // y₁ = g₁/(b y₂ − a), sampled in y₂
        push(
            1,
            0,
            (0..m)
                .map(|i| lin(bx.y2, i))
                .filter(|&y2| p.b * y2 != p.a)
                .map(|y2| [p.g1 / (p.b * y2 - p.a), y2])
                .collect(),
        );
    }
    if p.g2 == 0.0 {
        push(2, 0, (0..m).map(|i| [lin(bx.y1, i), 0.0]).collect());
        push(2, 1, (0..m).map(|i| [p.d / p.c, lin(bx.y2, i)]).collect());
    } else {
        // y₂ = g₂/(d − c y₁), sampled in y₁
        push(
            2,
            0,
            (0..m)
                .map(|i| lin(bx.y1, i))
                .filter(|&y1| p.c * y1 != p.d)
                .map(|y1| [y1, p.g2 / (p.d - p.c * y1)])
                .collect(),
        );
    }
    out
}

/// Orbit of the kinetics from `start`, sampled every `dt_out` up to `t_end`
/// (both endpoints included), integrated at tolerance 1e-10.
pub fn phase_trajectory(p: &KineticsParams, start: [f64; 2], t_end: f64, dt_out: f64) -> Result<Vec<(f64, [f64; 2])>> {
    phase_trajectory_with(p, start, t_end, dt_out, 1e-10)
}

pub fn phase_trajectory_with(
    p: &KineticsParams,
    start: [f64; 2],
    t_end: f64,
    dt_out: f64,
    tol: f64,
) -> Result<Vec<(f64, [f64; 2])>> {
    p.validate()?;
    if !(start[0] > 0.0 && start[1] > 0.0) {
        return Err(Error::InvalidArgument("trajectory start must be componentwise positive".into()));
    }
    if !(t_end > 0.0 && dt_out > 0.0) {
        return Err(Error::InvalidArgument("t_end and dt_out must be positive".into()));
    }
    let n = (t_end / dt_out - 1e-9).ceil() as usize;
    let times: Vec<f64> = (0..=n).map(|i| (i as f64 * dt_out).min(t_end)).collect();
    let ys = Dopri5::new(tol).solve(|_, y: &[f64; 2]| p.rates(*y), 0.0, start, &times)?;
    Ok(times.into_iter().zip(ys).collect())
}
