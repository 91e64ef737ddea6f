//! Projected Fletcher–Reeves conjugate gradients with a strong Wolfe line
//! search along the projected path `α ↦ P(g + α d)`.
//!
//! The merit function is `φ(α) = J(P(g + α d))`. Sufficient decrease is
//! measured against the actual projected step `s = P(g + α d) − g`, and the
//! slope is the one-sided derivative of the projected path, i.e. `d` with
//! the clamped coefficients removed. Without bounds both reduce to the
//! textbook conditions.

use crate::adjoint::{solve_adjoint, AdjointMode, AdjointPair};
use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::objective::{cost, gradient, inner, project, ControlPair, CostBreakdown};
use crate::state::{solve_state, StatePair};

/// Line-search strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineSearchKind {
    /// Multiplicative step adaptation: shrink on a failed decrease test,
    /// grow (or shrink after an overshoot) on a failed curvature test. The
    /// accepted step seeds the next search.
    Adaptive,
    /// Bracketing and zoom with safeguarded quadratic interpolation.
    Bracketing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NcgConfig {
    /// Sufficient-decrease constant.
    pub sigma: f64,
    /// Curvature constant.
    pub rho: f64,
    /// Stop once `J_k − J_{k+1} ≤ tol · J_k`.
    pub tol: f64,
    pub eps0: f64,
    pub step_shrink: f64,
    pub step_grow: f64,
    /// Initial control value on every free DOF (projected onto the box).
    pub g0: f64,
    pub max_outer: usize,
    pub max_line: usize,
    pub restart_on_active_set: bool,
    pub line_search: LineSearchKind,
    pub adjoint_mode: AdjointMode,
}

impl Default for NcgConfig {
    fn default() -> Self {
        Self {
            sigma: 0.1,
            rho: 0.9,
            tol: 1e-5,
            eps0: 1.0,
            step_shrink: 0.5,
            step_grow: 1.5,
            g0: 1.0,
            max_outer: 200,
            max_line: 40,
            restart_on_active_set: true,
            line_search: LineSearchKind::Adaptive,
            adjoint_mode: AdjointMode::Full,
        }
    }
}

impl NcgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.sigma && self.sigma <= self.rho && self.rho < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "line-search constants must satisfy 0 < sigma <= rho < 1, got sigma = {}, rho = {}",
                self.sigma, self.rho
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        if !(self.eps0 > 0.0 && 0.0 < self.step_shrink && self.step_shrink < 1.0 && self.step_grow > 1.0) {
            return Err(Error::InvalidArgument("invalid step adaptation factors".into()));
        }
        if self.max_outer == 0 || self.max_line == 0 {
            return Err(Error::InvalidArgument("iteration caps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
    LineSearchFailure,
}

/// One accepted outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub j: f64,
    /// Norm of the projected gradient before the step.
    pub grad_norm: f64,
    pub step: f64,
    pub beta: f64,
    pub trials: usize,
    pub restarted: bool,
}

#[derive(Debug, Clone)]
pub struct OptRun {
    pub iterations: usize,
    /// `J` at the start and after every accepted iteration.
    pub j_history: Vec<f64>,
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    pub controls: ControlPair,
    pub state: StatePair,
    pub adjoint: AdjointPair,
    pub gradient: ControlPair,
    pub cost: CostBreakdown,
}

/// Control together with everything derived from it.
struct Point {
    g: ControlPair,
    state: StatePair,
    cost: CostBreakdown,
    derivative: Option<(AdjointPair, ControlPair)>,
}

impl Point {
    fn j(&self) -> f64 {
        self.cost.total()
    }
}

fn evaluate(disc: &Discretization, g: ControlPair) -> Result<Point> {
    let state = solve_state(disc, &g)?;
    let cost = cost(disc, &state, &g);
    Ok(Point {
        g,
        state,
        cost,
        derivative: None,
    })
}

fn differentiate(disc: &Discretization, p: &mut Point, mode: AdjointMode) -> Result<()> {
    if p.derivative.is_none() {
        let adj = solve_adjoint(disc, &p.state, mode)?;
        let grad = gradient(disc, &adj, &p.g);
        p.derivative = Some((adj, grad));
    }
    Ok(())
}

/// Gradient with the components removed that point out of the box at
/// active coefficients (zero at a constrained stationary point).
pub fn projected_gradient(g: &ControlPair, grad: &ControlPair) -> ControlPair {
    let mut out = grad.clone();
    if let Some((lo, hi)) = g.bounds {
        for s in 0..2 {
            let gv = g.species(s).data();
            for (o, &x) in out.species_mut(s).data_mut().iter_mut().zip(gv) {
                if (x <= lo && *o > 0.0) || (x >= hi && *o < 0.0) {
                    *o = 0.0;
                }
            }
        }
    }
    out
}

/// `d` restricted to the coefficients that move along `P(g + α d)` just
/// after `α` (right derivative of the projected path).
fn path_direction(g: &ControlPair, d: &ControlPair, alpha: f64) -> ControlPair {
    let mut out = d.clone();
    if let Some((lo, hi)) = g.bounds {
        for s in 0..2 {
            let gv = g.species(s).data();
            for (o, &x) in out.species_mut(s).data_mut().iter_mut().zip(gv) {
                let y = x + alpha * *o;
                if (y <= lo && *o < 0.0) || (y >= hi && *o > 0.0) {
                    *o = 0.0;
                }
            }
        }
    }
    out
}

fn active_set(g: &ControlPair) -> Vec<bool> {
    match g.bounds {
        None => Vec::new(),
        Some((lo, hi)) => g.g1.data().iter().chain(g.g2.data()).map(|&v| v <= lo || v >= hi).collect(),
    }
}

/// Fletcher–Reeves update `d = −∇J_k + β d_{k−1}`, `β = ‖∇J_k‖²/‖∇J_{k−1}‖²`.
///
/// Returns `β = 0` (steepest descent) when there is no history, when
/// `restart` is set, when the previous gradient vanishes or when the
/// combined direction is not a descent direction.
pub fn fr_direction(
    disc: &Discretization,
    grad_now: &ControlPair,
    previous: Option<(&ControlPair, &ControlPair)>,
    restart: bool,
) -> (ControlPair, f64) {
    let mut steepest = grad_now.clone();
    steepest.scale(-1.0);
    let Some((grad_prev, dir_prev)) = previous else {
        return (steepest, 0.0);
    };
    let den = inner(disc, grad_prev, grad_prev);
    if restart || den <= 0.0 {
        return (steepest, 0.0);
    }
    let beta = inner(disc, grad_now, grad_now) / den;
    let mut d = steepest.clone();
    d.axpy(beta, dir_prev);
    if inner(disc, &d, grad_now) >= 0.0 {
        return (steepest, 0.0);
    }
    (d, beta)
}

/// Merit function seen by the line search.
pub trait Merit {
    /// `φ(α)` and the linear model `m(α)` used in the sufficient-decrease test
    /// `φ(α) ≤ φ(0) + σ m(α)`.
    fn value(&mut self, alpha: f64) -> Result<(f64, f64)>;
    /// `φ'(α)`; only requested after `value(alpha)`.
    fn slope(&mut self, alpha: f64) -> Result<f64>;
}

/// Smooth scalar merit `φ` with derivative `dφ`; the linear model is `α φ'(0)`.
pub struct ScalarMerit<F, G> {
    pub phi: F,
    pub dphi: G,
}

impl<F: FnMut(f64) -> f64, G: FnMut(f64) -> f64> Merit for ScalarMerit<F, G> {
    fn value(&mut self, alpha: f64) -> Result<(f64, f64)> {
        let d0 = (self.dphi)(0.0);
        Ok(((self.phi)(alpha), alpha * d0))
    }

    fn slope(&mut self, alpha: f64) -> Result<f64> {
        Ok((self.dphi)(alpha))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchResult {
    pub alpha: f64,
    pub value: f64,
    pub slope: f64,
    pub trials: usize,
}

/// Strong Wolfe search from `alpha0`, given `φ(0)` and `φ'(0) < 0`.
pub fn wolfe_search(
    merit: &mut impl Merit,
    phi0: f64,
    dphi0: f64,
    alpha0: f64,
    cfg: &NcgConfig,
) -> Result<LineSearchResult> {
    if !(dphi0 < 0.0) {
        return Err(Error::InvalidArgument(format!("search direction is not a descent direction (slope {dphi0:e})")));
    }
    let res = match cfg.line_search {
        LineSearchKind::Adaptive => adaptive_search(merit, phi0, dphi0, alpha0, cfg)?,
        LineSearchKind::Bracketing => bracketing_search(merit, phi0, dphi0, alpha0, cfg)?,
    };
    debug_assert!(res.slope.abs() <= -cfg.rho * dphi0 * (1.0 + 1e-12));
    debug_assert!(res.value <= phi0);
    Ok(res)
}

fn adaptive_search(
    merit: &mut impl Merit,
    phi0: f64,
    dphi0: f64,
    alpha0: f64,
    cfg: &NcgConfig,
) -> Result<LineSearchResult> {
    let mut alpha = alpha0;
    for trial in 1..=cfg.max_line {
        let (value, model) = merit.value(alpha)?;
        if !(value <= phi0 + cfg.sigma * model) {
            alpha *= cfg.step_shrink;
            continue;
        }
        let slope = merit.slope(alpha)?;
        if slope.abs() <= -cfg.rho * dphi0 {
            return Ok(LineSearchResult {
                alpha,
                value,
                slope,
                trials: trial,
            });
        }
        alpha *= if slope < 0.0 { cfg.step_grow } else { cfg.step_shrink };
    }
    Err(Error::LineSearchFailure { trials: cfg.max_line })
}

fn bracketing_search(
    merit: &mut impl Merit,
    phi0: f64,
    dphi0: f64,
    alpha0: f64,
    cfg: &NcgConfig,
) -> Result<LineSearchResult> {
    let mut trials = 0;
    let (mut a_prev, mut f_prev, mut d_prev) = (0.0, phi0, dphi0);
    let mut alpha = alpha0;
    // (lo, f_lo, d_lo, hi, f_hi)
    let bracket;
    loop {
        if trials >= cfg.max_line {
            return Err(Error::LineSearchFailure { trials });
        }
        trials += 1;
        let (value, model) = merit.value(alpha)?;
        if !(value <= phi0 + cfg.sigma * model) || (trials > 1 && value >= f_prev) {
            bracket = (a_prev, f_prev, d_prev, alpha, value);
            break;
        }
        let slope = merit.slope(alpha)?;
        if slope.abs() <= -cfg.rho * dphi0 {
            return Ok(LineSearchResult {
                alpha,
                value,
                slope,
                trials,
            });
        }
        if slope >= 0.0 {
            bracket = (alpha, value, slope, a_prev, f_prev);
            break;
        }
        (a_prev, f_prev, d_prev) = (alpha, value, slope);
        alpha *= 2.0 * cfg.step_grow;
    }
    let (mut lo, mut f_lo, mut d_lo, mut hi, mut f_hi) = bracket;
    while trials < cfg.max_line {
        trials += 1;
        let width = hi - lo;
        // minimiser of the quadratic through (lo, f_lo, d_lo) and (hi, f_hi)
        let denom = 2.0 * (f_hi - f_lo - d_lo * width);
        let mut a = if denom.abs() > 0.0 { lo - d_lo * width * width / denom } else { lo + 0.5 * width };
        let (a_min, a_max) = if lo < hi { (lo, hi) } else { (hi, lo) };
        let margin = 0.1 * (a_max - a_min);
        if !a.is_finite() || a < a_min + margin || a > a_max - margin {
            a = 0.5 * (lo + hi);
        }
        let (value, model) = merit.value(a)?;
        if !(value <= phi0 + cfg.sigma * model) || value >= f_lo {
            (hi, f_hi) = (a, value);
            continue;
        }
        let slope = merit.slope(a)?;
        if slope.abs() <= -cfg.rho * dphi0 {
            return Ok(LineSearchResult {
                alpha: a,
                value,
                slope,
                trials,
            });
        }
        if slope * (hi - lo) >= 0.0 {
            (hi, f_hi) = (lo, f_lo);
        }
        (lo, f_lo, d_lo) = (a, value, slope);
    }
    Err(Error::LineSearchFailure { trials })
}

/// Merit along the projected path; caches evaluated points.
struct PathMerit<'a> {
    disc: &'a Discretization,
    base: &'a Point,
    dir: &'a ControlPair,
    mode: AdjointMode,
    points: Vec<(f64, Point)>,
}

impl PathMerit<'_> {
    fn point(&mut self, alpha: f64) -> Result<usize> {
        if let Some(i) = self.points.iter().position(|(a, _)| *a == alpha) {
            return Ok(i);
        }
        let mut g = self.base.g.clone();
        g.axpy(alpha, self.dir);
        let g = project(&g);
        let p = evaluate(self.disc, g)?;
        self.points.push((alpha, p));
        Ok(self.points.len() - 1)
    }

    fn take(mut self, alpha: f64) -> Option<Point> {
        let i = self.points.iter().position(|(a, _)| *a == alpha)?;
        Some(self.points.swap_remove(i).1)
    }
}

impl Merit for PathMerit<'_> {
    fn value(&mut self, alpha: f64) -> Result<(f64, f64)> {
        let i = self.point(alpha)?;
        let p = &self.points[i].1;
        let mut s = p.g.clone();
        s.axpy(-1.0, &self.base.g);
        let grad0 = &self.base.derivative.as_ref().expect("base differentiated").1;
        Ok((p.j(), inner(self.disc, grad0, &s)))
    }

    fn slope(&mut self, alpha: f64) -> Result<f64> {
        let i = self.point(alpha)?;
        let (disc, mode) = (self.disc, self.mode);
        let p = &mut self.points[i].1;
        differentiate(disc, p, mode)?;
        let grad = &p.derivative.as_ref().expect("just differentiated").1;
        let pd = path_direction(&self.base.g, self.dir, alpha);
        Ok(inner(disc, grad, &pd))
    }
}

/// Runs the optimizer from the constant control `cfg.g0` (projected).
pub fn optimize(disc: &Discretization, cfg: &NcgConfig) -> Result<OptRun> {
    let g0 = project(&ControlPair::constant(disc, cfg.g0));
    optimize_from(disc, g0, cfg)
}

pub fn optimize_from(disc: &Discretization, g0: ControlPair, cfg: &NcgConfig) -> Result<OptRun> {
    optimize_observed(disc, g0, cfg, |_| {})
}

/// Like [`optimize_from`], calling `observe` on the initial control and on
/// every accepted iterate.
pub fn optimize_observed(
    disc: &Discretization,
    g0: ControlPair,
    cfg: &NcgConfig,
    mut observe: impl FnMut(&ControlPair),
) -> Result<OptRun> {
    cfg.validate()?;
    g0.check(disc)?;
    let mut g0 = project(&g0);
    g0.zero_fixed(disc);
    observe(&g0);
    let mut cur = evaluate(disc, g0)?;
    differentiate(disc, &mut cur, cfg.adjoint_mode)?;
    let mut j_history = vec![cur.j()];
    let mut records = Vec::new();
    let mut prev: Option<(ControlPair, ControlPair)> = None;
    let mut restart_next = false;
    let mut alpha = cfg.eps0;
    let mut termination = Termination::MaxIterations;
    for it in 0..cfg.max_outer {
        let grad = cur.derivative.as_ref().expect("differentiated").1.clone();
        let pg = projected_gradient(&cur.g, &grad);
        let grad_norm = inner(disc, &pg, &pg).sqrt();
        if grad_norm == 0.0 {
            termination = Termination::Converged;
            break;
        }
        let (dir, beta) = fr_direction(disc, &pg, prev.as_ref().map(|(a, b)| (a, b)), restart_next);
        let dphi0 = inner(disc, &grad, &path_direction(&cur.g, &dir, 0.0));
        if !(dphi0 < 0.0) {
            // no feasible descent left along the projected gradient
            termination = Termination::Converged;
            break;
        }
        let mut merit = PathMerit {
            disc,
            base: &cur,
            dir: &dir,
            mode: cfg.adjoint_mode,
            points: Vec::new(),
        };
        let start = match cfg.line_search {
            LineSearchKind::Adaptive => alpha,
            LineSearchKind::Bracketing => cfg.eps0,
        };
        let found = match wolfe_search(&mut merit, cur.j(), dphi0, start, cfg) {
            Ok(r) => r,
            Err(Error::LineSearchFailure { .. }) => {
                termination = Termination::LineSearchFailure;
                break;
            }
            Err(e) => return Err(e),
        };
        let mut next = merit.take(found.alpha).expect("accepted point was evaluated");
        observe(&next.g);
        differentiate(disc, &mut next, cfg.adjoint_mode)?;
        let changed = cfg.restart_on_active_set && active_set(&cur.g) != active_set(&next.g);
        let j_old = cur.j();
        records.push(IterationRecord {
            iteration: it + 1,
            j: next.j(),
            grad_norm,
            step: found.alpha,
            beta,
            trials: found.trials,
            restarted: beta == 0.0,
        });
        j_history.push(next.j());
        alpha = found.alpha;
        prev = Some((pg, dir));
        restart_next = changed;
        cur = next;
        if j_old - cur.j() <= cfg.tol * j_old.abs() {
            termination = Termination::Converged;
            break;
        }
    }
    let (adjoint, gradient) = cur.derivative.expect("differentiated");
    Ok(OptRun {
        iterations: records.len(),
        j_history,
        records,
        termination,
        controls: cur.g,
        state: cur.state,
        adjoint,
        gradient,
        cost: cur.cost,
    })
}
