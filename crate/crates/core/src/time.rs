//! Time partitions and the dG(k) temporal machinery for `k ∈ {0, 1}`.
//!
//! On every interval a field is a polynomial of degree `k` in time with
//! values in a finite-element space. The temporal basis is nodal on the
//! reference interval `s ∈ [0, 1]`: `{1}` for `k = 0` and `{1 − s, s}` for
//! `k = 1`, so the last coefficient of an interval is its left limit at the
//! right knot.

use crate::error::{Error, Result};
use crate::fem::quadrature::LineRule;

/// Knots `0 = t⁰ < t¹ < … < tᴺ = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    knots: Vec<f64>,
}

impl TimeGrid {
    pub fn from_knots(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots[0] != 0.0 {
            return Err(Error::InvalidArgument(
                "time grid needs at least two knots starting at 0".into(),
            ));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidArgument("time knots must be strictly increasing".into()));
        }
        Ok(Self { knots })
    }

    /// `n` equal intervals on `[0, T]`.
    pub fn uniform(final_time: f64, n: usize) -> Result<Self> {
        if n == 0 || !(final_time > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "uniform grid needs n >= 1 and T > 0 (n={n}, T={final_time})"
            )));
        }
        let mut knots: Vec<f64> = (0..=n).map(|i| final_time * i as f64 / n as f64).collect();
        knots[n] = final_time;
        Self::from_knots(knots)
    }

    /// Uniform grid whose step is the largest `T/N` not exceeding `tau`.
    pub fn with_max_step(final_time: f64, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {tau}")));
        }
        let n = ((final_time / tau) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        Self::uniform(final_time, n)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn n_intervals(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn final_time(&self) -> f64 {
        *self.knots.last().expect("grid has knots")
    }

    /// Length of interval `n` (zero-based).
    pub fn tau(&self, n: usize) -> f64 {
        self.knots[n + 1] - self.knots[n]
    }

    pub fn max_tau(&self) -> f64 {
        (0..self.n_intervals()).map(|n| self.tau(n)).fold(0.0, f64::max)
    }

    /// `min τ / max τ`.
    pub fn quasi_uniformity(&self) -> f64 {
        let min = (0..self.n_intervals()).map(|n| self.tau(n)).fold(f64::INFINITY, f64::min);
        min / self.max_tau()
    }

    /// Splits every interval in two.
    pub fn refine(&self) -> Self {
        let mut knots = Vec::with_capacity(2 * self.knots.len() - 1);
        for w in self.knots.windows(2) {
            knots.push(w[0]);
            knots.push(0.5 * (w[0] + w[1]));
        }
        knots.push(self.final_time());
        Self { knots }
    }

    /// Interval containing `t`, left-continuous: `t ∈ (tⁿ⁻¹, tⁿ]`.
    pub fn interval_of(&self, t: f64) -> Result<usize> {
        if !(t > 0.0 && t <= self.final_time()) {
            return Err(Error::InvalidArgument(format!(
                "time {t} outside (0, {}]",
                self.final_time()
            )));
        }
        let k = self.knots.partition_point(|&x| x < t);
        Ok(k - 1)
    }
}

/// Nodal temporal basis of degree `k` on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemporalBasis {
    k: usize,
}

impl TemporalBasis {
    pub fn new(k: usize) -> Result<Self> {
        if k > 1 {
            return Err(Error::InvalidArgument(format!("temporal degree must be 0 or 1, got {k}")));
        }
        Ok(Self { k })
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn n_nodes(&self) -> usize {
        self.k + 1
    }

    pub fn value(&self, a: usize, s: f64) -> f64 {
        match (self.k, a) {
            (0, _) => 1.0,
            (_, 0) => 1.0 - s,
            _ => s,
        }
    }

    fn derivative(&self, a: usize) -> f64 {
        match (self.k, a) {
            (0, _) => 0.0,
            (_, 0) => -1.0,
            _ => 1.0,
        }
    }

    /// `∫₀¹ ψₐ' ψ_b ds + ψₐ(0) ψ_b(0)`, indexed `[b][a]`: time derivative plus
    /// the jump at the left knot.
    pub fn transport_matrix(&self) -> [[f64; 2]; 2] {
        let mut m = [[0.0; 2]; 2];
        let rule = LineRule::gauss(2);
        for b in 0..self.n_nodes() {
            for a in 0..self.n_nodes() {
                let int: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&s, &w)| w * self.derivative(a) * self.value(b, s))
                    .sum();
                m[b][a] = int + self.value(a, 0.0) * self.value(b, 0.0);
            }
        }
        m
    }

    /// `∫₀¹ ψₐ ψ_b ds`.
    pub fn mass_matrix(&self) -> [[f64; 2]; 2] {
        let mut m = [[0.0; 2]; 2];
        let rule = LineRule::gauss(2);
        for b in 0..self.n_nodes() {
            for a in 0..self.n_nodes() {
                m[b][a] = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&s, &w)| w * self.value(a, s) * self.value(b, s))
                    .sum();
            }
        }
        m
    }

    /// Rule for the nonlinear reaction terms: one point for `k = 0`, three
    /// Gauss points for `k = 1` (products of degree up to 3 in time).
    pub fn reaction_rule(&self) -> LineRule {
        if self.k == 0 {
            LineRule::gauss(1)
        } else {
            LineRule::gauss(3)
        }
    }
}

/// Two-point Gauss rule for the data and tracking terms; exact for degree 3.
pub fn data_rule() -> LineRule {
    LineRule::gauss(2)
}

/// `∫ₐᵇ f dt` with the two-point Gauss rule.
pub fn time_quadrature(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    data_rule().integrate(a, b, f)
}

/// Piecewise polynomial in time with finite-element coefficients.
///
/// Storage is `[interval][temporal node][dof]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    k: usize,
    n_dofs: usize,
    n_intervals: usize,
    data: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(k: usize, n_dofs: usize, n_intervals: usize) -> Self {
        Self {
            k,
            n_dofs,
            n_intervals,
            data: vec![0.0; (k + 1) * n_dofs * n_intervals],
        }
    }

    pub fn constant(k: usize, n_dofs: usize, n_intervals: usize, value: f64) -> Self {
        let mut f = Self::zeros(k, n_dofs, n_intervals);
        f.data.fill(value);
        f
    }

    pub fn from_data(k: usize, n_dofs: usize, n_intervals: usize, data: Vec<f64>) -> Result<Self> {
        let expected = (k + 1) * n_dofs * n_intervals;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: data.len(),
            });
        }
        Ok(Self {
            k,
            n_dofs,
            n_intervals,
            data,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_intervals(&self) -> usize {
        self.n_intervals
    }

    pub fn n_nodes(&self) -> usize {
        self.k + 1
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.k == other.k && self.n_dofs == other.n_dofs && self.n_intervals == other.n_intervals
    }

    /// All temporal coefficients of interval `n`.
    pub fn interval(&self, n: usize) -> &[f64] {
        let len = self.n_nodes() * self.n_dofs;
        &self.data[n * len..(n + 1) * len]
    }

    pub fn interval_mut(&mut self, n: usize) -> &mut [f64] {
        let len = self.n_nodes() * self.n_dofs;
        &mut self.data[n * len..(n + 1) * len]
    }

    /// Coefficient vector of temporal node `a` on interval `n`.
    pub fn node(&self, n: usize, a: usize) -> &[f64] {
        let start = (n * self.n_nodes() + a) * self.n_dofs;
        &self.data[start..start + self.n_dofs]
    }

    pub fn node_mut(&mut self, n: usize, a: usize) -> &mut [f64] {
        let start = (n * self.n_nodes() + a) * self.n_dofs;
        let nd = self.n_dofs;
        &mut self.data[start..start + nd]
    }

    /// Value at reference position `s ∈ [0, 1]` of interval `n`.
    pub fn value_at(&self, n: usize, s: f64) -> Vec<f64> {
        let basis = TemporalBasis { k: self.k };
        let mut out = vec![0.0; self.n_dofs];
        for a in 0..self.n_nodes() {
            let w = basis.value(a, s);
            for (o, v) in out.iter_mut().zip(self.node(n, a)) {
                *o += w * v;
            }
        }
        out
    }

    /// Left limit at the right knot of interval `n`.
    pub fn end_value(&self, n: usize) -> &[f64] {
        self.node(n, self.k)
    }

    /// Right limit at the left knot of interval `n`.
    pub fn start_value(&self, n: usize) -> &[f64] {
        self.node(n, 0)
    }

    /// Left-continuous evaluation at `t ∈ (0, T]`.
    pub fn eval(&self, grid: &TimeGrid, t: f64) -> Result<Vec<f64>> {
        if grid.n_intervals() != self.n_intervals {
            return Err(Error::DimensionMismatch {
                expected: self.n_intervals,
                got: grid.n_intervals(),
            });
        }
        let n = grid.interval_of(t)?;
        let s = (t - grid.knots()[n]) / grid.tau(n);
        Ok(self.value_at(n, s))
    }

    /// Jump `y₊ⁿ − y₋ⁿ` at the left knot of interval `n`, with `initial` the
    /// left value at `t⁰`.
    pub fn jump(&self, n: usize, initial: &[f64]) -> Vec<f64> {
        let prev = if n == 0 { initial } else { self.end_value(n - 1) };
        self.start_value(n).iter().zip(prev).map(|(a, b)| a - b).collect()
    }

    pub fn axpy(&mut self, alpha: f64, x: &Self) {
        assert!(self.same_shape(x), "field shapes differ");
        for (a, b) in self.data.iter_mut().zip(&x.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sums_to_final_time() {
        let g = TimeGrid::with_max_step(0.1, 0.23570f64.powi(2) / 8.0).unwrap();
        assert_eq!(g.n_intervals(), 15);
        let total: f64 = (0..g.n_intervals()).map(|n| g.tau(n)).sum();
        assert!((total - 0.1).abs() < 1e-15);
        let r = g.refine();
        assert_eq!(r.n_intervals(), 30);
        let total: f64 = (0..r.n_intervals()).map(|n| r.tau(n)).sum();
        assert!((total - 0.1).abs() < 1e-15);
        assert!((g.quasi_uniformity() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn exact_multiple_is_not_rounded_up() {
        assert_eq!(TimeGrid::with_max_step(0.1, 0.01).unwrap().n_intervals(), 10);
    }

    #[test]
    fn invalid_grids() {
        assert!(TimeGrid::from_knots(vec![0.0, 0.1, 0.1]).is_err());
        assert!(TimeGrid::from_knots(vec![0.1, 0.2]).is_err());
        assert!(TimeGrid::uniform(0.1, 0).is_err());
        assert!(TemporalBasis::new(2).is_err());
    }

    #[test]
    fn interval_lookup_is_left_continuous() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        assert_eq!(g.interval_of(0.25).unwrap(), 0);
        assert_eq!(g.interval_of(0.2500001).unwrap(), 1);
        assert_eq!(g.interval_of(1.0).unwrap(), 3);
        assert!(g.interval_of(0.0).is_err());
        assert!(g.interval_of(1.5).is_err());
    }

    #[test]
    fn field_evaluation() {
        let g = TimeGrid::uniform(1.0, 2).unwrap();
        let mut f0 = SpaceTimeField::zeros(0, 1, 2);
        f0.node_mut(0, 0)[0] = 3.0;
        f0.node_mut(1, 0)[0] = 5.0;
        assert_eq!(f0.eval(&g, 0.3).unwrap(), vec![3.0]);
        assert_eq!(f0.eval(&g, 0.5).unwrap(), vec![3.0]);
        assert_eq!(f0.eval(&g, 0.7).unwrap(), vec![5.0]);

        let mut f1 = SpaceTimeField::zeros(1, 1, 2);
        f1.node_mut(0, 0)[0] = 1.0;
        f1.node_mut(0, 1)[0] = 2.0;
        f1.node_mut(1, 0)[0] = 4.0;
        f1.node_mut(1, 1)[0] = 6.0;
        assert_eq!(f1.eval(&g, 0.25).unwrap(), vec![1.5]);
        assert_eq!(f1.eval(&g, 0.5).unwrap(), vec![2.0]);
        assert_eq!(f1.eval(&g, 1.0).unwrap(), vec![6.0]);
        assert_eq!(f1.jump(1, &[0.0]), vec![2.0]);
        assert_eq!(f1.jump(0, &[0.5]), vec![0.5]);
    }

    #[test]
    fn temporal_matrices() {
        let b0 = TemporalBasis::new(0).unwrap();
        assert_eq!(b0.transport_matrix()[0][0], 1.0);
        assert_eq!(b0.mass_matrix()[0][0], 1.0);
        let b1 = TemporalBasis::new(1).unwrap();
        let a = b1.transport_matrix();
        let expect = [[0.5, 0.5], [-0.5, 0.5]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((a[i][j] - expect[i][j]).abs() < 1e-15);
            }
        }
        let m = b1.mass_matrix();
        assert!((m[0][0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((m[0][1] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn gauss_two_time_quadrature() {
        assert_eq!(time_quadrature(0.0, 1.0, |_| 1.0), 1.0);
        assert!((time_quadrature(0.0, 1.0, |t| t * t * t) - 0.25).abs() < 1e-16);
        let v = time_quadrature(0.0, 1.0, |t| t.powi(4));
        assert!((0.2 - v - 1.0 / 180.0).abs() < 1e-15);
    }
}
