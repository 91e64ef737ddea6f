//! Quadrature rules on the reference triangle, on segments and in time.

/// Rule on a triangle in barycentric coordinates; weights sum to 1 and are
/// multiplied by the element area.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl TriangleRule {
    /// Six-point rule, exact for polynomials of degree 4.
    pub fn degree4() -> Self {
        let mut r = Self {
            points: Vec::new(),
            weights: Vec::new(),
            degree: 4,
        };
        r.push_orbit3(0.223381589678011, 0.108103018168070, 0.445948490915965);
        r.push_orbit3(0.109951743655322, 0.816847572980459, 0.091576213509771);
        r
    }

    /// Twelve-point rule, exact for polynomials of degree 6.
    pub fn degree6() -> Self {
        let mut r = Self {
            points: Vec::new(),
            weights: Vec::new(),
            degree: 6,
        };
        r.push_orbit3(0.116786275726379, 0.501426509658179, 0.249286745170910);
        r.push_orbit3(0.050844906370207, 0.873821971016996, 0.063089014491502);
        let (a, b, c) = (0.053145049844817, 0.310352451033784, 0.636502499121399);
        for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
            r.points.push(p);
            r.weights.push(0.082851075618374);
        }
        r
    }

    /// Vertex rule (weights 1/3); exact for degree 1, used for mass lumping.
    pub fn vertices() -> Self {
        Self {
            points: vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            weights: vec![1.0 / 3.0; 3],
            degree: 1,
        }
    }

    /// Lowest-degree rule of this family that is exact for `degree`.
    pub fn exact_for(degree: usize) -> Self {
        if degree <= 4 {
            Self::degree4()
        } else {
            Self::degree6()
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn push_orbit3(&mut self, w: f64, a: f64, b: f64) {
        for p in [[a, b, b], [b, a, b], [b, b, a]] {
            self.points.push(p);
            self.weights.push(w);
        }
    }
}

/// Gauss–Legendre rule on `[0, 1]` with `n ∈ {1, 2, 3}` points.
#[derive(Debug, Clone)]
pub struct LineRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LineRule {
    pub fn gauss(n: usize) -> Self {
        match n {
            1 => Self {
                points: vec![0.5],
                weights: vec![1.0],
            },
            2 => {
                let d = 0.5 / 3f64.sqrt();
                Self {
                    points: vec![0.5 - d, 0.5 + d],
                    weights: vec![0.5, 0.5],
                }
            }
            3 => {
                let d = 0.5 * (0.6f64).sqrt();
                Self {
                    points: vec![0.5 - d, 0.5, 0.5 + d],
                    weights: vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
                }
            }
            _ => panic!("Gauss rule with {n} points is not tabulated"),
        }
    }

    /// Applies the rule to `f` on `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let len = b - a;
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&s, &w)| w * f(a + s * len))
            .sum::<f64>()
            * len
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// ∫ x^p y^q over the unit right triangle.
    fn monomial_exact(p: u32, q: u32) -> f64 {
        factorial(p) * factorial(q) / factorial(p + q + 2)
    }

    fn apply(rule: &TriangleRule, p: i32, q: i32) -> f64 {
        // reference triangle (0,0), (1,0), (0,1); area 1/2
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(l, w)| w * l[1].powi(p) * l[2].powi(q))
            .sum::<f64>()
            * 0.5
    }

    #[test]
    fn triangle_rules_integrate_monomials_exactly() {
        for rule in [TriangleRule::degree4(), TriangleRule::degree6(), TriangleRule::vertices()] {
            let wsum: f64 = rule.weights.iter().sum();
            assert!((wsum - 1.0).abs() < 1e-12);
            for total in 0..=rule.degree as u32 {
                for p in 0..=total {
                    let q = total - p;
                    let got = apply(&rule, p as i32, q as i32);
                    let want = monomial_exact(p, q);
                    assert!((got - want).abs() < 1e-13, "deg {} rule, x^{p} y^{q}: {got} vs {want}", rule.degree);
                }
            }
        }
    }

    #[test]
    fn degree4_rule_is_not_exact_for_degree6() {
        let r = TriangleRule::degree4();
        assert!((apply(&r, 6, 0) - monomial_exact(6, 0)).abs() > 1e-8);
    }

    #[test]
    fn gauss_rules() {
        for n in 1..=3 {
            let r = LineRule::gauss(n);
            for p in 0..(2 * n) as i32 {
                let got = r.integrate(0.0, 1.0, |t| t.powi(p));
                assert!((got - 1.0 / (p + 1) as f64).abs() < 1e-14);
            }
        }
        let two = LineRule::gauss(2);
        assert_eq!(two.integrate(0.0, 1.0, |_| 1.0), 1.0);
        assert!((two.integrate(0.0, 1.0, |t| t.powi(3)) - 0.25).abs() < 1e-15);
        // two-point rule on t⁴: ((1/2 - d)^4 + (1/2 + d)^4)/2 with d = 1/(2√3), i.e. 7/36
        let d = 0.5 / 3f64.sqrt();
        let oracle = 0.5 * ((0.5 - d).powi(4) + (0.5 + d).powi(4));
        let got = two.integrate(0.0, 1.0, |t| t.powi(4));
        assert!((got - oracle).abs() < 1e-15);
        assert!((got - 7.0 / 36.0).abs() < 1e-15);
        // error term f⁗/4320 = 1/180
        assert!((0.2 - got - 1.0 / 180.0).abs() < 1e-15);
    }
}
