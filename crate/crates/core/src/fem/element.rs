//! Lagrange basis functions of degree 1 and 2 on triangles.
//!
//! Local numbering: vertices 0, 1, 2, then for degree 2 the midpoints of the
//! edges (0,1), (1,2), (2,0).

/// Maximum number of local basis functions.
pub const MAX_LOCAL: usize = 6;

pub fn local_count(degree: usize) -> usize {
    match degree {
        1 => 3,
        2 => 6,
        _ => panic!("unsupported polynomial degree {degree}"),
    }
}

/// Affine geometry of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct Geometry {
    pub vertices: [[f64; 2]; 3],
    pub area: f64,
    /// Constant gradients of the barycentric coordinates.
    pub grad_lambda: [[f64; 2]; 3],
}

impl Geometry {
    pub fn new(vertices: [[f64; 2]; 3]) -> Self {
        let [p0, p1, p2] = vertices;
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let grad_lambda = [
            [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det],
            [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det],
            [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det],
        ];
        Self {
            vertices,
            area: 0.5 * det,
            grad_lambda,
        }
    }

    pub fn point(&self, l: [f64; 3]) -> [f64; 2] {
        let v = &self.vertices;
        [
            l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
            l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
        ]
    }
}

/// Basis values at barycentric point `l`.
pub fn values(degree: usize, l: [f64; 3]) -> [f64; MAX_LOCAL] {
    let mut out = [0.0; MAX_LOCAL];
    match degree {
        1 => out[..3].copy_from_slice(&l),
        2 => {
            for i in 0..3 {
                out[i] = l[i] * (2.0 * l[i] - 1.0);
                out[3 + i] = 4.0 * l[i] * l[(i + 1) % 3];
            }
        }
        _ => panic!("unsupported polynomial degree {degree}"),
    }
    out
}

/// Physical gradients of the basis at barycentric point `l`.
pub fn gradients(degree: usize, l: [f64; 3], g: &Geometry) -> [[f64; 2]; MAX_LOCAL] {
    let gl = &g.grad_lambda;
    let mut out = [[0.0; 2]; MAX_LOCAL];
    match degree {
        1 => out[..3].copy_from_slice(gl),
        2 => {
            for i in 0..3 {
                let j = (i + 1) % 3;
                let s = 4.0 * l[i] - 1.0;
                out[i] = [s * gl[i][0], s * gl[i][1]];
                out[3 + i] = [
                    4.0 * (l[i] * gl[j][0] + l[j] * gl[i][0]),
                    4.0 * (l[i] * gl[j][1] + l[j] * gl[i][1]),
                ];
            }
        }
        _ => panic!("unsupported polynomial degree {degree}"),
    }
    out
}

/// Barycentric coordinates of the local nodes.
pub fn nodes(degree: usize) -> Vec<[f64; 3]> {
    let mut n = vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    if degree == 2 {
        n.extend([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]);
    }
    n
}

/// Basis of degree `degree` on a segment parametrised by `s ∈ [0, 1]`:
/// start node, end node, then the midpoint for degree 2.
pub fn edge_values(degree: usize, s: f64) -> [f64; 3] {
    match degree {
        1 => [1.0 - s, s, 0.0],
        2 => [(1.0 - s) * (1.0 - 2.0 * s), s * (2.0 * s - 1.0), 4.0 * s * (1.0 - s)],
        _ => panic!("unsupported polynomial degree {degree}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodal_basis_is_kronecker() {
        for deg in [1, 2] {
            let nl = local_count(deg);
            for (a, &p) in nodes(deg).iter().enumerate() {
                let v = values(deg, p);
                for (b, &vb) in v.iter().enumerate().take(nl) {
                    assert!((vb - if a == b { 1.0 } else { 0.0 }).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn partition_of_unity_and_zero_gradient_sum() {
        let g = Geometry::new([[0.2, 0.1], [0.9, 0.3], [0.4, 0.8]]);
        for deg in [1, 2] {
            let nl = local_count(deg);
            for l in [[0.2, 0.3, 0.5], [0.6, 0.1, 0.3]] {
                let s: f64 = values(deg, l)[..nl].iter().sum();
                assert!((s - 1.0).abs() < 1e-14);
                let gr = gradients(deg, l, &g);
                let gx: f64 = gr[..nl].iter().map(|v| v[0]).sum();
                let gy: f64 = gr[..nl].iter().map(|v| v[1]).sum();
                assert!(gx.abs() < 1e-12 && gy.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let g = Geometry::new([[0.0, 0.0], [1.0, 0.2], [0.3, 0.7]]);
        let l = [0.25, 0.35, 0.4];
        let x = g.point(l);
        // barycentric coordinates of a physical point
        let bary = |p: [f64; 2]| {
            let mut out = [0.0; 3];
            for i in 0..3 {
                let j = (i + 1) % 3;
                let k = (i + 2) % 3;
                let (pj, pk) = (g.vertices[j], g.vertices[k]);
                out[i] = 0.5 * ((pj[0] - p[0]) * (pk[1] - p[1]) - (pk[0] - p[0]) * (pj[1] - p[1])) / g.area;
            }
            out
        };
        let h = 1e-6;
        let gr = gradients(2, l, &g);
        for dim in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[dim] += h;
            xm[dim] -= h;
            let (vp, vm) = (values(2, bary(xp)), values(2, bary(xm)));
            for a in 0..6 {
                let fd = (vp[a] - vm[a]) / (2.0 * h);
                assert!((fd - gr[a][dim]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn edge_basis_partition_of_unity() {
        for deg in [1, 2] {
            for s in [0.0, 0.3, 1.0] {
                let v = edge_values(deg, s);
                assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            }
        }
    }
}
