//! Triangulations of the unit square.
//!
//! The structured mesh splits each of the `n × n` grid cells along the
//! diagonal running from its lower-left to its upper-right corner, so the
//! element diameter is `h = √2 / n`. Vertices are numbered row by row,
//! `index = j (n + 1) + i` for the vertex at `(i / n, j / n)`.
//!
//! Edges are numbered in order of first appearance while walking the
//! triangles; the quadratic finite-element space places its midpoint
//! degrees of freedom after the vertex ones using this numbering.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Triangulation {
    pub vertices: Vec<[f64; 2]>,
    /// Vertex triples, counter-clockwise.
    pub triangles: Vec<[usize; 3]>,
    /// Boundary edges in counter-clockwise order starting at the origin.
    pub boundary_edges: Vec<[usize; 2]>,
    /// Largest element diameter.
    pub h: f64,
    edges: Vec<[usize; 2]>,
    triangle_edges: Vec<[usize; 3]>,
    edge_lookup: HashMap<(usize, usize), usize>,
}

impl Triangulation {
    /// Builds a triangulation from raw connectivity. Triangles are reoriented
    /// counter-clockwise if needed.
    pub fn from_parts(
        vertices: Vec<[f64; 2]>,
        mut triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<[usize; 2]>,
    ) -> Result<Self> {
        let nv = vertices.len();
        for t in triangles.iter_mut() {
            if t.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidArgument(format!(
                    "triangle {t:?} references a missing vertex"
                )));
            }
            if signed_area(&vertices, *t) < 0.0 {
                t.swap(1, 2);
            }
        }
        let mut edges = Vec::new();
        let mut edge_lookup = HashMap::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for t in &triangles {
            let mut te = [0; 3];
            for (k, slot) in te.iter_mut().enumerate() {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                *slot = *edge_lookup.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edges.len() - 1
                });
            }
            triangle_edges.push(te);
        }
        let h = triangles
            .iter()
            .map(|t| diameter(&vertices, *t))
            .fold(0.0, f64::max);
        Ok(Self {
            vertices,
            triangles,
            boundary_edges,
            h,
            edges,
            triangle_edges,
            edge_lookup,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// All edges as sorted vertex pairs.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Edge indices of triangle `t`; local edge `k` joins local vertices `k` and `k + 1`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, self.triangles[t])
    }

    /// Ratio of diameter to inscribed-circle diameter, maximised over elements.
    pub fn shape_regularity(&self) -> f64 {
        self.triangles
            .iter()
            .map(|&t| {
                let [a, b, c] = side_lengths(&self.vertices, t);
                let area = signed_area(&self.vertices, t);
                let inradius = 2.0 * area / (a + b + c);
                a.max(b).max(c) / (2.0 * inradius)
            })
            .fold(0.0, f64::max)
    }

    /// Number of triangles sharing each edge.
    pub fn edge_multiplicity(&self) -> Vec<usize> {
        let mut count = vec![0; self.edges.len()];
        for te in &self.triangle_edges {
            for &e in te {
                count[e] += 1;
            }
        }
        count
    }

    /// Whether each vertex lies on a boundary edge.
    pub fn boundary_vertex_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.vertices.len()];
        for &[a, b] in &self.boundary_edges {
            mask[a] = true;
            mask[b] = true;
        }
        mask
    }

    /// Writes "vertices", "triangles" and "boundary" blocks, one record per line.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "vertices {}", self.vertices.len())?;
        for v in &self.vertices {
            writeln!(out, "{:.17e} {:.17e}", v[0], v[1])?;
        }
        writeln!(out, "triangles {}", self.triangles.len())?;
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(out, "boundary {}", self.boundary_edges.len())?;
        for e in &self.boundary_edges {
            writeln!(out, "{} {}", e[0], e[1])?;
        }
        Ok(())
    }
}

/// Uniform mesh of `[0,1]²` with `n` cells per side and `2n²` triangles.
pub fn build_structured(n: usize) -> Result<Triangulation> {
    if n == 0 {
        return Err(Error::InvalidArgument("mesh subdivision n must be >= 1".into()));
    }
    let np = n + 1;
    let idx = |i: usize, j: usize| j * np + i;
    let mut vertices = Vec::with_capacity(np * np);
    for j in 0..np {
        for i in 0..np {
            vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (v00, v10, v11, v01) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let mut boundary_edges = Vec::with_capacity(4 * n);
    for i in 0..n {
        boundary_edges.push([idx(i, 0), idx(i + 1, 0)]);
    }
    for j in 0..n {
        boundary_edges.push([idx(n, j), idx(n, j + 1)]);
    }
    for i in (0..n).rev() {
        boundary_edges.push([idx(i + 1, n), idx(i, n)]);
    }
    for j in (0..n).rev() {
        boundary_edges.push([idx(0, j + 1), idx(0, j)]);
    }
    let mut mesh = Triangulation::from_parts(vertices, triangles, boundary_edges)?;
    // exact value, independent of rounding in the coordinates
    mesh.h = std::f64::consts::SQRT_2 / n as f64;
    Ok(mesh)
}

/// Volume degree of freedom for each boundary degree of freedom.
///
/// Boundary DOFs follow the boundary edges counter-clockwise: the start
/// vertex of every edge, followed by its midpoint when `degree == 2`.
pub fn boundary_trace_map(mesh: &Triangulation, degree: usize) -> Result<Vec<usize>> {
    if !(1..=2).contains(&degree) {
        return Err(Error::InvalidArgument(format!("unsupported degree {degree}")));
    }
    let nv = mesh.n_vertices();
    let mut map = Vec::with_capacity(mesh.boundary_edges.len() * degree);
    for &[a, b] in &mesh.boundary_edges {
        map.push(a);
        if degree == 2 {
            let e = mesh
                .edge_index(a, b)
                .ok_or_else(|| Error::InvalidState(format!("boundary edge ({a},{b}) not in mesh")))?;
            map.push(nv + e);
        }
    }
    Ok(map)
}

fn signed_area(v: &[[f64; 2]], t: [usize; 3]) -> f64 {
    let [a, b, c] = [v[t[0]], v[t[1]], v[t[2]]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn side_lengths(v: &[[f64; 2]], t: [usize; 3]) -> [f64; 3] {
    let d = |p: usize, q: usize| {
        let (a, b) = (v[t[p]], v[t[q]]);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    };
    [d(0, 1), d(1, 2), d(2, 0)]
}

fn diameter(v: &[[f64; 2]], t: [usize; 3]) -> f64 {
    let [a, b, c] = side_lengths(v, t);
    a.max(b).max(c)
}
