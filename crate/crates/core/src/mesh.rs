//! Conforming triangulations: structured meshes of a rectangle, barycentric
//! (macro-element) refinement, edge bookkeeping for upwind terms and point
//! location for characteristic feet.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("degenerate domain or subdivision")]
    Degenerate,
    #[error("mesh file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("triangle {0} has non-positive area or is clockwise")]
    BadTriangle(usize),
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonManifoldEdge(usize, usize),
    #[error("point ({0}, {1}) lies outside the domain")]
    OutsideDomain(f64, f64),
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn unit() -> Rect {
        Rect { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Endpoints, smaller index first.
    pub v: [usize; 2],
    /// Fixed unit normal, outward for `left`.
    pub normal: [f64; 2],
    pub length: f64,
    /// Lower-indexed incident triangle.
    pub left: usize,
    /// Higher-indexed incident triangle, `None` on the boundary.
    pub right: Option<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }

    pub fn midpoint(&self, m: &Mesh) -> [f64; 2] {
        let (a, b) = (m.vertices[self.v[0]], m.vertices[self.v[1]]);
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<Edge>,
    /// Edge index of local edge `i`, the edge opposite local vertex `i`.
    pub tri_edges: Vec<[usize; 3]>,
    /// Triangle across local edge `i`.
    pub neighbors: Vec<[Option<usize>; 3]>,
    pub areas: Vec<f64>,
    pub barycenters: Vec<[f64; 2]>,
    pub diameters: Vec<f64>,
    pub boundary_vertex: Vec<bool>,
    /// Macro triangle each triangle was split from.
    pub macro_parent: Option<Vec<usize>>,
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl Mesh {
    /// Build edges, normals and adjacency from vertices and triangles.
    pub fn from_parts(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        macro_parent: Option<Vec<usize>>,
    ) -> Result<Mesh, MeshError> {
        let nt = triangles.len();
        let mut areas = Vec::with_capacity(nt);
        let mut barycenters = Vec::with_capacity(nt);
        let mut diameters = Vec::with_capacity(nt);
        for (k, t) in triangles.iter().enumerate() {
            if t.iter().any(|&i| i >= vertices.len()) {
                return Err(MeshError::BadTriangle(k));
            }
            let [a, b, c] = t.map(|i| vertices[i]);
            let area = signed_area(a, b, c);
            if !(area > 0.0) {
                return Err(MeshError::BadTriangle(k));
            }
            areas.push(area);
            barycenters.push([(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]);
            diameters.push(dist(a, b).max(dist(b, c)).max(dist(c, a)));
        }

        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut tri_edges = vec![[0usize; 3]; nt];
        let mut neighbors = vec![[None; 3]; nt];
        for (k, t) in triangles.iter().enumerate() {
            for i in 0..3 {
                let (p, q) = (t[(i + 1) % 3], t[(i + 2) % 3]);
                let key = (p.min(q), p.max(q));
                match lookup.get(&key) {
                    None => {
                        let (a, b) = (vertices[p], vertices[q]);
                        let length = dist(a, b);
                        // outward normal of a counterclockwise triangle traversing p -> q
                        let normal = [(b[1] - a[1]) / length, -(b[0] - a[0]) / length];
                        lookup.insert(key, edges.len());
                        tri_edges[k][i] = edges.len();
                        edges.push(Edge { v: [key.0, key.1], normal, length, left: k, right: None });
                    }
                    Some(&e) => {
                        if edges[e].right.is_some() {
                            return Err(MeshError::NonManifoldEdge(key.0, key.1));
                        }
                        edges[e].right = Some(k);
                        tri_edges[k][i] = e;
                    }
                }
            }
        }
        for (k, te) in tri_edges.iter().enumerate() {
            for i in 0..3 {
                let e = &edges[te[i]];
                neighbors[k][i] = if e.left == k { e.right } else { Some(e.left) };
            }
        }
        let mut boundary_vertex = vec![false; vertices.len()];
        for e in edges.iter().filter(|e| e.is_boundary()) {
            boundary_vertex[e.v[0]] = true;
            boundary_vertex[e.v[1]] = true;
        }
        Ok(Mesh {
            vertices,
            triangles,
            edges,
            tri_edges,
            neighbors,
            areas,
            barycenters,
            diameters,
            boundary_vertex,
            macro_parent,
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

    /// Maximal element diameter.
    pub fn h(&self) -> f64 {
        self.diameters.iter().cloned().fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn corners(&self, k: usize) -> [[f64; 2]; 3] {
        self.triangles[k].map(|i| self.vertices[i])
    }

    /// Gradients of the three barycentric coordinates on triangle `k`.
    pub fn grad_lambda(&self, k: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.corners(k);
        let two_area = 2.0 * self.areas[k];
        let g = |p: [f64; 2], q: [f64; 2]| [(p[1] - q[1]) / two_area, (q[0] - p[0]) / two_area];
        [g(b, c), g(c, a), g(a, b)]
    }

    pub fn barycentric(&self, k: usize, x: [f64; 2]) -> [f64; 3] {
        let [a, b, c] = self.corners(k);
        let area = self.areas[k];
        let l0 = signed_area(x, b, c) / area;
        let l1 = signed_area(a, x, c) / area;
        [l0, l1, 1.0 - l0 - l1]
    }

    pub fn point(&self, k: usize, l: [f64; 3]) -> [f64; 2] {
        let [a, b, c] = self.corners(k);
        [
            l[0] * a[0] + l[1] * b[0] + l[2] * c[0],
            l[0] * a[1] + l[1] * b[1] + l[2] * c[1],
        ]
    }

    /// Outward unit normal of triangle `k` on its local edge `i`.
    pub fn outward_normal(&self, k: usize, i: usize) -> [f64; 2] {
        let e = &self.edges[self.tri_edges[k][i]];
        if e.left == k {
            e.normal
        } else {
            [-e.normal[0], -e.normal[1]]
        }
    }

    /// Barycentric coordinates in triangle `k` of the point at parameter `t`
    /// along edge `e`, measured from `v[0]` to `v[1]`.
    pub fn edge_point(&self, k: usize, e: usize, t: f64) -> [f64; 3] {
        let ed = &self.edges[e];
        let tri = self.triangles[k];
        let mut l = [0.0; 3];
        for i in 0..3 {
            if tri[i] == ed.v[0] {
                l[i] = 1.0 - t;
            } else if tri[i] == ed.v[1] {
                l[i] = t;
            }
        }
        l
    }

    /// Locate `x` by walking from `hint` through adjacency, falling back to an
    /// exhaustive scan. Points within `1e-10` outside the domain are clamped
    /// onto the nearest triangle.
    pub fn locate_point(&self, x: [f64; 2], hint: usize) -> Result<(usize, [f64; 3]), MeshError> {
        let mut k = hint.min(self.n_triangles() - 1);
        for _ in 0..self.n_triangles() {
            let l = self.barycentric(k, x);
            let (imin, lmin) = argmin3(l);
            if lmin >= -1e-12 {
                return Ok((k, l));
            }
            match self.neighbors[k][imin] {
                Some(n) => k = n,
                None => break,
            }
        }
        self.locate_exhaustive(x)
    }

    /// Exhaustive scan for the triangle that best contains `x`.
    pub fn locate_exhaustive(&self, x: [f64; 2]) -> Result<(usize, [f64; 3]), MeshError> {
        let mut best = (0, f64::NEG_INFINITY, [0.0; 3]);
        for k in 0..self.n_triangles() {
            let l = self.barycentric(k, x);
            let (_, lmin) = argmin3(l);
            if lmin > best.1 {
                best = (k, lmin, l);
            }
        }
        let (k, lmin, l) = best;
        if lmin >= -1e-12 {
            return Ok((k, l));
        }
        let clamped = clamp_barycentric(l);
        let p = self.point(k, clamped);
        if dist(p, x) <= 1e-10 {
            Ok((k, clamped))
        } else {
            Err(MeshError::OutsideDomain(x[0], x[1]))
        }
    }

    /// Serialize in the ASCII format read by [`read_mesh`].
    pub fn to_ascii(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.n_vertices(), self.n_triangles());
        for v in &self.vertices {
            let _ = writeln!(s, "{:e} {:e}", v[0], v[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        s
    }
}

fn argmin3(l: [f64; 3]) -> (usize, f64) {
    let mut i = 0;
    for j in 1..3 {
        if l[j] < l[i] {
            i = j;
        }
    }
    (i, l[i])
}

fn clamp_barycentric(l: [f64; 3]) -> [f64; 3] {
    let c = l.map(|v| v.max(0.0));
    let s: f64 = c.iter().sum();
    c.map(|v| v / s)
}

pub fn build_structured_mesh(nx: usize, ny: usize, domain: Rect) -> Result<Mesh, MeshError> {
    let w = domain.x1 - domain.x0;
    let hgt = domain.y1 - domain.y0;
    if nx == 0 || ny == 0 || !(w > 0.0) || !(hgt > 0.0) {
        return Err(MeshError::Degenerate);
    }
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([
                domain.x0 + w * i as f64 / nx as f64,
                domain.y0 + hgt * j as f64 / ny as f64,
            ]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    Mesh::from_parts(vertices, triangles, None)
}

/// Split every triangle into three around its barycenter.
pub fn barycentric_refine(m: &Mesh) -> Mesh {
    let mut vertices = m.vertices.clone();
    let mut triangles = Vec::with_capacity(3 * m.n_triangles());
    let mut parent = Vec::with_capacity(3 * m.n_triangles());
    for (k, t) in m.triangles.iter().enumerate() {
        let g = vertices.len();
        vertices.push(m.barycenters[k]);
        for i in 0..3 {
            triangles.push([t[i], t[(i + 1) % 3], g]);
            parent.push(k);
        }
    }
    Mesh::from_parts(vertices, triangles, Some(parent))
        .expect("barycentric refinement of a valid mesh is valid")
}

/// Parse the ASCII mesh format: `NV NT`, then `NV` lines `x y`, then `NT`
/// lines `i j k` with 0-based vertex indices.
pub fn read_mesh(text: &str) -> Result<Mesh, MeshError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let parse_err = |line: usize, msg: &str| MeshError::Parse { line, msg: msg.to_string() };
    let (line, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let counts: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(line, "bad count")))
        .collect::<Result<_, _>>()?;
    if counts.len() != 2 {
        return Err(parse_err(line, "header must be `NV NT`"));
    }
    let (nv, nt) = (counts[0], counts[1]);
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, l) = lines.next().ok_or_else(|| parse_err(0, "missing vertex line"))?;
        let v: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_err(line, "bad coordinate")))
            .collect::<Result<_, _>>()?;
        if v.len() != 2 || !v.iter().all(|c| c.is_finite()) {
            return Err(parse_err(line, "vertex line must be `x y`"));
        }
        vertices.push([v[0], v[1]]);
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (line, l) = lines.next().ok_or_else(|| parse_err(0, "missing triangle line"))?;
        let t: Vec<usize> = l
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_err(line, "bad index")))
            .collect::<Result<_, _>>()?;
        if t.len() != 3 {
            return Err(parse_err(line, "triangle line must be `i j k`"));
        }
        triangles.push([t[0], t[1], t[2]]);
    }
    if let Some((line, _)) = lines.next() {
        return Err(parse_err(line, "trailing content"));
    }
    Mesh::from_parts(vertices, triangles, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_quad_counts() {
        let m = build_structured_mesh(1, 1, Rect::unit()).unwrap();
        assert_eq!(m.n_triangles(), 2);
        assert_eq!(m.edges.iter().filter(|e| !e.is_boundary()).count(), 1);
        assert_eq!(m.edges.iter().filter(|e| e.is_boundary()).count(), 4);
    }

    #[test]
    fn degenerate_rectangle_rejected() {
        let r = Rect { x0: 0.0, x1: 0.0, y0: 0.0, y1: 1.0 };
        assert_eq!(build_structured_mesh(2, 2, r), Err(MeshError::Degenerate));
    }

    #[test]
    fn refinement_children_share_barycenter() {
        let m = build_structured_mesh(1, 1, Rect::unit()).unwrap();
        let r = barycentric_refine(&m);
        assert_eq!(r.n_triangles(), 6);
        let parent = r.macro_parent.as_ref().unwrap();
        for (k, &p) in parent.iter().enumerate() {
            assert!((r.areas[k] - m.areas[p] / 3.0).abs() < 1e-15);
            let g = r.triangles[k][2];
            assert_eq!(r.vertices[g], m.barycenters[p]);
        }
    }

    #[test]
    fn locate_barycenter_with_hint() {
        let m = build_structured_mesh(3, 2, Rect::unit()).unwrap();
        for k in 0..m.n_triangles() {
            let (j, l) = m.locate_point(m.barycenters[k], k).unwrap();
            assert_eq!(j, k);
            for v in l {
                assert!((v - 1.0 / 3.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn locate_clamps_and_rejects() {
        let m = build_structured_mesh(2, 2, Rect::unit()).unwrap();
        assert!(m.locate_point([1.0 + 5e-11, 0.5], 0).is_ok());
        assert!(matches!(m.locate_point([1.1, 0.5], 0), Err(MeshError::OutsideDomain(..))));
    }

    #[test]
    fn ascii_round_trip_and_validation() {
        let m = build_structured_mesh(2, 3, Rect::unit()).unwrap();
        let back = read_mesh(&m.to_ascii()).unwrap();
        assert_eq!(back.triangles, m.triangles);
        assert!(read_mesh("3 1\n0 0\n1 0\n0 1\n0 2 1\n").is_err());
        assert!(read_mesh("3 1\n0 0\n1 0\n0 1\n0 1 5\n").is_err());
        assert!(read_mesh("3 1\n0 0\n1 0\n").is_err());
    }
}
