//! Velocity projections with single-valued normal traces: the curl of a P1
//! stream function, lowest-order Raviart-Thomas, and first-order
//! Brezzi-Douglas-Marini interpolation.

use thiserror::Error;

use crate::linalg::{self, LinearError, Triplets};
use crate::mesh::Mesh;
use crate::spaces::{quadrature, VectorField, GAUSS2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProjectionError {
    #[error("mesh has no interior vertex, the stream function problem is empty")]
    NoInteriorVertex,
    #[error(transparent)]
    Linear(#[from] LinearError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projector {
    Rot,
    Rt0,
    Bdm,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProjectedVelocity {
    /// Stream function at vertices, zero on the boundary; velocity is its curl.
    Rot { psi: Vec<f64> },
    /// Total flux `∫_E u·n_E` per edge.
    Rt0 { flux: Vec<f64> },
    /// `u·n_E` at the endpoints `v[0]`, `v[1]` of each edge.
    Bdm { trace: Vec<[f64; 2]> },
}

/// 2D curl of a scalar: `(∂ζ/∂y, −∂ζ/∂x)`.
fn curl(g: [f64; 2]) -> [f64; 2] {
    [g[1], -g[0]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Average of the traces of `u` from both sides of edge `e` at parameter `t`.
pub fn averaged_trace(m: &Mesh, u: &VectorField, e: usize, t: f64) -> [f64; 2] {
    let ed = &m.edges[e];
    let a = u.eval(m, ed.left, m.edge_point(ed.left, e, t));
    match ed.right {
        None => a,
        Some(r) => {
            let b = u.eval(m, r, m.edge_point(r, e, t));
            [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
        }
    }
}

pub fn project_rot(m: &Mesh, u: &VectorField) -> Result<ProjectedVelocity, ProjectionError> {
    let nv = m.n_vertices();
    if m.boundary_vertex.iter().all(|&b| b) {
        return Err(ProjectionError::NoInteriorVertex);
    }
    let q = quadrature(2).expect("order 2 is supported");
    let mut a = Triplets::new(nv);
    let mut rhs = vec![0.0; nv];
    for k in 0..m.n_triangles() {
        let gl = m.grad_lambda(k);
        let t = m.triangles[k];
        let mut mean = [0.0; 2];
        for (p, w) in q.points.iter().zip(&q.weights) {
            let v = u.eval(m, k, *p);
            mean[0] += w * v[0];
            mean[1] += w * v[1];
        }
        for i in 0..3 {
            rhs[t[i]] += m.areas[k] * dot(mean, curl(gl[i]));
            for j in 0..3 {
                a.add(t[i], t[j], m.areas[k] * dot(gl[i], gl[j]));
            }
        }
    }
    for (i, &b) in m.boundary_vertex.iter().enumerate() {
        if b {
            rhs[i] = 0.0;
        }
    }
    a.set_identity_rows(&m.boundary_vertex);
    let (psi, _) = linalg::solve(&a, &rhs, 1e-12)?;
    Ok(ProjectedVelocity::Rot { psi })
}

pub fn project_rt0(m: &Mesh, u: &VectorField) -> ProjectedVelocity {
    let flux = (0..m.n_edges())
        .map(|e| {
            let ed = &m.edges[e];
            GAUSS2
                .iter()
                .map(|&(t, w)| w * ed.length * dot(averaged_trace(m, u, e, t), ed.normal))
                .sum()
        })
        .collect();
    ProjectedVelocity::Rt0 { flux }
}

pub fn project_bdm(m: &Mesh, u: &VectorField) -> ProjectedVelocity {
    let trace = (0..m.n_edges())
        .map(|e| {
            let ed = &m.edges[e];
            // moments against 1 - t and t
            let mut mo = [0.0; 2];
            for &(t, w) in &GAUSS2 {
                let g = dot(averaged_trace(m, u, e, t), ed.normal);
                mo[0] += w * g * (1.0 - t);
                mo[1] += w * g * t;
            }
            // edge mass matrix [[1/3, 1/6], [1/6, 1/3]] inverted
            [4.0 * mo[0] - 2.0 * mo[1], 4.0 * mo[1] - 2.0 * mo[0]]
        })
        .collect();
    ProjectedVelocity::Bdm { trace }
}

pub fn project(m: &Mesh, u: &VectorField, p: Projector) -> Result<ProjectedVelocity, ProjectionError> {
    Ok(match p {
        Projector::Rot => project_rot(m, u)?,
        Projector::Rt0 => project_rt0(m, u),
        Projector::Bdm => project_bdm(m, u),
    })
}

impl ProjectedVelocity {
    /// Set the normal trace on boundary edges to zero.
    pub fn with_zero_boundary(mut self, m: &Mesh) -> ProjectedVelocity {
        match &mut self {
            ProjectedVelocity::Rot { .. } => {}
            ProjectedVelocity::Rt0 { flux } => {
                for (e, ed) in m.edges.iter().enumerate() {
                    if ed.is_boundary() {
                        flux[e] = 0.0;
                    }
                }
            }
            ProjectedVelocity::Bdm { trace } => {
                for (e, ed) in m.edges.iter().enumerate() {
                    if ed.is_boundary() {
                        trace[e] = [0.0; 2];
                    }
                }
            }
        }
        self
    }

    /// Velocity inside triangle `k` at barycentric coordinates `l`.
    pub fn eval(&self, m: &Mesh, k: usize, l: [f64; 3]) -> [f64; 2] {
        match self {
            ProjectedVelocity::Rot { psi } => {
                let gl = m.grad_lambda(k);
                let t = m.triangles[k];
                let mut g = [0.0; 2];
                for i in 0..3 {
                    g[0] += psi[t[i]] * gl[i][0];
                    g[1] += psi[t[i]] * gl[i][1];
                }
                curl(g)
            }
            ProjectedVelocity::Rt0 { flux } => {
                let x = m.point(k, l);
                let c = m.corners(k);
                let mut u = [0.0; 2];
                for i in 0..3 {
                    let e = m.tri_edges[k][i];
                    let s = if m.edges[e].left == k { 1.0 } else { -1.0 };
                    let f = s * flux[e] / (2.0 * m.areas[k]);
                    u[0] += f * (x[0] - c[i][0]);
                    u[1] += f * (x[1] - c[i][1]);
                }
                u
            }
            ProjectedVelocity::Bdm { .. } => {
                let nodal = self.bdm_vertex_values(m, k);
                let mut u = [0.0; 2];
                for i in 0..3 {
                    u[0] += l[i] * nodal[i][0];
                    u[1] += l[i] * nodal[i][1];
                }
                u
            }
        }
    }

    /// BDM1 restricted to one triangle is an affine field; recover its vertex
    /// values from the two normal traces meeting at each vertex.
    fn bdm_vertex_values(&self, m: &Mesh, k: usize) -> [[f64; 2]; 3] {
        let ProjectedVelocity::Bdm { trace } = self else { unreachable!() };
        let t = m.triangles[k];
        let mut out = [[0.0; 2]; 3];
        for i in 0..3 {
            // edges through vertex i are the local edges opposite the other two vertices
            let mut rows = [[0.0; 2]; 2];
            let mut rhs = [0.0; 2];
            for (r, j) in [(i + 1) % 3, (i + 2) % 3].into_iter().enumerate() {
                let e = m.tri_edges[k][j];
                let ed = &m.edges[e];
                rows[r] = ed.normal;
                rhs[r] = if ed.v[0] == t[i] { trace[e][0] } else { trace[e][1] };
            }
            let det = rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0];
            out[i] = [
                (rhs[0] * rows[1][1] - rows[0][1] * rhs[1]) / det,
                (rows[0][0] * rhs[1] - rhs[0] * rows[1][0]) / det,
            ];
        }
        out
    }

    /// `P·n_E` at parameter `t` along edge `e`, single-valued by construction.
    pub fn normal_trace(&self, m: &Mesh, e: usize, t: f64) -> f64 {
        let ed = &m.edges[e];
        match self {
            ProjectedVelocity::Rt0 { flux } => flux[e] / ed.length,
            ProjectedVelocity::Bdm { trace } => trace[e][0] * (1.0 - t) + trace[e][1] * t,
            ProjectedVelocity::Rot { .. } => dot(self.eval(m, ed.left, m.edge_point(ed.left, e, t)), ed.normal),
        }
    }

    /// `∫_K div P`, computed from boundary fluxes of the triangle.
    pub fn div_integral(&self, m: &Mesh, k: usize) -> f64 {
        (0..3)
            .map(|i| {
                let e = m.tri_edges[k][i];
                let ed = &m.edges[e];
                let s = if ed.left == k { 1.0 } else { -1.0 };
                let side_flux: f64 = GAUSS2
                    .iter()
                    .map(|&(t, w)| w * ed.length * dot(self.eval(m, k, m.edge_point(k, e, t)), ed.normal))
                    .sum();
                s * side_flux
            })
            .sum()
    }

    /// Pointwise divergence in triangle `k` (constant for all three spaces).
    pub fn div(&self, m: &Mesh, k: usize) -> f64 {
        match self {
            ProjectedVelocity::Rot { .. } => 0.0,
            _ => self.div_integral(m, k) / m.areas[k],
        }
    }

    /// Largest jump of the normal component across internal edges, sampled
    /// at the edge Gauss points.
    pub fn max_normal_jump(&self, m: &Mesh) -> f64 {
        let mut worst: f64 = 0.0;
        for (e, ed) in m.edges.iter().enumerate() {
            let Some(r) = ed.right else { continue };
            for &(t, _) in &GAUSS2 {
                let a = dot(self.eval(m, ed.left, m.edge_point(ed.left, e, t)), ed.normal);
                let b = dot(self.eval(m, r, m.edge_point(r, e, t)), ed.normal);
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }

    pub fn to_fn<'a>(&'a self, m: &'a Mesh) -> impl Fn(usize, [f64; 3]) -> [f64; 2] + 'a {
        move |k, l| self.eval(m, k, l)
    }
}

/// `∫_K div u` for a finite element velocity.
pub fn element_div_integral(m: &Mesh, u: &VectorField, k: usize) -> f64 {
    let q = quadrature(3).expect("order 3 is supported");
    q.points
        .iter()
        .zip(&q.weights)
        .map(|(p, w)| {
            let (_, g) = u.eval_grad(m, k, *p);
            w * m.areas[k] * g.trace()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_mesh, Rect};
    use crate::spaces::Element;

    #[test]
    fn constant_and_affine_fields_reproduced() {
        let m = build_structured_mesh(3, 2, Rect::unit()).unwrap();
        let c = VectorField::interpolate(Element::P2, &m, |_| [1.0, 0.0]);
        let a = VectorField::interpolate(Element::P2, &m, |x| [x[0], -x[1]]);
        let rt = project_rt0(&m, &c);
        let bdm = project_bdm(&m, &a);
        for k in 0..m.n_triangles() {
            for l in [[0.2, 0.3, 0.5], [1.0, 0.0, 0.0]] {
                let v = rt.eval(&m, k, l);
                assert!((v[0] - 1.0).abs() < 1e-13 && v[1].abs() < 1e-13);
                let x = m.point(k, l);
                let w = bdm.eval(&m, k, l);
                assert!((w[0] - x[0]).abs() < 1e-13 && (w[1] + x[1]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rot_of_zero_is_zero() {
        let m = build_structured_mesh(2, 2, Rect::unit()).unwrap();
        let z = VectorField::zeros(Element::P2, &m);
        let ProjectedVelocity::Rot { psi } = project_rot(&m, &z).unwrap() else { panic!() };
        assert!(psi.iter().all(|&p| p == 0.0));
        let one = build_structured_mesh(1, 1, Rect::unit()).unwrap();
        assert_eq!(project_rot(&one, &z), Err(ProjectionError::NoInteriorVertex));
    }
}
