//! Advection machinery: backward characteristic feet, pullback of stress
//! fields, a measure-preserving characteristic transfer map, and upwind
//! edge data for discontinuous Galerkin jump terms.

use thiserror::Error;

use crate::linalg::{self, Triplets};
use crate::mesh::{Mesh, MeshError};
use crate::projections::ProjectedVelocity;
use crate::spaces::{SymTensorField, VectorField, GAUSS2};
use crate::tensor::SymMat;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransportError {
    #[error("characteristic foot left the domain: {0}")]
    LeftDomain(#[from] MeshError),
    #[error("normal trace jumps by {jump:e} across edge {edge}")]
    MultivaluedTrace { edge: usize, jump: f64 },
    #[error("invalid flow parameters: dt must be positive and substeps at least 1")]
    BadParameters,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Foot {
    pub x: [f64; 2],
    pub element: usize,
    pub bary: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicFeet {
    pub feet: Vec<Foot>,
}

/// Velocity given elementwise: `(triangle, barycentric) -> u`.
pub trait Velocity {
    fn at(&self, m: &Mesh, k: usize, l: [f64; 3]) -> [f64; 2];
}

impl Velocity for VectorField {
    fn at(&self, m: &Mesh, k: usize, l: [f64; 3]) -> [f64; 2] {
        self.eval(m, k, l)
    }
}

impl Velocity for ProjectedVelocity {
    fn at(&self, m: &Mesh, k: usize, l: [f64; 3]) -> [f64; 2] {
        self.eval(m, k, l)
    }
}

impl<F: Fn([f64; 2]) -> [f64; 2]> Velocity for F {
    fn at(&self, m: &Mesh, k: usize, l: [f64; 3]) -> [f64; 2] {
        self(m.point(k, l))
    }
}

fn locate_eval(m: &Mesh, u: &dyn Velocity, x: [f64; 2], hint: &mut usize) -> Result<[f64; 2], MeshError> {
    let (k, l) = m.locate_point(x, *hint)?;
    *hint = k;
    Ok(u.at(m, k, l))
}

/// Trace `dX/dt = u(X)` backward from `x` over one time step with classical
/// RK4 on `substeps` equal substeps.
pub fn backward_foot(
    m: &Mesh,
    u: &dyn Velocity,
    x: [f64; 2],
    hint: usize,
    dt: f64,
    substeps: usize,
) -> Result<Foot, TransportError> {
    let h = dt / substeps as f64;
    let mut hint = hint;
    let mut p = x;
    for _ in 0..substeps {
        let k1 = locate_eval(m, u, p, &mut hint)?;
        let k2 = locate_eval(m, u, [p[0] - 0.5 * h * k1[0], p[1] - 0.5 * h * k1[1]], &mut hint)?;
        let k3 = locate_eval(m, u, [p[0] - 0.5 * h * k2[0], p[1] - 0.5 * h * k2[1]], &mut hint)?;
        let k4 = locate_eval(m, u, [p[0] - h * k3[0], p[1] - h * k3[1]], &mut hint)?;
        for c in 0..2 {
            p[c] -= h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
    }
    let (element, bary) = m.locate_point(p, hint)?;
    Ok(Foot { x: p, element, bary })
}

/// [`backward_foot`], doubling the substep count (up to 64 times) while
/// the trajectory leaves the domain. Piecewise smooth projected velocities
/// have kinks across edges where a coarse step can overshoot the boundary.
pub fn trace_foot(
    m: &Mesh,
    u: &dyn Velocity,
    x: [f64; 2],
    hint: usize,
    dt: f64,
    substeps: usize,
) -> Result<Foot, TransportError> {
    let mut n = substeps;
    loop {
        match backward_foot(m, u, x, hint, dt, n) {
            Err(TransportError::LeftDomain(_)) if n < 64 * substeps => n *= 2,
            r => return r,
        }
    }
}

/// Feet of a batch of points, each given with a starting triangle hint.
pub fn integrate_backward_flow(
    m: &Mesh,
    u: &dyn Velocity,
    points: &[([f64; 2], usize)],
    dt: f64,
    substeps: usize,
) -> Result<CharacteristicFeet, TransportError> {
    if !(dt > 0.0) || substeps == 0 {
        return Err(TransportError::BadParameters);
    }
    let feet = points
        .iter()
        .map(|&(x, hint)| backward_foot(m, u, x, hint, dt, substeps))
        .collect::<Result<_, _>>()?;
    Ok(CharacteristicFeet { feet })
}

/// Values of `f` at the feet: elementwise constant for P0, barycentric
/// interpolation in the foot element for P1disc.
pub fn pullback_field(f: &SymTensorField, feet: &CharacteristicFeet) -> Vec<SymMat> {
    feet.feet.iter().map(|ft| f.eval(ft.element, ft.bary)).collect()
}

/// Barycenters of the 16 congruent subtriangles of a 4-fold uniform split.
pub fn subtriangle_samples() -> [[f64; 3]; 16] {
    let mut out = [[0.0; 3]; 16];
    let mut s = 0;
    let n = 4.0;
    for i in 0..4 {
        for j in 0..4 - i {
            let (a, b) = ((i as f64 + 1.0 / 3.0) / n, (j as f64 + 1.0 / 3.0) / n);
            out[s] = [1.0 - a - b, a, b];
            s += 1;
            if i + j < 3 {
                let (a, b) = ((i as f64 + 2.0 / 3.0) / n, (j as f64 + 2.0 / 3.0) / n);
                out[s] = [1.0 - a - b, a, b];
                s += 1;
            }
        }
    }
    out
}

/// One sample of the transfer map: a point inside triangle `source`, the
/// triangle its foot lands in, and the balanced weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub source: usize,
    pub bary: [f64; 3],
    pub target: usize,
    pub weight: f64,
}

/// Discrete characteristic transfer. Row sums of the weights equal the
/// source areas and column sums equal the target areas, so the map preserves
/// the measure exactly as the continuous flow of a solenoidal field does.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicMap {
    pub samples: Vec<Sample>,
    /// Largest relative mismatch `|Σ_K W_KL − |L|| / |L|` before balancing.
    pub area_defect: f64,
    /// Same quantity after balancing.
    pub balanced_defect: f64,
    pub balance_iters: usize,
}

const SELF_WEIGHT: f64 = 1e-10;

pub fn build_characteristic_map(
    m: &Mesh,
    u: &dyn Velocity,
    dt: f64,
    substeps: usize,
) -> Result<CharacteristicMap, TransportError> {
    if !(dt > 0.0) || substeps == 0 {
        return Err(TransportError::BadParameters);
    }
    let nt = m.n_triangles();
    let pts = subtriangle_samples();
    let mut samples = Vec::with_capacity(17 * nt);
    for k in 0..nt {
        for l in pts {
            let f = trace_foot(m, u, m.point(k, l), k, dt, substeps)?;
            samples.push(Sample { source: k, bary: l, target: f.element, weight: m.areas[k] / 16.0 });
        }
    }
    let mut col = vec![0.0; nt];
    for s in &samples {
        col[s.target] += s.weight;
    }
    let area_defect = (0..nt).map(|l| (col[l] - m.areas[l]).abs() / m.areas[l]).fold(0.0, f64::max);
    // a small self-transfer keeps the scaling problem solvable when a
    // triangle receives no sample
    for k in 0..nt {
        samples.push(Sample { source: k, bary: [1.0 / 3.0; 3], target: k, weight: SELF_WEIGHT * m.areas[k] });
    }
    let (scale, defect, iters) = balance(m, &samples);
    for s in samples.iter_mut() {
        s.weight *= scale[s.source] * scale[nt + s.target];
    }
    Ok(CharacteristicMap { samples, area_defect, balanced_defect: defect, balance_iters: iters })
}

fn marginal_defect(m: &Mesh, samples: &[Sample], x: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
    let nt = m.n_triangles();
    let mut rs = vec![0.0; nt];
    let mut cs = vec![0.0; nt];
    for s in samples {
        let w = s.weight * x[s.source] * x[nt + s.target];
        rs[s.source] += w;
        cs[s.target] += w;
    }
    let d = (0..nt)
        .map(|k| ((rs[k] - m.areas[k]).abs() / m.areas[k]).max((cs[k] - m.areas[k]).abs() / m.areas[k]))
        .fold(0.0, f64::max);
    (rs, cs, d)
}

/// Row and column scalings making both marginals equal to the triangle
/// areas. A few Sinkhorn sweeps give a starting point for Newton's method
/// on the log-scalings, which converges where Sinkhorn mixes slowly.
/// Returns `(row scalings ++ column scalings, final defect, iterations)`.
fn balance(m: &Mesh, samples: &[Sample]) -> (Vec<f64>, f64, usize) {
    let nt = m.n_triangles();
    let mut x = vec![1.0; 2 * nt];
    let mut iters = 0;
    let (_, _, mut defect) = marginal_defect(m, samples, &x);
    while iters < 50 && defect > 1e-3 {
        iters += 1;
        let mut cs = vec![0.0; nt];
        for s in samples {
            cs[s.target] += s.weight * x[s.source];
        }
        for l in 0..nt {
            x[nt + l] = m.areas[l] / cs[l];
        }
        let mut rs = vec![0.0; nt];
        for s in samples {
            rs[s.source] += s.weight * x[nt + s.target];
        }
        for k in 0..nt {
            x[k] = m.areas[k] / rs[k];
        }
        defect = marginal_defect(m, samples, &x).2;
    }
    // Triangles linked through samples form components; each carries one
    // gauge freedom, fixed by pinning the column scaling of its first member.
    let mut parent: Vec<usize> = (0..nt).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for s in samples {
        let (a, b) = (find(&mut parent, s.source), find(&mut parent, s.target));
        parent[a.max(b)] = a.min(b);
    }
    let pinned: Vec<bool> = (0..nt).map(|l| find(&mut parent, l) == l).collect();
    while iters < 100 && defect > 1e-14 {
        iters += 1;
        let (rs, cs, _) = marginal_defect(m, samples, &x);
        let mut t = Triplets::new(2 * nt);
        let mut rhs = vec![0.0; 2 * nt];
        for k in 0..nt {
            t.add(k, k, rs[k] / m.areas[k]);
            rhs[k] = 1.0 - rs[k] / m.areas[k];
        }
        for l in 0..nt {
            if pinned[l] {
                t.add(nt + l, nt + l, 1.0);
            } else {
                t.add(nt + l, nt + l, cs[l] / m.areas[l]);
                rhs[nt + l] = 1.0 - cs[l] / m.areas[l];
            }
        }
        for s in samples {
            let w = s.weight * x[s.source] * x[nt + s.target];
            t.add(s.source, nt + s.target, w / m.areas[s.source]);
            if !pinned[s.target] {
                t.add(nt + s.target, s.source, w / m.areas[s.target]);
            }
        }
        let Ok((d, _)) = linalg::solve(&t, &rhs, 1e-8) else { break };
        let step = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let damp = if step > 1.0 { 1.0 / step } else { 1.0 };
        let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi * (damp * di).exp()).collect();
        let nd = marginal_defect(m, samples, &trial).2;
        if !(nd < defect) {
            break;
        }
        x = trial;
        defect = nd;
    }
    (x, defect, iters)
}

impl CharacteristicMap {
    /// Identity transfer, used when the advecting velocity vanishes.
    pub fn identity(m: &Mesh) -> CharacteristicMap {
        let samples = (0..m.n_triangles())
            .map(|k| Sample { source: k, bary: [1.0 / 3.0; 3], target: k, weight: m.areas[k] })
            .collect();
        CharacteristicMap { samples, area_defect: 0.0, balanced_defect: 0.0, balance_iters: 0 }
    }

    /// Elementwise average of a P0 field transported along the map.
    pub fn pullback_p0(&self, m: &Mesh, values: &[SymMat]) -> Vec<SymMat> {
        let mut out = vec![SymMat::ZERO; m.n_triangles()];
        for s in &self.samples {
            out[s.source] = out[s.source] + (s.weight / m.areas[s.source]) * values[s.target];
        }
        out
    }
}

/// One edge quadrature point of an internal edge with nonzero normal flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgePoint {
    pub edge: usize,
    /// Parameter along the edge from `v[0]` to `v[1]`.
    pub t: f64,
    /// Quadrature weight including the edge length.
    pub weight: f64,
    /// `u·n_E` (signed, fixed edge normal).
    pub un: f64,
    pub upstream: usize,
    pub downstream: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeUpwindData {
    pub points: Vec<EdgePoint>,
}

/// Upwind labels from a normal trace given as `(edge, t) -> (from left, from right)`.
pub fn build_edge_upwind(
    m: &Mesh,
    trace: impl Fn(usize, f64) -> (f64, f64),
) -> Result<EdgeUpwindData, TransportError> {
    let mut points = Vec::new();
    for (e, ed) in m.edges.iter().enumerate() {
        let Some(r) = ed.right else { continue };
        for &(t, w) in &GAUSS2 {
            let (a, b) = trace(e, t);
            let jump = (a - b).abs();
            if jump > 1e-10 * (1.0 + a.abs().max(b.abs())) {
                return Err(TransportError::MultivaluedTrace { edge: e, jump });
            }
            let un = 0.5 * (a + b);
            if un == 0.0 {
                continue;
            }
            let (upstream, downstream) = if un > 0.0 { (ed.left, r) } else { (r, ed.left) };
            points.push(EdgePoint { edge: e, t, weight: w * ed.length, un, upstream, downstream });
        }
    }
    Ok(EdgeUpwindData { points })
}

pub fn upwind_from_field(m: &Mesh, u: &VectorField) -> Result<EdgeUpwindData, TransportError> {
    build_edge_upwind(m, |e, t| {
        let ed = &m.edges[e];
        let n = ed.normal;
        let a = u.eval(m, ed.left, m.edge_point(ed.left, e, t));
        let r = ed.right.expect("internal edge");
        let b = u.eval(m, r, m.edge_point(r, e, t));
        (a[0] * n[0] + a[1] * n[1], b[0] * n[0] + b[1] * n[1])
    })
}

pub fn upwind_from_projection(m: &Mesh, p: &ProjectedVelocity) -> Result<EdgeUpwindData, TransportError> {
    build_edge_upwind(m, |e, t| {
        let g = p.normal_trace(m, e, t);
        (g, g)
    })
}

impl EdgeUpwindData {
    /// `Σ_j ∫_{E_j} |u·n| [φ]` for an elementwise constant scalar `φ`.
    pub fn jump_sum(&self, phi: &[f64]) -> f64 {
        self.points
            .iter()
            .map(|p| p.weight * p.un.abs() * (phi[p.downstream] - phi[p.upstream]))
            .sum()
    }

    /// Labels for the reversed velocity field.
    pub fn reversed(&self) -> EdgeUpwindData {
        EdgeUpwindData {
            points: self
                .points
                .iter()
                .map(|p| EdgePoint { un: -p.un, upstream: p.downstream, downstream: p.upstream, ..*p })
                .collect(),
        }
    }
}

/// `−Σ_k ∫_{∂K_k} (u·n_K) φ_K`, the elementwise side of the upwind identity,
/// with `u` read from inside each triangle.
pub fn boundary_flux_sum(m: &Mesh, u: &dyn Velocity, phi: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..m.n_triangles() {
        for i in 0..3 {
            let e = m.tri_edges[k][i];
            let n = m.outward_normal(k, i);
            for &(t, w) in &GAUSS2 {
                let v = u.at(m, k, m.edge_point(k, e, t));
                s -= w * m.edges[e].length * (v[0] * n[0] + v[1] * n[1]) * phi[k];
            }
        }
    }
    s
}

/// Largest relative area change under the backward flow of a test triangle
/// inside each element (corners halfway to the barycenter).
pub fn triangle_area_defect(m: &Mesh, u: &dyn Velocity, dt: f64, substeps: usize) -> Result<f64, TransportError> {
    let mut worst: f64 = 0.0;
    for k in 0..m.n_triangles() {
        let mut c = [[0.0; 2]; 3];
        let mut f = [[0.0; 2]; 3];
        for i in 0..3 {
            let mut l = [0.25; 3];
            l[i] = 0.5;
            c[i] = m.point(k, l);
            f[i] = trace_foot(m, u, c[i], k, dt, substeps)?.x;
        }
        let area = |p: [[f64; 2]; 3]| {
            0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
        };
        worst = worst.max((area(f) - area(c)).abs() / area(c));
    }
    Ok(worst)
}
