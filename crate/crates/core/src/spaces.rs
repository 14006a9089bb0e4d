//! Finite element spaces on a [`Mesh`]: local bases, DOF numbering,
//! triangle quadrature, discrete fields and the barycenter interpolation π_h.

use std::str::FromStr;

use thiserror::Error;

use crate::mesh::Mesh;
use crate::tensor::{Mat2, SymMat};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error("unknown space family `{0}`")]
    UnknownFamily(String),
    #[error("unsupported quadrature order {0} (expected 1, 2, 3 or 6)")]
    UnsupportedOrder(usize),
}

/// Scalar finite element on one triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Element {
    P0,
    P1,
    P1Disc,
    P2,
    /// Crouzeix-Raviart: edge-midpoint values.
    Cr,
    /// Continuous P1 enriched by elementwise constants.
    P1PlusP0,
}

impl Element {
    pub fn n_local(self) -> usize {
        match self {
            Element::P0 => 1,
            Element::P1 | Element::P1Disc | Element::Cr => 3,
            Element::P1PlusP0 => 4,
            Element::P2 => 6,
        }
    }

    pub fn n_global(self, m: &Mesh) -> usize {
        match self {
            Element::P0 => m.n_triangles(),
            Element::P1 => m.n_vertices(),
            Element::P1Disc => 3 * m.n_triangles(),
            Element::P2 => m.n_vertices() + m.n_edges(),
            Element::Cr => m.n_edges(),
            Element::P1PlusP0 => m.n_vertices() + m.n_triangles(),
        }
    }

    /// Global indices of the local basis functions of triangle `k`.
    pub fn local_dofs(self, m: &Mesh, k: usize) -> Local {
        let t = m.triangles[k];
        let mut l = Local { n: self.n_local(), idx: [0; 6] };
        match self {
            Element::P0 => l.idx[0] = k,
            Element::P1 => l.idx[..3].copy_from_slice(&t),
            Element::P1Disc => {
                for i in 0..3 {
                    l.idx[i] = 3 * k + i;
                }
            }
            Element::P2 => {
                l.idx[..3].copy_from_slice(&t);
                for i in 0..3 {
                    l.idx[3 + i] = m.n_vertices() + m.tri_edges[k][i];
                }
            }
            Element::Cr => l.idx[..3].copy_from_slice(&m.tri_edges[k]),
            Element::P1PlusP0 => {
                l.idx[..3].copy_from_slice(&t);
                l.idx[3] = m.n_vertices() + k;
            }
        }
        l
    }

    /// Values and barycentric derivatives of the local basis at `l`.
    pub fn shape(self, l: [f64; 3]) -> Shape {
        let mut s = Shape { n: self.n_local(), val: [0.0; 6], dl: [[0.0; 3]; 6] };
        match self {
            Element::P0 => s.val[0] = 1.0,
            Element::P1 | Element::P1Disc | Element::P1PlusP0 => {
                for i in 0..3 {
                    s.val[i] = l[i];
                    s.dl[i][i] = 1.0;
                }
                if self == Element::P1PlusP0 {
                    s.val[3] = 1.0;
                }
            }
            Element::Cr => {
                for i in 0..3 {
                    s.val[i] = 1.0 - 2.0 * l[i];
                    s.dl[i][i] = -2.0;
                }
            }
            Element::P2 => {
                for i in 0..3 {
                    s.val[i] = l[i] * (2.0 * l[i] - 1.0);
                    s.dl[i][i] = 4.0 * l[i] - 1.0;
                    let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                    s.val[3 + i] = 4.0 * l[j] * l[k];
                    s.dl[3 + i][j] = 4.0 * l[k];
                    s.dl[3 + i][k] = 4.0 * l[j];
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Local {
    pub n: usize,
    pub idx: [usize; 6],
}

impl Local {
    pub fn as_slice(&self) -> &[usize] {
        &self.idx[..self.n]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub n: usize,
    pub val: [f64; 6],
    /// Derivative with respect to each barycentric coordinate.
    pub dl: [[f64; 3]; 6],
}

/// Basis values with physical gradients on a given triangle.
#[derive(Debug, Clone, Copy)]
pub struct Basis {
    pub n: usize,
    pub val: [f64; 6],
    pub grad: [[f64; 2]; 6],
}

pub fn eval_basis(e: Element, m: &Mesh, k: usize, l: [f64; 3]) -> Basis {
    basis_with(e, &m.grad_lambda(k), l)
}

/// Same as [`eval_basis`] with precomputed barycentric gradients.
pub fn basis_with(e: Element, gl: &[[f64; 2]; 3], l: [f64; 3]) -> Basis {
    let s = e.shape(l);
    let mut b = Basis { n: s.n, val: s.val, grad: [[0.0; 2]; 6] };
    for i in 0..s.n {
        for a in 0..3 {
            b.grad[i][0] += s.dl[i][a] * gl[a][0];
            b.grad[i][1] += s.dl[i][a] * gl[a][1];
        }
    }
    b
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    P2Vector,
    P1,
    P1Disc,
    P0,
    P1CrVector,
    P1PlusP0Tensor,
    P1DiscTensor,
    P0Tensor,
}

impl FromStr for Family {
    type Err = SpaceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "P2-vector" => Family::P2Vector,
            "P1" => Family::P1,
            "P1disc" => Family::P1Disc,
            "P0" => Family::P0,
            "P1CR-vector" => Family::P1CrVector,
            "P1plusP0-tensor" => Family::P1PlusP0Tensor,
            "P1disc-tensor" => Family::P1DiscTensor,
            "P0-tensor" => Family::P0Tensor,
            _ => return Err(SpaceError::UnknownFamily(s.to_string())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpaceSpec {
    pub family: Family,
    pub components: usize,
}

impl SpaceSpec {
    pub fn new(family: Family) -> SpaceSpec {
        let components = match family {
            Family::P2Vector | Family::P1CrVector => 2,
            Family::P1PlusP0Tensor | Family::P1DiscTensor | Family::P0Tensor => 3,
            _ => 1,
        };
        SpaceSpec { family, components }
    }

    pub fn scalar(family: Family) -> SpaceSpec {
        SpaceSpec { family, components: 1 }
    }

    pub fn element(&self) -> Element {
        match self.family {
            Family::P2Vector => Element::P2,
            Family::P1 => Element::P1,
            Family::P1Disc | Family::P1DiscTensor => Element::P1Disc,
            Family::P0 | Family::P0Tensor => Element::P0,
            Family::P1CrVector => Element::Cr,
            Family::P1PlusP0Tensor => Element::P1PlusP0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    Vertex(usize),
    Edge(usize),
    Element(usize),
}

/// Scalar numbering, with component `c` of scalar DOF `i` stored at
/// `c * n_scalar + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub element: Element,
    pub components: usize,
    pub n_scalar: usize,
    pub n_local: usize,
    local: Vec<usize>,
    pub anchors: Vec<Anchor>,
}

impl DofMap {
    pub fn n_dofs(&self) -> usize {
        self.components * self.n_scalar
    }

    pub fn cell(&self, k: usize) -> &[usize] {
        &self.local[k * self.n_local..(k + 1) * self.n_local]
    }
}

pub fn build_dof_map(m: &Mesh, s: SpaceSpec) -> DofMap {
    let e = s.element();
    let n_local = e.n_local();
    let mut local = Vec::with_capacity(n_local * m.n_triangles());
    for k in 0..m.n_triangles() {
        local.extend_from_slice(e.local_dofs(m, k).as_slice());
    }
    let anchors = match e {
        Element::P0 => (0..m.n_triangles()).map(Anchor::Element).collect(),
        Element::P1 => (0..m.n_vertices()).map(Anchor::Vertex).collect(),
        Element::P1Disc => (0..3 * m.n_triangles()).map(|i| Anchor::Element(i / 3)).collect(),
        Element::P2 => (0..m.n_vertices())
            .map(Anchor::Vertex)
            .chain((0..m.n_edges()).map(Anchor::Edge))
            .collect(),
        Element::Cr => (0..m.n_edges()).map(Anchor::Edge).collect(),
        Element::P1PlusP0 => (0..m.n_vertices())
            .map(Anchor::Vertex)
            .chain((0..m.n_triangles()).map(Anchor::Element))
            .collect(),
    };
    DofMap { element: e, components: s.components, n_scalar: e.n_global(m), n_local, local, anchors }
}

/// Symmetric triangle rule in barycentric coordinates, weights summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

fn orbit3(a: f64, w: f64, q: &mut Quadrature) {
    let b = 1.0 - 2.0 * a;
    for p in [[b, a, a], [a, b, a], [a, a, b]] {
        q.points.push(p);
        q.weights.push(w);
    }
}

fn orbit6(a: f64, b: f64, w: f64, q: &mut Quadrature) {
    let c = 1.0 - a - b;
    for p in [[a, b, c], [b, a, c], [a, c, b], [c, a, b], [b, c, a], [c, b, a]] {
        q.points.push(p);
        q.weights.push(w);
    }
}

/// Rules of polynomial degree 1 (1 point), 2 (3 points), 4 (6 points, used
/// for order 3) and 6 (12 points).
pub fn quadrature(order: usize) -> Result<Quadrature, SpaceError> {
    let mut q = Quadrature { points: Vec::new(), weights: Vec::new() };
    match order {
        1 => {
            q.points.push([1.0 / 3.0; 3]);
            q.weights.push(1.0);
        }
        2 => orbit3(1.0 / 6.0, 1.0 / 3.0, &mut q),
        3 => {
            orbit3(0.445_948_490_915_964_886_32, 0.223_381_589_678_011_465_70, &mut q);
            orbit3(0.091_576_213_509_770_743_460, 0.109_951_743_655_321_867_64, &mut q);
        }
        6 => {
            orbit3(0.249_286_745_170_910_421_29, 0.116_786_275_726_379_366_03, &mut q);
            orbit3(0.063_089_014_491_502_228_340, 0.050_844_906_370_206_816_921, &mut q);
            orbit6(
                0.053_145_049_844_816_947_353,
                0.310_352_451_033_784_405_42,
                0.082_851_075_618_373_575_194,
                &mut q,
            );
        }
        _ => return Err(SpaceError::UnsupportedOrder(order)),
    }
    Ok(q)
}

/// Two-point Gauss rule on `[0, 1]`: (parameter, weight).
pub const GAUSS2: [(f64, f64); 2] = [
    (0.211_324_865_405_187_117_75, 0.5),
    (0.788_675_134_594_812_882_25, 0.5),
];

/// Vector field with both components in the same scalar element.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub element: Element,
    pub values: Vec<[f64; 2]>,
}

impl VectorField {
    pub fn zeros(element: Element, m: &Mesh) -> VectorField {
        VectorField { element, values: vec![[0.0; 2]; element.n_global(m)] }
    }

    /// Nodal interpolation: vertex values, edge-midpoint values, barycenters.
    pub fn interpolate(element: Element, m: &Mesh, f: impl Fn([f64; 2]) -> [f64; 2]) -> VectorField {
        let values = nodes(element, m).into_iter().map(&f).collect();
        VectorField { element, values }
    }

    pub fn eval(&self, m: &Mesh, k: usize, l: [f64; 3]) -> [f64; 2] {
        let s = self.element.shape(l);
        let d = self.element.local_dofs(m, k);
        let mut u = [0.0; 2];
        for i in 0..s.n {
            let v = self.values[d.idx[i]];
            u[0] += s.val[i] * v[0];
            u[1] += s.val[i] * v[1];
        }
        u
    }

    /// Value and gradient, `g.0[i][j] = ∂u_i/∂x_j`.
    pub fn eval_grad(&self, m: &Mesh, k: usize, l: [f64; 3]) -> ([f64; 2], Mat2) {
        let b = eval_basis(self.element, m, k, l);
        let d = self.element.local_dofs(m, k);
        let mut u = [0.0; 2];
        let mut g = [[0.0; 2]; 2];
        for i in 0..b.n {
            let v = self.values[d.idx[i]];
            for c in 0..2 {
                u[c] += b.val[i] * v[c];
                g[c][0] += b.grad[i][0] * v[c];
                g[c][1] += b.grad[i][1] * v[c];
            }
        }
        (u, Mat2(g))
    }

    pub fn l2_norm_sq(&self, m: &Mesh) -> f64 {
        let q = quadrature(6).expect("order 6 is supported");
        let mut s = 0.0;
        for k in 0..m.n_triangles() {
            for (p, w) in q.points.iter().zip(&q.weights) {
                let u = self.eval(m, k, *p);
                s += w * m.areas[k] * (u[0] * u[0] + u[1] * u[1]);
            }
        }
        s
    }
}

/// Scalar field, used for pressures and potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub element: Element,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(element: Element, m: &Mesh) -> ScalarField {
        ScalarField { element, values: vec![0.0; element.n_global(m)] }
    }

    pub fn eval(&self, m: &Mesh, k: usize, l: [f64; 3]) -> f64 {
        let s = self.element.shape(l);
        let d = self.element.local_dofs(m, k);
        (0..s.n).map(|i| s.val[i] * self.values[d.idx[i]]).sum()
    }
}

/// Coordinates of the Lagrange nodes of `element`, in global DOF order.
pub fn nodes(element: Element, m: &Mesh) -> Vec<[f64; 2]> {
    match element {
        Element::P0 => m.barycenters.clone(),
        Element::P1 => m.vertices.clone(),
        Element::P1Disc => (0..m.n_triangles()).flat_map(|k| m.corners(k)).collect(),
        Element::P2 => m.vertices.iter().cloned().chain(m.edges.iter().map(|e| e.midpoint(m))).collect(),
        Element::Cr => m.edges.iter().map(|e| e.midpoint(m)).collect(),
        Element::P1PlusP0 => m.vertices.iter().cloned().chain(m.barycenters.iter().cloned()).collect(),
    }
}

/// Symmetric tensor field, P0 (one value per triangle) or P1disc
/// (three vertex values per triangle, index `3k + i`).
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorField {
    pub element: Element,
    pub values: Vec<SymMat>,
}

impl SymTensorField {
    pub fn constant(element: Element, m: &Mesh, s: SymMat) -> SymTensorField {
        assert!(matches!(element, Element::P0 | Element::P1Disc), "tensor fields are P0 or P1disc");
        SymTensorField { element, values: vec![s; element.n_global(m)] }
    }

    pub fn interpolate(element: Element, m: &Mesh, f: impl Fn([f64; 2]) -> SymMat) -> SymTensorField {
        assert!(matches!(element, Element::P0 | Element::P1Disc), "tensor fields are P0 or P1disc");
        SymTensorField { element, values: nodes(element, m).into_iter().map(f).collect() }
    }

    /// Convert coefficients of a P1plusP0 tensor field (vertex part followed
    /// by element part) to P1disc storage.
    pub fn from_p1_plus_p0(m: &Mesh, coeffs: &[SymMat]) -> SymTensorField {
        assert_eq!(coeffs.len(), m.n_vertices() + m.n_triangles());
        let mut values = Vec::with_capacity(3 * m.n_triangles());
        for (k, t) in m.triangles.iter().enumerate() {
            let c = coeffs[m.n_vertices() + k];
            values.extend(t.iter().map(|&v| coeffs[v] + c));
        }
        SymTensorField { element: Element::P1Disc, values }
    }

    pub fn eval(&self, k: usize, l: [f64; 3]) -> SymMat {
        match self.element {
            Element::P0 => self.values[k],
            _ => {
                let v = &self.values[3 * k..3 * k + 3];
                l[0] * v[0] + l[1] * v[1] + l[2] * v[2]
            }
        }
    }

    /// Value at the barycenter of triangle `k`.
    pub fn barycenter_value(&self, k: usize) -> SymMat {
        self.eval(k, [1.0 / 3.0; 3])
    }

    pub fn n_elements(&self) -> usize {
        match self.element {
            Element::P0 => self.values.len(),
            _ => self.values.len() / 3,
        }
    }

    /// Apply `f` to every nodal value.
    pub fn map(&self, f: impl Fn(&SymMat) -> SymMat) -> SymTensorField {
        SymTensorField { element: self.element, values: self.values.iter().map(f).collect() }
    }

    pub fn try_map<E>(&self, f: impl Fn(&SymMat) -> Result<SymMat, E>) -> Result<SymTensorField, E> {
        Ok(SymTensorField {
            element: self.element,
            values: self.values.iter().map(f).collect::<Result<_, _>>()?,
        })
    }
}

/// Piecewise constant interpolation at barycenters.
pub fn pi_h(f: &SymTensorField) -> SymTensorField {
    SymTensorField {
        element: Element::P0,
        values: (0..f.n_elements()).map(|k| f.barycenter_value(k)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_mesh, Rect};

    #[test]
    fn dof_counts_on_two_triangles() {
        let m = build_structured_mesh(1, 1, Rect::unit()).unwrap();
        let count = |f| build_dof_map(&m, SpaceSpec::scalar(f)).n_dofs();
        assert_eq!(count(Family::P0), 2);
        assert_eq!(count(Family::P2Vector), 9);
        assert_eq!(count(Family::P1CrVector), 5);
        assert_eq!(count(Family::P1Disc), 6);
        assert_eq!(build_dof_map(&m, SpaceSpec::new(Family::P2Vector)).n_dofs(), 18);
        assert!("P3".parse::<Family>().is_err());
    }

    #[test]
    fn p2_barycenter_values() {
        let s = Element::P2.shape([1.0 / 3.0; 3]);
        for i in 0..3 {
            assert!((s.val[i] + 1.0 / 9.0).abs() < 1e-15);
            assert!((s.val[3 + i] - 4.0 / 9.0).abs() < 1e-15);
        }
    }

    #[test]
    fn p1_indicator_and_gradient_sum() {
        let m = build_structured_mesh(1, 1, Rect::unit()).unwrap();
        let b = eval_basis(Element::P1, &m, 0, [1.0, 0.0, 0.0]);
        assert_eq!(&b.val[..3], &[1.0, 0.0, 0.0]);
        let gx: f64 = b.grad[..3].iter().map(|g| g[0]).sum();
        let gy: f64 = b.grad[..3].iter().map(|g| g[1]).sum();
        assert!(gx.abs() < 1e-14 && gy.abs() < 1e-14);
    }

    #[test]
    fn quadrature_rules() {
        assert!(quadrature(4).is_err());
        let q1 = quadrature(1).unwrap();
        assert_eq!(q1.weights, vec![1.0]);
        // reference triangle (0,0),(1,0),(0,1): x = l1, area 1/2
        let q2 = quadrature(2).unwrap();
        let ix2: f64 = q2.points.iter().zip(&q2.weights).map(|(p, w)| 0.5 * w * p[1] * p[1]).sum();
        assert!((ix2 - 1.0 / 12.0).abs() < 1e-15);
        for o in [1, 2, 3, 6] {
            let q = quadrature(o).unwrap();
            assert!(q.weights.iter().all(|&w| w > 0.0));
            assert!((q.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn pi_h_of_linear_component() {
        let m = crate::mesh::Mesh::from_parts(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            None,
        )
        .unwrap();
        let f = SymTensorField::interpolate(Element::P1Disc, &m, |x| SymMat::new(x[0], 0.0, 0.0));
        assert!((pi_h(&f).values[0].a11 - 1.0 / 3.0).abs() < 1e-16);
    }
}
