use oldroyd::mesh::*;
use oldroyd::spaces::*;
use oldroyd::tensor::{spd_exp, SymMat};
use proptest::prelude::*;

fn two_triangles() -> Mesh {
    build_structured_mesh(1, 1, Rect::unit()).unwrap()
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `∫ λ1^a λ2^b` over the unit reference triangle, normalized by its area.
fn monomial_mean(a: u32, b: u32) -> f64 {
    2.0 * factorial(a) * factorial(b) / factorial(a + b + 2)
}

#[test]
fn dof_counts() {
    let m = two_triangles();
    let count = |f: &str| build_dof_map(&m, SpaceSpec::scalar(f.parse().unwrap())).n_dofs();
    assert_eq!(count("P0"), 2);
    assert_eq!(count("P2-vector"), 9);
    assert_eq!(count("P1CR-vector"), 5);
    assert_eq!(count("P1"), 4);
    assert_eq!(count("P1disc"), 6);
    assert_eq!(build_dof_map(&m, SpaceSpec::new(Family::P0Tensor)).n_dofs(), 6);
    assert_eq!(build_dof_map(&m, SpaceSpec::new(Family::P2Vector)).n_dofs(), 18);
    assert!(matches!("P3".parse::<Family>(), Err(SpaceError::UnknownFamily(_))));
}

#[test]
fn continuity_pattern() {
    let m = barycentric_refine(&build_structured_mesh(2, 2, Rect::unit()).unwrap());
    for (f, shared) in [("P1", true), ("P2-vector", true), ("P1CR-vector", true), ("P1disc", false), ("P0", false)] {
        let d = build_dof_map(&m, SpaceSpec::scalar(f.parse().unwrap()));
        let mut owners = vec![0usize; d.n_scalar];
        for k in 0..m.n_triangles() {
            for &i in d.cell(k) {
                owners[i] += 1;
            }
        }
        assert_eq!(owners.iter().any(|&c| c > 1), shared, "{f}");
    }
}

#[test]
fn basis_examples() {
    let m = two_triangles();
    let b = eval_basis(Element::P1, &m, 0, [1.0, 0.0, 0.0]);
    assert_eq!(&b.val[..3], &[1.0, 0.0, 0.0]);
    let g: [f64; 2] = (0..3).fold([0.0, 0.0], |a, i| [a[0] + b.grad[i][0], a[1] + b.grad[i][1]]);
    assert!(g[0].abs() < 1e-15 && g[1].abs() < 1e-15);
    let b = eval_basis(Element::P2, &m, 1, [1.0 / 3.0; 3]);
    for i in 0..3 {
        assert!((b.val[i] + 1.0 / 9.0).abs() < 1e-15);
        assert!((b.val[3 + i] - 4.0 / 9.0).abs() < 1e-15);
    }
}

#[test]
fn quadrature_exactness() {
    for (order, degree) in [(1, 1), (2, 2), (3, 4), (6, 6)] {
        let q = quadrature(order).unwrap();
        assert!((q.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(q.weights.iter().all(|&w| w > 0.0));
        for a in 0..=degree {
            for b in 0..=degree - a {
                let v: f64 = q.points.iter().zip(&q.weights).map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32)).sum();
                assert!((v - monomial_mean(a, b)).abs() < 1e-14, "order {order} x^{a} y^{b}");
            }
        }
    }
    // x² over the reference triangle is 1/12, so the mean is 1/6.
    let q = quadrature(2).unwrap();
    let v: f64 = q.points.iter().zip(&q.weights).map(|(p, w)| w * p[1] * p[1]).sum();
    assert!((0.5 * v - 1.0 / 12.0).abs() < 1e-16);
    assert!(matches!(quadrature(4), Err(SpaceError::UnsupportedOrder(4))));
}

#[test]
fn pi_h_examples() {
    let m = Mesh::from_parts(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], None).unwrap();
    let c = SymTensorField::constant(Element::P1Disc, &m, SymMat::new(1.0, 2.0, 3.0));
    assert_eq!(pi_h(&c).values, vec![SymMat::new(1.0, 2.0, 3.0)]);
    let f = SymTensorField::interpolate(Element::P1Disc, &m, |x| SymMat::new(x[0], 0.0, 0.0));
    assert!((pi_h(&f).values[0].a11 - 1.0 / 3.0).abs() < 1e-16);
}

#[test]
fn p1_plus_p0_storage() {
    let m = two_triangles();
    let mut coeffs = vec![SymMat::ZERO; m.n_vertices() + m.n_triangles()];
    coeffs[0] = SymMat::scalar(1.0);
    coeffs[m.n_vertices() + 1] = SymMat::scalar(2.0);
    let f = SymTensorField::from_p1_plus_p0(&m, &coeffs);
    assert_eq!(f.element, Element::P1Disc);
    for k in 0..2 {
        for (i, &v) in m.triangles[k].iter().enumerate() {
            let expect = (v == 0) as u8 as f64 + if k == 1 { 2.0 } else { 0.0 };
            assert_eq!(f.values[3 * k + i].a11, expect);
        }
    }
}

fn random_field(m: &Mesh, vals: &[f64]) -> SymTensorField {
    SymTensorField {
        element: Element::P1Disc,
        values: (0..3 * m.n_triangles()).map(|i| SymMat::new(vals[3 * i % vals.len()], vals[(3 * i + 1) % vals.len()], vals[(3 * i + 2) % vals.len()])).collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lagrange_partition_of_unity(l0 in 0.0..1.0f64, t in 0.0..1.0f64) {
        let l = [l0, (1.0 - l0) * t, (1.0 - l0) * (1.0 - t)];
        for e in [Element::P1, Element::P2, Element::P1Disc] {
            let s = e.shape(l);
            prop_assert!((s.val[..s.n].iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn pi_h_is_l2_projection(vals in prop::collection::vec(-3.0..3.0f64, 30), n in 1..4usize) {
        let m = barycentric_refine(&build_structured_mesh(n, n, Rect::unit()).unwrap());
        let f = random_field(&m, &vals);
        let p = pi_h(&f);
        let q = quadrature(2).unwrap();
        for k in 0..m.n_triangles() {
            let mut integral = SymMat::ZERO;
            for (l, w) in q.points.iter().zip(&q.weights) {
                integral = integral + (w * m.areas[k]) * f.eval(k, *l);
            }
            // Mean of a linear field is the mean of its vertex values.
            let mean = (1.0 / 3.0) * (f.values[3 * k] + f.values[3 * k + 1] + f.values[3 * k + 2]);
            prop_assert!((integral - m.areas[k] * p.values[k]).norm() <= 1e-13 * m.areas[k] * 10.0);
            prop_assert!((mean - p.values[k]).norm() <= 1e-14 * 10.0);
        }
    }

    #[test]
    fn pi_h_commutes_with_exp(vals in prop::collection::vec(-2.0..2.0f64, 30)) {
        let m = build_structured_mesh(2, 2, Rect::unit()).unwrap();
        let f = random_field(&m, &vals);
        let lhs = pi_h(&f).map(|v| spd_exp(v).unwrap().sym());
        for k in 0..m.n_triangles() {
            let direct = spd_exp(&f.eval(k, [1.0 / 3.0; 3])).unwrap().sym();
            prop_assert!((lhs.values[k] - direct).norm() <= 1e-13 * direct.norm());
        }
    }

    #[test]
    fn cr_interpolants_have_zero_mean_jumps(a in -2.0..2.0f64, b in -2.0..2.0f64, c in -2.0..2.0f64) {
        let m = barycentric_refine(&build_structured_mesh(3, 2, Rect::unit()).unwrap());
        let u = VectorField::interpolate(Element::Cr, &m, |x| [(a * x[0] + b * x[1]).sin(), c * x[0] * x[1] * x[1]]);
        for (e, ed) in m.edges.iter().enumerate() {
            let Some(r) = ed.right else { continue };
            let mut jump = [0.0; 2];
            for &(t, w) in &GAUSS2 {
                let ul = u.eval(&m, ed.left, m.edge_point(ed.left, e, t));
                let ur = u.eval(&m, r, m.edge_point(r, e, t));
                jump[0] += w * (ul[0] - ur[0]);
                jump[1] += w * (ul[1] - ur[1]);
            }
            prop_assert!(jump[0].abs() < 1e-14 && jump[1].abs() < 1e-14);
        }
    }
}
