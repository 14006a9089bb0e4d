#![allow(dead_code)]

use oldroyd::mesh::{build_structured_mesh, Mesh, Rect};
use oldroyd::projections::ProjectedVelocity;
use oldroyd::schemes::{Formulation, Scheme, State};
use oldroyd::spaces::VectorField;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Structured `n × n` mesh of the unit square with interior vertices moved
/// by up to a quarter cell.
pub fn perturbed_mesh(n: usize, seed: u64) -> Mesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = build_structured_mesh(n, n, Rect::unit()).unwrap();
    let h = 0.25 / n as f64;
    let vertices = base
        .vertices
        .iter()
        .zip(&base.boundary_vertex)
        .map(|(v, &b)| if b { *v } else { [v[0] + h * rng.random_range(-1.0..1.0), v[1] + h * rng.random_range(-1.0..1.0)] })
        .collect();
    Mesh::from_parts(vertices, base.triangles.clone(), None).unwrap()
}

pub fn two_triangles() -> Mesh {
    build_structured_mesh(1, 1, Rect::unit()).unwrap()
}

pub fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Random state; σ near the identity, or ψ with well separated eigenvalues.
pub fn random_state(s: &Scheme, seed: u64, with_u: bool) -> State {
    let l = &s.layout;
    let mut x = random_vec(l.n, seed);
    if !with_u {
        x[..2 * l.n_u].fill(0.0);
    }
    for i in 0..l.n_s {
        let a = &mut x[l.strs(i, 0)..l.strs(i, 0) + 3];
        a[1] *= 0.3;
        if s.cfg.formulation == Formulation::Log {
            a[0] += 1.5;
        } else {
            a[0] = 1.0 + 0.3 * a[0];
            a[2] = 1.0 + 0.3 * a[2];
        }
    }
    s.unpack(&x, 0)
}

pub fn compare(s: &Scheme, prev: &State, iterate: &State, rows: usize) -> f64 {
    let (a, b) = s.assemble_system(prev, iterate).unwrap();
    let a = a.to_dense();
    let (ad, bd) = dense::system(s, prev, &s.pack(iterate));
    let mut worst: f64 = 0.0;
    for i in 0..rows {
        for j in 0..s.layout.n {
            worst = worst.max((a[i][j] - ad[i][j]).abs() / ad[i][j].abs().max(1.0));
        }
        worst = worst.max((b[i] - bd[i]).abs() / bd[i].abs().max(1.0));
    }
    worst
}

/// Both sides of the upwind identity for an RT0 field with zero boundary
/// flux, written out from the edge fluxes.
pub fn two_sided(m: &Mesh, flux: &[f64], phi: &[f64]) -> (f64, f64) {
    let mut jumps = 0.0;
    for (e, ed) in m.edges.iter().enumerate() {
        let Some(r) = ed.right else { continue };
        let (up, down) = if flux[e] > 0.0 { (ed.left, r) } else { (r, ed.left) };
        jumps += flux[e].abs() * (phi[down] - phi[up]);
    }
    let mut cells = 0.0;
    for k in 0..m.n_triangles() {
        for &e in &m.tri_edges[k] {
            let s = if m.edges[e].left == k { 1.0 } else { -1.0 };
            cells -= s * flux[e] * phi[k];
        }
    }
    (jumps, cells)
}

/// `∫_K div u` by the divergence theorem with Simpson's rule per side,
/// exact for quadratic velocities.
pub fn flux_div(m: &Mesh, u: &VectorField, k: usize) -> f64 {
    let c = m.corners(k);
    let mut s = 0.0;
    for i in 0..3 {
        let (a, b) = (c[(i + 1) % 3], c[(i + 2) % 3]);
        let n = [b[1] - a[1], -(b[0] - a[0])];
        let at = |t: f64| {
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let v = u.eval(m, k, m.barycentric(k, x));
            v[0] * n[0] + v[1] * n[1]
        };
        s += (at(0.0) + 4.0 * at(0.5) + at(1.0)) / 6.0;
    }
    s
}

/// Projected divergence and normal jumps sampled directly from `eval`.
pub fn projected_div_and_jump(m: &Mesh, p: &ProjectedVelocity) -> (f64, f64) {
    let mut div: f64 = 0.0;
    let mut jump: f64 = 0.0;
    for k in 0..m.n_triangles() {
        let c = m.corners(k);
        let mut s = 0.0;
        for i in 0..3 {
            let (a, b) = (c[(i + 1) % 3], c[(i + 2) % 3]);
            let n = [b[1] - a[1], -(b[0] - a[0])];
            // Projected fields are affine, the midpoint rule is exact.
            let v = p.eval(m, k, m.barycentric(k, [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]));
            s += v[0] * n[0] + v[1] * n[1];
        }
        div = div.max(s.abs() / m.areas[k]);
    }
    for (e, ed) in m.edges.iter().enumerate() {
        let Some(r) = ed.right else { continue };
        for t in [0.0, 0.5, 1.0] {
            let a = p.eval(m, ed.left, m.edge_point(ed.left, e, t));
            let b = p.eval(m, r, m.edge_point(r, e, t));
            jump = jump.max(((a[0] - b[0]) * ed.normal[0] + (a[1] - b[1]) * ed.normal[1]).abs());
        }
    }
    (div, jump)
}

pub mod dense {
    //! Brute-force dense assembler for P0 stresses with an identity
    //! transport map, written directly from the weak form with nalgebra
    //! tensors.

    use nalgebra::Matrix2;
    use oldroyd::schemes::{ElementFamily, Formulation, Scheme, State};
    use oldroyd::spaces::{eval_basis, nodes, quadrature, Element};

    type M2 = Matrix2<f64>;

    /// Test tensors dual to the three stored stress components.
    fn phi(c: usize) -> M2 {
        match c {
            0 => M2::new(1.0, 0.0, 0.0, 0.0),
            1 => M2::new(0.0, 1.0, 1.0, 0.0),
            _ => M2::new(0.0, 0.0, 0.0, 1.0),
        }
    }

    fn ddot(a: &M2, b: &M2) -> f64 {
        a.component_mul(b).sum()
    }

    fn stress_at(s: &Scheme, x: &[f64], k: usize) -> M2 {
        let l = &s.layout;
        let (a, b, c) = (x[l.strs(k, 0)], x[l.strs(k, 1)], x[l.strs(k, 2)]);
        M2::new(a, b, b, c)
    }

    fn spectral(a: &M2, f: impl Fn(f64) -> f64) -> M2 {
        let e = a.symmetric_eigen();
        e.eigenvectors * M2::from_diagonal(&e.eigenvalues.map(f)) * e.eigenvectors.transpose()
    }

    /// Daleckii-Krein formula for the derivative of the exponential.
    fn dexp(a: &M2, h: &M2) -> M2 {
        let e = a.symmetric_eigen();
        let q = e.eigenvectors;
        let l = e.eigenvalues;
        let ht = q.transpose() * h * q;
        let mut d = M2::zeros();
        for i in 0..2 {
            for j in 0..2 {
                let f = if (l[i] - l[j]).abs() < 1e-9 { l[i].exp() } else { (l[i].exp() - l[j].exp()) / (l[i] - l[j]) };
                d[(i, j)] = f * ht[(i, j)];
            }
        }
        q * d * q.transpose()
    }

    /// `G = Ω + B + N σ⁻¹` with Ω, N antisymmetric and B commuting with σ,
    /// solved in the eigenframe of σ. Returns (Ω, B).
    fn split(g: &M2, sigma: &M2) -> (M2, M2) {
        let e = sigma.symmetric_eigen();
        let q = e.eigenvectors;
        let (l1, l2) = (e.eigenvalues[0], e.eigenvalues[1]);
        let gt = q.transpose() * g * q;
        let n = (gt[(0, 1)] + gt[(1, 0)]) * l1 * l2 / (l1 - l2);
        let w = gt[(0, 1)] - n / l2;
        let om = q * M2::new(0.0, w, -w, 0.0) * q.transpose();
        let b = q * M2::new(gt[(0, 0)], 0.0, 0.0, gt[(1, 1)]) * q.transpose();
        (om, b)
    }

    fn on_boundary(p: [f64; 2]) -> bool {
        p.iter().any(|&c| c.abs() < 1e-14 || (c - 1.0).abs() < 1e-14)
    }

    /// Residual of the step from `prev` evaluated at `x`.
    pub fn residual(s: &Scheme, prev: &State, x: &[f64]) -> Vec<f64> {
        let m = s.mesh;
        let l = &s.layout;
        let cfg = &s.cfg;
        assert_eq!(s.strs, Element::P0);
        let (re, wi, eps, dt) = (cfg.params.re, cfg.params.wi, cfg.params.eps, cfg.dt);
        let log = cfg.formulation == Formulation::Log;
        let temam = matches!(cfg.elements, ElementFamily::TaylorHood | ElementFamily::P1p1Stab | ElementFamily::P1p0Stab);
        let q = quadrature(6).unwrap();
        let mut r = vec![0.0; l.n];
        for k in 0..m.n_triangles() {
            let vd = s.vel.local_dofs(m, k);
            let pd = s.pres.local_dofs(m, k);
            let area = m.areas[k];
            let sk = stress_at(s, x, k);
            let tau = if log { spectral(&sk, f64::exp) } else { sk };
            let mut srow = M2::zeros();
            for (lq, w) in q.points.iter().zip(&q.weights) {
                let wq = w * area;
                let vb = eval_basis(s.vel, m, k, *lq);
                let pb = eval_basis(s.pres, m, k, *lq);
                let mut u = [0.0; 2];
                let mut g = M2::zeros();
                for c in 0..2 {
                    for a in 0..vd.n {
                        let xv = x[l.vel(c, vd.idx[a])];
                        u[c] += xv * vb.val[a];
                        g[(c, 0)] += xv * vb.grad[a][0];
                        g[(c, 1)] += xv * vb.grad[a][1];
                    }
                }
                let (un, gn) = prev.u.eval_grad(m, k, *lq);
                let gn = M2::new(gn.0[0][0], gn.0[0][1], gn.0[1][0], gn.0[1][1]);
                let mut p = 0.0;
                let mut gp = [0.0; 2];
                for a in 0..pd.n {
                    let xp = x[l.pres(pd.idx[a])];
                    p += xp * pb.val[a];
                    gp[0] += xp * pb.grad[a][0];
                    gp[1] += xp * pb.grad[a][1];
                }
                for c in 0..2 {
                    let conv = un[0] * g[(c, 0)] + un[1] * g[(c, 1)];
                    for a in 0..vd.n {
                        let (na, ga) = (vb.val[a], vb.grad[a]);
                        // Test function v = N_a e_c.
                        let mut gv = M2::zeros();
                        gv[(c, 0)] = ga[0];
                        gv[(c, 1)] = ga[1];
                        let mut v = re / dt * (u[c] - un[c]) * na + re * conv * na + (1.0 - eps) * ddot(&g, &gv)
                            - p * gv.trace()
                            + eps / wi * ddot(&tau, &gv);
                        if temam {
                            v += 0.5 * re * gn.trace() * u[c] * na;
                        }
                        r[l.vel(c, vd.idx[a])] += wq * v;
                    }
                }
                let h2 = m.diameters[k].powi(2);
                for a in 0..pd.n {
                    let mut v = pb.val[a] * g.trace();
                    if cfg.elements == ElementFamily::P1p1Stab {
                        v += h2 * (gp[0] * pb.grad[a][0] + gp[1] * pb.grad[a][1]);
                    }
                    r[l.pres(pd.idx[a])] += wq * v;
                }
                let t = if log {
                    let (om, b) = split(&g, &spectral(&sk, f64::exp));
                    sk / dt - (om * sk - sk * om) - 2.0 * b - (spectral(&sk, |v| (-v).exp()) - M2::identity()) / wi
                } else {
                    sk / dt - (g * sk + sk * g.transpose()) + (sk - M2::identity()) / wi
                };
                srow += wq * t;
            }
            let sn = prev.stress.values[k];
            srow -= area / dt * M2::new(sn.a11, sn.a12, sn.a12, sn.a22);
            for c in 0..3 {
                r[l.strs(k, c)] += ddot(&srow, &phi(c));
            }
        }
        if cfg.elements == ElementFamily::P1p0Stab {
            for e in &m.edges {
                let Some(rk) = e.right else { continue };
                let jump = x[l.pres(e.left)] - x[l.pres(rk)];
                r[l.pres(e.left)] += e.length * e.length * jump;
                r[l.pres(rk)] -= e.length * e.length * jump;
            }
        }
        r
    }

    /// Newton matrix and right-hand side at `x`, dense, with the boundary
    /// and pressure-pin rows replaced.
    ///
    /// Conformation residuals are quadratic and log residuals affine in
    /// `(u, p)`, so central differences with unit step are exact there.
    /// Log stress columns use the exact derivative and require `u = 0` at `x`.
    pub fn system(s: &Scheme, prev: &State, x: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let l = &s.layout;
        let m = s.mesh;
        let cfg = &s.cfg;
        let log = cfg.formulation == Formulation::Log;
        let n = l.n;
        let r0 = residual(s, prev, x);
        let mut j = vec![vec![0.0; n]; n];
        let fd_cols = if log { l.off_s } else { n };
        for c in 0..fd_cols {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[c] += 1.0;
            xm[c] -= 1.0;
            let rp = residual(s, prev, &xp);
            let rm = residual(s, prev, &xm);
            for i in 0..n {
                j[i][c] = 0.5 * (rp[i] - rm[i]);
            }
        }
        if log {
            assert!((0..l.off_s - l.n_p).all(|i| x[i] == 0.0), "log oracle needs u = 0");
            let (wi, eps, dt) = (cfg.params.wi, cfg.params.eps, cfg.dt);
            let q = quadrature(6).unwrap();
            for k in 0..m.n_triangles() {
                let psi = stress_at(s, x, k);
                let vd = s.vel.local_dofs(m, k);
                for e in 0..3 {
                    let col = l.strs(k, e);
                    let unit = match e {
                        0 => M2::new(1.0, 0.0, 0.0, 0.0),
                        1 => M2::new(0.0, 1.0, 1.0, 0.0),
                        _ => M2::new(0.0, 0.0, 0.0, 1.0),
                    };
                    let de = dexp(&psi, &unit);
                    for (lq, w) in q.points.iter().zip(&q.weights) {
                        let vb = eval_basis(s.vel, m, k, *lq);
                        for c in 0..2 {
                            for a in 0..vd.n {
                                let ga = vb.grad[a];
                                j[l.vel(c, vd.idx[a])][col] += w * m.areas[k] * eps / wi * (de[(c, 0)] * ga[0] + de[(c, 1)] * ga[1]);
                            }
                        }
                    }
                    let t = unit / dt + dexp(&-psi, &unit) / wi;
                    for c in 0..3 {
                        j[l.strs(k, c)][col] += m.areas[k] * ddot(&t, &phi(c));
                    }
                }
            }
        }
        let mut b: Vec<f64> = (0..n).map(|i| (0..n).map(|c| j[i][c] * x[c]).sum::<f64>() - r0[i]).collect();
        let mut pin = |row: usize, j: &mut Vec<Vec<f64>>| {
            j[row] = vec![0.0; n];
            j[row][row] = 1.0;
            b[row] = 0.0;
        };
        for (i, p) in nodes(s.vel, m).into_iter().enumerate() {
            if on_boundary(p) {
                pin(l.vel(0, i), &mut j);
                pin(l.vel(1, i), &mut j);
            }
        }
        pin(l.pres(0), &mut j);
        (j, b)
    }
}
