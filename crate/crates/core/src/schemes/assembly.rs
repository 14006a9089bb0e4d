//! Residual and Newton matrix of the fully implicit step.

use super::{Formulation, Mode, Scheme, SchemeError, StepData};
use crate::linalg::Triplets;
use crate::spaces::Element;
use crate::tensor::{decompose_in_frame, exp_derivative, spd_exp, Eigen, Mat2, SymMat};

/// Global unknown numbering: both velocity components, then pressure, then
/// three stress components per stress node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n_u: usize,
    pub n_p: usize,
    pub n_s: usize,
    pub off_s: usize,
    pub n: usize,
}

impl Layout {
    pub fn new(n_u: usize, n_p: usize, n_s: usize) -> Layout {
        let off_s = 2 * n_u + n_p;
        Layout { n_u, n_p, n_s, off_s, n: off_s + 3 * n_s }
    }

    #[inline]
    pub fn vel(&self, c: usize, i: usize) -> usize {
        c * self.n_u + i
    }

    #[inline]
    pub fn pres(&self, i: usize) -> usize {
        2 * self.n_u + i
    }

    #[inline]
    pub fn strs(&self, i: usize, c: usize) -> usize {
        self.off_s + 3 * i + c
    }

    /// Largest blockwise `rms(new - old) / max(rms(new), 1)`.
    pub fn relative_update(&self, old: &[f64], new: &[f64]) -> f64 {
        let blocks = [(0, 2 * self.n_u), (2 * self.n_u, self.off_s), (self.off_s, self.n)];
        let mut worst: f64 = 0.0;
        for (a, b) in blocks {
            if b == a {
                continue;
            }
            let len = (b - a) as f64;
            let d = ((a..b).map(|i| (new[i] - old[i]).powi(2)).sum::<f64>() / len).sqrt();
            let s = ((a..b).map(|i| new[i] * new[i]).sum::<f64>() / len).sqrt();
            let r = d / s.max(1.0);
            if !(r <= worst) {
                worst = r;
            }
        }
        worst
    }
}

pub(crate) fn unit(c: usize) -> SymMat {
    match c {
        0 => SymMat::new(1.0, 0.0, 0.0),
        1 => SymMat::new(0.0, 1.0, 0.0),
        _ => SymMat::new(0.0, 0.0, 1.0),
    }
}

/// `s : Φ_c` for the component test tensors.
#[inline]
pub(crate) fn tcomp(s: &SymMat, c: usize) -> f64 {
    match c {
        0 => s.a11,
        1 => 2.0 * s.a12,
        _ => s.a22,
    }
}

fn dgrad(d: usize, g: [f64; 2]) -> Mat2 {
    let mut m = Mat2::ZERO;
    m.0[d] = g;
    m
}

fn gsym(g: &Mat2, s: &SymMat) -> SymMat {
    // g s + s gᵀ
    let gs = g.mul_mat(&s.to_mat());
    let a = gs.0;
    SymMat::new(2.0 * a[0][0], a[0][1] + a[1][0], 2.0 * a[1][1])
}

fn commutator(omega: f64, s: &SymMat) -> SymMat {
    // Ω s − s Ω with Ω = [[0, ω], [−ω, 0]]
    let w = Mat2::antisym_from(omega);
    let a = w.mul_mat(&s.to_mat()).0;
    SymMat::new(2.0 * a[0][0], a[0][1] + a[1][0], 2.0 * a[1][1])
}

/// Dense local block with its global indices.
struct Local {
    idx: Vec<usize>,
    j: Vec<f64>,
    r: Vec<f64>,
}

impl Local {
    fn new(idx: Vec<usize>) -> Local {
        let n = idx.len();
        Local { idx, j: vec![0.0; n * n], r: vec![0.0; n] }
    }

    #[inline]
    fn add_j(&mut self, a: usize, b: usize, v: f64) {
        let n = self.idx.len();
        self.j[a * n + b] += v;
    }

    /// Residual of terms that are linear in the local unknowns.
    fn linear_residual(&mut self, x: &[f64]) {
        let n = self.idx.len();
        for a in 0..n {
            self.r[a] = (0..n).map(|b| self.j[a * n + b] * x[self.idx[b]]).sum();
        }
    }

    fn scatter(&self, t: &mut Triplets, r: &mut [f64]) {
        let n = self.idx.len();
        for a in 0..n {
            r[self.idx[a]] += self.r[a];
            for b in 0..n {
                t.add(self.idx[a], self.idx[b], self.j[a * n + b]);
            }
        }
    }
}

/// Log-formulation data of one element, frozen at the iterate.
struct LogFrame {
    e: SymMat,
    einv: SymMat,
    de: [SymMat; 3],
    dem: [SymMat; 3],
    omega: [[f64; 2]; 2],
    b: [[SymMat; 2]; 2],
    /// Derivatives of the two maps with respect to each component of π_h ψ.
    d_omega: [[[f64; 2]; 2]; 3],
    d_b: [[[SymMat; 2]; 2]; 3],
}

fn frame_maps(p: &SymMat, tol: f64) -> ([[f64; 2]; 2], [[SymMat; 2]; 2]) {
    let eg = p.eigen();
    let frame = Eigen { l1: eg.l1.exp(), l2: eg.l2.exp(), cos: eg.cos, sin: eg.sin };
    let mut omega = [[0.0; 2]; 2];
    let mut b = [[SymMat::ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut g = Mat2::ZERO;
            g.0[i][j] = 1.0;
            let d = decompose_in_frame(&g, &frame, tol);
            omega[i][j] = d.omega;
            b[i][j] = d.b;
        }
    }
    (omega, b)
}

/// Relative eigenvalue gap of `e^p` below which the frame is treated as
/// frozen in the Newton matrix.
const FRAME_GAP: f64 = 1e-4;

fn log_frame(p: &SymMat, tol: f64) -> Result<LogFrame, SchemeError> {
    let e = spd_exp(p)?.sym();
    let einv = spd_exp(&-*p)?.sym();
    let de = [0, 1, 2].map(|c| exp_derivative(p, &unit(c)));
    let dem = [0, 1, 2].map(|c| exp_derivative(&-*p, &unit(c)));
    let (omega, b) = frame_maps(p, tol);
    let mut d_omega = [[[0.0; 2]; 2]; 3];
    let mut d_b = [[[SymMat::ZERO; 2]; 2]; 3];
    let (l1, l2) = p.eigenvalues();
    if 1.0 - (l2 - l1).exp() > FRAME_GAP.max(tol) {
        let h = 1e-7 * (1.0 + p.norm());
        for c in 0..3 {
            let (op, bp) = frame_maps(&(*p + h * unit(c)), tol);
            let (om, bm) = frame_maps(&(*p - h * unit(c)), tol);
            for i in 0..2 {
                for j in 0..2 {
                    d_omega[c][i][j] = (op[i][j] - om[i][j]) / (2.0 * h);
                    d_b[c][i][j] = (0.5 / h) * (bp[i][j] - bm[i][j]);
                }
            }
        }
    }
    Ok(LogFrame { e, einv, de, dem, omega, b, d_omega, d_b })
}

fn contract(maps: &[[SymMat; 2]; 2], g: &Mat2) -> SymMat {
    let mut s = SymMat::ZERO;
    for i in 0..2 {
        for j in 0..2 {
            s = s + g.0[i][j] * maps[i][j];
        }
    }
    s
}

impl LogFrame {
    fn omega(&self, g: &Mat2) -> f64 {
        (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| self.omega[i][j] * g.0[i][j]).sum()
    }

    fn b(&self, g: &Mat2) -> SymMat {
        contract(&self.b, g)
    }

    /// Derivative of `Ω Ψ − Ψ Ω + 2B` along the frame when π_h ψ moves in
    /// component `c`.
    fn frame_term(&self, c: usize, g: &Mat2, psi: &SymMat) -> SymMat {
        let dw: f64 = (0..4).map(|n| self.d_omega[c][n / 2][n % 2] * g.0[n / 2][n % 2]).sum();
        commutator(dw, psi) + 2.0 * contract(&self.d_b[c], g)
    }
}

pub(crate) fn assemble(s: &Scheme, d: &StepData, x: &[f64]) -> Result<(Triplets, Vec<f64>), SchemeError> {
    let m = s.mesh;
    let cfg = &s.cfg;
    let l = &s.layout;
    let nq = s.nq();
    let dt = cfg.dt;
    let (re, wi, eps) = (cfg.params.re, cfg.params.wi, cfg.params.eps);
    let full = cfg.mode == Mode::Full;
    let stokes = cfg.mode == Mode::StokesOnly;
    let log = cfg.formulation == Formulation::Log;
    let lie = cfg.formulation == Formulation::Lie;
    let p0_grad = cfg.elements.p0_gradient();
    let temam = cfg.elements.needs_temam() && full;
    let cr_char = s.vel == Element::Cr && cfg.cr_momentum == super::CrMomentum::Characteristic;
    let convect = full && !cr_char;
    let stab_p1 = cfg.elements == super::ElementFamily::P1p1Stab;
    let bary_s = s.strs.shape([1.0 / 3.0; 3]);

    let mut t = Triplets::new(l.n);
    let mut r = vec![0.0; l.n];

    for k in 0..m.n_triangles() {
        let area = m.areas[k];
        let vd = s.vel.local_dofs(m, k);
        let pd = s.pres.local_dofs(m, k);
        let sd = s.strs.local_dofs(m, k);
        let (nu, np, ns) = (vd.n, pd.n, sd.n);
        let iv = |c: usize, a: usize| c * nu + a;
        let ip = |a: usize| 2 * nu + a;
        let is = |a: usize, c: usize| 2 * nu + np + 3 * a + c;
        let mut idx = Vec::with_capacity(2 * nu + np + 3 * ns);
        for c in 0..2 {
            idx.extend(vd.as_slice().iter().map(|&i| l.vel(c, i)));
        }
        idx.extend(pd.as_slice().iter().map(|&i| l.pres(i)));
        for &i in sd.as_slice() {
            idx.extend((0..3).map(|c| l.strs(i, c)));
        }
        let mut loc = Local::new(idx);

        let sval: Vec<SymMat> =
            sd.as_slice().iter().map(|&i| SymMat::from_array([x[l.strs(i, 0)], x[l.strs(i, 1)], x[l.strs(i, 2)]])).collect();
        let pi = (0..ns).fold(SymMat::ZERO, |acc, a| acc + bary_s.val[a] * sval[a]);
        let frame = if log { Some(log_frame(&pi, cfg.degeneracy_tol)?) } else { None };
        let stress_eq = !stokes && !lie;

        let mut rloc = vec![0.0; loc.idx.len()];
        for q in 0..nq {
            let lq = s.quad.points[q];
            let wq = s.quad.weights[q] * area;
            let vb = &s.vtab[k * nq + q];
            let pb = &s.ptab[k * nq + q];
            let sb = s.strs.shape(lq);
            let (un, w, divun) = (d.un_q[k * nq + q], d.conv_q[k * nq + q], d.div_un_q[k * nq + q]);

            let mut u = [0.0; 2];
            let mut g = Mat2::ZERO;
            for c in 0..2 {
                for a in 0..nu {
                    let xv = x[loc.idx[iv(c, a)]];
                    u[c] += xv * vb.val[a];
                    g.0[c][0] += xv * vb.grad[a][0];
                    g.0[c][1] += xv * vb.grad[a][1];
                }
            }
            let div = g.trace();
            let mut p = 0.0;
            let mut gp = [0.0; 2];
            for a in 0..np {
                let xp = x[loc.idx[ip(a)]];
                p += xp * pb.val[a];
                gp[0] += xp * pb.grad[a][0];
                gp[1] += xp * pb.grad[a][1];
            }
            let sq = (0..ns).fold(SymMat::ZERO, |acc, a| acc + sb.val[a] * sval[a]);
            // Coupling tensor and the weight of stress node `a` in it.
            let sc = if p0_grad { sq } else { pi };
            let cw = |a: usize| if p0_grad { sb.val[a] } else { bary_s.val[a] };
            // Stress seen by the momentum equation.
            let smom = match &frame {
                Some(f) => f.e,
                None => sc,
            };
            let wgu = [w[0] * g.0[0][0] + w[1] * g.0[0][1], w[0] * g.0[1][0] + w[1] * g.0[1][1]];

            // Momentum.
            for c in 0..2 {
                for a in 0..nu {
                    let (na, ga) = (vb.val[a], vb.grad[a]);
                    let mut rv = re / dt * (u[c] - un[c]) * na - p * ga[c] + (1.0 - eps) * (g.0[c][0] * ga[0] + g.0[c][1] * ga[1]);
                    if convect {
                        rv += re * wgu[c] * na;
                    }
                    if temam {
                        rv += 0.5 * re * divun * u[c] * na;
                    }
                    if !stokes {
                        let sm = smom.to_mat().0;
                        rv += eps / wi * (sm[c][0] * ga[0] + sm[c][1] * ga[1]);
                    }
                    rloc[iv(c, a)] += wq * rv;
                    let row = iv(c, a);
                    for b in 0..nu {
                        let (nb, gb) = (vb.val[b], vb.grad[b]);
                        let mut jv = re / dt * nb * na + (1.0 - eps) * (gb[0] * ga[0] + gb[1] * ga[1]);
                        if convect {
                            jv += re * (w[0] * gb[0] + w[1] * gb[1]) * na;
                        }
                        if temam {
                            jv += 0.5 * re * divun * nb * na;
                        }
                        loc.add_j(row, iv(c, b), wq * jv);
                    }
                    for b in 0..np {
                        loc.add_j(row, ip(b), -wq * pb.val[b] * ga[c]);
                    }
                    if !stokes {
                        for b in 0..ns {
                            for e in 0..3 {
                                let ds = match &frame {
                                    Some(f) => bary_s.val[b] * f.de[e],
                                    None => cw(b) * unit(e),
                                }
                                .to_mat()
                                .0;
                                loc.add_j(row, is(b, e), wq * eps / wi * (ds[c][0] * ga[0] + ds[c][1] * ga[1]));
                            }
                        }
                    }
                }
            }

            // Continuity and pressure stabilization.
            let h2 = m.diameters[k] * m.diameters[k];
            for a in 0..np {
                let mut rp = pb.val[a] * div;
                if stab_p1 {
                    rp += h2 * (gp[0] * pb.grad[a][0] + gp[1] * pb.grad[a][1]);
                    for b in 0..np {
                        loc.add_j(ip(a), ip(b), wq * h2 * (pb.grad[b][0] * pb.grad[a][0] + pb.grad[b][1] * pb.grad[a][1]));
                    }
                }
                rloc[ip(a)] += wq * rp;
                for dcomp in 0..2 {
                    for b in 0..nu {
                        loc.add_j(ip(a), iv(dcomp, b), wq * pb.val[a] * vb.grad[b][dcomp]);
                    }
                }
            }

            if !stress_eq {
                continue;
            }
            // Stress equation.
            let prev = if d.cmap.is_none() { Some(d.pi_prev[k]) } else { None };
            let (tres, frame_ref) = match &frame {
                None => {
                    let mut tr = (1.0 / dt) * sq - gsym(&g, &sc) + (1.0 / wi) * (sq - SymMat::IDENTITY);
                    if let Some(pv) = prev {
                        tr = tr - (1.0 / dt) * pv;
                    }
                    (tr, None)
                }
                Some(f) => {
                    let om = f.omega(&g);
                    let mut tr = (1.0 / dt) * sq - commutator(om, &sc) - 2.0 * f.b(&g) - (1.0 / wi) * (f.einv - SymMat::IDENTITY);
                    if let Some(pv) = prev {
                        tr = tr - (1.0 / dt) * pv;
                    }
                    (tr, Some((f, om)))
                }
            };
            for a in 0..ns {
                let ma = sb.val[a];
                for c in 0..3 {
                    let row = is(a, c);
                    rloc[row] += wq * ma * tcomp(&tres, c);
                    for b in 0..ns {
                        for e in 0..3 {
                            let ue = unit(e);
                            let dt_s = match frame_ref {
                                None => {
                                    (sb.val[b] * (1.0 / dt + 1.0 / wi)) * ue - gsym(&g, &(cw(b) * ue))
                                }
                                Some((f, om)) => {
                                    (sb.val[b] / dt) * ue - commutator(om, &(cw(b) * ue))
                                        + (bary_s.val[b] / wi) * f.dem[e]
                                        - bary_s.val[b] * f.frame_term(e, &g, &sc)
                                }
                            };
                            loc.add_j(row, is(b, e), wq * ma * tcomp(&dt_s, c));
                        }
                    }
                    if full {
                        for dcomp in 0..2 {
                            for b in 0..nu {
                                let dg = dgrad(dcomp, vb.grad[b]);
                                let dt_u = match frame_ref {
                                    None => -gsym(&dg, &sc),
                                    Some((f, _)) => -commutator(f.omega(&dg), &sc) - 2.0 * f.b(&dg),
                                };
                                loc.add_j(row, iv(dcomp, b), wq * ma * tcomp(&dt_u, c));
                            }
                        }
                    }
                }
            }
        }

        if lie && !stokes {
            let vbar = crate::spaces::eval_basis(s.vel, m, k, [1.0 / 3.0; 3]);
            let mut g = Mat2::ZERO;
            for c in 0..2 {
                for a in 0..nu {
                    let xv = x[loc.idx[iv(c, a)]];
                    g.0[c][0] += xv * vbar.grad[a][0];
                    g.0[c][1] += xv * vbar.grad[a][1];
                }
            }
            let amat = Mat2::IDENTITY - g.scale(dt);
            let det = amat.det();
            if !(det.abs() >= 1e-12) {
                return Err(SchemeError::StepSize { element: k, det });
            }
            let ai = amat.inverse();
            let tilde = d.lie_tilde.as_ref().expect("lie pullback")[k];
            let st = tilde.congruence(&ai);
            let sk = sval[0];
            let tres = (1.0 / dt) * (sk - st) + (1.0 / wi) * (sk - SymMat::IDENTITY);
            for c in 0..3 {
                let row = is(0, c);
                rloc[row] += area * tcomp(&tres, c);
                for e in 0..3 {
                    loc.add_j(row, is(0, e), area * (1.0 / dt + 1.0 / wi) * tcomp(&unit(e), c));
                }
                if full {
                    for dcomp in 0..2 {
                        for b in 0..nu {
                            let dg = dgrad(dcomp, vbar.grad[b]);
                            // dS = Δt (A⁻¹ dG S + S dGᵀ A⁻ᵀ)
                            let ds = dt * gsym(&ai.mul_mat(&dg), &st);
                            loc.add_j(row, iv(dcomp, b), -area / dt * tcomp(&ds, c));
                        }
                    }
                }
            }
        }

        loc.r = rloc;
        loc.scatter(&mut t, &mut r);
    }

    // Upwind jumps of the projected stress.
    if let Some(up) = d.stress_up.as_ref().filter(|_| !stokes) {
        for pt in &up.points {
            let (dn, upk) = (pt.downstream, pt.upstream);
            let sdn = s.strs.local_dofs(m, dn);
            let sup = s.strs.local_dofs(m, upk);
            let ns = sdn.n;
            let mut idx = Vec::with_capacity(6 * ns);
            for &i in sdn.as_slice().iter().chain(sup.as_slice()) {
                idx.extend((0..3).map(|c| l.strs(i, c)));
            }
            let mut loc = Local::new(idx);
            let phi = s.strs.shape(m.edge_point(dn, pt.edge, pt.t));
            let wgt = pt.weight * pt.un.abs();
            for a in 0..ns {
                for c in 0..3 {
                    for b in 0..ns {
                        for e in 0..3 {
                            let v = wgt * phi.val[a] * bary_s.val[b] * tcomp(&unit(e), c);
                            loc.add_j(3 * a + c, 3 * b + e, v);
                            loc.add_j(3 * a + c, 3 * (ns + b) + e, -v);
                        }
                    }
                }
            }
            loc.linear_residual(x);
            loc.scatter(&mut t, &mut r);
        }
    }

    // Characteristic transfer of the previous projected stress.
    if let Some(map) = d.cmap.as_ref().filter(|_| !stokes && !lie) {
        for smp in &map.samples {
            let sd = s.strs.local_dofs(m, smp.source);
            let phi = s.strs.shape(smp.bary);
            let prev = d.pi_prev[smp.target];
            for a in 0..sd.n {
                for c in 0..3 {
                    r[l.strs(sd.idx[a], c)] -= smp.weight / dt * phi.val[a] * tcomp(&prev, c);
                }
            }
        }
    }

    // Upwind jumps of Crouzeix-Raviart velocities.
    if let Some(up) = d.mom_up.as_ref() {
        for pt in &up.points {
            let (dn, upk) = (pt.downstream, pt.upstream);
            let vdn = s.vel.local_dofs(m, dn);
            let vup = s.vel.local_dofs(m, upk);
            let nu = vdn.n;
            let mut idx = Vec::with_capacity(4 * nu);
            for c in 0..2 {
                idx.extend(vdn.as_slice().iter().map(|&i| l.vel(c, i)));
                idx.extend(vup.as_slice().iter().map(|&i| l.vel(c, i)));
            }
            let mut loc = Local::new(idx);
            let bd = s.vel.shape(m.edge_point(dn, pt.edge, pt.t));
            let bu = s.vel.shape(m.edge_point(upk, pt.edge, pt.t));
            // Local column of (component, side, basis).
            let col = |c: usize, side: usize, a: usize| c * 2 * nu + side * nu + a;
            let wgt = re * pt.weight * pt.un.abs();
            for c in 0..2 {
                for (side_a, va) in [(0, &bd), (1, &bu)] {
                    for a in 0..nu {
                        for (side_b, vb, sign) in [(0, &bd, 1.0), (1, &bu, -1.0)] {
                            for b in 0..nu {
                                loc.add_j(col(c, side_a, a), col(c, side_b, b), wgt * 0.5 * va.val[a] * sign * vb.val[b]);
                            }
                        }
                    }
                }
            }
            loc.linear_residual(x);
            loc.scatter(&mut t, &mut r);
        }
    }

    if cfg.elements == super::ElementFamily::P1p0Stab {
        pressure_jumps(s, x, &mut t, &mut r);
    }
    Ok((t, r))
}

/// `Σ_E |E|² [p][q]` over internal edges, for P0 pressures.
fn pressure_jumps(s: &Scheme, x: &[f64], t: &mut Triplets, r: &mut [f64]) {
    let l = &s.layout;
    for ed in &s.mesh.edges {
        let Some(rk) = ed.right else { continue };
        let c = ed.length * ed.length;
        let mut loc = Local::new(vec![l.pres(ed.left), l.pres(rk)]);
        loc.add_j(0, 0, c);
        loc.add_j(0, 1, -c);
        loc.add_j(1, 0, -c);
        loc.add_j(1, 1, c);
        loc.linear_residual(x);
        loc.scatter(t, r);
    }
}

/// Matrix and right-hand side of the discrete Leray projection: velocity
/// mass matrix with the pair's divergence constraint and stabilization.
pub(crate) fn leray_system(s: &Scheme, f: &dyn Fn([f64; 2]) -> [f64; 2]) -> (Triplets, Vec<f64>) {
    let m = s.mesh;
    let l = &s.layout;
    let nq = s.nq();
    let stab_p1 = s.cfg.elements == super::ElementFamily::P1p1Stab;
    let mut t = Triplets::new(l.n);
    let mut b = vec![0.0; l.n];
    for k in 0..m.n_triangles() {
        let vd = s.vel.local_dofs(m, k);
        let pd = s.pres.local_dofs(m, k);
        let h2 = m.diameters[k] * m.diameters[k];
        for q in 0..nq {
            let wq = s.quad.weights[q] * m.areas[k];
            let vb = &s.vtab[k * nq + q];
            let pb = &s.ptab[k * nq + q];
            let fx = f(m.point(k, s.quad.points[q]));
            for c in 0..2 {
                for a in 0..vd.n {
                    let row = l.vel(c, vd.idx[a]);
                    b[row] += wq * fx[c] * vb.val[a];
                    for bb in 0..vd.n {
                        t.add(row, l.vel(c, vd.idx[bb]), wq * vb.val[a] * vb.val[bb]);
                    }
                    for bb in 0..pd.n {
                        t.add(row, l.pres(pd.idx[bb]), -wq * pb.val[bb] * vb.grad[a][c]);
                        t.add(l.pres(pd.idx[bb]), row, wq * pb.val[bb] * vb.grad[a][c]);
                    }
                }
            }
            if stab_p1 {
                for a in 0..pd.n {
                    for bb in 0..pd.n {
                        let v = pb.grad[a][0] * pb.grad[bb][0] + pb.grad[a][1] * pb.grad[bb][1];
                        t.add(l.pres(pd.idx[a]), l.pres(pd.idx[bb]), wq * h2 * v);
                    }
                }
            }
        }
    }
    if s.cfg.elements == super::ElementFamily::P1p0Stab {
        let mut r = vec![0.0; l.n];
        pressure_jumps(s, &vec![0.0; l.n], &mut t, &mut r);
    }
    (t, b)
}
