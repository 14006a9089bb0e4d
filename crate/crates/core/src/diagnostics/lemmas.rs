//! Randomized replay of the matrix inequalities, Jacobi formulas, gradient
//! decomposition and the two π_h identities.

use std::fmt;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::{build_structured_mesh, Mesh, Rect};
use crate::spaces::{pi_h, quadrature, Element, SymTensorField};
use crate::tensor::{
    decompose_gradient, jacobi_check, rotation, spd_exp, verify_pair_inequalities, Mat2, SpdMat, SymMat,
};

/// Residuals of both Jacobi formulas at one finite-difference step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiRow {
    pub h: f64,
    pub trace_log: f64,
    pub trace: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    pub samples: usize,
    pub seed: u64,
    /// Smallest inequality slack over all sampled pairs.
    pub pair_worst_slack: f64,
    /// Largest residual of the two log-determinant identities.
    pub pair_worst_identity: f64,
    /// Worst residual over paths, per step size.
    pub jacobi: Vec<JacobiRow>,
    /// Smallest observed order between consecutive step sizes, ignoring
    /// pairs below the roundoff floor.
    pub jacobi_order: f64,
    /// `‖Ω + B + N s⁻¹ − g‖ / ‖g‖`.
    pub decomposition_worst: f64,
    /// `‖B s − s B‖ / (‖B‖ ‖s‖)`.
    pub commutation_worst: f64,
    pub trace_b_worst: f64,
    /// `max |∫_K f − |K| π_h f| / (|K| max|f|)` over random meshes.
    pub pi_mean_worst: f64,
    /// `‖π_h exp(f) − exp(π_h f)‖` over random fields.
    pub pi_commute_worst: f64,
}

pub const SLACK_TOL: f64 = -1e-12;
pub const IDENTITY_TOL: f64 = 1e-12;
pub const PI_TOL: f64 = 1e-13;
const JACOBI_FLOOR: f64 = 1e-9;

impl LemmaReport {
    pub fn pass(&self) -> bool {
        self.pair_worst_slack >= SLACK_TOL
            && self.decomposition_worst <= IDENTITY_TOL
            && self.commutation_worst <= IDENTITY_TOL
            && self.trace_b_worst <= IDENTITY_TOL
            && self.jacobi_order >= 1.8
            && self.pi_mean_worst <= PI_TOL
            && self.pi_commute_worst <= PI_TOL
    }
}

impl fmt::Display for LemmaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "samples {} seed {}", self.samples, self.seed)?;
        writeln!(f, "pair inequalities   worst slack {:+.3e}  identity residual {:.3e}", self.pair_worst_slack, self.pair_worst_identity)?;
        for r in &self.jacobi {
            writeln!(f, "jacobi h={:.0e}        {:.3e}  {:.3e}", r.h, r.trace_log, r.trace)?;
        }
        writeln!(f, "jacobi order        {:.3}", self.jacobi_order)?;
        writeln!(
            f,
            "decomposition       reconstruction {:.3e}  commutation {:.3e}  trace {:.3e}",
            self.decomposition_worst, self.commutation_worst, self.trace_b_worst
        )?;
        writeln!(f, "pi_h mean           {:.3e}", self.pi_mean_worst)?;
        writeln!(f, "pi_h commutation    {:.3e}", self.pi_commute_worst)?;
        write!(f, "{}", if self.pass() { "PASS" } else { "FAIL" })
    }
}

/// Random SPD matrix with eigenvalues in `[1e-3, 1e3]`, so condition numbers
/// reach 1e6.
fn random_spd(rng: &mut ChaCha8Rng) -> SpdMat {
    let l1 = 10f64.powf(rng.random_range(-3.0..3.0));
    let l2 = 10f64.powf(rng.random_range(-3.0..3.0));
    let r = rotation(rng.random_range(0.0..std::f64::consts::PI));
    SymMat::diag(l1, l2).congruence(&r).to_spd().expect("positive eigenvalues")
}

fn random_mat(rng: &mut ChaCha8Rng) -> Mat2 {
    Mat2([[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)], [
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    ]])
}

fn random_mesh(rng: &mut ChaCha8Rng) -> Mesh {
    let n = rng.random_range(2..6usize);
    let base = build_structured_mesh(n, n, Rect::unit()).expect("valid grid");
    let h = 1.0 / n as f64;
    let vertices = base
        .vertices
        .iter()
        .zip(&base.boundary_vertex)
        .map(|(v, &b)| {
            if b {
                *v
            } else {
                [v[0] + 0.25 * h * rng.random_range(-1.0..1.0), v[1] + 0.25 * h * rng.random_range(-1.0..1.0)]
            }
        })
        .collect();
    Mesh::from_parts(vertices, base.triangles.clone(), None).expect("small perturbation keeps orientation")
}

pub fn verify_lemmas(samples: usize, seed: u64) -> LemmaReport {
    let samples = samples.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_slack = f64::INFINITY;
    let mut worst_identity: f64 = 0.0;
    for _ in 0..samples {
        let s = random_spd(&mut rng);
        let t = random_spd(&mut rng);
        let r = verify_pair_inequalities(&s, &t);
        worst_slack = worst_slack.min(r.worst_slack());
        worst_identity = worst_identity.max(r.trln_residual).max(r.logdet_residual);
    }

    let hs = [1e-3, 1e-4, 1e-5];
    let mut jacobi: Vec<JacobiRow> = hs.iter().map(|&h| JacobiRow { h, trace_log: 0.0, trace: 0.0 }).collect();
    let paths = samples.clamp(1, 200);
    for _ in 0..paths {
        let (a, b) = (rng.random_range(0.5..2.0), rng.random_range(0.5..2.0));
        let (w, c) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let path = move |t: f64| {
            SymMat::diag(a * (1.0 + c * t).exp(), b * (1.0 + 0.5 * t * t)).congruence(&rotation(w * t))
        };
        for row in jacobi.iter_mut() {
            let (r1, r2) = jacobi_check(path, 0.3, row.h).expect("path stays SPD");
            row.trace_log = row.trace_log.max(r1);
            row.trace = row.trace.max(r2);
        }
    }
    let mut order = f64::INFINITY;
    for w in jacobi.windows(2) {
        for (big, small) in [(w[0].trace_log, w[1].trace_log), (w[0].trace, w[1].trace)] {
            if small > JACOBI_FLOOR {
                order = order.min((big / small).log10() / (w[0].h / w[1].h).log10());
            }
        }
    }

    let mut dec: f64 = 0.0;
    let mut comm: f64 = 0.0;
    let mut trb: f64 = 0.0;
    for _ in 0..samples {
        let s = random_spd(&mut rng);
        let g = random_mat(&mut rng);
        let d = decompose_gradient(&g, &s, 1e-10);
        dec = dec.max((d.reconstruct(&s) - g).norm() / g.norm().max(f64::MIN_POSITIVE));
        let bs = d.b.to_mat().mul_mat(&s.to_mat());
        let sb = s.to_mat().mul_mat(&d.b.to_mat());
        comm = comm.max((bs - sb).norm() / (d.b.norm() * s.norm()).max(f64::MIN_POSITIVE));
        trb = trb.max((d.b.trace() - g.trace()).abs());
    }

    let q = quadrature(2).expect("degree 2");
    let mut pi_mean: f64 = 0.0;
    let mut pi_comm: f64 = 0.0;
    for _ in 0..samples.clamp(1, 20) {
        let m = random_mesh(&mut rng);
        let f = SymTensorField {
            element: Element::P1Disc,
            values: (0..3 * m.n_triangles())
                .map(|_| SymMat::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
                .collect(),
        };
        let p = pi_h(&f);
        for k in 0..m.n_triangles() {
            let scale = f.values[3 * k..3 * k + 3].iter().map(|v| v.norm()).fold(1.0, f64::max);
            let mut integral = SymMat::ZERO;
            for (l, w) in q.points.iter().zip(&q.weights) {
                integral = integral + (w * m.areas[k]) * f.eval(k, *l);
            }
            let r = (integral - m.areas[k] * p.values[k]).norm() / (m.areas[k] * scale);
            pi_mean = pi_mean.max(r);
            let lhs = spd_exp(&f.eval(k, [1.0 / 3.0; 3])).expect("bounded entries").sym();
            let rhs = spd_exp(&p.values[k]).expect("bounded entries").sym();
            pi_comm = pi_comm.max((lhs - rhs).norm());
        }
    }

    LemmaReport {
        samples,
        seed,
        pair_worst_slack: worst_slack,
        pair_worst_identity: worst_identity,
        jacobi,
        jacobi_order: order,
        decomposition_worst: dec,
        commutation_worst: comm,
        trace_b_worst: trb,
        pi_mean_worst: pi_mean,
        pi_commute_worst: pi_comm,
    }
}
