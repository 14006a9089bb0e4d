//! Time stepping for the conformation, log-conformation and Lie
//! formulations on every velocity/pressure family.
//!
//! Each step solves the implicit nonlinear system by Newton iteration on a
//! monolithic sparse system, starting from the previous time level. The
//! log formulation freezes the eigenframe of the decomposition at the
//! current iterate.

mod assembly;
pub mod config;

use thiserror::Error;

pub use assembly::Layout;
pub use config::*;

use crate::linalg::{self, LinearError, SolveStats, Triplets};
use crate::mesh::Mesh;
use crate::projections::{self, ProjectedVelocity, ProjectionError};
use crate::spaces::{self, pi_h, Basis, Element, Quadrature, ScalarField, SymTensorField, VectorField};
use crate::tensor::{Mat2, SymMat, TensorError};
use crate::transport::{self, CharacteristicMap, EdgeUpwindData, TransportError, Velocity};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemeError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("fixed point did not converge in {iters} iterations (last relative update {update:e})")]
    NonConvergence { iters: usize, update: f64, last: Box<State> },
    #[error("stress lost positivity on element {element} (eigenvalue {eigenvalue:e})")]
    Positivity { element: usize, eigenvalue: f64 },
    #[error("time step too large for the Lie update on element {element} (det {det:e})")]
    StepSize { element: usize, det: f64 },
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Discrete unknowns at one time level. `stress` holds σ for the
/// conformation and Lie formulations and ψ for the log formulation.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: VectorField,
    pub p: ScalarField,
    pub stress: SymTensorField,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    pub fp_iters: usize,
    pub final_update: f64,
    pub linear: SolveStats,
    /// Smallest eigenvalue of π_h σ (conformation and Lie).
    pub min_eig: Option<f64>,
    /// Relative area defect of the characteristic transfer before balancing.
    pub area_defect: f64,
}

/// Per-step data computed from the previous time level.
pub(crate) struct StepData {
    pub x_prev: Vec<f64>,
    /// `u^n` at quadrature points, or `u^n ∘ X` for characteristic momentum.
    pub un_q: Vec<[f64; 2]>,
    /// Convecting velocity at quadrature points.
    pub conv_q: Vec<[f64; 2]>,
    /// `div u^n` at quadrature points.
    pub div_un_q: Vec<f64>,
    /// π_h of the previous stress.
    pub pi_prev: Vec<SymMat>,
    pub cmap: Option<CharacteristicMap>,
    pub stress_up: Option<EdgeUpwindData>,
    pub mom_up: Option<EdgeUpwindData>,
    /// Pulled-back P0 stress for the Lie update.
    pub lie_tilde: Option<Vec<SymMat>>,
}

pub struct Scheme<'m> {
    pub mesh: &'m Mesh,
    pub cfg: SchemeConfig,
    pub layout: Layout,
    pub vel: Element,
    pub pres: Element,
    pub strs: Element,
    pub(crate) quad: Quadrature,
    pub(crate) vtab: Vec<Basis>,
    pub(crate) ptab: Vec<Basis>,
    pub(crate) fixed_vel: Vec<bool>,
}

fn is_zero(u: &VectorField) -> bool {
    u.values.iter().all(|v| v[0] == 0.0 && v[1] == 0.0)
}

enum Advector {
    Field(VectorField),
    Projected(ProjectedVelocity),
}

impl Advector {
    fn velocity(&self) -> &dyn Velocity {
        match self {
            Advector::Field(f) => f,
            Advector::Projected(p) => p,
        }
    }
}

impl<'m> Scheme<'m> {
    pub fn new(mesh: &'m Mesh, cfg: SchemeConfig) -> Result<Scheme<'m>, SchemeError> {
        cfg.validate()?;
        let vel = cfg.elements.velocity();
        let pres = cfg.elements.pressure();
        let strs = cfg.stress_space.element();
        let layout = Layout::new(vel.n_global(mesh), pres.n_global(mesh), strs.n_global(mesh));
        let quad = spaces::quadrature(6).expect("order 6 is supported");
        let mut vtab = Vec::with_capacity(mesh.n_triangles() * quad.points.len());
        let mut ptab = Vec::with_capacity(vtab.capacity());
        for k in 0..mesh.n_triangles() {
            let gl = mesh.grad_lambda(k);
            for p in &quad.points {
                vtab.push(spaces::basis_with(vel, &gl, *p));
                ptab.push(spaces::basis_with(pres, &gl, *p));
            }
        }
        let fixed_vel = boundary_dofs(mesh, vel);
        Ok(Scheme { mesh, cfg, layout, vel, pres, strs, quad, vtab, ptab, fixed_vel })
    }

    pub fn nq(&self) -> usize {
        self.quad.points.len()
    }

    pub fn zero_state(&self) -> State {
        State {
            u: VectorField::zeros(self.vel, self.mesh),
            p: ScalarField::zeros(self.pres, self.mesh),
            stress: SymTensorField::constant(self.strs, self.mesh, SymMat::ZERO),
            n: 0,
        }
    }

    /// Equilibrium: `u = 0` with `σ = I`, or `ψ = 0` for the log formulation.
    pub fn equilibrium(&self) -> State {
        let mut s = self.zero_state();
        if self.cfg.formulation != Formulation::Log {
            s.stress = SymTensorField::constant(self.strs, self.mesh, SymMat::IDENTITY);
        }
        s
    }

    pub fn pack(&self, s: &State) -> Vec<f64> {
        let l = &self.layout;
        let mut x = vec![0.0; l.n];
        for (i, v) in s.u.values.iter().enumerate() {
            x[l.vel(0, i)] = v[0];
            x[l.vel(1, i)] = v[1];
        }
        for (i, v) in s.p.values.iter().enumerate() {
            x[l.pres(i)] = *v;
        }
        for (i, v) in s.stress.values.iter().enumerate() {
            let a = v.to_array();
            for c in 0..3 {
                x[l.strs(i, c)] = a[c];
            }
        }
        x
    }

    pub fn unpack(&self, x: &[f64], n: usize) -> State {
        let l = &self.layout;
        State {
            u: VectorField { element: self.vel, values: (0..l.n_u).map(|i| [x[l.vel(0, i)], x[l.vel(1, i)]]).collect() },
            p: ScalarField { element: self.pres, values: (0..l.n_p).map(|i| x[l.pres(i)]).collect() },
            stress: SymTensorField {
                element: self.strs,
                values: (0..l.n_s)
                    .map(|i| SymMat::from_array([x[l.strs(i, 0)], x[l.strs(i, 1)], x[l.strs(i, 2)]]))
                    .collect(),
            },
            n,
        }
    }

    /// Velocity whose normal trace advects the stress, and for
    /// Crouzeix-Raviart also the momentum.
    fn advector(&self, u: &VectorField) -> Result<Advector, SchemeError> {
        Ok(match self.cfg.projector().projector() {
            None => Advector::Field(u.clone()),
            Some(p) => Advector::Projected(projections::project(self.mesh, u, p)?.with_zero_boundary(self.mesh)),
        })
    }

    pub(crate) fn prepare(&self, s: &State) -> Result<(StepData, f64), SchemeError> {
        let m = self.mesh;
        let nq = self.nq();
        let cfg = &self.cfg;
        let full = cfg.mode == Mode::Full;
        let zero_u = is_zero(&s.u);
        let adv = if zero_u { Advector::Field(s.u.clone()) } else { self.advector(&s.u)? };
        let mut un_q = Vec::with_capacity(m.n_triangles() * nq);
        let mut conv_q = Vec::with_capacity(un_q.capacity());
        let mut div_un_q = Vec::with_capacity(un_q.capacity());
        for k in 0..m.n_triangles() {
            for p in &self.quad.points {
                let (v, g) = s.u.eval_grad(m, k, *p);
                un_q.push(v);
                div_un_q.push(g.trace());
                conv_q.push(match (&adv, self.vel) {
                    (Advector::Projected(pr), Element::Cr) => pr.eval(m, k, *p),
                    _ => v,
                });
            }
        }
        let mut area_defect = 0.0;
        if full && self.vel == Element::Cr && cfg.cr_momentum == CrMomentum::Characteristic && !zero_u {
            for k in 0..m.n_triangles() {
                for (q, p) in self.quad.points.iter().enumerate() {
                    let f = transport::trace_foot(m, adv.velocity(), m.point(k, *p), k, cfg.dt, cfg.flow_substeps)?;
                    un_q[k * nq + q] = s.u.eval(m, f.element, f.bary);
                }
            }
        }
        let pi_prev = pi_h(&s.stress).values;
        let mut cmap = None;
        let mut stress_up = None;
        let mut lie_tilde = None;
        if cfg.mode != Mode::StokesOnly {
            match cfg.advection {
                Advection::Characteristic => {
                    let map = if zero_u {
                        CharacteristicMap::identity(m)
                    } else {
                        transport::build_characteristic_map(m, adv.velocity(), cfg.dt, cfg.flow_substeps)?
                    };
                    area_defect = map.area_defect;
                    if cfg.formulation == Formulation::Lie {
                        lie_tilde = Some(map.pullback_p0(m, &pi_prev));
                    }
                    cmap = Some(map);
                }
                Advection::Dg => {
                    stress_up = Some(if zero_u {
                        EdgeUpwindData { points: Vec::new() }
                    } else {
                        match &adv {
                            Advector::Field(f) => transport::upwind_from_field(m, f)?,
                            Advector::Projected(p) => transport::upwind_from_projection(m, p)?,
                        }
                    });
                }
            }
        }
        let mom_up = match (&adv, self.vel, cfg.cr_momentum) {
            (Advector::Projected(p), Element::Cr, CrMomentum::Dg) if full && !zero_u => {
                Some(transport::upwind_from_projection(m, p)?)
            }
            _ => None,
        };
        let data = StepData { x_prev: self.pack(s), un_q, conv_q, div_un_q, pi_prev, cmap, stress_up, mom_up, lie_tilde };
        Ok((data, area_defect))
    }

    /// Linearized system at `iterate`: the Newton matrix `J` and
    /// `b = J x* - R(x*)`, with boundary and pinned rows replaced.
    pub fn assemble_system(&self, state: &State, iterate: &State) -> Result<(Triplets, Vec<f64>), SchemeError> {
        let (data, _) = self.prepare(state)?;
        self.assemble_with(&data, &self.pack(iterate))
    }

    pub(crate) fn assemble_with(&self, data: &StepData, x: &[f64]) -> Result<(Triplets, Vec<f64>), SchemeError> {
        let (j, r) = assembly::assemble(self, data, x)?;
        let mut b = j.mul_vec(x);
        for (bi, ri) in b.iter_mut().zip(&r) {
            *bi -= ri;
        }
        Ok(self.apply_constraints(j, b, data))
    }

    fn apply_constraints(&self, mut j: Triplets, mut b: Vec<f64>, data: &StepData) -> (Triplets, Vec<f64>) {
        let l = &self.layout;
        let mut rows = vec![false; l.n];
        let frozen = self.cfg.mode == Mode::FrozenVelocity;
        for i in 0..l.n_u {
            for c in 0..2 {
                let r = l.vel(c, i);
                if frozen || self.fixed_vel[i] {
                    rows[r] = true;
                    b[r] = if self.fixed_vel[i] { 0.0 } else { data.x_prev[r] };
                }
            }
        }
        for i in 0..l.n_p {
            let r = l.pres(i);
            if frozen || i == 0 {
                rows[r] = true;
                b[r] = if i == 0 { 0.0 } else { data.x_prev[r] };
            }
        }
        if self.cfg.mode == Mode::StokesOnly {
            for r in l.off_s..l.n {
                rows[r] = true;
                b[r] = data.x_prev[r];
            }
        }
        j.set_identity_rows(&rows);
        (j, b)
    }

    /// One time step from `state`.
    pub fn step(&self, state: &State) -> Result<(State, StepReport), SchemeError> {
        let (data, area_defect) = self.prepare(state)?;
        let mut x = data.x_prev.clone();
        let mut report = StepReport { area_defect, ..Default::default() };
        let tol = self.cfg.fixed_point.tol;
        let mut update = f64::INFINITY;
        for it in 1..=self.cfg.fixed_point.max_iters {
            let (a, b) = self.assemble_with(&data, &x)?;
            // Solve for the correction: near convergence its roundoff is
            // relative to the correction, not to the solution.
            let mut rhs = a.mul_vec(&x);
            for (ri, bi) in rhs.iter_mut().zip(&b) {
                *ri = bi - *ri;
            }
            let (dx, stats) = linalg::solve(&a, &rhs, self.cfg.linear_solver.tol)?;
            let xn: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
            update = self.layout.relative_update(&x, &xn);
            x = xn;
            report.fp_iters = it;
            report.linear = stats;
            if !x.iter().all(|v| v.is_finite()) {
                break;
            }
            if update < tol {
                break;
            }
        }
        report.final_update = update;
        let next = self.unpack(&x, state.n + 1);
        if !(update < tol) {
            return Err(SchemeError::NonConvergence {
                iters: report.fp_iters,
                update,
                last: Box::new(next),
            });
        }
        if self.cfg.formulation != Formulation::Log {
            let (element, eigenvalue) = min_eigenvalue(&next.stress);
            if !(eigenvalue > 0.0) {
                return Err(SchemeError::Positivity { element, eigenvalue });
            }
            report.min_eig = Some(eigenvalue);
        }
        Ok((next, report))
    }

    /// Discretely divergence-free L² projection of `f`, using the pair's own
    /// constraint (including stabilization).
    pub fn leray_project(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Result<VectorField, SchemeError> {
        let (a, b) = assembly::leray_system(self, &f);
        let (j, b) = {
            let l = &self.layout;
            let mut rows = vec![false; l.n];
            let mut b = b;
            for i in 0..l.n_u {
                if self.fixed_vel[i] {
                    for c in 0..2 {
                        rows[l.vel(c, i)] = true;
                        b[l.vel(c, i)] = 0.0;
                    }
                }
            }
            rows[l.pres(0)] = true;
            b[l.pres(0)] = 0.0;
            for r in l.off_s..l.n {
                rows[r] = true;
                b[r] = 0.0;
            }
            let mut a = a;
            a.set_identity_rows(&rows);
            (a, b)
        };
        let (x, _) = linalg::solve(&j, &b, self.cfg.linear_solver.tol)?;
        Ok(self.unpack(&x, 0).u)
    }
}

/// Velocity DOFs on the boundary (homogeneous Dirichlet).
pub fn boundary_dofs(m: &Mesh, e: Element) -> Vec<bool> {
    match e {
        Element::P1 => m.boundary_vertex.clone(),
        Element::P2 => m
            .boundary_vertex
            .iter()
            .cloned()
            .chain(m.edges.iter().map(|e| e.is_boundary()))
            .collect(),
        Element::Cr => m.edges.iter().map(|e| e.is_boundary()).collect(),
        _ => vec![false; e.n_global(m)],
    }
}

/// Smallest eigenvalue of π_h of a stress field, with its element.
pub fn min_eigenvalue(f: &SymTensorField) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, s) in pi_h(f).values.iter().enumerate() {
        let e = s.min_eigenvalue();
        if !(e >= best.1) {
            best = (k, e);
        }
    }
    best
}

/// The local Lie update `[(I − Δt g)^{-1} σ (I − Δt g)^{-T} + (Δt/Wi) I] / (1 + Δt/Wi)`.
pub fn lie_step_local(sigma: &SymMat, g: &Mat2, dt: f64, wi: f64) -> Result<SymMat, SchemeError> {
    let a = Mat2::IDENTITY - g.scale(dt);
    let det = a.det();
    if !(det.abs() > 1e-12) {
        return Err(SchemeError::StepSize { element: 0, det });
    }
    let ai = a.inverse();
    let r = dt / wi;
    Ok((1.0 / (1.0 + r)) * (sigma.congruence(&ai) + SymMat::scalar(r)))
}

/// Nodal interpolation of a velocity field in the scheme's space.
pub fn interpolate_velocity(s: &Scheme, f: impl Fn([f64; 2]) -> [f64; 2]) -> VectorField {
    let mut u = VectorField::interpolate(s.vel, s.mesh, f);
    for (v, &b) in u.values.iter_mut().zip(&s.fixed_vel) {
        if b {
            *v = [0.0; 2];
        }
    }
    u
}
