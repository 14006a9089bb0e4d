//! Free energy, dissipation certificates, decay fits and the run driver.

mod lemmas;
mod output;
mod run;

use thiserror::Error;

pub use lemmas::{verify_lemmas, JacobiRow, LemmaReport};
pub use output::{write_csv, write_vtk, CSV_HEADER};
pub use run::{
    initial_state, load_config, run_simulation, simulate, InitialCondition, InitialKind, MeshSource, OutputSpec,
    RunConfig, RunSummary, Trace, EXIT_CERTIFICATE, EXIT_CONFIG, EXIT_NONCONVERGENCE, EXIT_OK,
};

use crate::mesh::{Mesh, MeshError};
use crate::schemes::{Formulation, Scheme, SchemeError, State};
use crate::spaces::{pi_h, VectorField};
use crate::tensor::{entropy_terms, log_entropy_terms, SpdMat};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("stress not positive definite on element {element} (eigenvalue {eigenvalue:e})")]
    Positivity { element: usize, eigenvalue: f64 },
    #[error("need at least {needed} records above the energy floor, have {have}")]
    TooFewRecords { needed: usize, have: usize },
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for DiagnosticsError {
    fn from(e: std::io::Error) -> Self {
        DiagnosticsError::Io(e.to_string())
    }
}

/// Energy and dissipation of one time level. Dissipation fields describe
/// the step that produced this level and are zero for the initial record.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyRecord {
    pub step: usize,
    pub time: f64,
    pub f: f64,
    pub kinetic: f64,
    pub entropic: f64,
    pub diss_kinetic: f64,
    pub diss_viscous: f64,
    pub diss_stress: f64,
    pub min_eig: f64,
    pub fp_iters: usize,
}

/// Signed slack of the discrete free-energy inequality for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub step: usize,
    pub slack: f64,
    pub tol: f64,
    pub pass: bool,
}

fn spd_element(s: &crate::tensor::SymMat, k: usize) -> Result<SpdMat, DiagnosticsError> {
    s.to_spd().map_err(|_| DiagnosticsError::Positivity { element: k, eigenvalue: s.min_eigenvalue() })
}

/// Kinetic and entropic energy of `state`. The stress enters through π_h.
pub fn compute_free_energy(state: &State, scheme: &Scheme) -> Result<EnergyRecord, DiagnosticsError> {
    let m = scheme.mesh;
    let p = scheme.cfg.params;
    let kinetic = 0.5 * p.re * state.u.l2_norm_sq(m);
    let mut entropic = 0.0;
    let mut min_eig = f64::INFINITY;
    for (k, s) in pi_h(&state.stress).values.iter().enumerate() {
        let (a, e) = match scheme.cfg.formulation {
            Formulation::Log => (log_entropy_terms(s).0, s.min_eigenvalue().exp()),
            _ => (entropy_terms(&spd_element(s, k)?).0, s.min_eigenvalue()),
        };
        entropic += m.areas[k] * a;
        min_eig = min_eig.min(e);
    }
    entropic *= 0.5 * p.eps / p.wi;
    Ok(EnergyRecord {
        step: state.n,
        time: state.n as f64 * scheme.cfg.dt,
        f: kinetic + entropic,
        kinetic,
        entropic,
        min_eig,
        ..Default::default()
    })
}

/// Energy of `next` together with the dissipation of the step `prev -> next`.
pub fn step_record(prev: &State, next: &State, scheme: &Scheme, fp_iters: usize) -> Result<EnergyRecord, DiagnosticsError> {
    let m = scheme.mesh;
    let cfg = &scheme.cfg;
    let p = cfg.params;
    let mut r = compute_free_energy(next, scheme)?;
    let du = VectorField {
        element: next.u.element,
        values: next.u.values.iter().zip(&prev.u.values).map(|(a, b)| [a[0] - b[0], a[1] - b[1]]).collect(),
    };
    r.diss_kinetic = 0.5 * p.re * du.l2_norm_sq(m);
    r.diss_viscous = cfg.dt * (1.0 - p.eps) * grad_norm_sq(m, &next.u);
    let mut ds = 0.0;
    for (k, s) in pi_h(&next.stress).values.iter().enumerate() {
        let b = match cfg.formulation {
            Formulation::Log => log_entropy_terms(s).1,
            _ => entropy_terms(&spd_element(s, k)?).1,
        };
        ds += m.areas[k] * b;
    }
    r.diss_stress = cfg.dt * 0.5 * p.eps / (p.wi * p.wi) * ds;
    r.fp_iters = fp_iters;
    Ok(r)
}

/// Broken `∫|∇u|²`.
pub fn grad_norm_sq(m: &Mesh, u: &VectorField) -> f64 {
    let q = crate::spaces::quadrature(6).expect("order 6");
    let mut s = 0.0;
    for k in 0..m.n_triangles() {
        for (p, w) in q.points.iter().zip(&q.weights) {
            let (_, g) = u.eval_grad(m, k, *p);
            s += w * m.areas[k] * g.ddot(&g);
        }
    }
    s
}

/// `F^{n+1} − F^n + dissipation ≤ tol`.
pub fn check_dissipation(prev: &EnergyRecord, next: &EnergyRecord, tol: f64) -> Certificate {
    let slack = next.f - prev.f + next.diss_kinetic + next.diss_viscous + next.diss_stress;
    Certificate { step: next.step, slack, tol, pass: slack <= tol }
}

/// Certificate tolerance for a run starting at energy `f0`.
pub fn dissipation_tolerance(scheme: &Scheme, f0: f64) -> f64 {
    10.0 * (scheme.cfg.fixed_point.tol + scheme.cfg.linear_solver.tol) * f0.max(1.0)
}

/// Least-squares fit of `ln F` against time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub slope: f64,
    /// RMS residual of the fit in `ln F`.
    pub residual: f64,
    pub points: usize,
    /// The energy fell below the floor and later records were dropped.
    pub truncated: bool,
}

pub const ENERGY_FLOOR: f64 = 1e-14;

/// Slope of `ln F` over the second half of the records above the floor.
pub fn estimate_decay_rate(records: &[EnergyRecord]) -> Result<DecayFit, DiagnosticsError> {
    let above = records.iter().take_while(|r| r.f > ENERGY_FLOOR).count();
    if above < 10 {
        return Err(DiagnosticsError::TooFewRecords { needed: 10, have: above });
    }
    let tail = &records[above / 2..above];
    let n = tail.len() as f64;
    let (mt, ml) = tail.iter().fold((0.0, 0.0), |(a, b), r| (a + r.time / n, b + r.f.ln() / n));
    let sxx: f64 = tail.iter().map(|r| (r.time - mt).powi(2)).sum();
    let sxy: f64 = tail.iter().map(|r| (r.time - mt) * (r.f.ln() - ml)).sum();
    let slope = sxy / sxx;
    let residual =
        (tail.iter().map(|r| (r.f.ln() - ml - slope * (r.time - mt)).powi(2)).sum::<f64>() / n).sqrt();
    Ok(DecayFit { slope, residual, points: tail.len(), truncated: above < records.len() })
}
