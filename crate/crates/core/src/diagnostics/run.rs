use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_dissipation, compute_free_energy, dissipation_tolerance, step_record, write_csv, write_vtk};
use super::{Certificate, DiagnosticsError, EnergyRecord};
use crate::mesh::{barycentric_refine, build_structured_mesh, read_mesh, Mesh, Rect};
use crate::schemes::{ElementFamily, Formulation, Mode, Scheme, SchemeConfig, SchemeError, State};
use crate::spaces::SymTensorField;
use crate::tensor::{spd_log, SymMat};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CERTIFICATE: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

/// Either a mesh file or a structured `nx × ny` mesh of the unit square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MeshSource {
    pub file: Option<PathBuf>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    /// Barycentric refinement, needed by Scott-Vogelius.
    #[serde(default)]
    pub refine: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    #[default]
    Equilibrium,
    /// `u = 0` held fixed, constant stress `sigma`.
    Relaxation,
    /// Divergence-free vortex with a smooth stress perturbation.
    Vortex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct InitialCondition {
    pub kind: InitialKind,
    /// `[s11, s12, s22]` for the relaxation start.
    pub sigma: Option<[f64; 3]>,
    /// Velocity amplitude of the vortex (default 1).
    pub amplitude: Option<f64>,
    /// Relative size of a random symmetric perturbation of the initial stress.
    #[serde(default)]
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub csv: Option<PathBuf>,
    pub vtk_dir: Option<PathBuf>,
    /// Snapshot interval in steps; 0 writes only the first and last states.
    #[serde(default)]
    pub vtk_every: usize,
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scheme: SchemeConfig,
    pub mesh: MeshSource,
    #[serde(default)]
    pub initial: InitialCondition,
    pub steps: usize,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig, DiagnosticsError> {
        let mut rc: RunConfig = toml::from_str(text).map_err(|e| DiagnosticsError::Config(e.to_string()))?;
        rc.validate()?;
        if rc.initial.kind == InitialKind::Relaxation {
            rc.scheme.mode = Mode::FrozenVelocity;
        }
        Ok(rc)
    }

    pub fn validate(&self) -> Result<(), DiagnosticsError> {
        self.scheme.validate().map_err(SchemeError::from)?;
        let m = &self.mesh;
        match (&m.file, m.nx, m.ny) {
            (Some(_), None, None) => {}
            (None, Some(nx), Some(ny)) if nx > 0 && ny > 0 => {}
            _ => return Err(DiagnosticsError::Config("mesh needs either `file` or positive `nx` and `ny`".into())),
        }
        if self.scheme.elements == ElementFamily::ScottVogelius && m.file.is_none() && !m.refine {
            // The pair is only inf-sup stable on barycentric refinements.
            return Err(DiagnosticsError::Config("scott-vogelius needs `refine = true`".into()));
        }
        if self.initial.kind == InitialKind::Relaxation {
            let s = self
                .initial
                .sigma
                .ok_or_else(|| DiagnosticsError::Config("relaxation start needs `sigma`".into()))?;
            SymMat::from_array(s)
                .to_spd()
                .map_err(|_| DiagnosticsError::Config("initial sigma must be positive definite".into()))?;
        }
        if !(self.initial.noise >= 0.0 && self.initial.noise < 0.5) {
            return Err(DiagnosticsError::Config("noise must lie in [0, 0.5)".into()));
        }
        Ok(())
    }

    pub fn build_mesh(&self, base: &Path) -> Result<Mesh, DiagnosticsError> {
        let m = match (&self.mesh.file, self.mesh.nx, self.mesh.ny) {
            (Some(f), _, _) => read_mesh(&std::fs::read_to_string(base.join(f))?)?,
            (None, Some(nx), Some(ny)) => build_structured_mesh(nx, ny, Rect::unit())?,
            _ => unreachable!("validated"),
        };
        Ok(if self.mesh.refine { barycentric_refine(&m) } else { m })
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, DiagnosticsError> {
    let text = std::fs::read_to_string(path).map_err(|e| DiagnosticsError::Config(format!("{}: {e}", path.display())))?;
    RunConfig::from_toml(&text)
}

fn stress_from(scheme: &Scheme, f: impl Fn([f64; 2]) -> SymMat) -> SymTensorField {
    let field = SymTensorField::interpolate(scheme.strs, scheme.mesh, f);
    if scheme.cfg.formulation == Formulation::Log {
        field.map(|s| spd_log(&s.to_spd().expect("initial stress is SPD")))
    } else {
        field
    }
}

/// Initial time level. The stress argument is σ⁰; the log formulation
/// stores `ln σ⁰`.
pub fn initial_state(scheme: &Scheme, ic: &InitialCondition, seed: u64) -> Result<State, DiagnosticsError> {
    let mut s = scheme.equilibrium();
    match ic.kind {
        InitialKind::Equilibrium => {}
        InitialKind::Relaxation => {
            let s0 = SymMat::from_array(ic.sigma.unwrap_or([1.0, 0.0, 1.0]));
            s.stress = stress_from(scheme, |_| s0);
        }
        InitialKind::Vortex => {
            let a = ic.amplitude.unwrap_or(1.0);
            // Curl of the stream function sin(πx) sin(πy).
            s.u = scheme.leray_project(|x| {
                let (sx, cx) = (PI * x[0]).sin_cos();
                let (sy, cy) = (PI * x[1]).sin_cos();
                [a * PI * sx * cy, -a * PI * cx * sy]
            })?;
            s.stress = stress_from(scheme, |x| {
                let w = [(PI * x[0]).sin(), (PI * x[1]).sin()];
                SymMat::IDENTITY + 0.5 * SymMat::new(w[0] * w[0], w[0] * w[1], w[1] * w[1])
            });
        }
    }
    if ic.noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let log = scheme.cfg.formulation == Formulation::Log;
        for v in &mut s.stress.values {
            let r = SymMat::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            *v = if log {
                *v + ic.noise * r
            } else {
                // ‖r‖ ≤ 2, so the shift stays below λ_min.
                *v + (ic.noise * v.min_eigenvalue() / 2.0) * r
            };
        }
    }
    Ok(s)
}

/// Records and certificates of a run. A scheme failure stops the run and is
/// kept in `failure`; the records up to that point remain valid.
#[derive(Debug, Clone)]
pub struct Trace {
    pub records: Vec<EnergyRecord>,
    pub certificates: Vec<Certificate>,
    pub tol: f64,
    pub failure: Option<DiagnosticsError>,
    pub last: State,
}

impl Trace {
    pub fn all_pass(&self) -> bool {
        self.failure.is_none() && self.certificates.iter().all(|c| c.pass)
    }

    pub fn worst_slack(&self) -> f64 {
        self.certificates.iter().map(|c| c.slack).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn steps_completed(&self) -> usize {
        self.records.len().saturating_sub(1)
    }
}

pub fn simulate(scheme: &Scheme, s0: State, steps: usize) -> Result<Trace, DiagnosticsError> {
    simulate_observed(scheme, s0, steps, |_| Ok(()))
}

/// As [`simulate`], calling `observe` on every time level including the first.
pub fn simulate_observed(
    scheme: &Scheme,
    s0: State,
    steps: usize,
    mut observe: impl FnMut(&State) -> Result<(), DiagnosticsError>,
) -> Result<Trace, DiagnosticsError> {
    let r0 = compute_free_energy(&s0, scheme)?;
    let tol = dissipation_tolerance(scheme, r0.f);
    observe(&s0)?;
    let mut trace = Trace { records: vec![r0], certificates: Vec::new(), tol, failure: None, last: s0 };
    for _ in 0..steps {
        let (next, rep) = match scheme.step(&trace.last) {
            Ok(v) => v,
            Err(e) => {
                trace.failure = Some(e.into());
                break;
            }
        };
        let rec = match step_record(&trace.last, &next, scheme, rep.fp_iters) {
            Ok(r) => r,
            Err(e) => {
                trace.failure = Some(e);
                break;
            }
        };
        let cert = check_dissipation(trace.records.last().expect("nonempty"), &rec, tol);
        observe(&next)?;
        trace.records.push(rec);
        trace.certificates.push(cert);
        trace.last = next;
    }
    Ok(trace)
}

/// Machine-readable outcome written next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub formulation: Formulation,
    pub elements: crate::schemes::ElementFamily,
    pub experimental: bool,
    pub steps_requested: usize,
    pub steps_completed: usize,
    pub tol_dissipation: f64,
    pub worst_slack: f64,
    pub failed_certificates: Vec<usize>,
    pub min_eig: f64,
    pub failure: Option<String>,
    pub exit_code: i32,
}

/// Load, run and write outputs. With `echo`, every certificate is printed.
pub fn run_simulation(config_path: &Path, echo: bool) -> i32 {
    let rc = match load_config(config_path) {
        Ok(rc) => rc,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let base = config_path.parent().unwrap_or(Path::new("."));
    match execute(&rc, base, echo) {
        Ok(code) => code,
        Err(DiagnosticsError::Config(e)) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_IO
        }
    }
}

fn execute(rc: &RunConfig, base: &Path, echo: bool) -> Result<i32, DiagnosticsError> {
    let mesh = rc.build_mesh(base)?;
    let scheme = Scheme::new(&mesh, rc.scheme).map_err(|e| DiagnosticsError::Config(e.to_string()))?;
    if rc.scheme.is_experimental() {
        eprintln!("warning: experimental configuration");
    }
    let s0 = initial_state(&scheme, &rc.initial, rc.seed)?;
    let vtk_dir = rc.output.vtk_dir.as_ref().map(|d| base.join(d));
    if let Some(d) = &vtk_dir {
        std::fs::create_dir_all(d)?;
    }
    let every = rc.output.vtk_every;
    let trace = simulate_observed(&scheme, s0, rc.steps, |s| {
        if let Some(d) = &vtk_dir {
            if s.n == 0 || s.n == rc.steps || (every > 0 && s.n % every == 0) {
                write_vtk(&d.join(format!("state_{:05}.vtk", s.n)), &scheme, s)?;
            }
        }
        Ok(())
    })?;
    if let Some(p) = &rc.output.csv {
        write_csv(&base.join(p), &trace.records, &trace.certificates)?;
    }
    if echo {
        for c in &trace.certificates {
            println!("step {:>5} slack {:+.6e} tol {:.3e} {}", c.step, c.slack, c.tol, if c.pass { "ok" } else { "FAIL" });
        }
    }
    let failed: Vec<usize> = trace.certificates.iter().filter(|c| !c.pass).map(|c| c.step).collect();
    let code = match &trace.failure {
        Some(DiagnosticsError::Scheme(_)) | Some(DiagnosticsError::Positivity { .. }) => EXIT_NONCONVERGENCE,
        Some(_) => EXIT_IO,
        None if !failed.is_empty() => EXIT_CERTIFICATE,
        None => EXIT_OK,
    };
    let summary = RunSummary {
        formulation: rc.scheme.formulation,
        elements: rc.scheme.elements,
        experimental: rc.scheme.is_experimental(),
        steps_requested: rc.steps,
        steps_completed: trace.steps_completed(),
        tol_dissipation: trace.tol,
        worst_slack: if trace.certificates.is_empty() { 0.0 } else { trace.worst_slack() },
        failed_certificates: failed,
        min_eig: trace.records.iter().map(|r| r.min_eig).fold(f64::INFINITY, f64::min),
        failure: trace.failure.as_ref().map(|e| e.to_string()),
        exit_code: code,
    };
    if let Some(p) = &rc.output.summary {
        let text = toml::to_string(&summary).map_err(|e| DiagnosticsError::Io(e.to_string()))?;
        std::fs::write(base.join(p), text)?;
    }
    eprintln!(
        "{} of {} steps, worst slack {:+.3e} (tol {:.3e}){}",
        summary.steps_completed,
        summary.steps_requested,
        summary.worst_slack,
        summary.tol_dissipation,
        summary.failure.as_ref().map(|f| format!(", stopped: {f}")).unwrap_or_default()
    );
    Ok(code)
}
