//! Browser bindings: a decaying-vortex run stepped from JavaScript, the
//! pure-relaxation oracle and the randomized matrix identities.

use oldroyd::diagnostics::{compute_free_energy, initial_state, verify_lemmas, InitialCondition, InitialKind};
use oldroyd::mesh::{barycentric_refine, build_structured_mesh, Mesh, Rect};
use oldroyd::schemes::{Advection, ElementFamily, Formulation, Scheme, SchemeConfig, State, StressSpace};
use oldroyd::spaces::pi_h;
use oldroyd::tensor::{spd_exp, SymMat};
use wasm_bindgen::prelude::*;

fn parse_config(formulation: &str, advection: &str, elements: &str, stress: &str) -> Result<SchemeConfig, String> {
    let f = match formulation {
        "conformation" => Formulation::Conformation,
        "log" => Formulation::Log,
        "lie" => Formulation::Lie,
        o => return Err(format!("unknown formulation {o}")),
    };
    let a = match advection {
        "characteristic" => Advection::Characteristic,
        "dg" => Advection::Dg,
        o => return Err(format!("unknown advection {o}")),
    };
    let e = match elements {
        "scott-vogelius" => ElementFamily::ScottVogelius,
        "taylor-hood" => ElementFamily::TaylorHood,
        "crouzeix-raviart" => ElementFamily::CrouzeixRaviart,
        "p1p1-stab" => ElementFamily::P1p1Stab,
        "p1p0-stab" => ElementFamily::P1p0Stab,
        o => return Err(format!("unknown element family {o}")),
    };
    let s = match stress {
        "P0" => StressSpace::P0,
        "P1disc" => StressSpace::P1Disc,
        o => return Err(format!("unknown stress space {o}")),
    };
    let cfg = SchemeConfig::new(f, a, e, s);
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

/// Decaying vortex on a barycentric-refined `n × n` grid of the unit square.
#[wasm_bindgen]
pub struct Vortex {
    mesh: Mesh,
    cfg: SchemeConfig,
    state: State,
    energy: Vec<f64>,
}

#[wasm_bindgen]
impl Vortex {
    #[wasm_bindgen(constructor)]
    pub fn new(
        formulation: &str,
        advection: &str,
        elements: &str,
        stress: &str,
        n: usize,
        dt: f64,
    ) -> Result<Vortex, JsError> {
        let mut cfg = parse_config(formulation, advection, elements, stress).map_err(|e| JsError::new(&e))?;
        cfg.dt = dt;
        cfg.validate().map_err(|e| JsError::new(&e.to_string()))?;
        let mesh = build_structured_mesh(n.clamp(1, 16), n.clamp(1, 16), Rect::unit())
            .map(|m| barycentric_refine(&m))
            .map_err(|e| JsError::new(&e.to_string()))?;
        let scheme = Scheme::new(&mesh, cfg).map_err(|e| JsError::new(&e.to_string()))?;
        let ic = InitialCondition { kind: InitialKind::Vortex, ..Default::default() };
        let state = initial_state(&scheme, &ic, 0).map_err(|e| JsError::new(&e.to_string()))?;
        let f = compute_free_energy(&state, &scheme).map_err(|e| JsError::new(&e.to_string()))?.f;
        Ok(Vortex { mesh, cfg, state, energy: vec![f] })
    }

    /// Advances `count` steps and returns the free energy after the last one.
    pub fn step(&mut self, count: usize) -> Result<f64, JsError> {
        let scheme = Scheme::new(&self.mesh, self.cfg).map_err(|e| JsError::new(&e.to_string()))?;
        for _ in 0..count {
            let (next, _) = scheme.step(&self.state).map_err(|e| JsError::new(&e.to_string()))?;
            let f = compute_free_energy(&next, &scheme).map_err(|e| JsError::new(&e.to_string()))?.f;
            self.energy.push(f);
            self.state = next;
        }
        Ok(*self.energy.last().expect("initial energy"))
    }

    pub fn energy(&self) -> Vec<f64> {
        self.energy.clone()
    }

    /// Triangle corners, six numbers per triangle.
    pub fn triangles(&self) -> Vec<f64> {
        (0..self.mesh.n_triangles()).flat_map(|k| self.mesh.corners(k).into_iter().flatten()).collect()
    }

    /// Per triangle: speed at the barycentre and `tr σ` of the elementwise mean.
    pub fn fields(&self) -> Vec<f64> {
        let log = self.cfg.formulation == Formulation::Log;
        let stress = pi_h(&self.state.stress).values;
        let mut out = Vec::with_capacity(2 * stress.len());
        for (k, s) in stress.iter().enumerate() {
            let u = self.state.u.eval(&self.mesh, k, [1.0 / 3.0; 3]);
            let s: SymMat = if log { spd_exp(s).map(|e| e.sym()).unwrap_or(*s) } else { *s };
            out.push(u[0].hypot(u[1]));
            out.push(s.trace());
        }
        out
    }
}

/// Relaxation with `u ≡ 0` from `σ⁰ = diag(a, b)`; returns the largest
/// entrywise deviation from `I + (σ⁰ − I)/(1+Δt/Wi)ⁿ` over `steps` steps.
#[wasm_bindgen]
pub fn relaxation_error(a: f64, b: f64, wi: f64, dt: f64, steps: usize) -> Result<f64, JsError> {
    let mesh = build_structured_mesh(2, 2, Rect::unit())
        .map(|m| barycentric_refine(&m))
        .map_err(|e| JsError::new(&e.to_string()))?;
    let mut cfg = parse_config("conformation", "dg", "scott-vogelius", "P0").map_err(|e| JsError::new(&e))?;
    cfg.dt = dt;
    cfg.params.wi = wi;
    cfg.mode = oldroyd::schemes::Mode::FrozenVelocity;
    let scheme = Scheme::new(&mesh, cfg).map_err(|e| JsError::new(&e.to_string()))?;
    let ic = InitialCondition { kind: InitialKind::Relaxation, sigma: Some([a, 0.0, b]), ..Default::default() };
    let mut s = initial_state(&scheme, &ic, 0).map_err(|e| JsError::new(&e.to_string()))?;
    let mut worst: f64 = 0.0;
    for n in 1..=steps {
        s = scheme.step(&s).map_err(|e| JsError::new(&e.to_string()))?.0;
        let r = (1.0 + dt / wi).powi(n as i32);
        let exact = [1.0 + (a - 1.0) / r, 0.0, 1.0 + (b - 1.0) / r];
        for v in &s.stress.values {
            worst = worst.max((v.a11 - exact[0]).abs()).max(v.a12.abs()).max((v.a22 - exact[2]).abs());
        }
    }
    Ok(worst)
}

/// Text report of the randomized matrix inequalities and identities.
#[wasm_bindgen]
pub fn lemma_report(samples: usize, seed: u64) -> String {
    verify_lemmas(samples.min(20000), seed).to_string()
}
