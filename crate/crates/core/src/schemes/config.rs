use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::projections::Projector;
use crate::spaces::Element;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formulation {
    Conformation,
    Log,
    Lie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Advection {
    Characteristic,
    Dg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementFamily {
    ScottVogelius,
    TaylorHood,
    CrouzeixRaviart,
    P1p1Stab,
    P1p0Stab,
}

impl ElementFamily {
    pub const ALL: [ElementFamily; 5] = [
        ElementFamily::ScottVogelius,
        ElementFamily::TaylorHood,
        ElementFamily::CrouzeixRaviart,
        ElementFamily::P1p1Stab,
        ElementFamily::P1p0Stab,
    ];

    pub fn velocity(self) -> Element {
        match self {
            ElementFamily::ScottVogelius | ElementFamily::TaylorHood => Element::P2,
            ElementFamily::CrouzeixRaviart => Element::Cr,
            ElementFamily::P1p1Stab | ElementFamily::P1p0Stab => Element::P1,
        }
    }

    pub fn pressure(self) -> Element {
        match self {
            ElementFamily::ScottVogelius => Element::P1Disc,
            ElementFamily::TaylorHood | ElementFamily::P1p1Stab => Element::P1,
            ElementFamily::CrouzeixRaviart | ElementFamily::P1p0Stab => Element::P0,
        }
    }

    /// Velocity gradient is elementwise constant.
    pub fn p0_gradient(self) -> bool {
        matches!(self.velocity(), Element::Cr | Element::P1)
    }

    /// Families whose velocity is not weakly divergence free and need the
    /// skew-symmetrizing convection correction.
    pub fn needs_temam(self) -> bool {
        matches!(self, ElementFamily::TaylorHood | ElementFamily::P1p1Stab | ElementFamily::P1p0Stab)
    }

    fn default_projector(self) -> VelocityProjector {
        match self {
            ElementFamily::ScottVogelius => VelocityProjector::None,
            ElementFamily::CrouzeixRaviart => VelocityProjector::Bdm,
            _ => VelocityProjector::Rot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StressSpace {
    P0,
    #[serde(rename = "P1disc")]
    P1Disc,
}

impl StressSpace {
    pub fn element(self) -> Element {
        match self {
            StressSpace::P0 => Element::P0,
            StressSpace::P1Disc => Element::P1Disc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VelocityProjector {
    None,
    Rot,
    Rt0,
    Bdm,
}

impl VelocityProjector {
    pub fn projector(self) -> Option<Projector> {
        match self {
            VelocityProjector::None => None,
            VelocityProjector::Rot => Some(Projector::Rot),
            VelocityProjector::Rt0 => Some(Projector::Rt0),
            VelocityProjector::Bdm => Some(Projector::Bdm),
        }
    }
}

/// Which parts of the coupled system are solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Full,
    /// Velocity and pressure are held at their current values.
    FrozenVelocity,
    /// Unsteady Stokes: no convection, no stress coupling, stress held fixed.
    StokesOnly,
}

/// Treatment of `u·∇u` for Crouzeix-Raviart velocities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CrMomentum {
    #[default]
    Dg,
    /// Experimental: pull `u^n` back along the projected flow at quadrature points.
    Characteristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    pub re: f64,
    pub wi: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerance {
    pub tol: f64,
    pub max_iters: usize,
}

fn default_fixed_point() -> Tolerance {
    Tolerance { tol: 1e-10, max_iters: 30 }
}

fn default_linear() -> Tolerance {
    Tolerance { tol: 1e-10, max_iters: 1 }
}

fn default_degeneracy() -> f64 {
    1e-10
}

fn default_substeps() -> usize {
    4
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub formulation: Formulation,
    pub advection: Advection,
    pub elements: ElementFamily,
    pub stress_space: StressSpace,
    /// Defaults to the family's projector: none, rot, or bdm for Crouzeix-Raviart.
    #[serde(default)]
    pub velocity_projector: Option<VelocityProjector>,
    pub dt: f64,
    pub params: PhysicalParams,
    #[serde(default = "default_fixed_point")]
    pub fixed_point: Tolerance,
    #[serde(default = "default_linear")]
    pub linear_solver: Tolerance,
    #[serde(default = "default_degeneracy")]
    pub degeneracy_tol: f64,
    #[serde(default = "default_substeps")]
    pub flow_substeps: usize,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub cr_momentum: CrMomentum,
}

impl SchemeConfig {
    pub fn new(
        formulation: Formulation,
        advection: Advection,
        elements: ElementFamily,
        stress_space: StressSpace,
    ) -> SchemeConfig {
        SchemeConfig {
            formulation,
            advection,
            elements,
            stress_space,
            velocity_projector: None,
            dt: 0.01,
            params: PhysicalParams { re: 1.0, wi: 0.5, eps: 0.5 },
            fixed_point: default_fixed_point(),
            linear_solver: default_linear(),
            degeneracy_tol: default_degeneracy(),
            flow_substeps: default_substeps(),
            mode: Mode::Full,
            cr_momentum: CrMomentum::Dg,
        }
    }

    pub fn projector(&self) -> VelocityProjector {
        self.velocity_projector.unwrap_or(self.elements.default_projector())
    }

    /// Experimental combinations, flagged in reports.
    pub fn is_experimental(&self) -> bool {
        self.elements == ElementFamily::CrouzeixRaviart
            && (self.projector() == VelocityProjector::Rot || self.cr_momentum == CrMomentum::Characteristic)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = self.params;
        if !(p.wi > 0.0) || !p.wi.is_finite() {
            return Err(invalid("wi must be positive"));
        }
        if !(p.eps > 0.0 && p.eps < 1.0) {
            return Err(invalid("eps must lie in (0, 1)"));
        }
        if !(p.re >= 0.0) || !p.re.is_finite() {
            return Err(invalid("re must be non-negative"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid("dt must be positive"));
        }
        if self.fixed_point.max_iters == 0 || !(self.fixed_point.tol > 0.0) {
            return Err(invalid("fixed_point needs tol > 0 and max_iters >= 1"));
        }
        if !(self.linear_solver.tol > 0.0) {
            return Err(invalid("linear_solver.tol must be positive"));
        }
        if self.flow_substeps == 0 {
            return Err(invalid("flow_substeps must be at least 1"));
        }
        if !(self.degeneracy_tol >= 0.0) {
            return Err(invalid("degeneracy_tol must be non-negative"));
        }
        let proj = self.projector();
        match self.elements {
            ElementFamily::ScottVogelius if proj != VelocityProjector::None => {
                return Err(invalid("scott-vogelius velocities are divergence free and take no projector"));
            }
            ElementFamily::TaylorHood | ElementFamily::P1p1Stab | ElementFamily::P1p0Stab
                if proj != VelocityProjector::Rot =>
            {
                return Err(invalid(
                    "taylor-hood and stabilized pairs require the rot projector: only it yields a well defined normal trace",
                ));
            }
            ElementFamily::CrouzeixRaviart if proj == VelocityProjector::None => {
                return Err(invalid("crouzeix-raviart requires a projector (rot, rt0 or bdm)"));
            }
            _ => {}
        }
        if self.formulation == Formulation::Lie
            && (self.stress_space != StressSpace::P0
                || self.elements != ElementFamily::ScottVogelius
                || self.advection != Advection::Characteristic)
        {
            return Err(invalid("lie formulation requires scott-vogelius, P0 stress and characteristic advection"));
        }
        Ok(())
    }

    /// Every configuration accepted by [`SchemeConfig::validate`] with
    /// default projectors.
    pub fn valid_matrix() -> Vec<SchemeConfig> {
        let mut out = Vec::new();
        for f in [Formulation::Conformation, Formulation::Log] {
            for a in [Advection::Characteristic, Advection::Dg] {
                for e in ElementFamily::ALL {
                    for s in [StressSpace::P0, StressSpace::P1Disc] {
                        out.push(SchemeConfig::new(f, a, e, s));
                    }
                }
            }
        }
        out.push(SchemeConfig::new(
            Formulation::Lie,
            Advection::Characteristic,
            ElementFamily::ScottVogelius,
            StressSpace::P0,
        ));
        out
    }
}
