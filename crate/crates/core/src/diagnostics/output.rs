use std::fmt::Write as _;
use std::path::Path;

use super::{Certificate, DiagnosticsError, EnergyRecord};
use crate::schemes::{Formulation, Scheme, State};
use crate::spaces::pi_h;
use crate::tensor::spd_exp;

pub const CSV_HEADER: [&str; 11] = [
    "step",
    "time",
    "F",
    "kinetic",
    "entropic",
    "diss_kinetic",
    "diss_viscous",
    "diss_stress",
    "min_eig",
    "fp_iters",
    "slack",
];

/// Energy trace, one row per time level. The initial row has zero slack.
pub fn write_csv(path: &Path, records: &[EnergyRecord], certs: &[Certificate]) -> Result<(), DiagnosticsError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| DiagnosticsError::Io(e.to_string()))?;
    let io = |e: csv::Error| DiagnosticsError::Io(e.to_string());
    w.write_record(CSV_HEADER).map_err(io)?;
    for (i, r) in records.iter().enumerate() {
        let slack = if i == 0 { 0.0 } else { certs[i - 1].slack };
        let row = [
            r.step.to_string(),
            r.time.to_string(),
            r.f.to_string(),
            r.kinetic.to_string(),
            r.entropic.to_string(),
            r.diss_kinetic.to_string(),
            r.diss_viscous.to_string(),
            r.diss_stress.to_string(),
            r.min_eig.to_string(),
            r.fp_iters.to_string(),
            slack.to_string(),
        ];
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Legacy ASCII unstructured grid. Velocity is averaged to the vertices
/// from the incident triangles; pressure and π_h of the conformation tensor
/// are cell data.
pub fn write_vtk(path: &Path, scheme: &Scheme, s: &State) -> Result<(), DiagnosticsError> {
    let m = scheme.mesh;
    let mut out = String::new();
    let nv = m.n_vertices();
    let nt = m.n_triangles();
    let mut vel = vec![[0.0; 2]; nv];
    let mut count = vec![0usize; nv];
    for (k, t) in m.triangles.iter().enumerate() {
        for (i, &v) in t.iter().enumerate() {
            let mut l = [0.0; 3];
            l[i] = 1.0;
            let u = s.u.eval(m, k, l);
            vel[v][0] += u[0];
            vel[v][1] += u[1];
            count[v] += 1;
        }
    }
    let _ = writeln!(out, "# vtk DataFile Version 3.0\noldroyd step {}\nASCII\nDATASET UNSTRUCTURED_GRID", s.n);
    let _ = writeln!(out, "POINTS {nv} double");
    for p in &m.vertices {
        let _ = writeln!(out, "{} {} 0", p[0], p[1]);
    }
    let _ = writeln!(out, "CELLS {nt} {}", 4 * nt);
    for t in &m.triangles {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {nt}");
    for _ in 0..nt {
        let _ = writeln!(out, "5");
    }
    let _ = writeln!(out, "POINT_DATA {nv}\nVECTORS velocity double");
    for (u, c) in vel.iter().zip(&count) {
        let c = (*c).max(1) as f64;
        let _ = writeln!(out, "{} {} 0", u[0] / c, u[1] / c);
    }
    let _ = writeln!(out, "CELL_DATA {nt}\nSCALARS pressure double 1\nLOOKUP_TABLE default");
    for k in 0..nt {
        let _ = writeln!(out, "{}", s.p.eval(m, k, [1.0 / 3.0; 3]));
    }
    let _ = writeln!(out, "TENSORS conformation double");
    for v in pi_h(&s.stress).values {
        let c = if scheme.cfg.formulation == Formulation::Log { spd_exp(&v).map_err(crate::schemes::SchemeError::from)?.sym() } else { v };
        let _ = writeln!(out, "{} {} 0\n{} {} 0\n0 0 0", c.a11, c.a12, c.a12, c.a22);
    }
    std::fs::write(path, out)?;
    Ok(())
}
