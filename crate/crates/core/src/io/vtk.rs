//! Legacy ASCII VTK structured-grid snapshots.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lattice::CS2;
use crate::solver::Solver;

/// Macroscopic fields at the collocation points, `u`-fastest on an
/// `nu x nv` grid. Pressure is derived from density on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    pub shape: (usize, usize),
    pub points: Vec<[f64; 2]>,
    pub rho: Vec<f64>,
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
    pub time: f64,
    pub step: usize,
}

impl FieldSnapshot {
    pub fn from_solver(s: &Solver) -> Self {
        Self {
            shape: s.disc.colloc.shape(),
            points: s.disc.colloc.physical.clone(),
            rho: s.fields.rho.clone(),
            ux: s.fields.ux.clone(),
            uy: s.fields.uy.clone(),
            time: s.state.time,
            step: s.state.step,
        }
    }

    pub fn pressure(&self) -> Vec<f64> {
        self.rho.iter().map(|r| r * CS2).collect()
    }

    pub fn speed(&self) -> Vec<f64> {
        self.ux.iter().zip(&self.uy).map(|(u, v)| u.hypot(*v)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.shape.0 * self.shape.1;
        let lens = [self.points.len(), self.rho.len(), self.ux.len(), self.uy.len()];
        if n == 0 || lens.iter().any(|&l| l != n) {
            return Err(Error::Invalid(format!(
                "snapshot arrays {lens:?} do not match the {}x{} grid",
                self.shape.0, self.shape.1
            )));
        }
        Ok(())
    }
}

/// Renders the snapshot as a VTK legacy ASCII `STRUCTURED_GRID` with
/// `density`, `pressure`, `velocity_magnitude` and `velocity`.
pub fn vtk_string(snap: &FieldSnapshot) -> Result<String> {
    snap.validate()?;
    let (nu, nv) = snap.shape;
    let n = nu * nv;
    let mut out = String::with_capacity(n * 160);
    // writing into a String cannot fail
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "iga-lbm step {} time {:.17e}", snap.step, snap.time);
    let _ = writeln!(out, "ASCII\nDATASET STRUCTURED_GRID");
    let _ = writeln!(out, "DIMENSIONS {nu} {nv} 1");
    let _ = writeln!(out, "POINTS {n} double");
    for p in &snap.points {
        let _ = writeln!(out, "{:.17e} {:.17e} 0", p[0], p[1]);
    }
    let _ = writeln!(out, "POINT_DATA {n}");
    for (name, values) in [
        ("density", snap.rho.clone()),
        ("pressure", snap.pressure()),
        ("velocity_magnitude", snap.speed()),
    ] {
        let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in values {
            let _ = writeln!(out, "{v:.17e}");
        }
    }
    let _ = writeln!(out, "VECTORS velocity double");
    for (u, v) in snap.ux.iter().zip(&snap.uy) {
        let _ = writeln!(out, "{u:.17e} {v:.17e} 0");
    }
    Ok(out)
}

pub fn write_vtk(snap: &FieldSnapshot, path: &Path) -> Result<()> {
    let text = vtk_string(snap)?;
    std::fs::write(path, text)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}
