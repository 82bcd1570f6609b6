//! CSV writers for diagnostics, centerline samples and study tables.

use std::fmt::Write as _;
use std::path::Path;

use crate::benchmarks::StudyRow;
use crate::error::{Error, Result};
use crate::solver::Diagnostics;

pub const DIAGNOSTICS_HEADER: &str = "step,time,total_mass,kinetic_energy,max_velocity,residual_u,residual_rho";

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn diagnostics_csv(rows: &[Diagnostics]) -> String {
    let mut out = String::from(DIAGNOSTICS_HEADER);
    out.push('\n');
    for d in rows {
        let _ = writeln!(
            out,
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            d.step, d.time, d.total_mass, d.kinetic_energy, d.max_velocity, d.residual_u, d.residual_rho
        );
    }
    out
}

pub fn write_diagnostics_csv(rows: &[Diagnostics], path: &Path) -> Result<()> {
    write(path, &diagnostics_csv(rows))
}

/// `coordinate,velocity` in full precision. Refuses empty input without
/// touching the file system.
pub fn write_centerline_csv(samples: &[(f64, f64)], path: &Path) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Invalid("no centerline samples to write".into()));
    }
    let mut out = String::from("coordinate,velocity\n");
    for (c, v) in samples {
        let _ = writeln!(out, "{c:.17e},{v:.17e}");
    }
    write(path, &out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.17e}")).unwrap_or_default()
}

pub fn study_csv(rows: &[StudyRow]) -> String {
    let mut out = String::from("points,h,steps,dt,l2_error,order,mass_drift,failure\n");
    for r in rows {
        let failure = match &r.failure {
            Some((step, reason)) => format!("step {step}: {reason}").replace(['"', '\n'], " "),
            None => String::new(),
        };
        let _ = writeln!(
            out,
            "{},{:.17e},{},{:.17e},{},{},{},\"{failure}\"",
            r.points,
            r.h,
            r.steps,
            r.dt,
            opt(r.error),
            opt(r.order),
            opt(r.mass_drift)
        );
    }
    out
}

pub fn write_study_csv(rows: &[StudyRow], path: &Path) -> Result<()> {
    write(path, &study_csv(rows))
}
