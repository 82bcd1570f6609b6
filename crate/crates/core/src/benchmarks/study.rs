//! Taylor-Green refinement study.

use log::{info, warn};

use super::taylor_green::{l2_error, tgv_case, TaylorGreenParams};
use crate::error::{Error, Result};
use crate::solver::{Solver, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StudyMode {
    #[default]
    Solve,
    /// Injects the exact solution instead of solving; checks the harness.
    ExactInjection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub points: usize,
    /// Grid spacing `Lx / points`.
    pub h: f64,
    pub steps: usize,
    pub dt: f64,
    pub error: Option<f64>,
    /// `log(E_prev / E) / log(h_prev / h)`; absent on the first row.
    pub order: Option<f64>,
    /// `|M(T) - M(0)| / M(0)`.
    pub mass_drift: Option<f64>,
    /// Step at which the run diverged, with the solver's message.
    pub failure: Option<(usize, String)>,
}

/// Runs the periodic vortex to `final_time` at each resolution. Divergence
/// is recorded in its row and the study continues.
pub fn convergence_study(
    params: &TaylorGreenParams,
    resolutions: &[usize],
    degree: usize,
    final_time: f64,
    config: &SolverConfig,
    mode: StudyMode,
) -> Result<Vec<StudyRow>> {
    if resolutions.len() < 3 {
        return Err(Error::Invalid("a convergence study needs at least 3 resolutions".into()));
    }
    if !(final_time > 0.0) {
        return Err(Error::Invalid(format!("final time must be positive (got {final_time})")));
    }
    let cfg = SolverConfig {
        final_time: Some(final_time),
        n_max: usize::MAX,
        ..config.clone()
    };
    let mut rows: Vec<StudyRow> = Vec::with_capacity(resolutions.len());
    for &points in resolutions {
        let case = tgv_case(params, points, degree)?;
        let mut solver = Solver::new(&case, cfg.clone())?;
        let mut row = StudyRow {
            points,
            h: params.lx / points as f64,
            steps: 0,
            dt: solver.dt,
            error: None,
            order: None,
            mass_drift: None,
            failure: None,
        };
        let exact = params.exact_fields(&solver.disc, final_time);
        let m0 = solver.last_diagnostics().map(|d| d.total_mass).unwrap_or(0.0);
        match mode {
            StudyMode::ExactInjection => {
                row.error = Some(l2_error(&exact, &exact)?);
                row.mass_drift = Some(0.0);
            }
            StudyMode::Solve => match solver.run(|_, _| Ok(())) {
                Ok(summary) => {
                    row.steps = summary.steps;
                    row.error = Some(l2_error(&solver.fields, &exact)?);
                    let m1 = summary.history.last().map(|d| d.total_mass).unwrap_or(m0);
                    row.mass_drift = Some((m1 - m0).abs() / m0);
                }
                Err(Error::Divergence { step, reason, .. }) => {
                    warn!("{points} points: diverged at step {step}: {reason}");
                    row.failure = Some((step, reason));
                }
                Err(e) => return Err(e),
            },
        }
        if let (Some(prev), Some(e)) = (rows.last(), row.error) {
            if let Some(pe) = prev.error {
                if pe > 0.0 && e > 0.0 {
                    row.order = Some((pe / e).ln() / (prev.h / row.h).ln());
                }
            }
        }
        info!(
            "{points} points: error {:?}, order {:?}, mass drift {:?}",
            row.error, row.order, row.mass_drift
        );
        rows.push(row);
    }
    Ok(rows)
}
