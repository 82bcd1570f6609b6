//! Decaying Taylor-Green vortex on a doubly periodic box.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::CS2;
use crate::nurbs::{GeometryKind, GeometryParams};
use crate::solver::{BoundaryCondition, BoundarySpec, CaseSpec, Discretization, Fields};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorGreenParams {
    pub u0: f64,
    pub nu: f64,
    pub rho0: f64,
    pub p0: f64,
    pub lx: f64,
    pub ly: f64,
}

impl Default for TaylorGreenParams {
    fn default() -> Self {
        Self {
            u0: 0.05,
            nu: 1e-3,
            rho0: 1.0,
            p0: CS2,
            lx: 1.0,
            ly: 1.0,
        }
    }
}

impl TaylorGreenParams {
    pub fn kappa_x(&self) -> f64 {
        2.0 * PI / self.lx
    }

    pub fn kappa_y(&self) -> f64 {
        2.0 * PI / self.ly
    }

    pub fn kappa(&self) -> f64 {
        self.kappa_x().hypot(self.kappa_y())
    }

    /// Kinetic-energy decay rate `2 kappa^2 nu`.
    pub fn energy_decay_rate(&self) -> f64 {
        2.0 * self.kappa().powi(2) * self.nu
    }

    /// Time at which `kappa^2 nu t = 1`.
    pub fn unit_decay_time(&self) -> f64 {
        1.0 / (self.kappa().powi(2) * self.nu)
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if !(self.lx > 0.0 && self.ly > 0.0) {
            errors.push("Taylor-Green box lengths must be positive".to_string());
        }
        if !(self.nu > 0.0) {
            errors.push(format!("viscosity must be positive (got {})", self.nu));
        }
        if !(self.rho0 > 0.0) {
            errors.push(format!("rho0 must be positive (got {})", self.rho0));
        }
        if !(self.u0.abs() / CS2.sqrt() < 0.3) {
            errors.push(format!("u0 = {} exceeds the low-Mach range", self.u0));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    /// Exact `(u_x, u_y, P)` at `(x, y, t)`.
    pub fn exact(&self, x: f64, y: f64, t: f64) -> (f64, f64, f64) {
        let (kx, ky) = (self.kappa_x(), self.kappa_y());
        let k2 = self.kappa().powi(2);
        let decay = (-k2 * self.nu * t).exp();
        let ux = -self.u0 * (kx * x).cos() * (ky * y).sin() * decay;
        let uy = kx / ky * self.u0 * (kx * x).sin() * (ky * y).cos() * decay;
        let p = self.p0
            - 0.25
                * self.rho0
                * self.u0
                * self.u0
                * ((2.0 * kx * x).cos() + (kx / ky).powi(2) * (2.0 * ky * y).cos())
                * decay
                * decay;
        (ux, uy, p)
    }

    /// LBM density carrying the exact pressure: `rho0 + (P - P0) / cs^2`.
    pub fn density(&self, pressure: f64) -> f64 {
        self.rho0 + (pressure - self.p0) / CS2
    }

    /// Exact fields sampled at every collocation point.
    pub fn exact_fields(&self, disc: &Discretization, t: f64) -> Fields {
        let mut out = Fields::default();
        for &[x, y] in &disc.colloc.physical {
            let (ux, uy, p) = self.exact(x, y, t);
            out.rho.push(self.density(p));
            out.ux.push(ux);
            out.uy.push(uy);
        }
        out
    }
}

/// Periodic box case with `points` collocation points per direction.
pub fn tgv_case(params: &TaylorGreenParams, points: usize, degree: usize) -> Result<CaseSpec> {
    params.validate()?;
    let kind = GeometryKind::PeriodicBox;
    let mut gp = GeometryParams::with_points(kind, degree, points)?;
    gp.length = [params.lx, params.ly];
    let prm = *params;
    Ok(CaseSpec {
        name: "taylor_green".into(),
        geometry: kind,
        geometry_params: gp,
        boundary: BoundarySpec::periodic(),
        nu: params.nu,
        initial: Arc::new(move |[x, y]| {
            let (ux, uy, p) = prm.exact(x, y, 0.0);
            (prm.density(p), [ux, uy])
        }),
    })
}

/// The same vortex on the curved_quad map of the unit square, driven by the
/// exact solution through far-field edges. Exploratory only.
pub fn tgv_curved_case(
    params: &TaylorGreenParams,
    points: usize,
    degree: usize,
    amplitude: f64,
) -> Result<CaseSpec> {
    params.validate()?;
    if params.lx != 1.0 || params.ly != 1.0 {
        return Err(Error::Invalid(
            "the curved Taylor-Green case is defined on the unit square".into(),
        ));
    }
    let kind = GeometryKind::CurvedQuad;
    let mut gp = GeometryParams::with_points(kind, degree, points)?;
    gp.amplitude = amplitude;
    let prm = *params;
    let target = move |[x, y]: [f64; 2], t: f64| {
        let (ux, uy, p) = prm.exact(x, y, t);
        (prm.density(p), [ux, uy])
    };
    Ok(CaseSpec {
        name: "taylor_green_curved".into(),
        geometry: kind,
        geometry_params: gp,
        boundary: BoundarySpec::uniform(BoundaryCondition::AnalyticFarfield(Arc::new(target))),
        nu: params.nu,
        initial: Arc::new(move |x| target(x, 0.0)),
    })
}

/// `||u_num - u_exact|| / ||u_exact||` over all points and both components.
pub fn l2_error(num: &Fields, exact: &Fields) -> Result<f64> {
    if num.ux.len() != exact.ux.len() || num.uy.len() != exact.uy.len() {
        return Err(Error::Invalid("l2_error: field sizes differ".into()));
    }
    let mut diff = 0.0;
    let mut norm = 0.0;
    for (a, b) in [(&num.ux, &exact.ux), (&num.uy, &exact.uy)] {
        for (x, y) in a.iter().zip(b.iter()) {
            diff += (x - y) * (x - y);
            norm += y * y;
        }
    }
    if norm == 0.0 {
        return Err(Error::Invalid("l2_error: exact field is identically zero".into()));
    }
    Ok((diff / norm).sqrt())
}

/// Least-squares slope of `-ln(E)` against `t`.
pub fn fitted_decay_rate(times: &[f64], energy: &[f64]) -> Result<f64> {
    if times.len() != energy.len() || times.len() < 2 {
        return Err(Error::Invalid("decay fit needs at least two samples".into()));
    }
    if energy.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Invalid("decay fit needs positive energies".into()));
    }
    let n = times.len() as f64;
    let logs: Vec<f64> = energy.iter().map(|e| e.ln()).collect();
    let tm = times.iter().sum::<f64>() / n;
    let lm = logs.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (t, l) in times.iter().zip(&logs) {
        sxy += (t - tm) * (l - lm);
        sxx += (t - tm) * (t - tm);
    }
    Ok(-sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{OperatorMode, Solver, SolverConfig};
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_solution_values() {
        let p = TaylorGreenParams::default();
        let (ux, uy, _) = p.exact(0.0, 0.0, 3.0);
        assert_eq!((ux, uy), (0.0, 0.0));
        let (ux, _, _) = p.exact(0.0, 0.25, 0.0);
        assert_abs_diff_eq!(ux, -p.u0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.energy_decay_rate(), 2.0 * 8.0 * PI * PI * 1e-3, epsilon = 1e-15);
    }

    #[test]
    fn energy_integral_decays_exactly() {
        // midpoint rule is exact for these trigonometric polynomials
        let p = TaylorGreenParams {
            lx: 2.0,
            ly: 1.0,
            ..Default::default()
        };
        let m = 32;
        let energy = |t: f64| {
            let mut e = 0.0;
            for i in 0..m {
                for j in 0..m {
                    let x = (i as f64 + 0.5) * p.lx / m as f64;
                    let y = (j as f64 + 0.5) * p.ly / m as f64;
                    let (u, v, _) = p.exact(x, y, t);
                    e += 0.5 * (u * u + v * v);
                }
            }
            e * p.lx * p.ly / (m * m) as f64
        };
        let t = 5.0;
        assert_abs_diff_eq!(
            energy(t) / energy(0.0),
            (-p.energy_decay_rate() * t).exp(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn case_initial_fields() {
        let p = TaylorGreenParams::default();
        let case = tgv_case(&p, 16, 3).unwrap();
        let s = Solver::new(&case, SolverConfig::default()).unwrap();
        let umax = s.fields.speed().into_iter().fold(0.0, f64::max);
        assert!(umax <= p.u0 * (1.0 + 1e-12) && umax > 0.95 * p.u0);
        let mean = s.fields.rho.iter().sum::<f64>() / s.fields.rho.len() as f64;
        assert_abs_diff_eq!(mean, p.rho0, epsilon = 1e-12);

        let rest = TaylorGreenParams { u0: 0.0, ..p };
        let s = Solver::new(&tgv_case(&rest, 8, 3).unwrap(), SolverConfig::default()).unwrap();
        assert!(s.fields.speed().iter().all(|v| *v == 0.0));
        assert!(s.fields.rho.iter().all(|r| (r - 1.0).abs() < 1e-15));
    }

    #[test]
    fn l2_error_definition() {
        let exact = Fields {
            rho: vec![1.0; 3],
            ux: vec![1.0, -2.0, 0.5],
            uy: vec![0.0, 1.0, 3.0],
        };
        assert_eq!(l2_error(&exact, &exact).unwrap(), 0.0);
        let scaled = Fields {
            rho: exact.rho.clone(),
            ux: exact.ux.iter().map(|v| v * 1.01).collect(),
            uy: exact.uy.iter().map(|v| v * 1.01).collect(),
        };
        assert_abs_diff_eq!(l2_error(&scaled, &exact).unwrap(), 0.01, epsilon = 1e-12);
        let zero = Fields {
            rho: vec![1.0; 3],
            ux: vec![0.0; 3],
            uy: vec![0.0; 3],
        };
        assert!(l2_error(&exact, &zero).is_err());
    }

    #[test]
    fn decay_fit_recovers_rate() {
        let t: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        let e: Vec<f64> = t.iter().map(|t| 2.5 * (-0.37 * t).exp()).collect();
        assert_abs_diff_eq!(fitted_decay_rate(&t, &e).unwrap(), 0.37, epsilon = 1e-12);
    }

    #[test]
    fn curved_case_builds() {
        let case = tgv_curved_case(&TaylorGreenParams::default(), 12, 2, 0.1).unwrap();
        let cfg = SolverConfig {
            operators: OperatorMode::Tensor,
            n_max: 5,
            ..SolverConfig::default()
        };
        let mut s = Solver::new(&case, cfg).unwrap();
        s.run(|_, _| Ok(())).unwrap();
    }
}
