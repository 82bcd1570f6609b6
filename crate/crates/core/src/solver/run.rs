//! Case definition, solver state and the time loop.

use std::fmt;
use std::sync::Arc;

use log::{debug, info};

use super::boundary::{BoundaryPlan, BoundarySpec};
use super::config::{InitMode, SolverConfig, TauModel, TimeStep};
use super::discretization::{rk4_step, Discretization, RhsOptions, RhsWorkspace, Rk4Workspace};
use crate::error::{Error, Result};
use crate::lattice::{relaxation_time, Q};
use crate::nurbs::{build_geometry, GeometryKind, GeometryParams};

/// Initial `(rho, u)` at a physical point.
pub type InitialFn = Arc<dyn Fn([f64; 2]) -> (f64, [f64; 2]) + Send + Sync>;

/// Everything that defines a physical problem, independent of run controls.
#[derive(Clone)]
pub struct CaseSpec {
    pub name: String,
    pub geometry: GeometryKind,
    pub geometry_params: GeometryParams,
    pub boundary: BoundarySpec,
    pub nu: f64,
    pub initial: InitialFn,
}

impl fmt::Debug for CaseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CaseSpec")
            .field("name", &self.name)
            .field("geometry", &self.geometry)
            .field("geometry_params", &self.geometry_params)
            .field("boundary", &self.boundary)
            .field("nu", &self.nu)
            .finish()
    }
}

/// Neumaier's compensated summation.
#[derive(Debug, Default, Clone, Copy)]
struct NeumaierSum {
    sum: f64,
    carry: f64,
}

impl NeumaierSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub step: usize,
    pub time: f64,
    pub total_mass: f64,
    pub kinetic_energy: f64,
    pub max_velocity: f64,
    pub residual_u: f64,
    pub residual_rho: f64,
}

/// Macroscopic fields at the collocation points.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Fields {
    pub rho: Vec<f64>,
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
}

impl Fields {
    pub fn pressure(&self, cs2: f64) -> Vec<f64> {
        self.rho.iter().map(|r| r * cs2).collect()
    }

    pub fn speed(&self) -> Vec<f64> {
        self.ux.iter().zip(&self.uy).map(|(u, v)| u.hypot(*v)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct State {
    /// Direction-major distributions.
    pub f: Vec<f64>,
    pub time: f64,
    pub step: usize,
}

/// Relative change test with guarded denominators.
pub fn check_convergence(
    u_new: &[f64],
    u_old: &[f64],
    rho_new: &[f64],
    rho_old: &[f64],
    eps: f64,
) -> bool {
    rel_change(u_new, u_old) < eps && rel_change(rho_new, rho_old) < eps
}

fn rel_change(new: &[f64], old: &[f64]) -> f64 {
    let diff = new
        .iter()
        .zip(old)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let norm = new.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / (norm + 1e-14)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    FinalTime,
    MaxSteps,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub stop: StopReason,
    pub steps: usize,
    pub time: f64,
    pub history: Vec<Diagnostics>,
}

/// A case bound to a discretization, ready to step.
pub struct Solver {
    pub disc: Arc<Discretization>,
    pub plan: BoundaryPlan,
    pub config: SolverConfig,
    pub nu: f64,
    pub tau: f64,
    pub dt: f64,
    pub state: State,
    pub fields: Fields,
    velocity: Vec<f64>,
    prev_rho: Vec<f64>,
    rhs_ws: RhsWorkspace,
    rk_ws: Rk4Workspace,
    last: Option<Diagnostics>,
}

impl Solver {
    /// Builds geometry and operators for `case`, then initializes.
    pub fn new(case: &CaseSpec, config: SolverConfig) -> Result<Self> {
        let patch = build_geometry(case.geometry, &case.geometry_params)?;
        let disc = Arc::new(Discretization::new(patch, config.operators)?);
        Self::with_discretization(disc, case, config)
    }

    /// Reuses precomputed operators (they depend only on the geometry).
    pub fn with_discretization(
        disc: Arc<Discretization>,
        case: &CaseSpec,
        config: SolverConfig,
    ) -> Result<Self> {
        config.validate()?;
        if !(case.nu > 0.0 && case.nu.is_finite()) {
            return Err(Error::Invalid(format!("viscosity must be positive (got {})", case.nu)));
        }
        let plan = BoundaryPlan::new(&case.boundary, &disc)?;
        let mut dt = match config.time_step {
            TimeStep::Fixed(dt) => dt,
            TimeStep::Cfl(c) if config.adaptive_dt => disc.adaptive_timestep(c)?,
            TimeStep::Cfl(c) => disc.cfl_timestep(c)?,
        };
        if let (TimeStep::Cfl(_), Some(r)) = (config.time_step, config.max_dt_over_tau) {
            dt = Self::relaxation_cap(&config, case.nu, dt, r)?;
        }
        if let Some(t_end) = config.final_time {
            let steps = (t_end / dt).ceil().max(1.0);
            dt = t_end / steps;
        }
        let tau = Self::tau_for(&config, case.nu, dt)?;
        let n = disc.len();
        let mut f = vec![0.0; Q * n];
        for k in 0..n {
            let (rho, u) = (case.initial)(disc.colloc.physical[k]);
            let eq = disc.vset.equilibrium(rho, u).map_err(|e| {
                Error::InvalidState(format!("initial condition at point {k}: {e}"))
            })?;
            for a in 0..Q {
                f[a * n + k] = eq[a];
            }
        }
        let mut rhs_ws = RhsWorkspace::default();
        if config.init == InitMode::NonEquilibrium {
            let mut conv = vec![0.0; Q * n];
            let opts = RhsOptions {
                form: config.convection,
                parallel: false,
            };
            disc.convection(&f, &mut conv, &mut rhs_ws, opts);
            // the correction must carry no mass or momentum
            let v = &disc.vset;
            for k in 0..n {
                let (mut m0, mut mx, mut my) = (0.0, 0.0, 0.0);
                for a in 0..Q {
                    let c = conv[a * n + k];
                    m0 += c;
                    mx += v.e[a][0] * c;
                    my += v.e[a][1] * c;
                }
                for a in 0..Q {
                    let proj = v.w[a] * (m0 + (v.e[a][0] * mx + v.e[a][1] * my) / v.cs2);
                    f[a * n + k] += tau * (conv[a * n + k] - proj);
                }
            }
        }
        plan.apply(&mut f, 0.0);
        info!(
            "case {}: {} points, dt = {dt:.6e}, tau = {tau:.6e}, tau/dt = {:.3}",
            case.name,
            n,
            tau / dt
        );
        let mut solver = Self {
            disc,
            plan,
            config,
            nu: case.nu,
            tau,
            dt,
            state: State { f, time: 0.0, step: 0 },
            fields: Fields::default(),
            velocity: Vec::new(),
            prev_rho: Vec::new(),
            rhs_ws,
            rk_ws: Rk4Workspace::default(),
            last: None,
        };
        solver.update_fields();
        solver.velocity = solver.stacked_velocity();
        let d = solver.diagnostics(0.0, 0.0);
        solver.last = Some(d);
        Ok(solver)
    }

    /// `min(dt, r * tau)`; the lattice relation keeps `dt / tau < 2` by itself.
    fn relaxation_cap(config: &SolverConfig, nu: f64, dt: f64, r: f64) -> Result<f64> {
        let tau = Self::tau_for(config, nu, dt)?;
        if dt <= r * tau || (config.tau.is_none() && config.tau_model == TauModel::Lattice) {
            return Ok(dt);
        }
        info!("CFL step {dt:.4e} exceeds {r} tau; using {:.4e}", r * tau);
        Ok(r * tau)
    }

    fn tau_for(config: &SolverConfig, nu: f64, dt: f64) -> Result<f64> {
        Ok(match (config.tau, config.tau_model) {
            (Some(t), _) => t,
            (None, TauModel::Continuous) => nu / crate::lattice::CS2,
            (None, TauModel::Lattice) => relaxation_time(nu, dt)?,
        })
    }

    fn update_fields(&mut self) {
        let Fields { rho, ux, uy } = &mut self.fields;
        self.disc.moments_into(&self.state.f, rho, ux, uy);
    }

    fn stacked_velocity(&self) -> Vec<f64> {
        self.fields.ux.iter().chain(&self.fields.uy).copied().collect()
    }

    fn diagnostics(&self, residual_u: f64, residual_rho: f64) -> Diagnostics {
        let q = &self.disc.metrics.area;
        let Fields { rho, ux, uy } = &self.fields;
        // compensated sums: mass drift is monitored at round-off level
        let mut mass = NeumaierSum::default();
        let mut ke = NeumaierSum::default();
        let mut umax = 0.0f64;
        for k in 0..rho.len() {
            let u2 = ux[k] * ux[k] + uy[k] * uy[k];
            mass.add(q[k] * rho[k]);
            ke.add(q[k] * 0.5 * rho[k] * u2);
            umax = umax.max(u2.sqrt());
        }
        let (mass, ke) = (mass.value(), ke.value());
        Diagnostics {
            step: self.state.step,
            time: self.state.time,
            total_mass: mass,
            kinetic_energy: ke,
            max_velocity: umax,
            residual_u,
            residual_rho,
        }
    }

    pub fn last_diagnostics(&self) -> Option<&Diagnostics> {
        self.last.as_ref()
    }

    fn diverged(&self, step: usize, reason: String) -> Error {
        Error::Divergence {
            step,
            reason,
            last_good: self.last.map(Box::new),
        }
    }

    /// One RK4 step followed by boundary enforcement.
    pub fn step(&mut self) -> Result<Diagnostics> {
        let step = self.state.step + 1;
        if self.config.adaptive_dt {
            if let TimeStep::Cfl(c) = self.config.time_step {
                self.dt = self.disc.adaptive_timestep(c)?;
                if let Some(r) = self.config.max_dt_over_tau {
                    self.dt = Self::relaxation_cap(&self.config, self.nu, self.dt, r)?;
                }
                self.tau = Self::tau_for(&self.config, self.nu, self.dt)?;
            }
        }
        let (dt, tau) = (self.dt, self.tau);
        let opts = RhsOptions {
            form: self.config.convection,
            parallel: self.config.parallel,
        };
        let t0 = self.state.time;
        let disc = &self.disc;
        let plan = &self.plan;
        let ws = &mut self.rhs_ws;
        let per_stage = self.config.bc_per_stage;
        let result = rk4_step(
            &mut self.state.f,
            dt,
            &mut self.rk_ws,
            |f, out| disc.rhs(f, tau, out, ws, opts),
            |y| {
                if per_stage {
                    plan.apply(y, t0 + 0.5 * dt);
                }
            },
        );
        if let Err(fail) = result {
            return Err(self.diverged(step, format!("RK4 stage {}: {}", fail.stage, fail.reason)));
        }
        self.state.time = t0 + dt;
        self.state.step = step;
        self.plan.apply(&mut self.state.f, self.state.time);
        std::mem::swap(&mut self.prev_rho, &mut self.fields.rho);
        self.update_fields();
        if let Some(k) = self.fields.rho.iter().position(|r| !(*r > 0.0 && r.is_finite())) {
            let reason = format!("density {} at point {k} after update", self.fields.rho[k]);
            return Err(self.diverged(step, reason));
        }
        let new_u = self.stacked_velocity();
        let ru = rel_change(&new_u, &self.velocity);
        let rr = rel_change(&self.fields.rho, &self.prev_rho);
        self.velocity = new_u;
        let d = self.diagnostics(ru, rr);
        self.last = Some(d);
        Ok(d)
    }

    /// Time loop: steps until convergence, the final time or `n_max`.
    /// `observer` sees every `output_every`-th step and the last one.
    pub fn run(
        &mut self,
        mut observer: impl FnMut(&Solver, &Diagnostics) -> Result<()>,
    ) -> Result<RunSummary> {
        let mut history = vec![self.last.expect("initialized")];
        observer(self, &history[0])?;
        let target_steps = self
            .config
            .final_time
            .map(|t| (t / self.dt).round() as usize);
        let mut stop = StopReason::MaxSteps;
        while self.state.step < self.config.n_max {
            if target_steps.is_some_and(|s| self.state.step >= s) {
                stop = StopReason::FinalTime;
                break;
            }
            let d = self.step()?;
            let converged = self.config.final_time.is_none()
                && d.residual_u < self.config.epsilon
                && d.residual_rho < self.config.epsilon;
            let due = d.step % self.config.output_every == 0;
            if due || converged {
                debug!(
                    "step {} t={:.4} mass={:.12e} ke={:.6e} res_u={:.3e}",
                    d.step, d.time, d.total_mass, d.kinetic_energy, d.residual_u
                );
                history.push(d);
                observer(self, &d)?;
            }
            if converged {
                stop = StopReason::Converged;
                break;
            }
        }
        if target_steps.is_some_and(|s| self.state.step >= s) {
            stop = StopReason::FinalTime;
        }
        let last = self.last.expect("initialized");
        if history.last().map(|h| h.step) != Some(last.step) {
            history.push(last);
            observer(self, &last)?;
        }
        Ok(RunSummary {
            stop,
            steps: self.state.step,
            time: self.state.time,
            history,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{BoundaryCondition, Edge};

    fn rest_case(kind: GeometryKind) -> CaseSpec {
        let boundary = if kind.is_periodic() {
            BoundarySpec::periodic()
        } else {
            BoundarySpec::uniform(BoundaryCondition::BounceBack { u_wall: [0.0, 0.0] })
        };
        CaseSpec {
            name: "rest".into(),
            geometry: kind,
            geometry_params: GeometryParams::with_points(kind, 2, 10).unwrap(),
            boundary,
            nu: 0.01,
            initial: Arc::new(|_| (1.0, [0.0, 0.0])),
        }
    }

    #[test]
    fn convergence_test_semantics() {
        let u = vec![0.1, 0.2, -0.3];
        let r = vec![1.0, 1.0, 1.0];
        assert!(check_convergence(&u, &u, &r, &r, 1e-300));
        let z = vec![0.0; 3];
        assert!(check_convergence(&z, &z, &z, &z, 1e-8));
        // relative change of exactly 2 eps
        let eps = 1e-6;
        let old: Vec<f64> = u.iter().map(|x| x * (1.0 - 2.0 * eps)).collect();
        assert!(!check_convergence(&u, &old, &r, &r, eps));
        assert!(check_convergence(&u, &old, &r, &r, 3.0 * eps));
    }

    #[test]
    fn rest_state_is_fixed_point() {
        for kind in GeometryKind::ALL {
            let mut s = Solver::new(&rest_case(kind), SolverConfig::default()).unwrap();
            for _ in 0..100 {
                let d = s.step().unwrap();
                assert!(d.max_velocity < 1e-13, "{kind}: {}", d.max_velocity);
            }
        }
    }

    #[test]
    fn zero_steps_returns_initial_state() {
        let cfg = SolverConfig {
            n_max: 0,
            ..SolverConfig::default()
        };
        let mut s = Solver::new(&rest_case(GeometryKind::UnitSquare), cfg).unwrap();
        let f0 = s.state.f.clone();
        let summary = s.run(|_, _| Ok(())).unwrap();
        assert_eq!(summary.steps, 0);
        assert_eq!(summary.history.len(), 1);
        assert_eq!(s.state.f, f0);
    }

    #[test]
    fn oversized_step_diverges_with_step_number() {
        let mut case = rest_case(GeometryKind::UnitSquare);
        case.boundary
            .set(Edge::EtaMax, BoundaryCondition::BounceBack { u_wall: [0.1, 0.0] });
        let cfg = SolverConfig {
            time_step: TimeStep::Fixed(0.5),
            n_max: 10_000,
            ..SolverConfig::default()
        };
        let mut s = Solver::new(&case, cfg).unwrap();
        match s.run(|_, _| Ok(())) {
            Err(Error::Divergence { step, .. }) => assert!(step >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn cfl_step_is_capped_by_relaxation_time() {
        // nu = 1e-5 gives tau = 3e-5, far below the CFL step on 10 points
        let mut case = rest_case(GeometryKind::PeriodicBox);
        case.nu = 1e-5;
        let s = Solver::new(&case, SolverConfig::default()).unwrap();
        assert!((s.dt - 2.0 * s.tau).abs() < 1e-18 * s.dt.max(1.0));
        let free = SolverConfig {
            max_dt_over_tau: None,
            ..SolverConfig::default()
        };
        let u = Solver::new(&case, free).unwrap();
        assert!(u.dt > 10.0 * u.tau);
        let fixed = SolverConfig {
            time_step: TimeStep::Fixed(1e-3),
            ..SolverConfig::default()
        };
        assert_eq!(Solver::new(&case, fixed).unwrap().dt, 1e-3);
    }

    #[test]
    fn non_equilibrium_init_keeps_moments() {
        let kind = GeometryKind::PeriodicBox;
        let case = CaseSpec {
            name: "wave".into(),
            geometry: kind,
            geometry_params: GeometryParams::with_points(kind, 3, 12).unwrap(),
            boundary: BoundarySpec::periodic(),
            nu: 0.01,
            initial: Arc::new(|[x, y]| {
                let s = (2.0 * std::f64::consts::PI * x).sin();
                (1.0 + 0.01 * s, [0.02 * s, 0.01 * (2.0 * std::f64::consts::PI * y).cos()])
            }),
        };
        let eq = Solver::new(&case, SolverConfig::default()).unwrap();
        let cfg = SolverConfig {
            init: InitMode::NonEquilibrium,
            ..SolverConfig::default()
        };
        let neq = Solver::new(&case, cfg).unwrap();
        let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff(&eq.fields.rho, &neq.fields.rho) < 1e-14);
        assert!(diff(&eq.fields.ux, &neq.fields.ux) < 1e-14);
        assert!(diff(&eq.fields.uy, &neq.fields.uy) < 1e-14);
        assert!(diff(&eq.state.f, &neq.state.f) > 1e-6);
    }
}
