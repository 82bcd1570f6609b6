use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeStep {
    Fixed(f64),
    /// Courant number fed to the CFL formula.
    Cfl(f64),
}

/// How the BGK relaxation time follows from the viscosity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TauModel {
    /// `tau = nu / cs^2`: the relation of the time-continuous discrete
    /// velocity equation, which is what RK4 integrates.
    #[default]
    Continuous,
    /// `tau = nu / cs^2 + dt / 2`: the stream-collide lattice relation.
    Lattice,
}

/// Discrete form of the convection term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvectionForm {
    /// `-(e_xi D_xi f + e_eta D_eta f)`: annihilates uniform states on any map.
    #[default]
    Advective,
    /// `-(D_xi (e_xi f) + D_eta (e_eta f))`: equal to the advective form
    /// when the contravariant velocities are uniform (affine maps).
    Flux,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OperatorMode {
    /// Kronecker-factored operators (same linear map, far less storage).
    #[default]
    Tensor,
    /// Literal `N x N` matrices.
    Dense,
}

/// How the initial populations are built from the initial macroscopic fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitMode {
    #[default]
    Equilibrium,
    /// Equilibrium plus the first-order non-equilibrium part
    /// `-tau (e . grad) f_eq`, which removes the initial kinetic layer.
    NonEquilibrium,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub time_step: TimeStep,
    /// Recompute the step every iteration from the parametric CFL bound.
    pub adaptive_dt: bool,
    /// Explicit relaxation time; overrides `tau_model` when set.
    pub tau: Option<f64>,
    pub tau_model: TauModel,
    pub n_max: usize,
    /// Stop once both relative residuals drop below this.
    pub epsilon: f64,
    /// Physical end time; the step is shrunk so an integer number of steps lands on it.
    pub final_time: Option<f64>,
    pub output_every: usize,
    pub bc_per_stage: bool,
    pub init: InitMode,
    /// Caps a CFL-derived step at this multiple of `tau`. The relaxation term
    /// is stiff and explicit RK4 loses stability near `dt / tau = 2.78`.
    pub max_dt_over_tau: Option<f64>,
    pub operators: OperatorMode,
    pub convection: ConvectionForm,
    pub parallel: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            time_step: TimeStep::Cfl(0.5),
            adaptive_dt: false,
            tau: None,
            tau_model: TauModel::Continuous,
            n_max: 10_000,
            epsilon: 1e-8,
            final_time: None,
            output_every: 100,
            bc_per_stage: false,
            init: InitMode::Equilibrium,
            max_dt_over_tau: Some(2.0),
            operators: OperatorMode::Tensor,
            convection: ConvectionForm::Advective,
            parallel: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        match self.time_step {
            TimeStep::Fixed(dt) if !(dt > 0.0 && dt.is_finite()) => {
                errors.push(format!("dt must be positive and finite (got {dt})"))
            }
            TimeStep::Cfl(c) if !(c > 0.0 && c <= 1.0) => {
                errors.push(format!("CFL must be in (0, 1] (got {c})"))
            }
            _ => {}
        }
        if self.adaptive_dt && matches!(self.time_step, TimeStep::Fixed(_)) {
            errors.push("adaptive_dt requires a CFL number, not a fixed dt".into());
        }
        if let Some(tau) = self.tau {
            if !(tau > 0.0 && tau.is_finite()) {
                errors.push(format!("tau must be positive (got {tau})"));
            }
        }
        if let Some(r) = self.max_dt_over_tau {
            if !(r > 0.0 && r.is_finite()) {
                errors.push(format!("max_dt_over_tau must be positive (got {r})"));
            }
        }
        if !(self.epsilon > 0.0) {
            errors.push(format!("epsilon must be positive (got {})", self.epsilon));
        }
        if let Some(t) = self.final_time {
            if !(t > 0.0 && t.is_finite()) {
                errors.push(format!("final_time must be positive (got {t})"));
            }
        }
        if self.output_every == 0 {
            errors.push("output_every must be at least 1".into());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }
}
