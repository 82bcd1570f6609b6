//! Semi-discrete kinetic solver: right-hand side, RK4, boundary conditions
//! and the time loop.

mod boundary;
mod config;
mod discretization;
mod run;

pub use boundary::{BoundaryCondition, BoundaryPlan, BoundarySpec, Edge, FarfieldFn};
pub use config::{ConvectionForm, InitMode, OperatorMode, SolverConfig, TauModel, TimeStep};
pub use discretization::{rk4_step, Discretization, RhsOptions, RhsWorkspace, Rk4Workspace, StageFailure};
pub use run::{
    check_convergence, CaseSpec, Diagnostics, Fields, InitialFn, RunSummary, Solver, State,
    StopReason,
};
