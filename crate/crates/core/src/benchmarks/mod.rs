//! Benchmark cases, analytic references and error metrics.

mod cavity;
mod ghia;
mod postprocess;
mod study;
mod taylor_green;

pub use cavity::{cavity_case, CavityParams, WallTreatment};
pub use ghia::{compare_ghia, GhiaReference, ProfileError};
pub use postprocess::{
    centerline_extract, streamfunction, uniform_stations, vortex_topology, Centerline,
    CornerVortex, SplineField, StreamGrid, VortexTopology,
};
pub use study::{convergence_study, StudyMode, StudyRow};
pub use taylor_green::{fitted_decay_rate, l2_error, tgv_case, tgv_curved_case, TaylorGreenParams};
