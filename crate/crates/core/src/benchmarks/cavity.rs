//! Lid-driven square cavity.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::nurbs::{GeometryKind, GeometryParams};
use crate::solver::{BoundaryCondition, BoundarySpec, CaseSpec, Edge};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WallTreatment {
    #[default]
    BounceBack,
    Equilibrium,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityParams {
    pub u_lid: f64,
    pub re: f64,
    pub length: f64,
    pub walls: WallTreatment,
}

impl Default for CavityParams {
    fn default() -> Self {
        Self {
            u_lid: 0.1,
            re: 100.0,
            length: 1.0,
            walls: WallTreatment::BounceBack,
        }
    }
}

impl CavityParams {
    /// `nu = U_lid L / Re`.
    pub fn nu(&self) -> f64 {
        self.u_lid * self.length / self.re
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if !(self.re > 0.0) {
            errors.push(format!("Re must be positive (got {})", self.re));
        }
        if !(self.length > 0.0) {
            errors.push(format!("cavity length must be positive (got {})", self.length));
        }
        if !(self.u_lid.abs() > 0.0 && self.u_lid.is_finite()) {
            errors.push(format!("lid speed must be nonzero (got {})", self.u_lid));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }
}

/// Unit-square cavity; the lid is the `eta_max` edge moving in `+x`.
pub fn cavity_case(params: &CavityParams, points: usize, degree: usize) -> Result<CaseSpec> {
    params.validate()?;
    let kind = GeometryKind::UnitSquare;
    let mut gp = GeometryParams::with_points(kind, degree, points)?;
    gp.length = [params.length, params.length];
    let wall = |u_wall| match params.walls {
        WallTreatment::BounceBack => BoundaryCondition::BounceBack { u_wall },
        WallTreatment::Equilibrium => BoundaryCondition::EquilibriumWall { u_wall },
    };
    let mut boundary = BoundarySpec::uniform(wall([0.0, 0.0]));
    boundary.set(Edge::EtaMax, wall([params.u_lid, 0.0]));
    Ok(CaseSpec {
        name: "lid_cavity".into(),
        geometry: kind,
        geometry_params: gp,
        boundary,
        nu: params.nu(),
        initial: Arc::new(|_| (1.0, [0.0, 0.0])),
    })
}
