//! B-spline/NURBS kernel: knot vectors, rational tensor-product patches,
//! geometry maps and the benchmark geometry builders.

mod builders;
mod knots;
mod patch;

pub use builders::{
    build_geometry, elements_for_points, GeometryKind, GeometryParams,
    CURVED_QUAD_MAX_AMPLITUDE,
};
pub use knots::{KnotVector, SpanBasis};
pub use patch::{JacobianData, NurbsPatch2D, RationalBasis, SINGULAR_DET};
