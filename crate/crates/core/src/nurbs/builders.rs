//! Named geometry builders used by the benchmark cases.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use super::knots::KnotVector;
use super::patch::NurbsPatch2D;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeometryKind {
    /// Axis-aligned box `[0, Lx] x [0, Ly]` on clamped knots (identity map for `L = 1`).
    UnitSquare,
    /// Same box on uniform periodic knots in both directions.
    PeriodicBox,
    /// Box whose interior control points are displaced by
    /// `a * (sin(pi u) sin(2 pi v), sin(2 pi u) sin(pi v))`.
    CurvedQuad,
    /// Exact quarter annulus; `xi` runs radially outward, `eta` counterclockwise.
    QuarterAnnulus,
}

impl GeometryKind {
    pub const ALL: [GeometryKind; 4] = [
        GeometryKind::UnitSquare,
        GeometryKind::PeriodicBox,
        GeometryKind::CurvedQuad,
        GeometryKind::QuarterAnnulus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GeometryKind::UnitSquare => "unit_square",
            GeometryKind::PeriodicBox => "periodic_box",
            GeometryKind::CurvedQuad => "curved_quad",
            GeometryKind::QuarterAnnulus => "quarter_annulus",
        }
    }

    pub fn is_periodic(self) -> bool {
        self == GeometryKind::PeriodicBox
    }
}

impl fmt::Display for GeometryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GeometryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GeometryKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = GeometryKind::ALL.iter().map(|k| k.name()).collect();
                Error::Invalid(format!(
                    "unknown geometry '{s}'; registered builders: {}",
                    names.join(", ")
                ))
            })
    }
}

/// Largest curved_quad amplitude accepted; beyond roughly 0.16 the map folds.
pub const CURVED_QUAD_MAX_AMPLITUDE: f64 = 0.15;

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryParams {
    pub degree: usize,
    /// Knot spans per direction (for periodic directions: basis functions).
    pub elements: [usize; 2],
    /// Box side lengths (unit_square, periodic_box, curved_quad).
    pub length: [f64; 2],
    /// curved_quad displacement amplitude, in units of the box side.
    pub amplitude: f64,
    pub r_inner: f64,
    pub r_outer: f64,
}

impl Default for GeometryParams {
    fn default() -> Self {
        Self {
            degree: 2,
            elements: [8, 8],
            length: [1.0, 1.0],
            amplitude: 0.1,
            r_inner: 1.0,
            r_outer: 2.0,
        }
    }
}

impl GeometryParams {
    /// Parameters giving `points` collocation points per direction.
    pub fn with_points(kind: GeometryKind, degree: usize, points: usize) -> Result<Self> {
        let elements = elements_for_points(kind, degree, points)?;
        Ok(Self {
            degree,
            elements: [elements, elements],
            ..Self::default()
        })
    }
}

/// Knot spans needed for `points` basis functions per direction.
pub fn elements_for_points(kind: GeometryKind, degree: usize, points: usize) -> Result<usize> {
    if kind.is_periodic() {
        Ok(points)
    } else if points > degree {
        Ok(points - degree)
    } else {
        Err(Error::Invalid(format!(
            "{points} points cannot carry a clamped degree-{degree} basis"
        )))
    }
}

pub fn build_geometry(kind: GeometryKind, params: &GeometryParams) -> Result<NurbsPatch2D> {
    let p = params.degree;
    if p == 0 {
        return Err(Error::Invalid("degree must be at least 1".into()));
    }
    if params.length.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::Invalid("box lengths must be positive".into()));
    }
    let [eu, ev] = params.elements;
    let patch = match kind {
        GeometryKind::UnitSquare => box_patch(
            KnotVector::clamped_uniform(p, eu)?,
            KnotVector::clamped_uniform(p, ev)?,
            params.length,
            0.0,
        )?,
        GeometryKind::PeriodicBox => box_patch(
            KnotVector::periodic_uniform(p, eu)?,
            KnotVector::periodic_uniform(p, ev)?,
            params.length,
            0.0,
        )?,
        GeometryKind::CurvedQuad => {
            if !(params.amplitude.abs() <= CURVED_QUAD_MAX_AMPLITUDE) {
                return Err(Error::Invalid(format!(
                    "curved_quad amplitude {} exceeds {CURVED_QUAD_MAX_AMPLITUDE}",
                    params.amplitude
                )));
            }
            box_patch(
                KnotVector::clamped_uniform(p, eu)?,
                KnotVector::clamped_uniform(p, ev)?,
                params.length,
                params.amplitude,
            )?
        }
        GeometryKind::QuarterAnnulus => quarter_annulus(params)?,
    };
    check_orientation(&patch)?;
    Ok(patch)
}

fn box_patch(ku: KnotVector, kv: KnotVector, length: [f64; 2], amp: f64) -> Result<NurbsPatch2D> {
    let gu = ku.extended_greville();
    let gv = kv.extended_greville();
    let (nu, nv) = (gu.len(), gv.len());
    let mut pts = Vec::with_capacity(nu * nv);
    for (j, &v) in gv.iter().enumerate() {
        for (i, &u) in gu.iter().enumerate() {
            let boundary = i == 0 || j == 0 || i + 1 == nu || j + 1 == nv;
            let (dx, dy) = if amp != 0.0 && !boundary {
                (
                    amp * (PI * u).sin() * (2.0 * PI * v).sin(),
                    amp * (2.0 * PI * u).sin() * (PI * v).sin(),
                )
            } else {
                (0.0, 0.0)
            };
            pts.push([length[0] * (u + dx), length[1] * (v + dy)]);
        }
    }
    NurbsPatch2D::bspline(ku, kv, pts)
}

/// Degree-`q` rational Bezier quarter circle of unit radius, then refined
/// to `elements` uniform spans. Returns knots and homogeneous points.
fn unit_arc(q: usize, elements: usize) -> Result<(KnotVector, Vec<[f64; 3]>)> {
    if q < 2 {
        return Err(Error::Invalid(
            "quarter_annulus needs degree >= 2 for an exact circular arc".into(),
        ));
    }
    let w = FRAC_1_SQRT_2;
    let mut pts = vec![[1.0, 0.0, 1.0], [w, w, w], [0.0, 1.0, 1.0]];
    for d in 2..q {
        // Bezier degree elevation d -> d + 1
        let mut next = Vec::with_capacity(d + 2);
        for i in 0..=d + 1 {
            let a = i as f64 / (d + 1) as f64;
            let mut pt = [0.0; 3];
            for c in 0..3 {
                let prev = if i > 0 { pts[i - 1][c] } else { 0.0 };
                let cur = if i <= d { pts[i][c] } else { 0.0 };
                pt[c] = a * prev + (1.0 - a) * cur;
            }
            next.push(pt);
        }
        pts = next;
    }
    let mut kv = KnotVector::clamped_uniform(q, 1)?;
    for k in 1..elements {
        let (nk, np) = kv.insert_knot(k as f64 / elements as f64, &pts)?;
        kv = nk;
        pts = np;
    }
    Ok((kv, pts))
}

fn quarter_annulus(params: &GeometryParams) -> Result<NurbsPatch2D> {
    let (ri, ro) = (params.r_inner, params.r_outer);
    if !(ri > 0.0 && ro > ri) {
        return Err(Error::Invalid(format!(
            "quarter_annulus needs 0 < r_inner < r_outer (got {ri}, {ro})"
        )));
    }
    let p = params.degree;
    let ku = KnotVector::clamped_uniform(p, params.elements[0])?;
    let (kv, arc) = unit_arc(p.max(2), params.elements[1])?;
    let radii: Vec<f64> = ku
        .greville_points()
        .iter()
        .map(|g| ri + (ro - ri) * g)
        .collect();
    let mut pts = Vec::with_capacity(radii.len() * arc.len());
    let mut weights = Vec::with_capacity(radii.len() * arc.len());
    for h in &arc {
        for r in &radii {
            pts.push([r * h[0] / h[2], r * h[1] / h[2]]);
            weights.push(h[2]);
        }
    }
    NurbsPatch2D::new(ku, kv, pts, weights)
}

/// Rejects maps with a nonpositive Jacobian determinant at any Greville point.
fn check_orientation(patch: &NurbsPatch2D) -> Result<()> {
    let gu = patch.knots_u().greville_points();
    let gv = patch.knots_v().greville_points();
    for (j, &v) in gv.iter().enumerate() {
        for (i, &u) in gu.iter().enumerate() {
            let det = match patch.jacobian(u, v) {
                Ok(jac) => jac.det,
                Err(Error::SingularMap { det, .. }) => det,
                Err(e) => return Err(e),
            };
            if !(det > 0.0) {
                return Err(Error::InvertedMap {
                    index: i + gu.len() * j,
                    det,
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(degree: usize, elements: usize) -> GeometryParams {
        GeometryParams {
            degree,
            elements: [elements, elements],
            ..GeometryParams::default()
        }
    }

    #[test]
    fn unit_square_is_identity() {
        for p in 1..=4 {
            let patch = build_geometry(GeometryKind::UnitSquare, &params(p, 8)).unwrap();
            let x = patch.map_point(0.3, 0.7).unwrap();
            assert_abs_diff_eq!(x[0], 0.3, epsilon = 1e-14);
            assert_abs_diff_eq!(x[1], 0.7, epsilon = 1e-14);
            for &g in &patch.knots_u().greville_points() {
                let j = patch.jacobian(g, 1.0 - g).unwrap();
                assert_abs_diff_eq!(j.det, 1.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn periodic_box_reproduces_box() {
        let mut prm = params(3, 12);
        prm.length = [2.0, 3.0];
        let patch = build_geometry(GeometryKind::PeriodicBox, &prm).unwrap();
        let x = patch.map_point(0.25, 0.5).unwrap();
        assert_abs_diff_eq!(x[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(x[1], 1.5, epsilon = 1e-14);
        let j = patch.jacobian(0.9, 0.1).unwrap();
        assert_abs_diff_eq!(j.det, 6.0, epsilon = 1e-12);
    }

    #[test]
    fn corners_interpolate_control_points() {
        let patch = build_geometry(GeometryKind::CurvedQuad, &params(3, 6)).unwrap();
        let (nu, nv) = patch.net_shape();
        let net = patch.control_net();
        for (u, v, c) in [
            (0.0, 0.0, 0),
            (1.0, 0.0, nu - 1),
            (0.0, 1.0, nu * (nv - 1)),
            (1.0, 1.0, nu * nv - 1),
        ] {
            assert_eq!(patch.map_point(u, v).unwrap(), net[c]);
        }
    }

    #[test]
    fn curved_quad_stays_positive() {
        let mut prm = params(2, 10);
        prm.amplitude = 0.1;
        let patch = build_geometry(GeometryKind::CurvedQuad, &prm).unwrap();
        let mut min_det = f64::INFINITY;
        for &u in &patch.knots_u().greville_points() {
            for &v in &patch.knots_v().greville_points() {
                min_det = min_det.min(patch.jacobian(u, v).unwrap().det);
            }
        }
        assert!(min_det > 0.0);
        // genuinely curved: an interior grid line is not straight
        let a = patch.map_point(0.5, 0.25).unwrap();
        assert!((a[0] - 0.5).abs() > 1e-3);
        prm.amplitude = 0.4;
        assert!(build_geometry(GeometryKind::CurvedQuad, &prm).is_err());
    }

    #[test]
    fn annulus_edges_are_circles() {
        for q in 2..=4 {
            let mut prm = params(q, 5);
            prm.elements = [3, 5];
            let patch = build_geometry(GeometryKind::QuarterAnnulus, &prm).unwrap();
            for k in 0..=200 {
                let eta = k as f64 / 200.0;
                let inner = patch.map_point(0.0, eta).unwrap();
                let outer = patch.map_point(1.0, eta).unwrap();
                assert_abs_diff_eq!(inner[0].hypot(inner[1]), 1.0, epsilon = 1e-12);
                assert_abs_diff_eq!(outer[0].hypot(outer[1]), 2.0, epsilon = 1e-12);
            }
            let mid = patch.map_point(0.5, 0.3).unwrap();
            assert_abs_diff_eq!(mid[0].hypot(mid[1]), 1.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn names_round_trip() {
        for k in GeometryKind::ALL {
            assert_eq!(k.name().parse::<GeometryKind>().unwrap(), k);
        }
        let err = "disk".parse::<GeometryKind>().unwrap_err().to_string();
        assert!(err.contains("unit_square") && err.contains("quarter_annulus"));
    }
}
