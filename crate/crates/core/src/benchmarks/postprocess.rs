//! Spline reconstruction of collocation-point fields: centerline profiles
//! and the streamfunction of a box flow.

use nalgebra::DMatrix;

use crate::collocation::univariate_collocation;
use crate::error::{Error, Result};
use crate::nurbs::KnotVector;
use crate::solver::{Discretization, Fields};

/// The unique spline in the patch basis that interpolates a point field.
#[derive(Debug, Clone)]
pub struct SplineField<'a> {
    disc: &'a Discretization,
    /// Tensor coefficients, `n_u x n_v`, of `W g` in the polynomial basis.
    coeffs: DMatrix<f64>,
}

impl<'a> SplineField<'a> {
    pub fn new(disc: &'a Discretization, values: &[f64]) -> Result<Self> {
        let (nu, nv) = disc.colloc.shape();
        if values.len() != nu * nv {
            return Err(Error::Invalid(format!(
                "field has {} values for {} collocation points",
                values.len(),
                nu * nv
            )));
        }
        let patch = &disc.patch;
        let mut g = DMatrix::from_column_slice(nu, nv, values);
        if patch.is_rational() {
            for (k, &[u, v]) in disc.colloc.points.iter().enumerate() {
                g[(k % nu, k / nu)] *= patch.weight_function(u, v)?.0;
            }
        }
        let (phi_u, _) = univariate_collocation(patch.knots_u(), &disc.colloc.xi)?;
        let (phi_v, _) = univariate_collocation(patch.knots_v(), &disc.colloc.eta)?;
        let singular = || Error::IllConditioned {
            name: "interpolation basis".into(),
            cond: f64::INFINITY,
        };
        // G = Phi_u C Phi_v^T
        let left = phi_u.lu().solve(&g).ok_or_else(singular)?;
        let coeffs = phi_v
            .lu()
            .solve(&left.transpose())
            .ok_or_else(singular)?
            .transpose();
        Ok(Self { disc, coeffs })
    }

    pub fn eval(&self, xi: f64, eta: f64) -> Result<f64> {
        let patch = &self.disc.patch;
        let (ku, kv) = (patch.knots_u(), patch.knots_v());
        let bu = ku.eval_basis(xi)?;
        let bv = kv.eval_basis(eta)?;
        let mut s = 0.0;
        for (b, &nvb) in bv.values.iter().enumerate() {
            let j = kv.wrap(bv.first() + b);
            for (a, &nua) in bu.values.iter().enumerate() {
                s += nua * nvb * self.coeffs[(ku.wrap(bu.first() + a), j)];
            }
        }
        if patch.is_rational() {
            s /= patch.weight_function(xi, eta)?.0;
        }
        Ok(s)
    }

    /// Coefficients of the univariate spline `eta -> g(xi, eta)` (polynomial patches).
    fn column(&self, xi: f64) -> Result<Vec<f64>> {
        let ku = self.disc.patch.knots_u();
        let bu = ku.eval_basis(xi)?;
        Ok((0..self.coeffs.ncols())
            .map(|j| {
                bu.values
                    .iter()
                    .enumerate()
                    .map(|(a, n)| n * self.coeffs[(ku.wrap(bu.first() + a), j)])
                    .sum()
            })
            .collect())
    }
}

fn eval_1d(kv: &KnotVector, coeffs: &[f64], x: f64) -> Result<f64> {
    let b = kv.eval_basis(x)?;
    Ok(b.values
        .iter()
        .enumerate()
        .map(|(a, n)| n * coeffs[kv.wrap(b.first() + a)])
        .sum())
}

/// Axis-aligned box `[x0, x1] x [y0, y1]` if the patch is the affine box map.
fn box_frame(disc: &Discretization) -> Result<[f64; 4]> {
    let p = &disc.patch;
    let a = p.map_point(0.0, 0.0)?;
    let b = p.map_point(1.0, 1.0)?;
    let frame = [a[0], b[0], a[1], b[1]];
    for (u, v) in [(0.37, 0.61), (0.9, 0.15), (0.5, 0.5)] {
        let x = p.map_point(u, v)?;
        let (ex, ey) = (a[0] + u * (b[0] - a[0]), a[1] + v * (b[1] - a[1]));
        if (x[0] - ex).abs() > 1e-12 || (x[1] - ey).abs() > 1e-12 {
            return Err(Error::Invalid(
                "profile extraction needs an axis-aligned box geometry".into(),
            ));
        }
    }
    Ok(frame)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Centerline {
    /// `u_x` along `x = mid`, parameterized by `y`.
    Vertical,
    /// `u_y` along `y = mid`, parameterized by `x`.
    Horizontal,
}

/// `(coordinate, velocity)` samples of the interpolated field along a
/// centerline; `stations` are relative positions in `[0, 1]`, returned sorted.
pub fn centerline_extract(
    disc: &Discretization,
    fields: &Fields,
    line: Centerline,
    stations: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let [x0, x1, y0, y1] = box_frame(disc)?;
    let mut s: Vec<f64> = stations.to_vec();
    if s.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::Invalid("centerline stations must lie in [0, 1]".into()));
    }
    s.sort_by(f64::total_cmp);
    let (values, len, origin) = match line {
        Centerline::Vertical => (&fields.ux, y1 - y0, y0),
        Centerline::Horizontal => (&fields.uy, x1 - x0, x0),
    };
    let spline = SplineField::new(disc, values)?;
    s.iter()
        .map(|&t| {
            let v = match line {
                Centerline::Vertical => spline.eval(0.5, t)?,
                Centerline::Horizontal => spline.eval(t, 0.5)?,
            };
            Ok((origin + t * len, v))
        })
        .collect()
}

/// `n` equally spaced stations including both ends.
pub fn uniform_stations(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// Streamfunction `psi(x, y) = int_0^y u_x(x, s) ds` on a sample grid.
#[derive(Debug, Clone)]
pub struct StreamGrid {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `psi[i + nx * j]` at `(x[i], y[j])`.
    pub psi: Vec<f64>,
}

const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_08),
    (0.906_179_845_938_664, 0.236_926_885_056_189_08),
];

/// Integrates the interpolated `u_x` upward from the bottom edge with
/// Gauss quadrature split at the knots, exact for the spline itself.
pub fn streamfunction(disc: &Discretization, fields: &Fields, nx: usize, ny: usize) -> Result<StreamGrid> {
    if disc.patch.is_rational() {
        return Err(Error::Invalid("streamfunction needs a polynomial box patch".into()));
    }
    if nx < 2 || ny < 2 {
        return Err(Error::Invalid("streamfunction grid needs at least 2x2 samples".into()));
    }
    let [x0, x1, y0, y1] = box_frame(disc)?;
    let kv = disc.patch.knots_v();
    let spline = SplineField::new(disc, &fields.ux)?;
    let sx = uniform_stations(nx);
    let sy = uniform_stations(ny);
    let mut breaks: Vec<f64> = kv.knots().iter().copied().filter(|t| (0.0..=1.0).contains(t)).collect();
    breaks.extend(&sy);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let height = y1 - y0;
    let mut psi = vec![0.0; nx * ny];
    for (i, &s) in sx.iter().enumerate() {
        let col = spline.column(s)?;
        let mut acc = 0.0;
        let mut next = 1;
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            for &(z, wt) in &GAUSS5 {
                acc += wt * half * eval_1d(kv, &col, mid + half * z)?;
            }
            while next < ny && sy[next] <= b {
                psi[i + nx * next] = acc * height;
                next += 1;
            }
        }
    }
    Ok(StreamGrid {
        x: sx.iter().map(|s| x0 + s * (x1 - x0)).collect(),
        y: sy.iter().map(|s| y0 + s * height).collect(),
        psi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerVortex {
    /// Largest streamfunction value of the sign opposite to the primary vortex.
    pub strength: f64,
    pub location: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct VortexTopology {
    pub primary_psi: f64,
    pub primary_location: [f64; 2],
    /// Local extrema of the primary sign deeper than half the primary value.
    pub primary_count: usize,
    pub bottom_left: Option<CornerVortex>,
    pub bottom_right: Option<CornerVortex>,
}

impl VortexTopology {
    /// One primary vortex and a counter-rotating vortex in both bottom corners.
    pub fn has_primary_and_two_corner_vortices(&self) -> bool {
        self.primary_count == 1 && self.bottom_left.is_some() && self.bottom_right.is_some()
    }
}

/// Locates the primary vortex and detects counter-rotating regions in the
/// bottom corner quarters (`[0, 1/4]` of each side). Values below
/// `noise * |psi_primary|` are not counted as a sign change.
pub fn vortex_topology(grid: &StreamGrid, noise: f64) -> VortexTopology {
    let (nx, ny) = (grid.x.len(), grid.y.len());
    let at = |i: usize, j: usize| grid.psi[i + nx * j];
    let (mut kmin, mut kmax) = (0, 0);
    for k in 0..grid.psi.len() {
        if grid.psi[k] < grid.psi[kmin] {
            kmin = k;
        }
        if grid.psi[k] > grid.psi[kmax] {
            kmax = k;
        }
    }
    // the primary vortex carries the larger magnitude
    let sign = if grid.psi[kmin].abs() >= grid.psi[kmax].abs() { -1.0 } else { 1.0 };
    let kp = if sign < 0.0 { kmin } else { kmax };
    let primary = grid.psi[kp];
    let mut count = 0;
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let c = sign * at(i, j);
            if c < 0.5 * primary.abs() {
                continue;
            }
            let is_peak = (-1i64..=1).all(|dj| {
                (-1i64..=1).all(|di| {
                    (di == 0 && dj == 0)
                        || c > sign * at((i as i64 + di) as usize, (j as i64 + dj) as usize)
                })
            });
            if is_peak {
                count += 1;
            }
        }
    }
    let (xa, xb) = (grid.x[0], grid.x[nx - 1]);
    let (ya, yb) = (grid.y[0], grid.y[ny - 1]);
    let corner = |left: bool| -> Option<CornerVortex> {
        let mut best: Option<CornerVortex> = None;
        for j in 0..ny {
            if grid.y[j] - ya > 0.25 * (yb - ya) {
                break;
            }
            for i in 0..nx {
                let rel = (grid.x[i] - xa) / (xb - xa);
                if (left && rel > 0.25) || (!left && rel < 0.75) {
                    continue;
                }
                let v = -sign * at(i, j);
                if v > noise * primary.abs() && best.is_none_or(|b| v > b.strength) {
                    best = Some(CornerVortex {
                        strength: v,
                        location: [grid.x[i], grid.y[j]],
                    });
                }
            }
        }
        best
    };
    VortexTopology {
        primary_psi: primary,
        primary_location: [grid.x[kp % nx], grid.y[kp / nx]],
        primary_count: count,
        bottom_left: corner(true),
        bottom_right: corner(false),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nurbs::{build_geometry, GeometryKind, GeometryParams};
    use crate::solver::OperatorMode;
    use approx::assert_abs_diff_eq;

    fn disc(kind: GeometryKind, degree: usize, points: usize) -> Discretization {
        let prm = GeometryParams::with_points(kind, degree, points).unwrap();
        Discretization::new(build_geometry(kind, &prm).unwrap(), OperatorMode::Tensor).unwrap()
    }

    fn fields_from(d: &Discretization, f: impl Fn(f64, f64) -> (f64, f64)) -> Fields {
        let mut out = Fields::default();
        for &[x, y] in &d.colloc.physical {
            let (u, v) = f(x, y);
            out.rho.push(1.0);
            out.ux.push(u);
            out.uy.push(v);
        }
        out
    }

    #[test]
    fn interpolant_reproduces_polynomials() {
        for degree in [2, 3] {
            let d = disc(GeometryKind::UnitSquare, degree, 9);
            let poly = |x: f64, y: f64| 0.3 + x * x * y - 2.0 * y.powi(degree as i32) * x;
            let vals: Vec<f64> = d.colloc.physical.iter().map(|p| poly(p[0], p[1])).collect();
            let s = SplineField::new(&d, &vals).unwrap();
            for (x, y) in [(0.13, 0.77), (0.5, 0.5), (1.0, 0.0), (0.91, 0.02)] {
                assert_abs_diff_eq!(s.eval(x, y).unwrap(), poly(x, y), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn rational_interpolant_matches_nodes() {
        let d = disc(GeometryKind::QuarterAnnulus, 2, 7);
        let vals: Vec<f64> = (0..d.len()).map(|k| (k as f64 * 0.37).sin()).collect();
        let s = SplineField::new(&d, &vals).unwrap();
        for (k, &[u, v]) in d.colloc.points.iter().enumerate() {
            assert_abs_diff_eq!(s.eval(u, v).unwrap(), vals[k], epsilon = 1e-11);
        }
    }

    #[test]
    fn centerline_samples() {
        let d = disc(GeometryKind::UnitSquare, 3, 10);
        let rest = fields_from(&d, |_, _| (0.0, 0.0));
        let s = centerline_extract(&d, &rest, Centerline::Vertical, &uniform_stations(11)).unwrap();
        assert!(s.iter().all(|p| p.1 == 0.0));
        let f = fields_from(&d, |x, y| (y * y * y - y, x * x));
        let st = [0.9, 0.1, 0.5, 0.25];
        let v = centerline_extract(&d, &f, Centerline::Vertical, &st).unwrap();
        assert!(v.windows(2).all(|w| w[0].0 < w[1].0));
        for (y, u) in v {
            assert_abs_diff_eq!(u, y * y * y - y, epsilon = 1e-10);
        }
        let h = centerline_extract(&d, &f, Centerline::Horizontal, &st).unwrap();
        for (x, u) in h {
            assert_abs_diff_eq!(u, x * x, epsilon = 1e-10);
        }
        let annulus = disc(GeometryKind::QuarterAnnulus, 2, 6);
        let fa = fields_from(&annulus, |_, _| (0.0, 0.0));
        assert!(centerline_extract(&annulus, &fa, Centerline::Vertical, &st).is_err());
    }

    #[test]
    fn streamfunction_of_shear_and_cell_flow() {
        let d = disc(GeometryKind::UnitSquare, 3, 16);
        // u = 3y^2 -> psi = y^3
        let f = fields_from(&d, |_, y| (3.0 * y * y, 0.0));
        let g = streamfunction(&d, &f, 5, 9).unwrap();
        for j in 0..9 {
            for i in 0..5 {
                assert_abs_diff_eq!(g.psi[i + 5 * j], g.y[j].powi(3), epsilon = 1e-12);
            }
        }
        // single cell psi = -sin^2(pi x) sin^2(pi y): one minimum, no corner cells
        use std::f64::consts::PI;
        let d = disc(GeometryKind::UnitSquare, 3, 40);
        let f = fields_from(&d, |x, y| {
            (-(PI * x).sin().powi(2) * PI * (2.0 * PI * y).sin(), 0.0)
        });
        let g = streamfunction(&d, &f, 41, 41).unwrap();
        let topo = vortex_topology(&g, 1e-6);
        assert_eq!(topo.primary_count, 1);
        assert!(topo.primary_psi < 0.0);
        assert_abs_diff_eq!(topo.primary_location[0], 0.5, epsilon = 1e-12);
        assert!(topo.bottom_left.is_none() && topo.bottom_right.is_none());
    }
}
