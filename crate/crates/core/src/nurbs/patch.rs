use std::fmt::Write as _;

use super::knots::{KnotVector, SpanBasis};
use crate::error::{Error, Result};

/// |det J| below this is treated as a singular map.
pub const SINGULAR_DET: f64 = 1e-12;

/// Tensor-product NURBS patch `x(xi, eta) = sum_i P_i R_i(xi, eta)`.
///
/// Control points and weights are stored u-fastest: entry `(i, j)` lives at
/// `i + n_u * j`, where `n_u = knots_u.n_extended()`. For periodic knot
/// vectors the net holds one point per extended function (unwrapped), which
/// lets a periodic basis represent maps such as `x = L xi` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct NurbsPatch2D {
    knots_u: KnotVector,
    knots_v: KnotVector,
    control_points: Vec<[f64; 2]>,
    weights: Vec<f64>,
}

/// The `(p+1)(q+1)` active rational basis functions at one parameter.
#[derive(Debug, Clone)]
pub struct RationalBasis {
    /// Solution-space index of each function (`i + n_basis_u * j`, wrapped).
    pub indices: Vec<usize>,
    /// Index into the control net (extended, unwrapped).
    pub control_indices: Vec<usize>,
    pub values: Vec<f64>,
    pub d_xi: Vec<f64>,
    pub d_eta: Vec<f64>,
}

/// Geometry map derivatives at one parameter.
///
/// `j[r][c]` is `d x_r / d xi_c` (rows physical, columns parametric);
/// `inv[r][c]` is `d xi_r / d x_c`, i.e. `[[xi_x, xi_y], [eta_x, eta_y]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianData {
    pub j: [[f64; 2]; 2],
    pub det: f64,
    pub inv: [[f64; 2]; 2],
}

impl JacobianData {
    pub fn from_columns(d_xi: [f64; 2], d_eta: [f64; 2]) -> Self {
        let j = [[d_xi[0], d_eta[0]], [d_xi[1], d_eta[1]]];
        let det = d_xi[0] * d_eta[1] - d_eta[0] * d_xi[1];
        let inv = [
            [d_eta[1] / det, -d_eta[0] / det],
            [-d_xi[1] / det, d_xi[0] / det],
        ];
        Self { j, det, inv }
    }

    /// `|dx/dxi|`, the physical length per unit of `xi`.
    pub fn stretch_xi(&self) -> f64 {
        self.j[0][0].hypot(self.j[1][0])
    }

    pub fn stretch_eta(&self) -> f64 {
        self.j[0][1].hypot(self.j[1][1])
    }
}

impl NurbsPatch2D {
    pub fn new(
        knots_u: KnotVector,
        knots_v: KnotVector,
        control_points: Vec<[f64; 2]>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let (nu, nv) = (knots_u.n_extended(), knots_v.n_extended());
        if control_points.len() != nu * nv {
            return Err(Error::InvalidPatch(format!(
                "control net has {} points, knot vectors require {nu} x {nv}",
                control_points.len()
            )));
        }
        if weights.len() != nu * nv {
            return Err(Error::InvalidPatch(format!(
                "{} weights for a {nu} x {nv} control net",
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidPatch(format!("weight {w} is not positive")));
        }
        if control_points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPatch("non-finite control point".into()));
        }
        // periodic directions need periodic weights
        for j in 0..nv {
            for i in 0..nu {
                let w = weights[i + nu * j];
                let wi = weights[knots_u.wrap(i) + nu * knots_v.wrap(j)];
                if w != wi {
                    return Err(Error::InvalidPatch(
                        "weights must repeat across periodic seams".into(),
                    ));
                }
            }
        }
        Ok(Self {
            knots_u,
            knots_v,
            control_points,
            weights,
        })
    }

    /// Patch with unit weights.
    pub fn bspline(
        knots_u: KnotVector,
        knots_v: KnotVector,
        control_points: Vec<[f64; 2]>,
    ) -> Result<Self> {
        let n = control_points.len();
        Self::new(knots_u, knots_v, control_points, vec![1.0; n])
    }

    pub fn knots_u(&self) -> &KnotVector {
        &self.knots_u
    }

    pub fn knots_v(&self) -> &KnotVector {
        &self.knots_v
    }

    pub fn degrees(&self) -> (usize, usize) {
        (self.knots_u.degree(), self.knots_v.degree())
    }

    pub fn control_points(&self) -> &[f64] {
        self.control_points.as_flattened()
    }

    pub fn control_net(&self) -> &[[f64; 2]] {
        &self.control_points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Net dimensions `(n_u, n_v)` (extended counts).
    pub fn net_shape(&self) -> (usize, usize) {
        (self.knots_u.n_extended(), self.knots_v.n_extended())
    }

    /// Solution-space dimensions `(n_u, n_v)`.
    pub fn basis_shape(&self) -> (usize, usize) {
        (self.knots_u.n_basis(), self.knots_v.n_basis())
    }

    pub fn is_rational(&self) -> bool {
        let w0 = self.weights[0];
        self.weights.iter().any(|&w| w != w0)
    }

    /// Same patch with every weight reset to one.
    pub fn with_unit_weights(&self) -> Self {
        Self {
            weights: vec![1.0; self.weights.len()],
            ..self.clone()
        }
    }

    pub fn eval_nurbs2d(&self, xi: f64, eta: f64) -> Result<RationalBasis> {
        let bu = self.knots_u.eval_basis_derivs(xi)?;
        let bv = self.knots_v.eval_basis_derivs(eta)?;
        Ok(self.combine(&bu, &bv))
    }

    fn combine(&self, bu: &SpanBasis, bv: &SpanBasis) -> RationalBasis {
        let (nu, _) = self.net_shape();
        let nbu = self.knots_u.n_basis();
        let (du, dv) = (bu.derivs.as_ref().unwrap(), bv.derivs.as_ref().unwrap());
        let (fu, fv) = (bu.first(), bv.first());
        let count = bu.values.len() * bv.values.len();
        let mut out = RationalBasis {
            indices: Vec::with_capacity(count),
            control_indices: Vec::with_capacity(count),
            values: Vec::with_capacity(count),
            d_xi: Vec::with_capacity(count),
            d_eta: Vec::with_capacity(count),
        };
        let (mut w, mut w_xi, mut w_eta) = (0.0, 0.0, 0.0);
        for (b, (&nv, &dnv)) in bv.values.iter().zip(dv).enumerate() {
            for (a, (&nuv, &dnu)) in bu.values.iter().zip(du).enumerate() {
                let (i, j) = (fu + a, fv + b);
                let c = i + nu * j;
                let wt = self.weights[c];
                let (val, dx, de) = (wt * nuv * nv, wt * dnu * nv, wt * nuv * dnv);
                w += val;
                w_xi += dx;
                w_eta += de;
                out.indices
                    .push(self.knots_u.wrap(i) + nbu * self.knots_v.wrap(j));
                out.control_indices.push(c);
                out.values.push(val);
                out.d_xi.push(dx);
                out.d_eta.push(de);
            }
        }
        // quotient rule: R = wN/W, R' = (wN' - R W')/W
        for k in 0..count {
            let r = out.values[k] / w;
            out.d_xi[k] = (out.d_xi[k] - r * w_xi) / w;
            out.d_eta[k] = (out.d_eta[k] - r * w_eta) / w;
            out.values[k] = r;
        }
        out
    }

    pub fn map_point(&self, xi: f64, eta: f64) -> Result<[f64; 2]> {
        let r = self.eval_nurbs2d(xi, eta)?;
        Ok(self.contract(&r.control_indices, &r.values))
    }

    fn contract(&self, idx: &[usize], coef: &[f64]) -> [f64; 2] {
        idx.iter().zip(coef).fold([0.0, 0.0], |acc, (&c, &v)| {
            let p = self.control_points[c];
            [acc[0] + v * p[0], acc[1] + v * p[1]]
        })
    }

    /// Map derivatives at `(xi, eta)`; fails when the map is singular there.
    pub fn jacobian(&self, xi: f64, eta: f64) -> Result<JacobianData> {
        let r = self.eval_nurbs2d(xi, eta)?;
        let d_xi = self.contract(&r.control_indices, &r.d_xi);
        let d_eta = self.contract(&r.control_indices, &r.d_eta);
        let jac = JacobianData::from_columns(d_xi, d_eta);
        if !(jac.det.abs() >= SINGULAR_DET) {
            return Err(Error::SingularMap {
                xi,
                eta,
                det: jac.det,
            });
        }
        Ok(jac)
    }

    /// Weight function `W` and its parametric derivatives.
    pub fn weight_function(&self, xi: f64, eta: f64) -> Result<(f64, f64, f64)> {
        let bu = self.knots_u.eval_basis_derivs(xi)?;
        let bv = self.knots_v.eval_basis_derivs(eta)?;
        let (nu, _) = self.net_shape();
        let (du, dv) = (bu.derivs.unwrap(), bv.derivs.unwrap());
        let (fu, fv) = (bu.span + 1 - bu.values.len(), bv.span + 1 - bv.values.len());
        let (mut w, mut wx, mut we) = (0.0, 0.0, 0.0);
        for b in 0..bv.values.len() {
            for a in 0..bu.values.len() {
                let wt = self.weights[(fu + a) + nu * (fv + b)];
                w += wt * bu.values[a] * bv.values[b];
                wx += wt * du[a] * bv.values[b];
                we += wt * bu.values[a] * dv[b];
            }
        }
        Ok((w, wx, we))
    }

    /// Human-readable dump: degrees, knots, control net and weights.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let (nu, nv) = self.net_shape();
        let kv = |k: &KnotVector| {
            k.knots()
                .iter()
                .map(|x| format!("{x:.17e}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let _ = writeln!(s, "# NURBS patch");
        let _ = writeln!(s, "degree_u = {}", self.knots_u.degree());
        let _ = writeln!(s, "degree_v = {}", self.knots_v.degree());
        let _ = writeln!(s, "periodic_u = {}", self.knots_u.is_periodic());
        let _ = writeln!(s, "periodic_v = {}", self.knots_v.is_periodic());
        let _ = writeln!(s, "knots_u = [{}]", kv(&self.knots_u));
        let _ = writeln!(s, "knots_v = [{}]", kv(&self.knots_v));
        let _ = writeln!(s, "net = [{nu}, {nv}]");
        let _ = writeln!(s, "# i j x y weight");
        for j in 0..nv {
            for i in 0..nu {
                let c = i + nu * j;
                let p = self.control_points[c];
                let _ = writeln!(
                    s,
                    "{i} {j} {:.17e} {:.17e} {:.17e}",
                    p[0], p[1], self.weights[c]
                );
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn affine(sx: f64, sy: f64) -> NurbsPatch2D {
        let ku = KnotVector::clamped(vec![0., 0., 1., 1.], 1).unwrap();
        let kv = ku.clone();
        let pts = vec![[0.0, 0.0], [sx, 0.0], [0.0, sy], [sx, sy]];
        NurbsPatch2D::bspline(ku, kv, pts).unwrap()
    }

    #[test]
    fn affine_jacobian() {
        let p = affine(2.0, 3.0);
        let j = p.jacobian(0.4, 0.9).unwrap();
        assert_eq!(j.j, [[2.0, 0.0], [0.0, 3.0]]);
        assert_eq!(j.det, 6.0);
        assert_abs_diff_eq!(j.inv[0][0], 0.5);
        assert_abs_diff_eq!(j.inv[1][1], 1.0 / 3.0);
        assert_eq!(p.map_point(0.5, 0.5).unwrap(), [1.0, 1.5]);
    }

    #[test]
    fn singular_map_reports_location() {
        let p = affine(2.0, 0.0);
        match p.jacobian(0.25, 0.5) {
            Err(Error::SingularMap { xi, eta, .. }) => {
                assert_eq!((xi, eta), (0.25, 0.5));
            }
            other => panic!("expected singular map, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_nets() {
        let ku = KnotVector::clamped(vec![0., 0., 1., 1.], 1).unwrap();
        let pts = vec![[0.0, 0.0]; 4];
        assert!(NurbsPatch2D::new(ku.clone(), ku.clone(), pts.clone(), vec![1.0, 1.0, 0.0, 1.0])
            .is_err());
        assert!(NurbsPatch2D::bspline(ku.clone(), ku, pts[..3].to_vec()).is_err());
    }

    #[test]
    fn unit_weights_reduce_to_tensor_bsplines() {
        let ku = KnotVector::clamped_uniform(2, 3).unwrap();
        let kv = KnotVector::clamped_uniform(3, 2).unwrap();
        let n = ku.n_basis() * kv.n_basis();
        let pts = (0..n).map(|k| [k as f64, (k * k) as f64]).collect();
        let p = NurbsPatch2D::bspline(ku.clone(), kv.clone(), pts).unwrap();
        let (xi, eta) = (0.61, 0.17);
        let r = p.eval_nurbs2d(xi, eta).unwrap();
        let bu = ku.eval_basis(xi).unwrap();
        let bv = kv.eval_basis(eta).unwrap();
        let mut k = 0;
        for b in &bv.values {
            for a in &bu.values {
                assert_abs_diff_eq!(r.values[k], a * b, epsilon = 1e-15);
                k += 1;
            }
        }
    }

    #[test]
    fn dump_lists_every_control_point() {
        let p = affine(1.0, 1.0);
        let txt = p.to_text();
        assert!(txt.contains("degree_u = 1"));
        assert_eq!(txt.lines().filter(|l| !l.starts_with('#') && !l.contains('=')).count(), 4);
    }
}
