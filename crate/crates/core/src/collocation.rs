//! Collocation matrices, spectral differentiation operators and per-point
//! metric data.
//!
//! Fields live at the tensor-product Greville points, u-index fastest:
//! point `(i, j)` has flat index `i + n_u * j`. Every array in the solver
//! shares this ordering.
//!
//! The differentiation operators `D = Phi' Phi^-1` come in two storage
//! forms. [`DiffOperators::Dense`] holds the literal `N x N` matrices built
//! from the rational collocation matrices with one LU factorization.
//! [`DiffOperators::Tensor`] exploits the tensor-product structure: for a
//! B-spline basis `D_xi = I (x) D_u` with a small `n_u x n_u` factor, and for
//! a rational basis `R = w N / W` the rational operator follows from the
//! polynomial one through `D_rat g = (D (W g) - g D W) / W`. Both forms
//! represent the same linear map.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::nurbs::{JacobianData, KnotVector, NurbsPatch2D};

/// Collocation matrices whose condition estimate exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct CollocationSet {
    n_u: usize,
    n_v: usize,
    periodic: [bool; 2],
    /// Parametric abscissae per direction.
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
    /// Parametric points, flat order.
    pub points: Vec<[f64; 2]>,
    /// Mapped physical points, flat order.
    pub physical: Vec<[f64; 2]>,
}

impl CollocationSet {
    /// Tensor-product Greville points of the patch basis.
    pub fn greville(patch: &NurbsPatch2D) -> Result<Self> {
        let xi = patch.knots_u().greville_points();
        let eta = patch.knots_v().greville_points();
        let (n_u, n_v) = (xi.len(), eta.len());
        let mut points = Vec::with_capacity(n_u * n_v);
        let mut physical = Vec::with_capacity(n_u * n_v);
        for &v in &eta {
            for &u in &xi {
                points.push([u, v]);
                physical.push(patch.map_point(u, v)?);
            }
        }
        Ok(Self {
            n_u,
            n_v,
            periodic: [patch.knots_u().is_periodic(), patch.knots_v().is_periodic()],
            xi,
            eta,
            points,
            physical,
        })
    }

    pub fn len(&self) -> usize {
        self.n_u * self.n_v
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_u, self.n_v)
    }

    pub fn periodic(&self) -> [bool; 2] {
        self.periodic
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.n_u * j
    }
}

/// Dense rational collocation matrices: row `i` holds `R_j(xi_i)` and its
/// parametric derivatives.
#[derive(Debug, Clone)]
pub struct CollocationMatrices {
    pub phi: DMatrix<f64>,
    pub phi_xi: DMatrix<f64>,
    pub phi_eta: DMatrix<f64>,
}

pub fn assemble_collocation(
    patch: &NurbsPatch2D,
    colloc: &CollocationSet,
) -> Result<CollocationMatrices> {
    let n = colloc.len();
    let mut phi = DMatrix::zeros(n, n);
    let mut phi_xi = DMatrix::zeros(n, n);
    let mut phi_eta = DMatrix::zeros(n, n);
    for (row, &[u, v]) in colloc.points.iter().enumerate() {
        let r = patch.eval_nurbs2d(u, v)?;
        for (k, &col) in r.indices.iter().enumerate() {
            // periodic bases with few functions may revisit a column
            phi[(row, col)] += r.values[k];
            phi_xi[(row, col)] += r.d_xi[k];
            phi_eta[(row, col)] += r.d_eta[k];
        }
    }
    Ok(CollocationMatrices {
        phi,
        phi_xi,
        phi_eta,
    })
}

/// Hager's 1-norm estimate of `||A^-1||_1`, given solvers for `A` and `A^T`.
fn inverse_norm1_estimate(
    n: usize,
    solve: impl Fn(&DVector<f64>) -> Option<DVector<f64>>,
    solve_t: impl Fn(&DVector<f64>) -> Option<DVector<f64>>,
) -> Option<f64> {
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut est = 0.0;
    for _ in 0..5 {
        let y = solve(&x)?;
        est = y.iter().map(|v| v.abs()).sum::<f64>();
        let s = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let z = solve_t(&s)?;
        let (jmax, zmax) = z
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (j, v)| if v.abs() > acc.1 { (j, v.abs()) } else { acc });
        if zmax <= z.dot(&x) {
            break;
        }
        x.fill(0.0);
        x[jmax] = 1.0;
    }
    Some(est)
}

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `D = phi_d phi^-1` for each derivative matrix, through one factorization
/// of `phi^T`. Also returns the 1-norm condition estimate of `phi`.
fn right_divide(
    name: &str,
    phi: &DMatrix<f64>,
    derivs: &[&DMatrix<f64>],
) -> Result<(Vec<DMatrix<f64>>, f64)> {
    let n = phi.nrows();
    let lu = phi.clone().lu();
    let lu_t = phi.transpose().lu();
    let singular = || Error::IllConditioned {
        name: name.to_string(),
        cond: f64::INFINITY,
    };
    let inv_norm = inverse_norm1_estimate(n, |b| lu.solve(b), |b| lu_t.solve(b))
        .ok_or_else(singular)?;
    let cond = norm1(phi) * inv_norm;
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned {
            name: name.to_string(),
            cond,
        });
    }
    // D phi = phi_d  <=>  phi^T D^T = phi_d^T
    let ops = derivs
        .iter()
        .map(|d| lu_t.solve(&d.transpose()).map(|dt| dt.transpose()))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(singular)?;
    Ok((ops, cond))
}

/// `n x n` univariate collocation factor `D = N' N^-1` at the Greville points.
#[derive(Debug, Clone)]
pub struct UnivariateOperator {
    pub matrix: DMatrix<f64>,
    pub condition: f64,
}

/// Univariate collocation matrix and its derivative: row `r` holds `N_c(x_r)`
/// and `N_c'(x_r)` (periodic columns wrapped).
pub fn univariate_collocation(kv: &KnotVector, points: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = kv.n_basis();
    let mut phi = DMatrix::zeros(points.len(), n);
    let mut dphi = DMatrix::zeros(points.len(), n);
    for (row, &x) in points.iter().enumerate() {
        let b = kv.eval_basis_derivs(x)?;
        let d = b.derivs.as_ref().expect("derivatives requested");
        for (r, &v) in b.values.iter().enumerate() {
            let col = kv.wrap(b.first() + r);
            phi[(row, col)] += v;
            dphi[(row, col)] += d[r];
        }
    }
    Ok((phi, dphi))
}

impl UnivariateOperator {
    pub fn new(kv: &KnotVector, points: &[f64]) -> Result<Self> {
        let (phi, dphi) = univariate_collocation(kv, points)?;
        if phi.nrows() != phi.ncols() {
            return Err(Error::Invalid(format!(
                "{} collocation points for {} basis functions",
                phi.nrows(),
                phi.ncols()
            )));
        }
        let (mut ops, condition) = right_divide("univariate basis", &phi, &[&dphi])?;
        Ok(Self {
            matrix: ops.pop().unwrap(),
            condition,
        })
    }
}

/// Pointwise data needed to turn the polynomial operators into rational ones.
#[derive(Debug, Clone)]
pub struct RationalFactor {
    pub w: Vec<f64>,
    pub inv_w: Vec<f64>,
    pub dw_xi: Vec<f64>,
    pub dw_eta: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TensorOperators {
    pub n_u: usize,
    pub n_v: usize,
    pub d_u: UnivariateOperator,
    pub d_v: UnivariateOperator,
    pub rational: Option<RationalFactor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Xi,
    Eta,
}

#[derive(Debug, Clone)]
pub enum DiffOperators {
    Dense {
        d_xi: DMatrix<f64>,
        d_eta: DMatrix<f64>,
        condition: f64,
    },
    Tensor(TensorOperators),
}

/// Literal `D_xi = Phi_xi Phi^-1`, `D_eta = Phi_eta Phi^-1` from dense matrices.
pub fn build_diff_operators(mats: &CollocationMatrices) -> Result<DiffOperators> {
    let (mut ops, condition) = right_divide(
        &format!("{0}x{0} patch", mats.phi.nrows()),
        &mats.phi,
        &[&mats.phi_xi, &mats.phi_eta],
    )?;
    let d_eta = ops.pop().unwrap();
    let d_xi = ops.pop().unwrap();
    Ok(DiffOperators::Dense {
        d_xi,
        d_eta,
        condition,
    })
}

impl DiffOperators {
    /// Dense operators assembled from the patch basis.
    pub fn dense(patch: &NurbsPatch2D, colloc: &CollocationSet) -> Result<Self> {
        build_diff_operators(&assemble_collocation(patch, colloc)?)
    }

    /// Tensor-factored operators for the patch basis.
    pub fn tensor(patch: &NurbsPatch2D, colloc: &CollocationSet) -> Result<Self> {
        let d_u = UnivariateOperator::new(patch.knots_u(), &colloc.xi)?;
        let d_v = UnivariateOperator::new(patch.knots_v(), &colloc.eta)?;
        let rational = if patch.is_rational() {
            let n = colloc.len();
            let mut f = RationalFactor {
                w: Vec::with_capacity(n),
                inv_w: Vec::with_capacity(n),
                dw_xi: Vec::with_capacity(n),
                dw_eta: Vec::with_capacity(n),
            };
            for &[u, v] in &colloc.points {
                let (w, wx, we) = patch.weight_function(u, v)?;
                f.w.push(w);
                f.inv_w.push(1.0 / w);
                f.dw_xi.push(wx);
                f.dw_eta.push(we);
            }
            Some(f)
        } else {
            None
        };
        let (n_u, n_v) = colloc.shape();
        let ops = TensorOperators {
            n_u,
            n_v,
            d_u,
            d_v,
            rational,
        };
        let cond = ops.condition_estimate(patch.weights());
        if !(cond <= MAX_CONDITION) {
            return Err(Error::IllConditioned {
                name: format!("{n_u}x{n_v} patch"),
                cond,
            });
        }
        Ok(DiffOperators::Tensor(ops))
    }

    pub fn len(&self) -> usize {
        match self {
            DiffOperators::Dense { d_xi, .. } => d_xi.nrows(),
            DiffOperators::Tensor(t) => t.n_u * t.n_v,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn condition_estimate(&self) -> f64 {
        match self {
            DiffOperators::Dense { condition, .. } => *condition,
            DiffOperators::Tensor(t) => t.d_u.condition * t.d_v.condition,
        }
    }

    pub fn apply_xi(&self, input: &[f64], out: &mut [f64]) {
        self.apply(Axis::Xi, input, out, &mut Vec::new());
    }

    pub fn apply_eta(&self, input: &[f64], out: &mut [f64]) {
        self.apply(Axis::Eta, input, out, &mut Vec::new());
    }

    /// Differentiates `input.len() / N` contiguous fields at once.
    pub fn apply(&self, axis: Axis, input: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) {
        let n = self.len();
        assert_eq!(input.len(), out.len());
        assert_eq!(input.len() % n, 0);
        let k = input.len() / n;
        match self {
            DiffOperators::Dense { d_xi, d_eta, .. } => {
                let d = if axis == Axis::Xi { d_xi } else { d_eta };
                // out (n x k) = D (n x n) * in (n x k), all column-major
                unsafe {
                    matrixmultiply::dgemm(
                        n,
                        n,
                        k,
                        1.0,
                        d.as_ptr(),
                        1,
                        n as isize,
                        input.as_ptr(),
                        1,
                        n as isize,
                        0.0,
                        out.as_mut_ptr(),
                        1,
                        n as isize,
                    );
                }
            }
            DiffOperators::Tensor(t) => t.apply(axis, input, out, k, scratch),
        }
    }

    /// Materializes the operators as dense `N x N` matrices.
    pub fn to_dense(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        match self {
            DiffOperators::Dense { d_xi, d_eta, .. } => (d_xi.clone(), d_eta.clone()),
            DiffOperators::Tensor(_) => {
                let n = self.len();
                let eye = DMatrix::<f64>::identity(n, n);
                let mut dx = DMatrix::zeros(n, n);
                let mut de = DMatrix::zeros(n, n);
                let mut scratch = Vec::new();
                self.apply(Axis::Xi, eye.as_slice(), dx.as_mut_slice(), &mut scratch);
                self.apply(Axis::Eta, eye.as_slice(), de.as_mut_slice(), &mut scratch);
                (dx, de)
            }
        }
    }
}

impl TensorOperators {
    fn condition_estimate(&self, weights: &[f64]) -> f64 {
        let base = self.d_u.condition * self.d_v.condition;
        match &self.rational {
            None => base,
            Some(r) => {
                let spread = |v: &[f64]| {
                    let (lo, hi) = v
                        .iter()
                        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
                    hi / lo
                };
                base * spread(&r.w) * spread(weights)
            }
        }
    }

    fn apply_polynomial(&self, axis: Axis, input: &[f64], out: &mut [f64], k: usize) {
        let (nu, nv) = (self.n_u, self.n_v);
        match axis {
            Axis::Xi => {
                // fields stacked as one nu x (k nv) column-major matrix
                let d = &self.d_u.matrix;
                unsafe {
                    matrixmultiply::dgemm(
                        nu,
                        nu,
                        k * nv,
                        1.0,
                        d.as_ptr(),
                        1,
                        nu as isize,
                        input.as_ptr(),
                        1,
                        nu as isize,
                        0.0,
                        out.as_mut_ptr(),
                        1,
                        nu as isize,
                    );
                }
            }
            Axis::Eta => {
                // out_f (nu x nv) = in_f (nu x nv) * D_v^T
                let d = &self.d_v.matrix;
                let n = nu * nv;
                for f in 0..k {
                    let (src, dst) = (&input[f * n..(f + 1) * n], &mut out[f * n..(f + 1) * n]);
                    unsafe {
                        matrixmultiply::dgemm(
                            nu,
                            nv,
                            nv,
                            1.0,
                            src.as_ptr(),
                            1,
                            nu as isize,
                            d.as_ptr(),
                            nv as isize,
                            1,
                            0.0,
                            dst.as_mut_ptr(),
                            1,
                            nu as isize,
                        );
                    }
                }
            }
        }
    }

    fn apply(&self, axis: Axis, input: &[f64], out: &mut [f64], k: usize, scratch: &mut Vec<f64>) {
        match &self.rational {
            None => self.apply_polynomial(axis, input, out, k),
            Some(r) => {
                let n = self.n_u * self.n_v;
                scratch.clear();
                scratch.extend(
                    input
                        .chunks_exact(n)
                        .flat_map(|g| g.iter().zip(&r.w).map(|(a, w)| a * w)),
                );
                self.apply_polynomial(axis, scratch, out, k);
                let dw = if axis == Axis::Xi { &r.dw_xi } else { &r.dw_eta };
                for (o, g) in out.chunks_exact_mut(n).zip(input.chunks_exact(n)) {
                    for p in 0..n {
                        o[p] = (o[p] - g[p] * dw[p]) * r.inv_w[p];
                    }
                }
            }
        }
    }
}

/// Jacobians, local spacings and nodal quadrature weights at every point.
#[derive(Debug, Clone)]
pub struct MetricData {
    pub jacobians: Vec<JacobianData>,
    /// `|dx/dxi| * dxi` with `dxi` the smaller adjacent Greville gap.
    pub h_xi: Vec<f64>,
    pub h_eta: Vec<f64>,
    /// Trapezoidal area weights `|J| * cell_xi * cell_eta`.
    pub area: Vec<f64>,
}

/// Smaller adjacent gap and trapezoidal cell width per point.
fn spacings(points: &[f64], periodic: bool) -> (Vec<f64>, Vec<f64>) {
    let n = points.len();
    let gap = |a: usize, b: usize| {
        let d = points[b] - points[a];
        if d <= 0.0 && periodic {
            d + 1.0
        } else {
            d
        }
    };
    let mut local = Vec::with_capacity(n);
    let mut cell = Vec::with_capacity(n);
    for i in 0..n {
        let left = if i > 0 {
            Some(gap(i - 1, i))
        } else if periodic {
            Some(gap(n - 1, 0))
        } else {
            None
        };
        let right = if i + 1 < n {
            Some(gap(i, i + 1))
        } else if periodic {
            Some(gap(n - 1, 0))
        } else {
            None
        };
        let (l, r) = (left.unwrap_or(0.0), right.unwrap_or(0.0));
        local.push(match (left, right) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => 1.0,
        });
        cell.push(0.5 * (l + r));
    }
    (local, cell)
}

pub fn precompute_metrics(patch: &NurbsPatch2D, colloc: &CollocationSet) -> Result<MetricData> {
    let [pu, pv] = colloc.periodic();
    let (du, cu) = spacings(&colloc.xi, pu);
    let (dv, cv) = spacings(&colloc.eta, pv);
    let (nu, _) = colloc.shape();
    let n = colloc.len();
    let mut m = MetricData {
        jacobians: Vec::with_capacity(n),
        h_xi: Vec::with_capacity(n),
        h_eta: Vec::with_capacity(n),
        area: Vec::with_capacity(n),
    };
    for (k, &[u, v]) in colloc.points.iter().enumerate() {
        let jac = match patch.jacobian(u, v) {
            Ok(j) => j,
            Err(Error::SingularMap { det, .. }) => return Err(Error::InvertedMap { index: k, det }),
            Err(e) => return Err(e),
        };
        if !(jac.det > 0.0) {
            return Err(Error::InvertedMap {
                index: k,
                det: jac.det,
            });
        }
        let (i, j) = (k % nu, k / nu);
        m.h_xi.push(jac.stretch_xi() * du[i]);
        m.h_eta.push(jac.stretch_eta() * dv[j]);
        m.area.push(jac.det * cu[i] * cv[j]);
        m.jacobians.push(jac);
    }
    Ok(m)
}
