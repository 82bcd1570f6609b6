//! Precomputed grid data, the semi-discrete right-hand side and RK4.
//!
//! Distributions are stored direction-major: `f[a * n + k]` is direction
//! `a` at collocation point `k`.

use rayon::prelude::*;

use super::config::{ConvectionForm, OperatorMode};
use crate::collocation::{precompute_metrics, Axis, CollocationSet, DiffOperators, MetricData};
use crate::error::{Error, Result};
use crate::lattice::{d2q9, transform_velocities, TransformedVelocities, VelocitySet, Q};
use crate::nurbs::NurbsPatch2D;

#[derive(Debug, Clone)]
pub struct Discretization {
    pub patch: NurbsPatch2D,
    pub colloc: CollocationSet,
    pub ops: DiffOperators,
    pub metrics: MetricData,
    pub etilde: TransformedVelocities,
    pub vset: VelocitySet,
    /// Directions whose contravariant component is not identically zero.
    active_xi: Vec<usize>,
    active_eta: Vec<usize>,
}

/// Run controls that affect a right-hand-side evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RhsOptions {
    pub form: ConvectionForm,
    pub parallel: bool,
}

/// Scratch buffers reused across right-hand-side evaluations.
#[derive(Debug, Default, Clone)]
pub struct RhsWorkspace {
    flux: Vec<f64>,
    deriv: Vec<f64>,
    scratch: Vec<f64>,
    /// Point-major collision terms.
    omega: Vec<f64>,
    pub rho: Vec<f64>,
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
}

impl Discretization {
    pub fn new(patch: NurbsPatch2D, mode: OperatorMode) -> Result<Self> {
        let colloc = CollocationSet::greville(&patch)?;
        let metrics = precompute_metrics(&patch, &colloc)?;
        let ops = match mode {
            OperatorMode::Tensor => DiffOperators::tensor(&patch, &colloc)?,
            OperatorMode::Dense => DiffOperators::dense(&patch, &colloc)?,
        };
        let vset = d2q9();
        let etilde = transform_velocities(&metrics, &vset);
        let n = colloc.len();
        let active = |c: &[f64]| -> Vec<usize> {
            (0..Q)
                .filter(|&a| c[a * n..(a + 1) * n].iter().any(|v| *v != 0.0))
                .collect()
        };
        let active_xi = active(&etilde.xi);
        let active_eta = active(&etilde.eta);
        Ok(Self {
            patch,
            colloc,
            ops,
            metrics,
            etilde,
            vset,
            active_xi,
            active_eta,
        })
    }

    pub fn len(&self) -> usize {
        self.colloc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colloc.is_empty()
    }

    /// Largest stable step for Courant number `cfl`:
    /// `cfl * min_k 1 / max_a (|e_xi| / h_xi + |e_eta| / h_eta)`.
    pub fn cfl_timestep(&self, cfl: f64) -> Result<f64> {
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::Invalid(format!("CFL must be in (0, 1] (got {cfl})")));
        }
        let n = self.len();
        let mut worst = 0.0f64;
        for k in 0..n {
            let (hx, he) = (self.metrics.h_xi[k], self.metrics.h_eta[k]);
            for a in 0..Q {
                let e = self.etilde.at(a, k);
                worst = worst.max(e[0].abs() / hx + e[1].abs() / he);
            }
        }
        Ok(cfl / worst)
    }

    /// Parametric variant `cfl * min_k min_a h_min / |J^-1 e_a|` with `h_min`
    /// the smallest parametric collocation gap.
    pub fn adaptive_timestep(&self, cfl: f64) -> Result<f64> {
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::Invalid(format!("CFL must be in (0, 1] (got {cfl})")));
        }
        let gap = |p: &[f64]| {
            p.windows(2)
                .map(|w| w[1] - w[0])
                .filter(|d| *d > 0.0)
                .fold(f64::INFINITY, f64::min)
        };
        let h_min = gap(&self.colloc.xi).min(gap(&self.colloc.eta));
        let mut fastest = 0.0f64;
        for k in 0..self.len() {
            for a in 1..Q {
                let e = self.etilde.at(a, k);
                fastest = fastest.max(e[0].hypot(e[1]));
            }
        }
        Ok(cfl * h_min / fastest)
    }

    /// Density and velocity at every point.
    pub fn moments_into(&self, f: &[f64], rho: &mut Vec<f64>, ux: &mut Vec<f64>, uy: &mut Vec<f64>) {
        let n = self.len();
        rho.clear();
        rho.resize(n, 0.0);
        ux.clear();
        ux.resize(n, 0.0);
        uy.clear();
        uy.resize(n, 0.0);
        for a in 0..Q {
            let [ex, ey] = self.vset.e[a];
            let fa = &f[a * n..(a + 1) * n];
            for k in 0..n {
                rho[k] += fa[k];
                ux[k] += ex * fa[k];
                uy[k] += ey * fa[k];
            }
        }
        for k in 0..n {
            ux[k] /= rho[k];
            uy[k] /= rho[k];
        }
    }

    /// Convection part of the right-hand side into `out`.
    pub fn convection(&self, f: &[f64], out: &mut [f64], ws: &mut RhsWorkspace, opts: RhsOptions) {
        let n = self.len();
        out.fill(0.0);
        for (axis, active, comp) in [
            (Axis::Xi, &self.active_xi, &self.etilde.xi),
            (Axis::Eta, &self.active_eta, &self.etilde.eta),
        ] {
            let m = active.len() * n;
            if m == 0 {
                continue;
            }
            ws.flux.resize(m, 0.0);
            ws.deriv.resize(m, 0.0);
            for (s, &a) in active.iter().enumerate() {
                let dst = &mut ws.flux[s * n..(s + 1) * n];
                let (fa, ca) = (&f[a * n..(a + 1) * n], &comp[a * n..(a + 1) * n]);
                match opts.form {
                    ConvectionForm::Advective => dst.copy_from_slice(fa),
                    ConvectionForm::Flux => {
                        for k in 0..n {
                            dst[k] = ca[k] * fa[k];
                        }
                    }
                }
            }
            if opts.parallel {
                ws.flux[..m]
                    .par_chunks(n)
                    .zip(ws.deriv[..m].par_chunks_mut(n))
                    .for_each_init(Vec::new, |scratch, (src, dst)| {
                        self.ops.apply(axis, src, dst, scratch)
                    });
            } else {
                self.ops
                    .apply(axis, &ws.flux[..m], &mut ws.deriv[..m], &mut ws.scratch);
            }
            for (s, &a) in active.iter().enumerate() {
                let src = &ws.deriv[s * n..(s + 1) * n];
                let dst = &mut out[a * n..(a + 1) * n];
                match opts.form {
                    ConvectionForm::Advective => {
                        let ca = &comp[a * n..(a + 1) * n];
                        for k in 0..n {
                            dst[k] -= ca[k] * src[k];
                        }
                    }
                    ConvectionForm::Flux => {
                        for k in 0..n {
                            dst[k] -= src[k];
                        }
                    }
                }
            }
        }
    }

    /// Full right-hand side `C + Omega`. Fails on a nonpositive or
    /// non-finite density, naming the first offending point.
    pub fn rhs(
        &self,
        f: &[f64],
        tau: f64,
        out: &mut [f64],
        ws: &mut RhsWorkspace,
        opts: RhsOptions,
    ) -> std::result::Result<(), String> {
        let n = self.len();
        debug_assert_eq!(f.len(), Q * n);
        self.convection(f, out, ws, opts);
        let (mut rho, mut ux, mut uy) = (
            std::mem::take(&mut ws.rho),
            std::mem::take(&mut ws.ux),
            std::mem::take(&mut ws.uy),
        );
        self.moments_into(f, &mut rho, &mut ux, &mut uy);
        let bad = rho.iter().position(|r| !(*r > 0.0 && r.is_finite()));
        if let Some(k) = bad {
            let msg = format!("density {} at point {k}", rho[k]);
            (ws.rho, ws.ux, ws.uy) = (rho, ux, uy);
            return Err(msg);
        }
        let inv_tau = 1.0 / tau;
        let inv_cs2 = 1.0 / self.vset.cs2;
        let vs = &self.vset;
        // BGK relaxation with the round-off residual of its mass and
        // momentum moments projected out. Near rest the rounding of f_eq is
        // the same every step, so an unprojected residual accumulates into
        // a steady drift of the conserved totals.
        let collide = |k: usize, om: &mut [f64]| {
            let (u, v) = (ux[k], uy[k]);
            let uu = 0.5 * (u * u + v * v) * inv_cs2;
            let (mut m0, mut mx, mut my) = (0.0, 0.0, 0.0);
            for a in 0..Q {
                let [ex, ey] = vs.e[a];
                let eu = (ex * u + ey * v) * inv_cs2;
                let feq = vs.w[a] * rho[k] * (1.0 + eu + 0.5 * eu * eu - uu);
                let d = feq - f[a * n + k];
                om[a] = d;
                m0 += d;
                mx += ex * d;
                my += ey * d;
            }
            for a in 0..Q {
                let [ex, ey] = vs.e[a];
                let fix = vs.w[a] * (m0 + (ex * mx + ey * my) * inv_cs2);
                om[a] = (om[a] - fix) * inv_tau;
            }
        };
        ws.omega.resize(Q * n, 0.0);
        if opts.parallel {
            ws.omega
                .par_chunks_mut(Q)
                .enumerate()
                .for_each(|(k, om)| collide(k, om));
            out.par_chunks_mut(n).enumerate().for_each(|(a, dst)| {
                for k in 0..n {
                    dst[k] += ws.omega[k * Q + a];
                }
            });
        } else {
            for (k, om) in ws.omega.chunks_mut(Q).enumerate() {
                collide(k, om);
            }
            for (a, dst) in out.chunks_mut(n).enumerate() {
                for k in 0..n {
                    dst[k] += ws.omega[k * Q + a];
                }
            }
        }
        (ws.rho, ws.ux, ws.uy) = (rho, ux, uy);
        Ok(())
    }
}

/// Stage buffers for [`rk4_step`].
#[derive(Debug, Default, Clone)]
pub struct Rk4Workspace {
    stage: Vec<f64>,
    k: Vec<f64>,
    acc: Vec<f64>,
}

/// Failure inside one RK4 stage (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct StageFailure {
    pub stage: usize,
    pub reason: String,
}

/// One classical RK4 step `f += dt/6 (k1 + 2 k2 + 2 k3 + k4)`.
///
/// `rhs(y, out)` evaluates the right-hand side; `fix(y)` is applied to
/// every intermediate stage state (pass a no-op for the plain scheme).
pub fn rk4_step<R, B>(
    f: &mut [f64],
    dt: f64,
    ws: &mut Rk4Workspace,
    mut rhs: R,
    mut fix: B,
) -> std::result::Result<(), StageFailure>
where
    R: FnMut(&[f64], &mut [f64]) -> std::result::Result<(), String>,
    B: FnMut(&mut [f64]),
{
    let len = f.len();
    ws.stage.resize(len, 0.0);
    ws.k.resize(len, 0.0);
    ws.acc.resize(len, 0.0);
    let fail = |stage: usize| move |reason: String| StageFailure { stage, reason };
    let check = |stage: usize, k: &[f64]| match k.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(StageFailure {
            stage,
            reason: format!("non-finite derivative at entry {i}"),
        }),
        None => Ok(()),
    };

    rhs(f, &mut ws.k).map_err(fail(1))?;
    check(1, &ws.k)?;
    ws.acc.copy_from_slice(&ws.k);
    for (stage, weight, frac) in [(2, 2.0, 0.5), (3, 2.0, 0.5), (4, 1.0, 1.0)] {
        let h = frac * dt;
        for i in 0..len {
            ws.stage[i] = f[i] + h * ws.k[i];
        }
        fix(&mut ws.stage);
        rhs(&ws.stage, &mut ws.k).map_err(fail(stage))?;
        check(stage, &ws.k)?;
        for i in 0..len {
            ws.acc[i] += weight * ws.k[i];
        }
    }
    let h = dt / 6.0;
    for i in 0..len {
        f[i] += h * ws.acc[i];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nurbs::{build_geometry, GeometryKind, GeometryParams};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    const SERIAL: RhsOptions = RhsOptions {
        form: ConvectionForm::Advective,
        parallel: false,
    };

    fn disc(kind: GeometryKind, degree: usize, points: usize) -> Discretization {
        let prm = GeometryParams::with_points(kind, degree, points).unwrap();
        Discretization::new(build_geometry(kind, &prm).unwrap(), OperatorMode::Tensor).unwrap()
    }

    fn rest(d: &Discretization, rho: f64) -> Vec<f64> {
        let n = d.len();
        (0..Q * n).map(|i| d.vset.w[i / n] * rho).collect()
    }

    #[test]
    fn rest_state_has_zero_rhs() {
        for kind in GeometryKind::ALL {
            let d = disc(kind, 3, 10);
            let f = rest(&d, 1.0);
            let mut out = vec![1.0; f.len()];
            let mut ws = RhsWorkspace::default();
            d.rhs(&f, 0.01, &mut out, &mut ws, SERIAL).unwrap();
            assert!(out.iter().all(|v| v.abs() < 1e-12), "{kind}");
        }
    }

    #[test]
    fn single_direction_advection() {
        let d = disc(GeometryKind::PeriodicBox, 4, 24);
        let n = d.len();
        let mut f = rest(&d, 1.0);
        let delta = 1e-3;
        for k in 0..n {
            f[n + k] += delta * (2.0 * PI * d.colloc.points[k][0]).sin();
        }
        let mut out = vec![0.0; f.len()];
        d.convection(&f, &mut out, &mut RhsWorkspace::default(), SERIAL);
        for k in 0..n {
            let x = d.colloc.points[k][0];
            let exact = -delta * 2.0 * PI * (2.0 * PI * x).cos();
            assert_abs_diff_eq!(out[n + k], exact, epsilon = 1e-7);
        }
        for a in (0..Q).filter(|a| *a != 1) {
            assert!(out[a * n..(a + 1) * n].iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn collision_term_conserves_moments() {
        let d = disc(GeometryKind::CurvedQuad, 2, 8);
        let n = d.len();
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let f: Vec<f64> = (0..Q * n)
            .map(|i| d.vset.w[i / n] * rng.random_range(0.8..1.2))
            .collect();
        let mut full = vec![0.0; f.len()];
        let mut conv = vec![0.0; f.len()];
        let mut ws = RhsWorkspace::default();
        d.rhs(&f, 0.05, &mut full, &mut ws, SERIAL).unwrap();
        d.convection(&f, &mut conv, &mut ws, SERIAL);
        for k in 0..n {
            let mut s = [0.0; 3];
            for a in 0..Q {
                let omega = full[a * n + k] - conv[a * n + k];
                s[0] += omega;
                s[1] += omega * d.vset.e[a][0];
                s[2] += omega * d.vset.e[a][1];
            }
            assert!(s.iter().all(|v| v.abs() < 1e-13), "{s:?}");
        }
    }

    #[test]
    fn serial_and_parallel_rhs_agree() {
        let d = disc(GeometryKind::QuarterAnnulus, 2, 9);
        let n = d.len();
        let f: Vec<f64> = (0..Q * n)
            .map(|i| d.vset.w[i / n] * (1.0 + 0.01 * ((i % n) as f64).sin()))
            .collect();
        let mut a = vec![0.0; f.len()];
        let mut b = vec![0.0; f.len()];
        d.rhs(&f, 0.05, &mut a, &mut RhsWorkspace::default(), SERIAL).unwrap();
        d.rhs(&f, 0.05, &mut b, &mut RhsWorkspace::default(), RhsOptions { parallel: true, ..SERIAL }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn negative_density_is_reported() {
        let d = disc(GeometryKind::UnitSquare, 2, 5);
        let mut f = rest(&d, 1.0);
        for a in 0..Q {
            f[a * d.len() + 7] = -1.0;
        }
        let err = d
            .rhs(&f, 0.1, &mut vec![0.0; f.len()], &mut RhsWorkspace::default(), SERIAL)
            .unwrap_err();
        assert!(err.contains("point 7"));
    }

    #[test]
    fn cfl_on_identity_and_scaled_maps() {
        let d = disc(GeometryKind::PeriodicBox, 2, 16);
        let h = 1.0 / 16.0;
        assert_abs_diff_eq!(d.cfl_timestep(0.8).unwrap(), 0.8 * h / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            d.cfl_timestep(0.4).unwrap(),
            0.5 * d.cfl_timestep(0.8).unwrap(),
            epsilon = 1e-18
        );
        let mut prm = GeometryParams::with_points(GeometryKind::PeriodicBox, 2, 16).unwrap();
        prm.length = [2.0, 2.0];
        let scaled = Discretization::new(
            build_geometry(GeometryKind::PeriodicBox, &prm).unwrap(),
            OperatorMode::Tensor,
        )
        .unwrap();
        assert_abs_diff_eq!(
            scaled.cfl_timestep(0.8).unwrap(),
            4.0 * d.cfl_timestep(0.8).unwrap(),
            epsilon = 1e-14
        );
        assert!(d.cfl_timestep(1.5).is_err());
    }

    #[test]
    fn rk4_scalar_amplification() {
        let lambda = -0.1;
        let mut y = [1.0];
        rk4_step(
            &mut y,
            1.0,
            &mut Rk4Workspace::default(),
            |f, out| {
                out[0] = lambda * f[0];
                Ok(())
            },
            |_| {},
        )
        .unwrap();
        let z: f64 = lambda;
        let poly = 1.0 + z + z * z / 2.0 + z.powi(3) / 6.0 + z.powi(4) / 24.0;
        assert!((y[0] - poly).abs() <= 1e-15);
    }

    #[test]
    fn rk4_zero_rhs_is_identity() {
        let orig = vec![0.3, -1.5, 7.25, 1e-300];
        let mut y = orig.clone();
        rk4_step(
            &mut y,
            0.7,
            &mut Rk4Workspace::default(),
            |_, out| {
                out.fill(0.0);
                Ok(())
            },
            |_| {},
        )
        .unwrap();
        assert_eq!(y, orig);
    }

    #[test]
    fn rk4_matches_textbook_stages() {
        // y' = A y with a fixed 3x3 matrix, stages written out longhand
        let a = [[-0.3, 1.0, 0.0], [-1.0, -0.2, 0.5], [0.1, 0.0, -0.7]];
        let mv = |y: &[f64]| -> Vec<f64> {
            (0..3).map(|i| (0..3).map(|j| a[i][j] * y[j]).sum()).collect()
        };
        let y0 = vec![1.0, -2.0, 0.5];
        let h = 0.37;
        let k1 = mv(&y0);
        let y1: Vec<f64> = (0..3).map(|i| y0[i] + 0.5 * h * k1[i]).collect();
        let k2 = mv(&y1);
        let y2: Vec<f64> = (0..3).map(|i| y0[i] + 0.5 * h * k2[i]).collect();
        let k3 = mv(&y2);
        let y3: Vec<f64> = (0..3).map(|i| y0[i] + h * k3[i]).collect();
        let k4 = mv(&y3);
        let expect: Vec<f64> = (0..3)
            .map(|i| y0[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        let mut y = y0.clone();
        rk4_step(
            &mut y,
            h,
            &mut Rk4Workspace::default(),
            |f, out| {
                out.copy_from_slice(&mv(f));
                Ok(())
            },
            |_| {},
        )
        .unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(y[i], expect[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn rk4_names_failing_stage() {
        let mut calls = 0;
        let err = rk4_step(
            &mut [1.0],
            0.1,
            &mut Rk4Workspace::default(),
            |_, out| {
                calls += 1;
                out[0] = if calls == 3 { f64::NAN } else { 1.0 };
                Ok(())
            },
            |_| {},
        )
        .unwrap_err();
        assert_eq!(err.stage, 3);
    }
}
