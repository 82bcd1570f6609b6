//! D2Q9 velocity set, BGK equilibrium, moments and the contravariant
//! velocity components on a mapped grid.

use log::warn;

use crate::collocation::MetricData;
use crate::error::{Error, Result};

pub const Q: usize = 9;
pub const CS2: f64 = 1.0 / 3.0;
/// Mach number above which the equilibrium warns.
pub const MACH_WARN: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct VelocitySet {
    pub e: [[f64; 2]; Q],
    pub w: [f64; Q],
    pub opposite: [usize; Q],
    pub cs2: f64,
}

/// Rest, then the four axis directions counterclockwise from +x, then the
/// four diagonals counterclockwise from (1, 1).
pub fn d2q9() -> VelocitySet {
    let (a, b, c) = (4.0 / 9.0, 1.0 / 9.0, 1.0 / 36.0);
    VelocitySet {
        e: [
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [-1.0, 0.0],
            [0.0, -1.0],
            [1.0, 1.0],
            [-1.0, 1.0],
            [-1.0, -1.0],
            [1.0, -1.0],
        ],
        w: [a, b, b, b, b, c, c, c, c],
        opposite: [0, 3, 4, 1, 2, 7, 8, 5, 6],
        cs2: CS2,
    }
}

impl Default for VelocitySet {
    fn default() -> Self {
        d2q9()
    }
}

impl VelocitySet {
    pub fn cs(&self) -> f64 {
        self.cs2.sqrt()
    }

    /// Equilibrium without validation; the hot-path form.
    #[inline]
    pub fn equilibrium_unchecked(&self, rho: f64, u: [f64; 2], out: &mut [f64; Q]) {
        let inv = 1.0 / self.cs2;
        let uu = 0.5 * (u[0] * u[0] + u[1] * u[1]) * inv;
        for a in 0..Q {
            let eu = (self.e[a][0] * u[0] + self.e[a][1] * u[1]) * inv;
            out[a] = self.w[a] * rho * (1.0 + eu + 0.5 * eu * eu - uu);
        }
    }

    pub fn equilibrium(&self, rho: f64, u: [f64; 2]) -> Result<[f64; Q]> {
        if !(rho > 0.0) || !u[0].is_finite() || !u[1].is_finite() {
            return Err(Error::InvalidState(format!(
                "equilibrium needs rho > 0 and finite u (rho={rho}, u={u:?})"
            )));
        }
        let mach = u[0].hypot(u[1]) / self.cs();
        if mach > MACH_WARN {
            warn!("Mach number {mach:.3} exceeds {MACH_WARN}");
        }
        let mut out = [0.0; Q];
        self.equilibrium_unchecked(rho, u, &mut out);
        Ok(out)
    }

    /// `(rho, u, p)` with `u` from the physical lattice velocities.
    #[inline]
    pub fn moments(&self, f: &[f64; Q]) -> (f64, [f64; 2], f64) {
        let mut rho = 0.0;
        let mut m = [0.0; 2];
        for a in 0..Q {
            rho += f[a];
            m[0] += f[a] * self.e[a][0];
            m[1] += f[a] * self.e[a][1];
        }
        (rho, [m[0] / rho, m[1] / rho], rho * self.cs2)
    }
}

/// `tau = nu / cs^2 + dt / 2`, the lattice relation for a stream-collide update.
pub fn relaxation_time(nu: f64, dt: f64) -> Result<f64> {
    if !(nu > 0.0 && dt > 0.0) {
        return Err(Error::Invalid(format!(
            "relaxation time needs nu > 0 and dt > 0 (nu={nu}, dt={dt})"
        )));
    }
    let tau = nu / CS2 + 0.5 * dt;
    if tau / dt < 0.55 {
        warn!("tau/dt = {:.4} is close to the stability limit 0.5", tau / dt);
    }
    Ok(tau)
}

/// Inverse of [`relaxation_time`].
pub fn viscosity(tau: f64, dt: f64) -> f64 {
    CS2 * (tau - 0.5 * dt)
}

/// Parametric components `J^-1 e_a` of every lattice velocity at every point,
/// stored direction-major: `xi[a * n + k]`.
#[derive(Debug, Clone)]
pub struct TransformedVelocities {
    pub n: usize,
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
}

impl TransformedVelocities {
    #[inline]
    pub fn at(&self, a: usize, k: usize) -> [f64; 2] {
        [self.xi[a * self.n + k], self.eta[a * self.n + k]]
    }
}

pub fn transform_velocities(metrics: &MetricData, vset: &VelocitySet) -> TransformedVelocities {
    let n = metrics.jacobians.len();
    let mut xi = vec![0.0; Q * n];
    let mut eta = vec![0.0; Q * n];
    for (k, jac) in metrics.jacobians.iter().enumerate() {
        let inv = jac.inv;
        for a in 0..Q {
            let e = vset.e[a];
            xi[a * n + k] = inv[0][0] * e[0] + inv[0][1] * e[1];
            eta[a * n + k] = inv[1][0] * e[0] + inv[1][1] * e[1];
        }
    }
    TransformedVelocities { n, xi, eta }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn weights_and_isotropy() {
        let v = d2q9();
        assert_eq!(v.w[0], 4.0 / 9.0);
        assert_eq!(v.w[1], 1.0 / 9.0);
        assert_eq!(v.w[5], 1.0 / 36.0);
        assert_abs_diff_eq!(v.w.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        for i in 0..2 {
            let s: f64 = (0..Q).map(|a| v.w[a] * v.e[a][i]).sum();
            assert_abs_diff_eq!(s, 0.0, epsilon = 1e-15);
            for j in 0..2 {
                let s: f64 = (0..Q).map(|a| v.w[a] * v.e[a][i] * v.e[a][j]).sum();
                let expect = if i == j { CS2 } else { 0.0 };
                assert_abs_diff_eq!(s, expect, epsilon = 1e-15);
            }
        }
        for a in 0..Q {
            let b = v.opposite[a];
            assert_eq!(v.e[b], [-v.e[a][0], -v.e[a][1]]);
            assert_eq!(v.opposite[b], a);
        }
    }

    #[test]
    fn equilibrium_values() {
        let v = d2q9();
        let f = v.equilibrium(1.0, [0.1, 0.0]).unwrap();
        assert_abs_diff_eq!(f[1], (1.0 + 0.3 + 0.045 - 0.015) / 9.0, epsilon = 1e-16);
        assert_abs_diff_eq!(f[1], 0.147_777_777_777_777_8, epsilon = 1e-15);
        let rest = v.equilibrium(1.3, [0.0, 0.0]).unwrap();
        for a in 0..Q {
            assert_abs_diff_eq!(rest[a], 1.3 * v.w[a], epsilon = 1e-16);
        }
        assert!(v.equilibrium(0.0, [0.0, 0.0]).is_err());
        assert!(v.equilibrium(-1.0, [0.0, 0.0]).is_err());
    }

    #[test]
    fn moments_round_trip() {
        let v = d2q9();
        let (rho, u, p) = v.moments(&v.w);
        assert_abs_diff_eq!(rho, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(u[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-15);
        for (r0, u0) in [(1.0, [0.1, 0.0]), (2.0, [0.0, -0.05])] {
            let (rho, u, _) = v.moments(&v.equilibrium(r0, u0).unwrap());
            assert_abs_diff_eq!(rho, r0, epsilon = 1e-14);
            assert_abs_diff_eq!(u[0], u0[0], epsilon = 1e-14);
            assert_abs_diff_eq!(u[1], u0[1], epsilon = 1e-14);
        }
    }

    #[test]
    fn collision_conserves_mass_and_momentum() {
        let v = d2q9();
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..1000 {
            let mut f = [0.0; Q];
            for a in 0..Q {
                f[a] = v.w[a] * rng.random_range(0.5..1.5);
            }
            let (rho, u, _) = v.moments(&f);
            let mut feq = [0.0; Q];
            v.equilibrium_unchecked(rho, u, &mut feq);
            let mut s = [0.0; 3];
            for a in 0..Q {
                let d = f[a] - feq[a];
                s[0] += d;
                s[1] += d * v.e[a][0];
                s[2] += d * v.e[a][1];
            }
            assert!(s.iter().all(|x| x.abs() < 1e-13), "{s:?}");
        }
    }

    #[test]
    fn tau_relation() {
        assert_abs_diff_eq!(relaxation_time(1e-3, 1e-3).unwrap(), 3.5e-3, epsilon = 1e-18);
        assert_abs_diff_eq!(relaxation_time(1e-14, 1e-3).unwrap(), 5e-4, epsilon = 1e-12);
        for (nu, dt) in [(1e-3, 1e-3), (0.02, 0.5), (1e-5, 2e-2)] {
            let tau = relaxation_time(nu, dt).unwrap();
            assert!((viscosity(tau, dt) - nu).abs() <= 1e-15 * nu.max(1.0));
        }
        assert!(relaxation_time(0.0, 1.0).is_err());
    }

    #[test]
    fn moving_lid_correction() {
        let v = d2q9();
        let corr = 2.0 * v.w[5] * (v.e[5][0] * 0.1) / v.cs2;
        assert_abs_diff_eq!(corr, 1.0 / 60.0, epsilon = 1e-16);
    }
}
