//! Boundary conditions, compiled once into per-point index plans.

use std::fmt;
use std::sync::Arc;

use super::discretization::Discretization;
use crate::error::{Error, Result};
use crate::lattice::{VelocitySet, Q};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Edge {
    XiMin,
    XiMax,
    EtaMin,
    EtaMax,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::XiMin, Edge::XiMax, Edge::EtaMin, Edge::EtaMax];

    /// Outward normal in parameter space.
    pub fn normal(self) -> [f64; 2] {
        match self {
            Edge::XiMin => [-1.0, 0.0],
            Edge::XiMax => [1.0, 0.0],
            Edge::EtaMin => [0.0, -1.0],
            Edge::EtaMax => [0.0, 1.0],
        }
    }

    pub fn opposite(self) -> Edge {
        match self {
            Edge::XiMin => Edge::XiMax,
            Edge::XiMax => Edge::XiMin,
            Edge::EtaMin => Edge::EtaMax,
            Edge::EtaMax => Edge::EtaMin,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Edge::XiMin => "xi_min",
            Edge::XiMax => "xi_max",
            Edge::EtaMin => "eta_min",
            Edge::EtaMax => "eta_max",
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    /// `(boundary, one step inward)` point pairs along the edge.
    fn points(self, nu: usize, nv: usize) -> Vec<(usize, usize)> {
        let at = |i: usize, j: usize| i + nu * j;
        match self {
            Edge::XiMin => (0..nv).map(|j| (at(0, j), at(1, j))).collect(),
            Edge::XiMax => (0..nv).map(|j| (at(nu - 1, j), at(nu - 2, j))).collect(),
            Edge::EtaMin => (0..nu).map(|i| (at(i, 0), at(i, 1))).collect(),
            Edge::EtaMax => (0..nu).map(|i| (at(i, nv - 1), at(i, nv - 2))).collect(),
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Time-dependent far-field target `(rho, u)` at a physical point.
pub type FarfieldFn = Arc<dyn Fn([f64; 2], f64) -> (f64, [f64; 2]) + Send + Sync>;

#[derive(Clone)]
pub enum BoundaryCondition {
    /// Paired with the opposite edge. A periodic basis makes this a no-op;
    /// on clamped knots the max edge copies the min edge.
    Periodic,
    /// Link bounce-back with moving-wall momentum correction.
    BounceBack { u_wall: [f64; 2] },
    /// Wall populations reset to equilibrium at the local density.
    EquilibriumWall { u_wall: [f64; 2] },
    /// Equilibrium target plus the non-equilibrium part of the inward neighbor.
    Farfield { rho: f64, u: [f64; 2] },
    AnalyticFarfield(FarfieldFn),
    /// Zero normal gradient by copying the inward neighbor.
    OutflowNeumann,
}

impl fmt::Debug for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Periodic => write!(f, "Periodic"),
            Self::BounceBack { u_wall } => write!(f, "BounceBack {{ u_wall: {u_wall:?} }}"),
            Self::EquilibriumWall { u_wall } => {
                write!(f, "EquilibriumWall {{ u_wall: {u_wall:?} }}")
            }
            Self::Farfield { rho, u } => write!(f, "Farfield {{ rho: {rho}, u: {u:?} }}"),
            Self::AnalyticFarfield(_) => write!(f, "AnalyticFarfield"),
            Self::OutflowNeumann => write!(f, "OutflowNeumann"),
        }
    }
}

/// Conditions for the edges `[xi_min, xi_max, eta_min, eta_max]`.
#[derive(Debug, Clone)]
pub struct BoundarySpec {
    pub edges: [BoundaryCondition; 4],
}

impl BoundarySpec {
    pub fn periodic() -> Self {
        Self::uniform(BoundaryCondition::Periodic)
    }

    pub fn uniform(bc: BoundaryCondition) -> Self {
        Self {
            edges: [bc.clone(), bc.clone(), bc.clone(), bc],
        }
    }

    pub fn get(&self, edge: Edge) -> &BoundaryCondition {
        &self.edges[edge.index()]
    }

    pub fn set(&mut self, edge: Edge, bc: BoundaryCondition) {
        self.edges[edge.index()] = bc;
    }
}

#[derive(Debug, Clone, PartialEq)]
struct WallPoint {
    k: usize,
    /// `(incoming direction, 2 w_out (e_out . u_wall) / cs^2)`.
    links: Vec<(usize, f64)>,
}

#[derive(Clone)]
enum FarfieldTarget {
    Constant { rho: f64, u: [f64; 2] },
    Analytic(FarfieldFn),
}

#[derive(Clone)]
struct FarfieldPoint {
    k: usize,
    inner: usize,
    x: [f64; 2],
    target: FarfieldTarget,
}

/// Boundary conditions resolved to point and direction indices.
#[derive(Clone)]
pub struct BoundaryPlan {
    n: usize,
    vset: VelocitySet,
    copies: Vec<(usize, usize)>,
    outflow: Vec<(usize, usize)>,
    farfield: Vec<FarfieldPoint>,
    eq_walls: Vec<(usize, [f64; 2])>,
    walls: Vec<WallPoint>,
}

impl fmt::Debug for BoundaryPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryPlan")
            .field("copies", &self.copies.len())
            .field("outflow", &self.outflow.len())
            .field("farfield", &self.farfield.len())
            .field("eq_walls", &self.eq_walls.len())
            .field("walls", &self.walls.len())
            .finish()
    }
}

impl BoundaryPlan {
    pub fn new(spec: &BoundarySpec, disc: &Discretization) -> Result<Self> {
        let (nu, nv) = disc.colloc.shape();
        let periodic = disc.colloc.periodic();
        let n = disc.len();
        if nu < 2 || nv < 2 {
            return Err(Error::Boundary("grid needs at least 2 points per direction".into()));
        }
        let mut errors = Vec::new();
        for edge in Edge::ALL {
            let axis_periodic = periodic[edge.index() / 2];
            let is_pair = matches!(spec.get(edge), BoundaryCondition::Periodic);
            let other_pair = matches!(spec.get(edge.opposite()), BoundaryCondition::Periodic);
            if is_pair && !other_pair {
                errors.push(format!(
                    "{edge} is periodic but {} is not",
                    edge.opposite()
                ));
            }
            if axis_periodic && !is_pair {
                errors.push(format!(
                    "{edge} lies on a periodic knot direction and must be declared periodic"
                ));
            }
            match spec.get(edge) {
                BoundaryCondition::BounceBack { u_wall } | BoundaryCondition::EquilibriumWall { u_wall }
                    if !(u_wall[0].is_finite() && u_wall[1].is_finite()) =>
                {
                    errors.push(format!("{edge}: wall velocity must be finite"))
                }
                BoundaryCondition::Farfield { rho, u }
                    if !(*rho > 0.0 && u[0].is_finite() && u[1].is_finite()) =>
                {
                    errors.push(format!("{edge}: far-field target needs rho > 0 and finite u"))
                }
                _ => {}
            }
        }
        if !errors.is_empty() {
            return Err(Error::Boundary(errors.join("; ")));
        }

        let vset = disc.vset.clone();
        let mut plan = BoundaryPlan {
            n,
            vset: vset.clone(),
            copies: Vec::new(),
            outflow: Vec::new(),
            farfield: Vec::new(),
            eq_walls: Vec::new(),
            walls: Vec::new(),
        };

        // copy-mode periodicity on clamped directions: max edge <- min edge
        for (axis, min_edge) in [(0, Edge::XiMin), (1, Edge::EtaMin)] {
            if !periodic[axis] && matches!(spec.get(min_edge), BoundaryCondition::Periodic) {
                let src = min_edge.points(nu, nv);
                let dst = min_edge.opposite().points(nu, nv);
                plan.copies
                    .extend(dst.iter().zip(&src).map(|(d, s)| (d.0, s.0)));
            }
        }

        // per-point bounce-back edges, plus the other edge-local conditions
        let mut wall_edges: Vec<Vec<(Edge, [f64; 2])>> = vec![Vec::new(); n];
        for edge in Edge::ALL {
            let pts = edge.points(nu, nv);
            match spec.get(edge) {
                BoundaryCondition::Periodic => {}
                BoundaryCondition::BounceBack { u_wall } => {
                    for &(k, _) in &pts {
                        wall_edges[k].push((edge, *u_wall));
                    }
                }
                BoundaryCondition::EquilibriumWall { u_wall } => {
                    plan.eq_walls.extend(pts.iter().map(|&(k, _)| (k, *u_wall)));
                }
                BoundaryCondition::Farfield { rho, u } => {
                    plan.farfield.extend(pts.iter().map(|&(k, inner)| FarfieldPoint {
                        k,
                        inner,
                        x: disc.colloc.physical[k],
                        target: FarfieldTarget::Constant { rho: *rho, u: *u },
                    }));
                }
                BoundaryCondition::AnalyticFarfield(func) => {
                    plan.farfield.extend(pts.iter().map(|&(k, inner)| FarfieldPoint {
                        k,
                        inner,
                        x: disc.colloc.physical[k],
                        target: FarfieldTarget::Analytic(func.clone()),
                    }));
                }
                BoundaryCondition::OutflowNeumann => plan.outflow.extend(pts),
            }
        }

        for (k, edges) in wall_edges.iter().enumerate() {
            if edges.is_empty() {
                continue;
            }
            // the fastest wall wins where two walls meet (lid corners)
            let u_wall = edges
                .iter()
                .map(|e| e.1)
                .fold([0.0f64, 0.0], |best, u| {
                    if u[0].hypot(u[1]) > best[0].hypot(best[1]) {
                        u
                    } else {
                        best
                    }
                });
            let mut links = Vec::new();
            for beta in 1..Q {
                let e = disc.etilde.at(beta, k);
                let scale = e[0].hypot(e[1]);
                let tol = 1e-12 * scale;
                let dots: Vec<f64> = edges
                    .iter()
                    .map(|(edge, _)| {
                        let nrm = edge.normal();
                        e[0] * nrm[0] + e[1] * nrm[1]
                    })
                    .collect();
                let incoming = dots.iter().all(|d| *d <= tol) && dots.iter().any(|d| *d < -tol);
                if incoming {
                    let out = vset.opposite[beta];
                    let eu = vset.e[out][0] * u_wall[0] + vset.e[out][1] * u_wall[1];
                    links.push((beta, 2.0 * vset.w[out] * eu / vset.cs2));
                }
            }
            plan.walls.push(WallPoint { k, links });
        }
        Ok(plan)
    }

    /// Number of bounce-back boundary points.
    pub fn wall_points(&self) -> usize {
        self.walls.len()
    }

    /// Incoming directions set at boundary point `k`, if it is a bounce-back point.
    pub fn incoming_at(&self, k: usize) -> Option<Vec<usize>> {
        self.walls
            .iter()
            .find(|w| w.k == k)
            .map(|w| w.links.iter().map(|l| l.0).collect())
    }

    /// Applies every condition to the direction-major state `f` at time `t`.
    pub fn apply(&self, f: &mut [f64], t: f64) {
        let n = self.n;
        let v = &self.vset;
        for &(dst, src) in &self.copies {
            for a in 0..Q {
                f[a * n + dst] = f[a * n + src];
            }
        }
        for &(k, inner) in &self.outflow {
            for a in 0..Q {
                f[a * n + k] = f[a * n + inner];
            }
        }
        let gather = |f: &[f64], k: usize| -> [f64; Q] { std::array::from_fn(|a| f[a * n + k]) };
        for p in &self.farfield {
            let (rho_t, u_t) = match &p.target {
                FarfieldTarget::Constant { rho, u } => (*rho, *u),
                FarfieldTarget::Analytic(func) => func(p.x, t),
            };
            let fi = gather(f, p.inner);
            let (rho_i, u_i, _) = v.moments(&fi);
            let mut eq_i = [0.0; Q];
            let mut eq_t = [0.0; Q];
            v.equilibrium_unchecked(rho_i, u_i, &mut eq_i);
            v.equilibrium_unchecked(rho_t, u_t, &mut eq_t);
            for a in 0..Q {
                f[a * n + p.k] = eq_t[a] + (fi[a] - eq_i[a]);
            }
        }
        for &(k, u_wall) in &self.eq_walls {
            let (rho, _, _) = v.moments(&gather(f, k));
            let mut eq = [0.0; Q];
            v.equilibrium_unchecked(rho, u_wall, &mut eq);
            for a in 0..Q {
                f[a * n + k] = eq[a];
            }
        }
        for w in &self.walls {
            let rho_b: f64 = (0..Q).map(|a| f[a * n + w.k]).sum();
            for &(beta, corr) in &w.links {
                let out = v.opposite[beta];
                f[beta * n + w.k] = f[out * n + w.k] - rho_b * corr;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nurbs::{build_geometry, GeometryKind, GeometryParams};
    use crate::solver::OperatorMode;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn disc(kind: GeometryKind, points: usize) -> Discretization {
        let prm = GeometryParams::with_points(kind, 2, points).unwrap();
        Discretization::new(build_geometry(kind, &prm).unwrap(), OperatorMode::Tensor).unwrap()
    }

    fn random_state(n: usize, seed: u64) -> Vec<f64> {
        let v = crate::lattice::d2q9();
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        (0..Q * n)
            .map(|i| v.w[i / n] * rng.random_range(0.9..1.1))
            .collect()
    }

    fn cavity_spec(lid: f64) -> BoundarySpec {
        let mut s = BoundarySpec::uniform(BoundaryCondition::BounceBack { u_wall: [0.0, 0.0] });
        s.set(Edge::EtaMax, BoundaryCondition::BounceBack { u_wall: [lid, 0.0] });
        s
    }

    #[test]
    fn stationary_wall_reflects() {
        let d = disc(GeometryKind::UnitSquare, 6);
        let plan = BoundaryPlan::new(&cavity_spec(0.0), &d).unwrap();
        let n = d.len();
        let mut f = random_state(n, 1);
        plan.apply(&mut f, 0.0);
        // bottom edge interior point: e_y > 0 directions come back from their opposites
        let k = d.colloc.index(2, 0);
        assert_eq!(plan.incoming_at(k).unwrap(), vec![2, 5, 6]);
        for (b, o) in [(2, 4), (5, 7), (6, 8)] {
            assert_eq!(f[b * n + k], f[o * n + k]);
        }
        // corner: only directions entering through both normals
        assert_eq!(plan.incoming_at(0).unwrap(), vec![1, 2, 5]);
    }

    #[test]
    fn lid_correction_and_corners() {
        let d = disc(GeometryKind::UnitSquare, 6);
        let plan = BoundaryPlan::new(&cavity_spec(0.1), &d).unwrap();
        let n = d.len();
        let mut f: Vec<f64> = (0..Q * n).map(|i| d.vset.w[i / n]).collect();
        let k = d.colloc.index(3, 5);
        plan.apply(&mut f, 0.0);
        // e_7 = (-1,-1) enters through the lid, mirrored from e_5 = (1, 1)
        assert_abs_diff_eq!(f[7 * n + k], 1.0 / 36.0 - 1.0 / 60.0, epsilon = 1e-16);
        assert_abs_diff_eq!(f[8 * n + k], 1.0 / 36.0 + 1.0 / 60.0, epsilon = 1e-16);
        assert_abs_diff_eq!(f[4 * n + k], 1.0 / 9.0, epsilon = 1e-16);
        // top-left corner uses the lid velocity
        let c = d.colloc.index(0, 5);
        assert_eq!(plan.incoming_at(c).unwrap(), vec![1, 4, 8]);
        assert_abs_diff_eq!(f[8 * n + c], 1.0 / 36.0 + 1.0 / 60.0, epsilon = 1e-16);
    }

    #[test]
    fn moving_wall_pushes_momentum() {
        let d = disc(GeometryKind::UnitSquare, 6);
        let plan = BoundaryPlan::new(&cavity_spec(0.05), &d).unwrap();
        let n = d.len();
        let mut f = vec![0.0; Q * n];
        for k in 0..n {
            let eq = d.vset.equilibrium(1.0, [0.05, 0.0]).unwrap();
            for a in 0..Q {
                f[a * n + k] = eq[a];
            }
        }
        plan.apply(&mut f, 0.0);
        let k = d.colloc.index(3, 5);
        let fk: [f64; Q] = std::array::from_fn(|a| f[a * n + k]);
        let (rho, u, _) = d.vset.moments(&fk);
        assert_abs_diff_eq!(rho, 1.0, epsilon = 1e-3);
        // equilibrium at the wall velocity is reproduced up to O(Ma^2)
        assert!((u[0] - 0.05).abs() < 0.05 * 0.05 * 3.0, "{u:?}");
        assert!(u[1].abs() < 1e-12);
    }

    #[test]
    fn annulus_walls_use_mapped_normals() {
        let d = disc(GeometryKind::QuarterAnnulus, 8);
        let spec = BoundarySpec::uniform(BoundaryCondition::BounceBack { u_wall: [0.0, 0.0] });
        let plan = BoundaryPlan::new(&spec, &d).unwrap();
        // inner arc at 45 degrees: directions pointing outward in radius enter the fluid
        let (_, nv) = d.colloc.shape();
        let k = d.colloc.index(0, nv / 2);
        let incoming = plan.incoming_at(k).unwrap();
        let x = d.colloc.physical[k];
        for a in 1..Q {
            let radial = d.vset.e[a][0] * x[0] + d.vset.e[a][1] * x[1];
            assert_eq!(incoming.contains(&a), radial > 1e-12, "direction {a}");
        }
    }

    #[test]
    fn periodic_copy_mode_is_exact_and_idempotent() {
        let d = disc(GeometryKind::UnitSquare, 7);
        let mut spec = cavity_spec(0.0);
        spec.set(Edge::XiMin, BoundaryCondition::Periodic);
        spec.set(Edge::XiMax, BoundaryCondition::Periodic);
        let plan = BoundaryPlan::new(&spec, &d).unwrap();
        let n = d.len();
        let (nu, nv) = d.colloc.shape();
        let mut f = random_state(n, 5);
        plan.apply(&mut f, 0.0);
        for j in 1..nv - 1 {
            for a in 0..Q {
                assert_eq!(f[a * n + d.colloc.index(0, j)], f[a * n + d.colloc.index(nu - 1, j)]);
            }
        }
        let once = f.clone();
        plan.apply(&mut f, 0.0);
        assert_eq!(f, once);
    }

    #[test]
    fn pairing_is_validated() {
        let d = disc(GeometryKind::UnitSquare, 5);
        let mut spec = cavity_spec(0.0);
        spec.set(Edge::XiMin, BoundaryCondition::Periodic);
        assert!(matches!(BoundaryPlan::new(&spec, &d), Err(Error::Boundary(_))));
        let pd = disc(GeometryKind::PeriodicBox, 6);
        assert!(BoundaryPlan::new(&cavity_spec(0.0), &pd).is_err());
        assert!(BoundaryPlan::new(&BoundarySpec::periodic(), &pd).is_ok());
    }

    #[test]
    fn farfield_and_outflow() {
        let d = disc(GeometryKind::UnitSquare, 6);
        let n = d.len();
        let v = &d.vset;
        let mut spec = BoundarySpec::uniform(BoundaryCondition::OutflowNeumann);
        spec.set(Edge::XiMin, BoundaryCondition::Farfield { rho: 1.02, u: [0.03, 0.0] });
        let plan = BoundaryPlan::new(&spec, &d).unwrap();
        // interior at the target equilibrium plus a moment-free perturbation
        let eq = v.equilibrium(1.02, [0.03, 0.0]).unwrap();
        let ghost = [0.0, 1.0, -1.0, 1.0, -1.0, 0.0, 0.0, 0.0, 0.0];
        let mut f = vec![0.0; Q * n];
        for k in 0..n {
            for a in 0..Q {
                f[a * n + k] = eq[a] + 1e-3 * ghost[a];
            }
        }
        for a in 0..Q {
            f[a * n + d.colloc.index(0, 3)] = 0.5;
        }
        plan.apply(&mut f, 0.0);
        let k = d.colloc.index(0, 3);
        for a in 0..Q {
            assert_abs_diff_eq!(f[a * n + k], eq[a] + 1e-3 * ghost[a], epsilon = 1e-15);
        }
        let fk: [f64; Q] = std::array::from_fn(|a| f[a * n + k]);
        let (rho, u, _) = v.moments(&fk);
        assert_abs_diff_eq!(rho, 1.02, epsilon = 1e-14);
        assert_abs_diff_eq!(u[0], 0.03, epsilon = 1e-14);

        // outflow copies the inward neighbor exactly
        let mut g = random_state(n, 9);
        plan.apply(&mut g, 0.0);
        let (nu, _) = d.colloc.shape();
        for j in 1..5 {
            let (b, i) = (d.colloc.index(nu - 1, j), d.colloc.index(nu - 2, j));
            for a in 0..Q {
                assert_eq!(g[a * n + b], g[a * n + i]);
            }
        }
    }
}
