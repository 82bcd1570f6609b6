use std::sync::Arc;

use iga_lbm::io::{vtk_string, FieldSnapshot};
use iga_lbm::nurbs::{GeometryKind, GeometryParams};
use iga_lbm::solver::{BoundaryCondition, BoundarySpec, CaseSpec, Solver, SolverConfig};

fn solver(kind: GeometryKind) -> Solver {
    let case = CaseSpec {
        name: "rest".into(),
        geometry: kind,
        geometry_params: GeometryParams::with_points(kind, 3, 9).unwrap(),
        boundary: BoundarySpec::uniform(BoundaryCondition::BounceBack { u_wall: [0.0, 0.0] }),
        nu: 0.01,
        initial: Arc::new(|_| (1.0, [0.0, 0.0])),
    };
    Solver::new(&case, SolverConfig::default()).unwrap()
}

fn points(text: &str) -> Vec<[f64; 3]> {
    let mut lines = text.lines().skip_while(|l| !l.starts_with("POINTS"));
    let n: usize = lines.next().unwrap().split_whitespace().nth(1).unwrap().parse().unwrap();
    lines
        .take(n)
        .map(|l| {
            let v: Vec<f64> = l.split_whitespace().map(|x| x.parse().unwrap()).collect();
            [v[0], v[1], v[2]]
        })
        .collect()
}

#[test]
fn vtk_points_are_the_greville_points() {
    for kind in [GeometryKind::UnitSquare, GeometryKind::QuarterAnnulus] {
        let s = solver(kind);
        let pts = points(&vtk_string(&FieldSnapshot::from_solver(&s)).unwrap());
        assert_eq!(pts.len(), s.disc.colloc.len());
        for (p, q) in pts.iter().zip(&s.disc.colloc.physical) {
            assert!((p[0] - q[0]).abs() < 1e-14 && (p[1] - q[1]).abs() < 1e-14 && p[2] == 0.0);
        }
    }
    // on the identity map the physical points are the Greville abscissae
    let s = solver(GeometryKind::UnitSquare);
    let g = s.disc.patch.knots_u().greville_points();
    let pts = points(&vtk_string(&FieldSnapshot::from_solver(&s)).unwrap());
    for (i, x) in g.iter().enumerate() {
        assert!((pts[i][0] - x).abs() < 1e-14);
    }
}
