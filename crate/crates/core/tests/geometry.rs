use ewweb::fields::{parse_expr, Expr};
use ewweb::geometry::*;
use ewweb::laxweb::hirota_residual;
use ewweb::sampling;
use ewweb::{conventions, Error};

fn exp_solution() -> Expr {
    parse_expr("y*exp(x)+z*exp(2*x)").unwrap()
}

fn positive_points(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = sampling::rng(seed);
    sampling::sample_box(&mut rng, &[-1.0, 0.1, 0.1], &[1.0, 1.0, 1.0], n, |_| true).unwrap()
}

#[test]
fn einstein_weyl_on_solution() {
    let ws = build_hirota_weyl(&exp_solution(), 1.0, 2.0).unwrap();
    for p in positive_points(20, 11) {
        let c = curvature(&ws, &p).unwrap();
        assert!(c.e_norm() <= 1e-9, "{} at {p:?}", c.e_norm());
        assert!(c.trace.abs() <= 1e-10);
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(c.gamma[k][i][j], c.gamma[k][j][i]);
                }
            }
        }
    }
}

#[test]
fn einstein_weyl_fails_off_solution() {
    // values from an independent symbolic computation
    let ws = build_hirota_weyl(&parse_expr("x*y+z").unwrap(), 1.0, 2.0).unwrap();
    let c = curvature(&ws, &[1.0, 1.0, 1.0]).unwrap();
    let want = [
        [-2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
        [1.0 / 6.0, -2.0 / 3.0, 1.0 / 6.0],
        [1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0],
    ];
    for i in 0..3 {
        for j in 0..3 {
            assert!((c.e[i][j] - want[i][j]).abs() < 1e-12, "E[{i}][{j}] = {}", c.e[i][j]);
        }
    }
    assert!(c.e_norm() > 1e-3);
    assert!(c.trace.abs() < 1e-12);
}

#[test]
fn ew_residual_tracks_hirota_residual() {
    for (w, solves) in [
        ("y*exp(x)+z*exp(2*x)", true),
        ("exp(x)+y+z^2", true),
        ("x*y+z", false),
        ("x^2*y+z+y", false),
    ] {
        let w = parse_expr(w).unwrap();
        let ws = build_hirota_weyl(&w, 1.0, 2.0).unwrap();
        let p = [0.4, 0.7, 0.6];
        let e = curvature(&ws, &p).unwrap().e_norm();
        let r = hirota_residual(&w, 1.0, 2.0, &p).unwrap().abs();
        assert_eq!(e <= 1e-9, solves, "E = {e}");
        assert_eq!(r <= 1e-9, solves, "rho = {r}");
    }
}

#[test]
fn nil_geometry_is_einstein_weyl() {
    for eps in [1.0, 0.3, -2.0] {
        let h = parse_expr("eps*X^2/2").unwrap().bind(&[("eps", eps)].into());
        let ws = build_hypercr_weyl(&h).unwrap();
        for p in [[0.3, -0.2, 0.9], [1.1, 0.5, -0.4]] {
            assert!(curvature(&ws, &p).unwrap().e_norm() < 1e-12);
        }
    }
    let not_sol = build_hypercr_weyl(&parse_expr("X*Y^3").unwrap()).unwrap();
    assert!(curvature(&not_sol, &[0.5, 0.5, 0.5]).unwrap().e_norm() > 1e-3);
}

#[test]
fn gauge_invariance_of_residual() {
    let ws = build_hirota_weyl(&parse_expr("x*y+z").unwrap(), 1.0, 2.0).unwrap();
    let phi = parse_expr("exp(0.3*x - 0.2*y*z) * (2 + sin(z))").unwrap();
    let r = conformal_rescale(&ws, &phi).unwrap();
    for p in [[1.0, 1.0, 1.0], [0.3, 0.8, -0.5]] {
        let e0 = curvature(&ws, &p).unwrap().e;
        let e1 = curvature(&r, &p).unwrap().e;
        for i in 0..3 {
            for j in 0..3 {
                assert!((e0[i][j] - e1[i][j]).abs() < 1e-9);
            }
        }
    }
}

fn hirota_gauge(w: &Expr) -> Expr {
    (w.diff("z") / (w.diff("x") * w.diff("y"))).sqrt()
}

fn assert_jones_tod_matches(w: &Expr, a: f64, b: f64, points: &[Vec<f64>]) {
    let ext = KillingExtension::hirota(w, a, b).unwrap();
    let jt = jones_tod_reduce(&ext).unwrap();
    let gauged = conformal_rescale(&jt, &hirota_gauge(w)).unwrap();
    let eq = build_hirota_weyl(w, a, b).unwrap();
    for p in points {
        let (hg, he) = (gauged.metric_at(p).unwrap(), eq.metric_at(p).unwrap());
        for i in 0..3 {
            for j in 0..3 {
                let want = conventions::JONES_TOD_SCALE * he[i][j];
                assert!((hg[i][j] - want).abs() <= 1e-10 * (1.0 + want.abs()), "h[{i}][{j}] {} vs {want}", hg[i][j]);
            }
        }
        let (og, oe) = (gauged.omega_at(p).unwrap(), eq.omega_at(p).unwrap());
        for i in 0..3 {
            assert!((og[i] - oe[i]).abs() <= 1e-10 * (1.0 + oe[i].abs()), "omega[{i}] {} vs {}", og[i], oe[i]);
        }
    }
}

#[test]
fn jones_tod_flat() {
    let w = parse_expr("x+y+z").unwrap();
    assert_jones_tod_matches(&w, 1.0, 2.0, &positive_points(5, 3));
    // without the gauge change ω is already exact: φ is constant here
    let jt = jones_tod_reduce(&KillingExtension::hirota(&w, 1.0, 2.0).unwrap()).unwrap();
    assert_eq!(jt.omega_at(&[0.1, 0.2, 0.3]).unwrap(), [0.0; 3]);
}

#[test]
fn jones_tod_exponential_solution() {
    assert_jones_tod_matches(&exp_solution(), 1.0, 2.0, &positive_points(10, 5));
    // sample values from an independent symbolic computation
    let jt = jones_tod_reduce(&KillingExtension::hirota(&exp_solution(), 1.0, 2.0).unwrap()).unwrap();
    let om = jt.omega_at(&[0.3, 0.7, 0.5]).unwrap();
    for (got, want) in om.iter().zip([-1.0, 0.4878, 1.3170]) {
        assert!((got - want).abs() < 5e-4, "{om:?}");
    }
}

#[test]
fn jones_tod_other_constants() {
    let w = parse_expr("y*exp(0.5*x)+z*exp(-1.5*x)").unwrap();
    let pts: Vec<Vec<f64>> = vec![vec![0.5, 0.9, 0.1], vec![0.2, 1.0, 0.05], vec![0.2, 0.4, 0.3]];
    let gw = |p: &Vec<f64>| {
        let e = w.diff("z") / (w.diff("x") * w.diff("y"));
        ewweb::fields::eval(&e, &ewweb::fields::Chart::xyz(), &Default::default(), p).unwrap()
    };
    let usable: Vec<Vec<f64>> = pts.into_iter().filter(|p| gw(p) > 0.0).collect();
    assert!(!usable.is_empty());
    assert_jones_tod_matches(&w, 0.5, -1.5, &usable);
}

#[test]
fn null_killing_vector() {
    use ewweb::fields::Chart;
    use ewweb::laxweb::{LambdaVectorField, VectorField};
    // L0' = ∂τ - λ∂T, L1' = ∂X - λ∂Y: the τ-block of g⁻¹ is off-diagonal, so g(∂τ, ∂τ) = 0
    let chart = Chart::XYT();
    let l0 = LambdaVectorField::new(
        chart.clone(),
        vec![VectorField::zero(3), VectorField::from_consts(&[0.0, 0.0, -1.0])],
    )
    .unwrap();
    let l1 = LambdaVectorField::new(
        chart,
        vec![VectorField::from_consts(&[1.0, 0.0, 0.0]), VectorField::from_consts(&[0.0, -1.0, 0.0])],
    )
    .unwrap();
    let ext = KillingExtension::from_lax(&l0, &l1).unwrap();
    assert!(matches!(jones_tod_reduce(&ext), Err(Error::NullKilling { .. })));
    assert!(matches!(killing_norm(&ext, &[0.0; 3]), Err(Error::NullKilling { .. })));
}

#[test]
fn jones_tod_orientation_follows_frame() {
    // negative frame determinant a b w_y / w_x at each of these
    assert_jones_tod_matches(&parse_expr("-y*exp(-x)-z*exp(-2*x)").unwrap(), -1.0, -2.0, &[vec![0.3, 0.7, 0.5]]);
    assert_jones_tod_matches(&parse_expr("y*exp(-0.5*x)+z*exp(1.5*x)").unwrap(), -0.5, 1.5, &[vec![0.3, 0.2, 0.9]]);
    assert_jones_tod_matches(&parse_expr("y*exp(2*x)+z*exp(x)").unwrap(), 2.0, 1.0, &[vec![0.3, 0.7, 0.5]]);
}

#[test]
fn nil_killing_fields() {
    use ewweb::laxweb::VectorField;
    let eps = 0.8;
    let h = parse_expr("e*X^2/2").unwrap().bind(&[("e", eps)].into());
    let ws = build_hypercr_weyl(&h).unwrap();
    let rx = VectorField::new(vec![Expr::one(), -eps * Expr::var("T"), Expr::zero()]);
    let p = [0.3, -0.6, 1.1];
    for v in [rx, VectorField::coordinate(3, 1), VectorField::coordinate(3, 2)] {
        assert!(ws.killing_defect(&v, &p).unwrap() <= 1e-12);
    }
    // ∂_X is not a symmetry: L h = 2ε(dY + εX dT)dT, L ω = ε² dT
    let d = ws.killing_defect(&VectorField::coordinate(3, 0), &p).unwrap();
    assert!(d > 0.1);
}
