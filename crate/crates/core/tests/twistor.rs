use ewweb::fields::{eval, parse_expr, Chart, Expr, Params};
use ewweb::twistor::*;
use ewweb::Error;

fn grid(n: usize) -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let s = |t: usize| -1.0 + 2.0 * t as f64 / (n - 1) as f64;
                out.push([s(i), s(j), s(k)]);
            }
        }
    }
    out
}

#[test]
fn nil_series_coefficients() {
    let eps = 0.7;
    let mut ts = TwistorSeries::new(&parse_expr("eps*X^2/2").unwrap(), &Params::new().with("eps", eps)).unwrap();
    ts.extend_to(4, CONSISTENCY_TOL).unwrap();
    let chart = Chart::XYT();
    for p in grid(21) {
        let x = p[0];
        let psi3 = eval(&ts.coeffs[3], &chart, &Params::new(), &p).unwrap();
        let psi4 = eval(&ts.coeffs[4], &chart, &Params::new(), &p).unwrap();
        assert!((psi3 - eps * x * x / 2.0).abs() < 1e-14);
        assert!((psi4 - eps * eps * x.powi(3) / 3.0).abs() < 1e-14);
    }
}

#[test]
fn series_solves_the_wave_equation() {
    // any H(X) solves the equation
    let h = parse_expr("X^3/3 - X^4/8").unwrap();
    let mut ts = TwistorSeries::new(&h, &Params::new()).unwrap();
    ts.extend_to(4, CONSISTENCY_TOL).unwrap();
    for i in 0..=4 {
        for p in [[0.3, -0.2, 0.5], [1.1, 0.4, -0.9], [-0.6, 0.8, 0.1]] {
            assert!(verify_wave(&ts, i, &p).unwrap().abs() <= 1e-10, "ψ_{i} at {p:?}");
        }
    }
}

#[test]
fn flat_series_terminates() {
    let mut ts = TwistorSeries::new(&Expr::zero(), &Params::new()).unwrap();
    ts.extend_to(6, 0.0).unwrap();
    assert!(ts.coeffs[3..].iter().all(Expr::is_zero));
}

#[test]
fn inconsistency_grows_off_solution() {
    let mut last = 0.0;
    for delta in [0.01, 0.1, 1.0] {
        let params = Params::new().with("eps", 0.5).with("d", delta);
        let mut ts = TwistorSeries::new(&parse_expr("eps*X^2/2 + d*X*Y^3").unwrap(), &params).unwrap();
        let err = ts.extend_to(6, CONSISTENCY_TOL).unwrap_err();
        let Error::Consistency { residual, .. } = err else {
            panic!("expected a consistency failure, got {err}");
        };
        assert!(residual > last);
        last = residual;
    }
}

#[test]
fn non_polynomial_potential_is_rejected() {
    assert!(TwistorSeries::new(&parse_expr("exp(X)").unwrap(), &Params::new()).is_err());
    assert!(matches!(
        TwistorSeries::new(&parse_expr("q*X").unwrap(), &Params::new()),
        Err(Error::UnboundParameter(_))
    ));
}

#[test]
fn nil_family_extraction() {
    let eps = 0.4;
    let fam = nil_family(eps).unwrap();
    let coeffs = series_coefficients(&fam, &[0.2, 0.3, 0.5], 4).unwrap();
    let want = [0.2, 0.3, 0.5, eps * 0.25 / 2.0, eps * eps * 0.125 / 3.0];
    for (c, w) in coeffs.iter().zip(want) {
        assert!((c - w).abs() < 1e-14);
    }
    for m in sample_parameters(10, 7, [-1.0; 3], [1.0; 3]).unwrap() {
        let e = extract_coordinates(&fam, &m).unwrap();
        for (c, w) in e.coords.iter().zip([m[2], m[1], m[0]]) {
            assert!((c - w).abs() < 1e-15);
        }
        assert!((e.h - eps * m[2] * m[2] / 2.0).abs() < 1e-14);
        // H_XX = ε, all other second derivatives vanish
        assert!((e.h_jet.d2(0, 0) - eps).abs() < 1e-12);
        assert!(e.h_jet.d2(1, 1).abs() < 1e-12 && e.h_jet.d2(0, 2).abs() < 1e-12);
        assert!(e.hypercr_residual().abs() < 1e-12);
    }
}

#[test]
fn family_from_json() {
    let fam = ExprFamily::from_json(r#"{"psi": "m0 + l*m1 + l^2*m2 + c*l^3*m2^2", "params": {"c": 0.5}}"#).unwrap();
    let e = extract_coordinates(&fam, &[0.1, 0.2, 0.3]).unwrap();
    assert!((e.h - 0.5 * 0.09).abs() < 1e-15);
    assert!(ExprFamily::from_json("{\"psi\": 3").is_err());
}

#[test]
fn riccati_deformation_closed_form() {
    let eps = 0.1;
    let gen = DeformationGenerator::new(parse_expr("psi^2").unwrap(), Expr::zero(), &Params::new()).unwrap();
    let def = kodaira_deform(undeformed_family(), gen, eps, 200).unwrap();
    for (m, l) in [([0.3, -0.2, 0.5], 0.4), ([-1.0, 0.7, 0.2], -0.8), ([0.5, 0.5, 0.5], 1.5)] {
        let psi = m[0] + l * m[1] + l * l * m[2];
        let want = psi / (1.0 - eps * psi);
        assert!((def.psi(&m, l).unwrap() - want).abs() <= 1e-10);
    }
}

#[test]
fn deformed_family_still_solves_hypercr() {
    let gen = DeformationGenerator::new(
        parse_expr("psi^2 + pi0*psi/3").unwrap(),
        Expr::zero(),
        &Params::new(),
    )
    .unwrap();
    let def = kodaira_deform(undeformed_family(), gen, 0.2, 200).unwrap();
    for m in sample_parameters(10, 11, [-0.5; 3], [0.5; 3]).unwrap() {
        let e = extract_coordinates(&def, &m).unwrap();
        assert!(e.hypercr_residual().abs() <= 1e-6, "residual {} at {m:?}", e.hypercr_residual());
    }
}

#[test]
fn fibre_scaling_deformation() {
    // g = c λ rescales π by e^{cλt} and leaves λ fixed, so ψ/π1² picks up e^{-2cλε}
    let (c, eps) = (0.3, 0.5);
    let gen = DeformationGenerator::new(Expr::zero(), parse_expr("c*pi0/pi1").unwrap(), &Params::new().with("c", c))
        .unwrap();
    let def = kodaira_deform(undeformed_family(), gen, eps, 100).unwrap();
    let m = [0.4, -0.3, 0.6];
    for l in [0.0, 0.5, -1.2] {
        let psi = m[0] + l * m[1] + l * l * m[2];
        let want = psi * (-2.0 * c * l * eps).exp();
        assert!((def.psi(&m, l).unwrap() - want).abs() <= 1e-10);
    }
}

#[test]
fn generator_homogeneity_is_enforced() {
    let bad_f = DeformationGenerator::new(parse_expr("psi^3").unwrap(), Expr::zero(), &Params::new());
    assert!(matches!(bad_f, Err(Error::Homogeneity { which: "f", degree: 2, .. })));
    let bad_g = DeformationGenerator::new(Expr::zero(), parse_expr("pi0").unwrap(), &Params::new());
    assert!(matches!(bad_g, Err(Error::Homogeneity { which: "g", degree: 0, .. })));
}

#[test]
fn runaway_deformation_is_reported() {
    let gen = DeformationGenerator::new(parse_expr("psi^2").unwrap(), Expr::zero(), &Params::new()).unwrap();
    // ψ/(1 - tψ) blows up at t = 1/ψ
    let def = kodaira_deform(undeformed_family(), gen, 3.0, 50).unwrap();
    assert!(def.psi(&[2.0, 0.0, 0.0], 0.0).is_err());
}

#[test]
fn heisenberg_example() {
    let report = heisenberg_pipeline(1.0, 1.0, 2.0, 20, 42).unwrap();
    assert_eq!(report.constants.lambda4, -1.0);
    for c in &report.checks {
        assert!(c.pass, "{} = {:e} (tol {:e})", c.name, c.max_residual, c.tolerance);
    }
}

#[test]
fn heisenberg_other_constants() {
    for (eps, a, b) in [(0.5, 2.0, -1.0), (-1.3, 0.7, 3.0)] {
        let report = heisenberg_pipeline(eps, a, b, 10, 3).unwrap();
        assert!(report.all_pass(), "{:#?}", report.checks);
    }
    assert!(heisenberg_pipeline(1.0, 2.0, 2.0, 5, 0).is_err());
}

#[test]
fn fibre_moving_deformation_still_solves_hypercr() {
    let gen = DeformationGenerator::new(
        parse_expr("psi^2/4").unwrap(),
        parse_expr("pi0^2/(pi0^2 + pi1^2)").unwrap(),
        &Params::new(),
    )
    .unwrap();
    let def = kodaira_deform(undeformed_family(), gen, 0.3, 200).unwrap();
    for m in sample_parameters(10, 5, [-0.5; 3], [0.5; 3]).unwrap() {
        let e = extract_coordinates(&def, &m).unwrap();
        assert!(e.hypercr_residual().abs() <= 1e-6, "residual {} at {m:?}", e.hypercr_residual());
    }
}
