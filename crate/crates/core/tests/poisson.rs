use ewweb::fields::{parse_expr, Expr};
use ewweb::geometry::build_hirota_weyl;
use ewweb::laxweb::{commutator, hirota_lax, hypercr_lax};
use ewweb::poisson::*;
use ewweb::sampling;
use proptest::prelude::*;

fn exp_solution() -> Expr {
    parse_expr("y*exp(x)+z*exp(2*x)").unwrap()
}

fn hirota_pencil(w: &Expr) -> PoissonPencil {
    let (l0, l1) = hirota_lax(w, 1.0, 2.0).unwrap();
    pencil_from_lax(&l0, &l1).unwrap()
}

fn points(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = sampling::rng(seed);
    sampling::sample_box(&mut rng, &[-1.0, 0.1, 0.1], &[1.0, 1.0, 1.0], n, |_| true).unwrap()
}

#[test]
fn jacobi_holds_on_solution() {
    let pen = hirota_pencil(&exp_solution());
    for p in points(20, 7) {
        for lambda in [0.0, 1.0, -1.0, 3.0] {
            let j = jacobiator(&pen, &p, lambda).unwrap();
            assert!(j.max_abs() <= 1e-10, "{} at {p:?}, λ = {lambda}", j.max_abs());
        }
    }
}

#[test]
fn jacobiator_matches_lax_commutator() {
    for w in ["x*y+z", "x^2*y+sin(z)+y", "exp(x*z)+y^3"] {
        let w = parse_expr(w).unwrap();
        let (l0, l1) = hirota_lax(&w, 1.0, 2.0).unwrap();
        let pen = pencil_from_lax(&l0, &l1).unwrap();
        for p in points(4, 19) {
            let c = commutator(&l0, &l1, &p).unwrap();
            for lambda in [0.5, -2.0, 3.0] {
                let j = jacobiator(&pen, &p, lambda).unwrap();
                let cl = c.at(lambda);
                for beta in 0..3 {
                    assert!((j.get(beta, 3, 4) - cl[beta]).abs() <= 1e-10 * (1.0 + cl[beta].abs()));
                }
                // the only components that can be nonzero
                for ([a, b, c], v) in &j.comps {
                    if !(*b == 3 && *c == 4) {
                        assert!(v.abs() <= 1e-12, "J[{a}{b}{c}] = {v}");
                    }
                }
            }
        }
    }
}

#[test]
fn three_lambdas_decide_the_fourth() {
    // J is quadratic in λ, so three samples determine it
    let pen = hirota_pencil(&parse_expr("x^2*y+z").unwrap());
    let p = [0.4, 0.6, 0.2];
    let js: Vec<f64> = [0.0, 1.0, -1.0, 2.5]
        .iter()
        .map(|&l| jacobiator(&pen, &p, l).unwrap().get(0, 3, 4))
        .collect();
    let (c0, c1, c2) = (js[0], (js[1] - js[2]) / 2.0, (js[1] + js[2]) / 2.0 - js[0]);
    let predicted = c0 + 2.5 * c1 + 6.25 * c2;
    assert!((predicted - js[3]).abs() < 1e-12);
}

#[test]
fn hypercr_pencil_shape() {
    let h = parse_expr("X^2*Y + T").unwrap();
    let (l0, l1) = hypercr_lax(&h).unwrap();
    let pen = pencil_from_lax(&l0, &l1).unwrap();
    let p = [0.5, 0.3, -0.2];
    let p0 = pen.p0.eval(&p).unwrap();
    let p1 = pen.p1.eval(&p).unwrap();
    // P0 = ∂_Y∧∂_p0 + ∂_X∧∂_p1
    assert_eq!((p0[1][3], p0[0][4], p0[3][1], p0[4][0]), (1.0, 1.0, -1.0, -1.0));
    // P1 = -(∂_T + H_Y∂_X)∧∂_p0 - (∂_Y + H_X∂_X)∧∂_p1 with H_Y = X², H_X = 2XY
    assert_eq!(p1[2][3], -1.0);
    assert!((p1[0][3] + 0.25).abs() < 1e-15);
    assert_eq!(p1[1][4], -1.0);
    assert!((p1[0][4] + 0.3).abs() < 1e-15);
    assert!(pen.p0.is_antisymmetric() && pen.p1.is_antisymmetric());
}

#[test]
fn flat_pencil_is_constant() {
    let pen = hirota_pencil(&parse_expr("x+y+z").unwrap());
    assert_eq!(pen.p0.eval(&[0.1, 0.2, 0.3]).unwrap(), pen.p0.eval(&[-2.0, 5.0, 1.0]).unwrap());
}

#[test]
fn nil_twistor_function_is_a_casimir() {
    let eps = 1.0;
    let lambda = 0.3;
    let pen = heisenberg_pencil(eps).unwrap();
    let psi = parse_expr("T + l*Y - (l/e)*ln(1 - l*e*X)")
        .unwrap()
        .bind(&[("l", lambda), ("e", eps)].into());
    for p in [[0.5, 0.2, -0.4], [-1.0, 0.7, 0.9]] {
        let v = casimir_check(&pen, &psi, &p, lambda).unwrap();
        assert!(v.iter().all(|x| x.abs() <= 1e-10), "{v:?}");
    }
    // and not at a different λ
    let v = casimir_check(&pen, &psi, &[0.5, 0.2, -0.4], 0.5).unwrap();
    assert!(v.iter().any(|x| x.abs() > 1e-3));
}

#[test]
fn casimir_coefficients_are_in_involution() {
    let eps = 0.7;
    let pen = heisenberg_pencil(eps).unwrap();
    // λ-coefficients of the Nil twistor function: T, Y, X, εX²/2, ε²X³/3
    let coeffs: Vec<Expr> = ["T", "Y", "X", "e*X^2/2", "e^2*X^3/3"]
        .iter()
        .map(|s| parse_expr(s).unwrap().bind(&[("e", eps)].into()))
        .collect();
    for f in &coeffs {
        for g in &coeffs {
            for lambda in [0.0, 1.0] {
                let v = poisson_bracket(&pen, f, g, &[0.3, 0.1, -0.2], lambda).unwrap();
                assert!(v.abs() <= 1e-14);
            }
        }
    }
}

#[test]
fn eform_annihilates_the_leaves() {
    let w = exp_solution();
    let (l0, l1) = hirota_lax(&w, 1.0, 2.0).unwrap();
    let pen = pencil_from_lax(&l0, &l1).unwrap();
    let ef = eform(&pen, 1.0).unwrap();
    for p in points(5, 23) {
        for lambda in [0.3, -1.7, 2.0] {
            let e = ef.eval(&p, lambda).unwrap();
            assert!(e[3].abs() < 1e-14 && e[4].abs() < 1e-14);
            let scale = e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for l in [&l0, &l1] {
                let v = l.eval(&p, lambda).unwrap();
                let pair: f64 = (0..3).map(|i| e[i] * v[i]).sum();
                assert!(pair.abs() <= 1e-12 * scale, "{pair}");
            }
            // the quadratic interpolation reproduces the direct contraction
            let direct = ewweb::fields::Tape::compile(
                &wedge_square(&pen.at(lambda), 1.0),
                pen.chart(),
                &Default::default(),
            )
            .unwrap()
            .eval_f64(&[p[0], p[1], p[2], 0.0, 0.0])
            .unwrap();
            for m in 0..5 {
                assert!((direct[m] - e[m]).abs() <= 1e-12 * (1.0 + scale));
            }
        }
    }
}

#[test]
fn eform_conformal_structure_matches_hirota_metric() {
    let w = exp_solution();
    let ef = eform(&hirota_pencil(&w), 1.0).unwrap();
    let h = conformal_from_eforms(&ef);
    let eq = build_hirota_weyl(&w, 1.0, 2.0).unwrap();
    for p in points(10, 29) {
        let he = eq.metric_at(&p).unwrap();
        let mut ratios = Vec::new();
        for i in 0..3 {
            for j in i..3 {
                let v = ewweb::fields::eval(&h[i][j], &ef.chart, &Default::default(), &[p[0], p[1], p[2], 0.0, 0.0]).unwrap();
                ratios.push(v / he[i][j]);
            }
        }
        for r in &ratios {
            assert!((r - ratios[0]).abs() <= 1e-9 * ratios[0].abs(), "{ratios:?}");
        }
        // factor from an independent symbolic computation with Ω = 1 and sums
        // over ordered pairs: 4 (a-b)² w_y w_z / w_x
        let (x, y, z) = (p[0], p[1], p[2]);
        let (wx, wy, wz) = (y * x.exp() + 2.0 * z * (2.0 * x).exp(), x.exp(), (2.0 * x).exp());
        let factor = 4.0 * wy * wz / wx;
        assert!((ratios[0] - factor).abs() <= 1e-9 * factor.abs(), "{} vs {factor}", ratios[0]);
    }
}

#[test]
fn frobenius_tracks_the_equation() {
    let on = eform(&hirota_pencil(&exp_solution()), 1.0).unwrap();
    let off = eform(&hirota_pencil(&parse_expr("x*y+z").unwrap()), 1.0).unwrap();
    for p in points(5, 31) {
        for lambda in [0.0, 0.8, -2.0] {
            assert!(on.frobenius_defect(&p, lambda).unwrap() <= 1e-10);
        }
        assert!(off.frobenius_defect(&p, 0.8).unwrap() > 1e-3);
    }
}

#[test]
fn flat_eforms_are_constant() {
    let ef = eform(&hirota_pencil(&parse_expr("x+y+z").unwrap()), 1.0).unwrap();
    for lambda in [0.0, 1.5] {
        assert_eq!(ef.eval(&[0.1, 0.2, 0.3], lambda).unwrap(), ef.eval(&[3.0, -1.0, 2.0], lambda).unwrap());
    }
}

#[test]
fn hamiltonian_flows_are_vertical_and_affine() {
    let w = exp_solution();
    let pen = hirota_pencil(&w);
    let start = [0.2, 0.5, 0.4, 0.1, -0.3];
    let still = hamiltonian_flow(&pen, &w, &start, 0.0, 3.0, 10).unwrap();
    for i in 0..5 {
        assert!((still[i] - start[i]).abs() < 1e-12);
    }
    let f = parse_expr("x*z + y").unwrap();
    let q1 = hamiltonian_flow(&pen, &f, &start, 0.7, 1.0, 5).unwrap();
    let q2 = hamiltonian_flow(&pen, &f, &start, 0.7, 2.0, 5).unwrap();
    assert_eq!(&q1[..3], &start[..3]);
    assert_eq!(&q2[..3], &start[..3]);
    for k in 3..5 {
        let rate = q1[k] - start[k];
        assert!((q2[k] - start[k] - 2.0 * rate).abs() < 1e-12);
    }
}

#[test]
fn flow_rates_at_reference_point() {
    let pen = hirota_pencil(&parse_expr("x*y+z").unwrap());
    let q = hamiltonian_flow(&pen, &Expr::var("x"), &[1.0, 1.0, 1.0], 0.0, 1.0, 1).unwrap();
    assert_eq!((q[3], q[4]), (1.0, 1.0));
}

#[test]
fn heisenberg_pencil_invariance() {
    let pts = points(6, 37);
    let r = heisenberg_invariance(1.0, 2.0, &pts).unwrap();
    assert!(r.rx_defect <= 1e-11);
    assert!(r.norms[0].1 > 1.0);
    assert_eq!((r.norms[1].1, r.norms[2].1), (0.0, 0.0));
    assert_eq!(r.algebra_defect, 0.0);
    let r0 = heisenberg_invariance(1.0, 0.0, &pts).unwrap();
    assert_eq!(r0.norms[0].1, 0.0);
    for eps in [0.5, -1.3] {
        assert!(heisenberg_invariance(eps, -0.7, &pts).unwrap().rx_defect <= 1e-11);
    }
    assert!(heisenberg_invariance(0.0, 1.0, &pts).is_err());
}

#[test]
fn sweep_csv_rows() {
    let pen = hirota_pencil(&exp_solution());
    let rows = jacobiator_sweep(&pen, &points(3, 41), &[0.0, 1.0]).unwrap();
    let csv = sweep_csv(&rows);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("lambda,x,y,z,maxJ"));
    for l in lines {
        let max_j: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
        assert!(max_j <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bridge_on_random_polynomials(c in proptest::collection::vec(-2.0f64..2.0, 4), lambda in -3.0f64..3.0) {
        let w = parse_expr(&format!(
            "x + ({})*x*y + ({})*y*z^2 + ({})*x^2*z + ({})*y",
            c[0], c[1], c[2], c[3]
        ))
        .unwrap();
        let p = [0.3, 0.4, 0.5];
        let wx = ewweb::fields::eval(&w.diff("x"), &ewweb::fields::Chart::xyz(), &Default::default(), &p).unwrap();
        prop_assume!(wx.abs() > 0.1);
        let (l0, l1) = hirota_lax(&w, 1.0, 2.0).unwrap();
        let pen = pencil_from_lax(&l0, &l1).unwrap();
        let j = jacobiator(&pen, &p, lambda).unwrap();
        let cl = commutator(&l0, &l1, &p).unwrap().at(lambda);
        for beta in 0..3 {
            prop_assert!((j.get(beta, 3, 4) - cl[beta]).abs() <= 1e-10 * (1.0 + cl[beta].abs()));
        }
        for a in 0..5 {
            for b in 0..5 {
                for c in 0..5 {
                    prop_assert_eq!(j.get(a, b, c), -j.get(b, a, c));
                    prop_assert_eq!(j.get(a, b, c), -j.get(a, c, b));
                }
            }
        }
    }
}
