use ewweb::jets::*;
use proptest::prelude::*;

fn c(j: &Jet, e: &[u32]) -> f64 {
    j.coeff(&MultiIndex::new(e.to_vec())).unwrap()
}

#[test]
fn coordinate_examples() {
    let x = Jet::coordinate(0, &[2.0, 0.0, 0.0], 2).unwrap();
    assert_eq!(x.value(), 2.0);
    assert_eq!(x.gradient(), vec![1.0, 0.0, 0.0]);
    assert!((0..3).all(|i| (0..3).all(|j| x.d2(i, j) == 0.0)));
    let y = Jet::coordinate(1, &[0.0, 5.0, 0.0], 1).unwrap();
    assert_eq!((y.value(), y.gradient()), (5.0, vec![0.0, 1.0, 0.0]));
    let z = Jet::coordinate(0, &[0.0], 0).unwrap();
    assert_eq!((z.value(), z.coeffs().len()), (0.0, 1));
    assert!(matches!(Jet::coordinate(3, &[0.0; 3], 1), Err(JetError::AxisOutOfRange { axis: 3, dim: 3 })));
}

#[test]
fn arithmetic_examples() {
    let x = Jet::coordinate(0, &[2.0], 2).unwrap();
    let sq = jet_arith(&x, &x, ArithOp::Mul).unwrap();
    assert_eq!(sq.coeffs(), &[4.0, 4.0, 1.0]);

    let u = Jet::coordinate(0, &[0.0], 3).unwrap();
    let one = u.constant_like(1.0);
    let geo = jet_arith(&one, &(&one - &u), ArithOp::Div).unwrap();
    assert_eq!(geo.coeffs(), &[1.0, 1.0, 1.0, 1.0]);

    let [x, y]: [Jet; 2] = Jet::coordinates(&[1.0, 1.0], 2).unwrap().try_into().unwrap();
    let lhs = jet_arith(&(&x + &y), &(&x - &y), ArithOp::Mul).unwrap();
    let rhs = &(&x * &x) - &(&y * &y);
    assert_eq!(lhs.value(), 0.0);
    assert_eq!(lhs.coeffs(), rhs.coeffs());

    assert!(matches!(
        jet_arith(&one, &u, ArithOp::Div),
        Err(JetError::DegenerateDivision { .. })
    ));
    let other = Jet::coordinate(0, &[1.0], 3).unwrap();
    assert!(matches!(jet_arith(&u, &other, ArithOp::Add), Err(JetError::ShapeMismatch(_))));
}

#[test]
fn transcendental_examples() {
    let u = Jet::coordinate(0, &[0.0], 3).unwrap();
    let e = jet_transcend(&u, TranscendOp::Exp).unwrap();
    for (a, b) in e.coeffs().iter().zip([1.0, 1.0, 0.5, 1.0 / 6.0]) {
        assert!((a - b).abs() < 1e-15);
    }
    let l = jet_transcend(&(&u.constant_like(1.0) - &u), TranscendOp::Ln).unwrap();
    for (a, b) in l.coeffs().iter().zip([0.0, -1.0, -0.5, -1.0 / 3.0]) {
        assert!((a - b).abs() < 1e-15);
    }
    let x = Jet::coordinate(0, &[1.0], 1).unwrap();
    let ex = jet_transcend(&x, TranscendOp::Exp).unwrap();
    assert_eq!(ex.coeffs(), &[std::f64::consts::E, std::f64::consts::E]);
    let cube = jet_transcend(&x, TranscendOp::IntPow(3)).unwrap();
    assert_eq!(cube.coeffs(), &[1.0, 3.0]);
    assert!(jet_transcend(&u, TranscendOp::Ln).is_err());
}

#[test]
fn coefficient_layout_invariants() {
    for (n, k) in [(1, 4), (3, 3), (4, 5), (8, 4)] {
        let lay = layout(n, k).unwrap();
        let binom = (1..=k).fold(1usize, |acc, i| acc * (n + i) / i);
        assert_eq!(lay.len(), binom);
        assert_eq!(coefficient_count(n, k), binom);
        assert!(lay.indices().windows(2).all(|w| w[0].degree() <= w[1].degree()));
    }
}

fn jet_strategy(n: usize, k: usize) -> impl Strategy<Value = Jet> {
    let count = coefficient_count(n, k);
    (prop::collection::vec(-2.0f64..2.0, n), prop::collection::vec(-2.0f64..2.0, count))
        .prop_map(move |(base, coeffs)| Jet::from_coeffs(&base, k, coeffs).unwrap())
}

fn same_base(n: usize, k: usize, m: usize) -> impl Strategy<Value = Vec<Jet>> {
    let count = coefficient_count(n, k);
    (
        prop::collection::vec(-2.0f64..2.0, n),
        prop::collection::vec(prop::collection::vec(-2.0f64..2.0, count), m),
    )
        .prop_map(move |(base, cs)| cs.into_iter().map(|c| Jet::from_coeffs(&base, k, c).unwrap()).collect())
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-13 * scale.max(1.0)
}

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

proptest! {
    #[test]
    fn leibniz(jets in same_base(3, 3, 2)) {
        let (a, b) = (&jets[0], &jets[1]);
        let ab = a * b;
        for gamma in ab.layout().indices() {
            let g = gamma.exponents();
            let mut want = 0.0;
            let mut scale: f64 = 0.0;
            for alpha in a.layout().indices() {
                let e = alpha.exponents();
                if (0..3).all(|i| e[i] <= g[i]) {
                    let rest: Vec<u32> = (0..3).map(|i| g[i] - e[i]).collect();
                    let w: f64 = (0..3).map(|i| binom(g[i], e[i])).product();
                    let term = w * a.derivative(e).unwrap() * b.derivative(&rest).unwrap();
                    want += term;
                    scale = scale.max(term.abs());
                }
            }
            prop_assert!(close(ab.derivative(g).unwrap(), want, scale));
        }
    }

    #[test]
    fn mul_commutes_and_associates(jets in same_base(3, 4, 3)) {
        let (a, b, c) = (&jets[0], &jets[1], &jets[2]);
        let ab = a * b;
        let ba = b * a;
        let l = &ab * c;
        let r = a * &(b * c);
        let scale = l.coeffs().iter().chain(r.coeffs()).fold(1.0f64, |m, v| m.max(v.abs()));
        for k in 0..ab.coeffs().len() {
            prop_assert!(close(ab.coeffs()[k], ba.coeffs()[k], ab.coeffs()[k].abs()));
            prop_assert!(close(l.coeffs()[k], r.coeffs()[k], 10.0 * scale));
        }
    }

    #[test]
    fn value_and_derivatives(j in jet_strategy(2, 3)) {
        prop_assert_eq!(j.value(), j.coeffs()[0]);
        prop_assert_eq!(j.derivative(&[2, 1]).unwrap(), c(&j, &[2, 1]) * 2.0);
        prop_assert_eq!(j.d2(0, 1), c(&j, &[1, 1]));
    }

    #[test]
    fn finite_difference_slope(p in prop::collection::vec(-0.5f64..0.5, 3), axis in 0usize..3) {
        // f = exp(x y) + sin(y + z^2) + x z / (2 + y)
        let f = |q: &[f64]| (q[0] * q[1]).exp() + (q[1] + q[2] * q[2]).sin() + q[0] * q[2] / (2.0 + q[1]);
        let vars = Jet::coordinates(&p, 1).unwrap();
        let (x, y, z) = (&vars[0], &vars[1], &vars[2]);
        let two = x.constant_like(2.0);
        let jet = &(&(x * y).exp() + &(y + &(z * z)).sin()) + &(x * z).try_div(&(&two + y)).unwrap();
        let exact = jet.d(axis);
        let hs = [1e-2, 5e-3, 2.5e-3];
        let errs: Vec<f64> = hs.iter().map(|h| {
            let (mut a, mut b) = (p.clone(), p.clone());
            a[axis] += h;
            b[axis] -= h;
            ((f(&a) - f(&b)) / (2.0 * h) - exact).abs()
        }).collect();
        // rounding noise swamps the truncation error when the third derivative is tiny
        prop_assume!(errs.iter().all(|e| *e > 1e-11));
        let s1 = (errs[0] / errs[1]).ln() / 2f64.ln();
        let s2 = (errs[1] / errs[2]).ln() / 2f64.ln();
        let slope = (s1 + s2) / 2.0;
        prop_assert!((slope - 2.0).abs() <= 0.1, "slope {} errs {:?}", slope, errs);
    }
}
