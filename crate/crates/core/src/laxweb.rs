//! Lax pairs with a polynomial spectral parameter, their commutators, the
//! PDE residuals they encode, and the Veronese curve of the Hirota web.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fields::{Chart, Expr, Params, Tape};
use crate::jets::Jet;
use crate::linalg;

/// Highest λ-degree a [`LambdaVectorField`] may carry.
pub const MAX_LAMBDA_DEGREE: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub comps: Vec<Expr>,
}

impl VectorField {
    pub fn new(comps: Vec<Expr>) -> VectorField {
        VectorField { comps }
    }

    pub fn from_consts(c: &[f64]) -> VectorField {
        VectorField::new(c.iter().map(|&v| Expr::constant(v)).collect())
    }

    pub fn zero(dim: usize) -> VectorField {
        VectorField::new(vec![Expr::zero(); dim])
    }

    /// The coordinate field `∂_axis`.
    pub fn coordinate(dim: usize, axis: usize) -> VectorField {
        let mut v = VectorField::zero(dim);
        v.comps[axis] = Expr::one();
        v
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(Expr::is_zero)
    }

    pub fn add(&self, o: &VectorField) -> VectorField {
        VectorField::new(self.comps.iter().zip(&o.comps).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, o: &VectorField) -> VectorField {
        VectorField::new(self.comps.iter().zip(&o.comps).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, s: &Expr) -> VectorField {
        VectorField::new(self.comps.iter().map(|c| s * c).collect())
    }

    /// Directional derivative `V(f) = Σ V^i ∂_i f`.
    pub fn apply(&self, f: &Expr, chart: &Chart) -> Expr {
        self.comps
            .iter()
            .zip(chart.names())
            .fold(Expr::zero(), |acc, (c, n)| {
                if c.is_zero() {
                    acc
                } else {
                    acc + c * f.diff(n)
                }
            })
    }

    /// Lie bracket `[V, W]^i = V(W^i) - W(V^i)`.
    pub fn bracket(&self, o: &VectorField, chart: &Chart) -> VectorField {
        VectorField::new(
            (0..self.dim())
                .map(|i| self.apply(&o.comps[i], chart) - o.apply(&self.comps[i], chart))
                .collect(),
        )
    }

    pub fn eval(&self, chart: &Chart, p: &[f64]) -> Result<Vec<f64>> {
        Tape::compile(&self.comps, chart, &Params::new())?.eval_f64(p)
    }
}

/// `Σ_k λ^k coeffs[k]`, a vector field depending polynomially on λ.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaVectorField {
    pub chart: Chart,
    pub coeffs: Vec<VectorField>,
}

impl LambdaVectorField {
    pub fn new(chart: Chart, mut coeffs: Vec<VectorField>) -> Result<LambdaVectorField> {
        if coeffs.is_empty() {
            coeffs.push(VectorField::zero(chart.dim()));
        }
        if let Some(v) = coeffs.iter().find(|v| v.dim() != chart.dim()) {
            return Err(Error::InvalidInput(format!(
                "vector field with {} components on chart {chart}",
                v.dim()
            )));
        }
        while coeffs.len() > 1 && coeffs.last().unwrap().is_zero() {
            coeffs.pop();
        }
        if coeffs.len() - 1 > MAX_LAMBDA_DEGREE {
            return Err(Error::DegreeTooHigh {
                degree: coeffs.len() - 1,
                max: MAX_LAMBDA_DEGREE,
            });
        }
        Ok(LambdaVectorField { chart, coeffs })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, k: usize) -> VectorField {
        self.coeffs
            .get(k)
            .cloned()
            .unwrap_or_else(|| VectorField::zero(self.chart.dim()))
    }

    /// The field at a fixed numeric λ.
    pub fn at_lambda(&self, lambda: f64) -> VectorField {
        let mut acc = VectorField::zero(self.chart.dim());
        for (k, c) in self.coeffs.iter().enumerate() {
            acc = acc.add(&c.scale(&Expr::constant(lambda.powi(k as i32))));
        }
        acc
    }

    pub fn eval(&self, p: &[f64], lambda: f64) -> Result<Vec<f64>> {
        let lv = self.eval_coeffs(p)?;
        Ok(lv.at(lambda))
    }

    /// Numeric λ-coefficients at `p`.
    pub fn eval_coeffs(&self, p: &[f64]) -> Result<LambdaVector> {
        let flat: Vec<Expr> = self.coeffs.iter().flat_map(|v| v.comps.clone()).collect();
        let vals = Tape::compile(&flat, &self.chart, &Params::new())?.eval_f64(p)?;
        Ok(LambdaVector {
            coeffs: vals.chunks(self.chart.dim()).map(<[f64]>::to_vec).collect(),
        })
    }
}

/// λ-polynomial of numeric vectors: `Σ λ^k coeffs[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaVector {
    pub coeffs: Vec<Vec<f64>>,
}

impl LambdaVector {
    pub fn at(&self, lambda: f64) -> Vec<f64> {
        let dim = self.coeffs[0].len();
        let mut out = vec![0.0; dim];
        for (k, c) in self.coeffs.iter().enumerate() {
            let l = lambda.powi(k as i32);
            for i in 0..dim {
                out[i] += l * c[i];
            }
        }
        out
    }

    pub fn coeff(&self, k: usize) -> Vec<f64> {
        self.coeffs
            .get(k)
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.coeffs[0].len()])
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs
            .iter()
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn check_degrees(l: &LambdaVectorField, m: &LambdaVectorField) -> Result<()> {
    if l.chart != m.chart {
        return Err(Error::InvalidInput(format!(
            "commutator of fields on {} and {}",
            l.chart, m.chart
        )));
    }
    let degree = l.degree() + m.degree();
    if degree > MAX_LAMBDA_DEGREE {
        return Err(Error::DegreeTooHigh {
            degree,
            max: MAX_LAMBDA_DEGREE,
        });
    }
    Ok(())
}

/// `[L, M]` at `p`, coefficient by coefficient in λ, from first-order jets.
pub fn commutator(l: &LambdaVectorField, m: &LambdaVectorField, p: &[f64]) -> Result<LambdaVector> {
    check_degrees(l, m)?;
    let n = l.chart.dim();
    let flat: Vec<Expr> = l
        .coeffs
        .iter()
        .chain(&m.coeffs)
        .flat_map(|v| v.comps.clone())
        .collect();
    let jets = Tape::compile(&flat, &l.chart, &Params::new())?.eval_jets(p, 1)?;
    let (lj, mj) = jets.split_at(l.coeffs.len() * n);
    let mut out = vec![vec![0.0; n]; l.degree() + m.degree() + 1];
    for (a, la) in lj.chunks(n).enumerate() {
        for (b, mb) in mj.chunks(n).enumerate() {
            let slot = &mut out[a + b];
            for i in 0..n {
                let mut s = 0.0;
                for j in 0..n {
                    s += la[j].value() * mb[i].d(j) - mb[j].value() * la[i].d(j);
                }
                slot[i] += s;
            }
        }
    }
    Ok(LambdaVector { coeffs: out })
}

/// Symbolic `[L, M]`; λ is a constant, so `[λ^a A, λ^b B] = λ^{a+b}[A, B]`.
pub fn commutator_symbolic(l: &LambdaVectorField, m: &LambdaVectorField) -> Result<LambdaVectorField> {
    check_degrees(l, m)?;
    let n = l.chart.dim();
    let mut out = vec![VectorField::zero(n); l.degree() + m.degree() + 1];
    for (a, la) in l.coeffs.iter().enumerate() {
        for (b, mb) in m.coeffs.iter().enumerate() {
            out[a + b] = out[a + b].add(&la.bracket(mb, &l.chart));
        }
    }
    LambdaVectorField::new(l.chart.clone(), out)
}

fn check_hirota_constants(a: f64, b: f64) -> Result<()> {
    if !(a.is_finite() && b.is_finite()) || a == 0.0 || b == 0.0 || a == b {
        return Err(Error::InvalidInput(format!(
            "constants must be nonzero and distinct, got a = {a}, b = {b}"
        )));
    }
    Ok(())
}

fn nonvanishing(e: &Expr, what: &str) -> Result<()> {
    if e.is_zero() {
        return Err(Error::Degenerate {
            what: what.into(),
            value: 0.0,
            point: Vec::new(),
        });
    }
    Ok(())
}

/// `L0 = ∂_z - (w_z/w_x)∂_x + λ a ∂_z`, `L1 = ∂_y - (w_y/w_x)∂_x + λ b ∂_y`.
pub fn hirota_lax(w: &Expr, a: f64, b: f64) -> Result<(LambdaVectorField, LambdaVectorField)> {
    check_hirota_constants(a, b)?;
    let (wx, wy, wz) = (w.diff("x"), w.diff("y"), w.diff("z"));
    nonvanishing(&wx, "w_x")?;
    let chart = Chart::xyz();
    let l0 = LambdaVectorField::new(
        chart.clone(),
        vec![
            VectorField::new(vec![-(&wz / &wx), Expr::zero(), Expr::one()]),
            VectorField::from_consts(&[0.0, 0.0, a]),
        ],
    )?;
    let l1 = LambdaVectorField::new(
        chart,
        vec![
            VectorField::new(vec![-(&wy / &wx), Expr::one(), Expr::zero()]),
            VectorField::from_consts(&[0.0, b, 0.0]),
        ],
    )?;
    Ok((l0, l1))
}

/// `L0 = ∂_Y - λ(∂_T + H_Y ∂_X)`, `L1 = ∂_X - λ(∂_Y + H_X ∂_X)` on `(X, Y, T)`.
pub fn hypercr_lax(h: &Expr) -> Result<(LambdaVectorField, LambdaVectorField)> {
    let chart = Chart::XYT();
    let l0 = LambdaVectorField::new(
        chart.clone(),
        vec![
            VectorField::from_consts(&[0.0, 1.0, 0.0]),
            VectorField::new(vec![-h.diff("Y"), Expr::zero(), Expr::constant(-1.0)]),
        ],
    )?;
    let l1 = LambdaVectorField::new(
        chart,
        vec![
            VectorField::from_consts(&[1.0, 0.0, 0.0]),
            VectorField::new(vec![-h.diff("X"), Expr::constant(-1.0), Expr::zero()]),
        ],
    )?;
    Ok((l0, l1))
}

fn jet2(f: &Expr, chart: &Chart, p: &[f64]) -> Result<Jet> {
    Ok(Tape::compile(std::slice::from_ref(f), chart, &Params::new())?
        .eval_jets(p, 2)?
        .remove(0))
}

/// `(b-a) w_x w_yz + a w_y w_zx - b w_z w_xy` at `p`.
pub fn hirota_residual(w: &Expr, a: f64, b: f64, p: &[f64]) -> Result<f64> {
    let j = jet2(w, &Chart::xyz(), p)?;
    Ok(hirota_from_jet(&j, a, b))
}

pub(crate) fn hirota_from_jet(j: &Jet, a: f64, b: f64) -> f64 {
    let (wx, wy, wz) = (j.d(0), j.d(1), j.d(2));
    (b - a) * wx * j.d2(1, 2) + a * wy * j.d2(2, 0) - b * wz * j.d2(0, 1)
}

/// The Hirota residual as an expression in `x, y, z`.
pub fn hirota_residual_expr(w: &Expr, a: f64, b: f64) -> Expr {
    let (wx, wy, wz) = (w.diff("x"), w.diff("y"), w.diff("z"));
    (b - a) * &wx * wy.diff("z") + a * &wy * wz.diff("x") - b * &wz * wx.diff("y")
}

/// `H_XT - H_YY + H_Y H_XX - H_X H_XY` at `p` on `(X, Y, T)`.
pub fn hypercr_residual(h: &Expr, p: &[f64]) -> Result<f64> {
    let j = jet2(h, &Chart::XYT(), p)?;
    Ok(hypercr_from_jet(&j))
}

pub(crate) fn hypercr_from_jet(j: &Jet) -> f64 {
    j.d2(0, 2) - j.d2(1, 1) + j.d(1) * j.d2(0, 0) - j.d(0) * j.d2(0, 1)
}

/// The hyper-CR residual as an expression in `X, Y, T`.
pub fn hypercr_residual_expr(h: &Expr) -> Expr {
    let (hx, hy) = (h.diff("X"), h.diff("Y"));
    hx.diff("T") - hy.diff("Y") + &hy * hx.diff("X") - &hx * hx.diff("Y")
}

/// Finite truncation of the Hirota hierarchy: constants `a_0 … a_{n-1}` on
/// the chart `(x, x0, …, x_{n-1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchySpec {
    constants: Vec<f64>,
    chart: Chart,
}

impl HierarchySpec {
    pub const MAX_FLOWS: usize = 8;

    pub fn new(constants: Vec<f64>) -> Result<HierarchySpec> {
        if constants.is_empty() || constants.len() > Self::MAX_FLOWS {
            return Err(Error::InvalidInput(format!(
                "hierarchy needs 1..={} constants, got {}",
                Self::MAX_FLOWS,
                constants.len()
            )));
        }
        for (i, a) in constants.iter().enumerate() {
            if !a.is_finite() || *a == 0.0 || constants[..i].contains(a) {
                return Err(Error::InvalidInput(format!(
                    "hierarchy constants must be distinct and nonzero: {constants:?}"
                )));
            }
        }
        let mut names = vec!["x".to_string()];
        names.extend((0..constants.len()).map(|i| format!("x{i}")));
        Ok(HierarchySpec {
            chart: Chart::new(&names)?,
            constants,
        })
    }

    pub fn constants(&self) -> &[f64] {
        &self.constants
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn len(&self) -> usize {
        self.constants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constants.is_empty()
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        if i == j || i >= self.len() || j >= self.len() {
            return Err(Error::InvalidInput(format!(
                "hierarchy pair ({i}, {j}) must be distinct indices below {}",
                self.len()
            )));
        }
        Ok(())
    }

    /// `L_i = ∂_i - (w_i/w_x)∂_x + λ a_i ∂_i`.
    pub fn lax(&self, w: &Expr, i: usize) -> Result<LambdaVectorField> {
        if i >= self.len() {
            return Err(Error::InvalidInput(format!("no flow {i}")));
        }
        let n = self.chart.dim();
        let wx = w.diff("x");
        nonvanishing(&wx, "w_x")?;
        let wi = w.diff(self.chart.name(i + 1));
        let mut c0 = VectorField::coordinate(n, i + 1);
        c0.comps[0] = -(wi / wx);
        let c1 = VectorField::coordinate(n, i + 1).scale(&Expr::constant(self.constants[i]));
        LambdaVectorField::new(self.chart.clone(), vec![c0, c1])
    }
}

/// `(a_i - a_j) w_x w_ij + a_j w_i w_jx - a_i w_j w_ix` at `p`.
pub fn hierarchy_residual(w: &Expr, spec: &HierarchySpec, i: usize, j: usize, p: &[f64]) -> Result<f64> {
    spec.check_pair(i, j)?;
    let jet = jet2(w, spec.chart(), p)?;
    let (ai, aj) = (spec.constants[i], spec.constants[j]);
    let (ki, kj) = (i + 1, j + 1);
    Ok((ai - aj) * jet.d(0) * jet.d2(ki, kj) + aj * jet.d(ki) * jet.d2(kj, 0)
        - ai * jet.d(kj) * jet.d2(ki, 0))
}

/// The Veronese vector fields of the Hirota web.
#[derive(Debug, Clone, PartialEq)]
pub struct VeroneseTriple {
    pub v: [VectorField; 3],
}

/// `V1 = ab(a w_y ∂_z - b w_z ∂_y)`, `V2 = ab(w_y ∂_z - w_z ∂_y)`,
/// `V3 = b w_y ∂_z - a w_z ∂_y + (a-b)(w_y w_z / w_x) ∂_x`.
pub fn veronese_fields(w: &Expr, a: f64, b: f64) -> Result<VeroneseTriple> {
    check_hirota_constants(a, b)?;
    let (wx, wy, wz) = (w.diff("x"), w.diff("y"), w.diff("z"));
    for (e, what) in [(&wx, "w_x"), (&wy, "w_y"), (&wz, "w_z")] {
        nonvanishing(e, what)?;
    }
    let ab = a * b;
    let v1 = VectorField::new(vec![Expr::zero(), -(ab * b) * &wz, (ab * a) * &wy]);
    let v2 = VectorField::new(vec![Expr::zero(), -ab * &wz, ab * &wy]);
    let v3 = VectorField::new(vec![(a - b) * (&wy * &wz / &wx), -a * &wz, b * &wy]);
    Ok(VeroneseTriple { v: [v1, v2, v3] })
}

impl VeroneseTriple {
    /// `[V1, V2, V3]` at `p`.
    pub fn eval(&self, p: &[f64]) -> Result<[Vec<f64>; 3]> {
        let flat: Vec<Expr> = self.v.iter().flat_map(|v| v.comps.clone()).collect();
        let vals = Tape::compile(&flat, &Chart::xyz(), &Params::new())?.eval_f64(p)?;
        Ok([vals[0..3].to_vec(), vals[3..6].to_vec(), vals[6..9].to_vec()])
    }

    /// The pair `(V1 - μ V2, V2 - μ V3)` spanning the web plane at `μ`.
    pub fn plane(&self, mu: f64, p: &[f64]) -> Result<[Vec<f64>; 2]> {
        let [v1, v2, v3] = self.eval(p)?;
        Ok([
            (0..3).map(|i| v1[i] - mu * v2[i]).collect(),
            (0..3).map(|i| v2[i] - mu * v3[i]).collect(),
        ])
    }
}

/// `V(λ) = V1 - 2λ V2 + λ² V3` at `p`.
pub fn veronese_eval(vt: &VeroneseTriple, lambda: f64, p: &[f64]) -> Result<Vec<f64>> {
    let [v1, v2, v3] = vt.eval(p)?;
    Ok((0..3)
        .map(|i| v1[i] - 2.0 * lambda * v2[i] + lambda * lambda * v3[i])
        .collect())
}

/// Rank of the joint span of two pairs of vectors (2 means same plane).
pub fn span_compare(a: &[Vec<f64>; 2], b: &[Vec<f64>; 2]) -> usize {
    linalg::rank(&[a[0].clone(), a[1].clone(), b[0].clone(), b[1].clone()], 1e-9)
}

/// `x,y,z,lambda,residual` rows.
pub fn residual_sweep_csv(rows: &[(Vec<f64>, f64, f64)]) -> String {
    let mut s = String::from("x,y,z,lambda,residual\n");
    for (p, l, r) in rows {
        let _ = writeln!(s, "{:.17e},{:.17e},{:.17e},{l:.17e},{r:.17e}", p[0], p[1], p[2]);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::parse_expr;

    #[test]
    fn flat_lax_pair() {
        let w = parse_expr("x+y+z").unwrap();
        let (l0, l1) = hirota_lax(&w, 1.0, 2.0).unwrap();
        let c0 = l0.eval_coeffs(&[0.2, 0.3, 0.4]).unwrap();
        assert_eq!(c0.coeffs, vec![vec![-1.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]]);
        let c1 = l1.eval_coeffs(&[0.2, 0.3, 0.4]).unwrap();
        assert_eq!(c1.coeffs, vec![vec![-1.0, 1.0, 0.0], vec![0.0, 2.0, 0.0]]);
    }

    #[test]
    fn lax_for_xy_plus_z() {
        let w = parse_expr("x*y+z").unwrap();
        let (l0, l1) = hirota_lax(&w, 1.0, 2.0).unwrap();
        let c0 = l0.eval_coeffs(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(c0.coeffs[0], vec![-1.0, 0.0, 1.0]);
        let br = commutator(&l0, &l1, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(br.coeffs[0], vec![0.0, 0.0, 0.0]);
        assert!((br.coeffs[1][0] + 2.0).abs() < 1e-14);
        assert_eq!(&br.coeffs[1][1..], &[0.0, 0.0]);
        assert_eq!(br.coeffs[2], vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn degenerate_lax() {
        let w = parse_expr("y+z").unwrap();
        assert!(matches!(hirota_lax(&w, 1.0, 2.0), Err(Error::Degenerate { .. })));
        let w = parse_expr("x^2+y+z").unwrap();
        let (l0, _) = hirota_lax(&w, 1.0, 2.0).unwrap();
        assert!(l0.eval(&[0.0, 1.0, 1.0], 1.0).is_err());
        assert!(hirota_lax(&w, 1.0, 1.0).is_err());
    }

    #[test]
    fn hypercr_pairs() {
        let (l0, l1) = hypercr_lax(&Expr::zero()).unwrap();
        let p = [0.1, 0.2, 0.3];
        assert_eq!(l0.eval_coeffs(&p).unwrap().coeffs, vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, -1.0]]);
        assert_eq!(l1.eval_coeffs(&p).unwrap().coeffs, vec![vec![1.0, 0.0, 0.0], vec![0.0, -1.0, 0.0]]);
        let nil = parse_expr("X^2/2").unwrap();
        let (_, l1) = hypercr_lax(&nil).unwrap();
        assert_eq!(l1.eval_coeffs(&[3.0, 0.0, 0.0]).unwrap().coeffs[1], vec![-3.0, -1.0, 0.0]);
        let lin = parse_expr("5*Y").unwrap();
        let (l0, _) = hypercr_lax(&lin).unwrap();
        assert_eq!(l0.eval_coeffs(&p).unwrap().coeffs[1], vec![-5.0, 0.0, -1.0]);
    }

    #[test]
    fn residual_values() {
        let w = parse_expr("x*y+z").unwrap();
        for p in [[1.0, 1.0, 1.0], [-0.3, 2.0, 0.7]] {
            assert_eq!(hirota_residual(&w, 1.0, 2.0, &p).unwrap(), -2.0);
        }
        let sep = parse_expr("sin(x) + exp(y) + z^3").unwrap();
        assert_eq!(hirota_residual(&sep, 0.7, -1.3, &[0.2, 0.4, 0.6]).unwrap(), 0.0);
        let nil = parse_expr("3*X^2/2").unwrap();
        assert_eq!(hypercr_residual(&nil, &[0.5, 1.0, -2.0]).unwrap(), 0.0);
    }

    #[test]
    fn symbolic_and_numeric_commutators_agree() {
        let w = parse_expr("x^2*y + y*z^3 + x*z").unwrap();
        let (l0, l1) = hirota_lax(&w, 1.0, 3.0).unwrap();
        let sym = commutator_symbolic(&l0, &l1).unwrap();
        let p = [0.7, -0.4, 1.2];
        let num = commutator(&l0, &l1, &p).unwrap();
        let sv = sym.eval_coeffs(&p).unwrap();
        for k in 0..=sym.degree() {
            for i in 0..3 {
                assert!((sv.coeff(k)[i] - num.coeff(k)[i]).abs() < 1e-12);
            }
        }
        // degree-2 coefficient is the bracket of the degree-1 coefficients
        let top = l0.coeff(1).bracket(&l1.coeff(1), &l0.chart);
        assert!(top.is_zero());
    }

    #[test]
    fn degree_overflow() {
        let chart = Chart::xyz();
        let quad = LambdaVectorField::new(
            chart.clone(),
            vec![VectorField::zero(3), VectorField::zero(3), VectorField::coordinate(3, 0)],
        )
        .unwrap();
        let lin = LambdaVectorField::new(chart, vec![VectorField::zero(3), VectorField::coordinate(3, 1)]).unwrap();
        assert!(matches!(
            commutator(&quad, &lin, &[0.0; 3]),
            Err(Error::DegreeTooHigh { degree: 3, .. })
        ));
    }

    #[test]
    fn flat_veronese() {
        let w = parse_expr("x+y+z").unwrap();
        let vt = veronese_fields(&w, 1.0, 2.0).unwrap();
        let [v1, v2, v3] = vt.eval(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(v1, vec![0.0, -4.0, 2.0]);
        assert_eq!(v2, vec![0.0, -2.0, 2.0]);
        assert_eq!(v3, vec![-1.0, -1.0, 2.0]);
    }

    #[test]
    fn hierarchy_spec_validation() {
        assert!(HierarchySpec::new(vec![1.0, 1.0]).is_err());
        assert!(HierarchySpec::new(vec![0.0, 1.0]).is_err());
        assert!(HierarchySpec::new(vec![1.0; 9]).is_err());
        let s = HierarchySpec::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.chart().names(), ["x", "x0", "x1", "x2"]);
        let w = parse_expr("x0+x1").unwrap();
        assert!(hierarchy_residual(&w, &s, 1, 1, &[0.0; 4]).is_err());
    }
}
