//! The five-dimensional Poisson pencil `P(λ) = L0∧∂_{p0} + L1∧∂_{p1}` built
//! from a λ-linear Lax pair, with its Jacobi identity, Casimirs, the
//! annihilating one-form `e(λ)`, Hamiltonian flows and the Heisenberg
//! example.

use std::fmt::Write as _;

use serde::Serialize;

use crate::conventions;
use crate::error::{Error, Result};
use crate::fields::{Chart, Expr, Params, Tape};
use crate::laxweb::{hypercr_lax, LambdaVectorField, VectorField};

pub const FIBRE: [&str; 2] = ["p0", "p1"];

/// Antisymmetric `P^{αβ}` on a base chart extended by `(p0, p1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bivector5 {
    pub chart: Chart,
    pub entries: [[Expr; 5]; 5],
}

impl Bivector5 {
    pub fn zero(chart: Chart) -> Result<Bivector5> {
        if chart.dim() != 5 {
            return Err(Error::InvalidChart(format!("bivectors live on 5-charts, got {chart}")));
        }
        Ok(Bivector5 {
            chart,
            entries: std::array::from_fn(|_| std::array::from_fn(|_| Expr::zero())),
        })
    }

    /// Adds `A∧B`, stored as `A⊗B - B⊗A`.
    pub fn add_wedge(&mut self, a: &[Expr], b: &[Expr]) {
        for i in 0..5 {
            for j in 0..5 {
                let t = &a[i] * &b[j] - &b[i] * &a[j];
                if !t.is_zero() {
                    self.entries[i][j] = &self.entries[i][j] + t;
                }
            }
        }
    }

    pub fn is_antisymmetric(&self) -> bool {
        (0..5).all(|i| {
            self.entries[i][i].is_zero()
                && (0..i).all(|j| {
                    let (a, b) = (&self.entries[i][j], &self.entries[j][i]);
                    *a == -b || -a == *b || (a + b).is_zero()
                })
        })
    }

    pub fn eval(&self, p: &[f64]) -> Result<[[f64; 5]; 5]> {
        let flat: Vec<Expr> = self.entries.iter().flatten().cloned().collect();
        let v = Tape::compile(&flat, &self.chart, &Params::new())?.eval_f64(&lift_point(p)?)?;
        Ok(std::array::from_fn(|i| std::array::from_fn(|j| v[5 * i + j])))
    }

    /// `V ↦ Σ_α P^{αβ} V_α`, the contraction with a one-form in its first slot.
    pub fn contract(&self, form: &[Expr]) -> Vec<Expr> {
        (0..5)
            .map(|b| {
                (0..5).fold(Expr::zero(), |acc, a| {
                    if self.entries[a][b].is_zero() || form[a].is_zero() {
                        acc
                    } else {
                        acc + &self.entries[a][b] * &form[a]
                    }
                })
            })
            .collect()
    }

    /// Symbolic Lie derivative along a vector field on the 5-chart:
    /// `V^δ∂_δP^{αβ} - P^{δβ}∂_δV^α - P^{αδ}∂_δV^β`.
    pub fn lie_derivative(&self, v: &[Expr]) -> Bivector5 {
        let names = self.chart.names();
        let dv: Vec<Vec<Expr>> = v.iter().map(|c| names.iter().map(|n| c.diff(n)).collect()).collect();
        let entries = std::array::from_fn(|a| {
            std::array::from_fn(|b| {
                let mut s = Expr::zero();
                for d in 0..5 {
                    s = s + &v[d] * self.entries[a][b].diff(&names[d]);
                    s = s - &self.entries[d][b] * &dv[a][d] - &self.entries[a][d] * &dv[b][d];
                }
                s
            })
        });
        Bivector5 {
            chart: self.chart.clone(),
            entries,
        }
    }
}

fn lift_point(p: &[f64]) -> Result<Vec<f64>> {
    match p.len() {
        3 => Ok(vec![p[0], p[1], p[2], 0.0, 0.0]),
        5 => Ok(p.to_vec()),
        n => Err(Error::InvalidInput(format!("expected a 3- or 5-point, got {n} coordinates"))),
    }
}

/// `P(λ) = P0 + λ P1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonPencil {
    pub p0: Bivector5,
    pub p1: Bivector5,
}

impl PoissonPencil {
    pub fn chart(&self) -> &Chart {
        &self.p0.chart
    }

    pub fn at(&self, lambda: f64) -> Bivector5 {
        let l = conventions::PENCIL_SIGN * lambda;
        let entries = std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                if self.p1.entries[i][j].is_zero() || l == 0.0 {
                    self.p0.entries[i][j].clone()
                } else {
                    &self.p0.entries[i][j] + l * &self.p1.entries[i][j]
                }
            })
        });
        Bivector5 {
            chart: self.p0.chart.clone(),
            entries,
        }
    }
}

fn lift(v: &VectorField) -> Vec<Expr> {
    let mut c = v.comps.clone();
    c.extend([Expr::zero(), Expr::zero()]);
    c
}

pub fn pencil_from_lax(l0: &LambdaVectorField, l1: &LambdaVectorField) -> Result<PoissonPencil> {
    for l in [l0, l1] {
        if l.degree() > 1 {
            return Err(Error::DegreeTooHigh {
                degree: l.degree(),
                max: 1,
            });
        }
    }
    if l0.chart != l1.chart || l0.chart.dim() != 3 {
        return Err(Error::InvalidChart(format!(
            "Lax pair must share a 3-chart, got {} and {}",
            l0.chart, l1.chart
        )));
    }
    let chart = l0.chart.extend(&FIBRE)?;
    let dp = |k: usize| VectorField::coordinate(5, 3 + k).comps;
    let mut pencil = [Bivector5::zero(chart.clone())?, Bivector5::zero(chart)?];
    for (k, l) in [l0, l1].into_iter().enumerate() {
        for (deg, slot) in pencil.iter_mut().enumerate() {
            slot.add_wedge(&lift(&l.coeff(deg)), &dp(k));
        }
    }
    let [p0, p1] = pencil;
    Ok(PoissonPencil { p0, p1 })
}

/// Totally antisymmetric trivector, stored on increasing index triples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trivector {
    pub comps: Vec<([usize; 3], f64)>,
}

impl Trivector {
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        let mut idx = [a, b, c];
        let mut sign = 1.0;
        for i in 0..3 {
            for j in 0..2 - i {
                if idx[j] > idx[j + 1] {
                    idx.swap(j, j + 1);
                    sign = -sign;
                }
            }
        }
        if idx[0] == idx[1] || idx[1] == idx[2] {
            return 0.0;
        }
        self.comps
            .iter()
            .find(|(k, _)| *k == idx)
            .map_or(0.0, |(_, v)| sign * v)
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().fold(0.0, |m, (_, v)| m.max(v.abs()))
    }
}

/// `J^{αβγ} = Σ_δ P^{αδ}∂_δP^{βγ} + P^{βδ}∂_δP^{γα} + P^{γδ}∂_δP^{αβ}` of
/// `P(λ)` at `p`.
pub fn jacobiator(pencil: &PoissonPencil, p: &[f64], lambda: f64) -> Result<Trivector> {
    let pl = pencil.at(lambda);
    let flat: Vec<Expr> = pl.entries.iter().flatten().cloned().collect();
    let jets = Tape::compile(&flat, &pl.chart, &Params::new())?.eval_jets(&lift_point(p)?, 1)?;
    let v = |a: usize, b: usize| jets[5 * a + b].value();
    let d = |a: usize, b: usize, k: usize| jets[5 * a + b].d(k);
    let term = |a: usize, b: usize, c: usize| (0..5).map(|k| v(a, k) * d(b, c, k)).sum::<f64>();
    let mut comps = Vec::with_capacity(10);
    for a in 0..5 {
        for b in a + 1..5 {
            for c in b + 1..5 {
                comps.push(([a, b, c], term(a, b, c) + term(b, c, a) + term(c, a, b)));
            }
        }
    }
    Ok(Trivector { comps })
}

/// `Σ_α P^{αβ}(λ) ∂_α C`; zero iff `C` is a Casimir at `p`.
pub fn casimir_check(pencil: &PoissonPencil, c: &Expr, p: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let chart = pencil.chart();
    let dc: Vec<Expr> = chart.names().iter().map(|n| c.diff(n)).collect();
    let v = pencil.at(lambda).contract(&dc);
    Tape::compile(&v, chart, &Params::new())?.eval_f64(&lift_point(p)?)
}

/// `{f, g}_λ = Σ P^{αβ}(λ) ∂_α f ∂_β g` at `p`.
pub fn poisson_bracket(pencil: &PoissonPencil, f: &Expr, g: &Expr, p: &[f64], lambda: f64) -> Result<f64> {
    let chart = pencil.chart();
    let df: Vec<Expr> = chart.names().iter().map(|n| f.diff(n)).collect();
    let pf = pencil.at(lambda).contract(&df);
    let e = chart
        .names()
        .iter()
        .zip(&pf)
        .fold(Expr::zero(), |acc, (n, c)| acc + c * g.diff(n));
    Tape::compile(&[e], chart, &Params::new())?.eval_f64(&lift_point(p)?).map(|v| v[0])
}

/// `X_f^β = Σ_α P^{βα} ∂_α f`, symbolic.
pub fn hamiltonian_field(pencil: &PoissonPencil, f: &Expr, lambda: f64) -> Vec<Expr> {
    let pl = pencil.at(lambda);
    let names = pl.chart.names();
    (0..5)
        .map(|b| {
            (0..5).fold(Expr::zero(), |acc, a| {
                acc + conventions::HAMILTONIAN_SIGN * &pl.entries[b][a] * f.diff(&names[a])
            })
        })
        .collect()
}

/// Point reached at time `t` along the Hamiltonian flow of `f` from `p`, by
/// classical RK4 with `steps` steps.
pub fn hamiltonian_flow(pencil: &PoissonPencil, f: &Expr, p: &[f64], lambda: f64, t: f64, steps: usize) -> Result<Vec<f64>> {
    if f.depends_on(FIBRE[0]) || f.depends_on(FIBRE[1]) {
        return Err(Error::InvalidInput("Hamiltonian must not depend on the fibre coordinates".into()));
    }
    let tape = Tape::compile(&hamiltonian_field(pencil, f, lambda), pencil.chart(), &Params::new())?;
    let mut y = lift_point(p)?;
    let steps = steps.max(1);
    let h = t / steps as f64;
    let shifted = |y: &[f64], k: &[f64], s: f64| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    for _ in 0..steps {
        let k1 = tape.eval_f64(&y)?;
        let k2 = tape.eval_f64(&shifted(&y, &k1, h / 2.0))?;
        let k3 = tape.eval_f64(&shifted(&y, &k2, h / 2.0))?;
        let k4 = tape.eval_f64(&shifted(&y, &k3, h))?;
        for i in 0..5 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Ok(y)
}

/// `e(λ) = e3 + λ e2 + λ² e1`, one-forms on the 5-chart.
#[derive(Debug, Clone, PartialEq)]
pub struct EFormTriple {
    pub chart: Chart,
    pub e1: [Expr; 5],
    pub e2: [Expr; 5],
    pub e3: [Expr; 5],
    pub omega: f64,
}

impl EFormTriple {
    pub fn at(&self, lambda: f64) -> [Expr; 5] {
        std::array::from_fn(|m| &self.e3[m] + lambda * &self.e2[m] + lambda * lambda * &self.e1[m])
    }

    pub fn eval(&self, p: &[f64], lambda: f64) -> Result<Vec<f64>> {
        Tape::compile(&self.at(lambda), &self.chart, &Params::new())?.eval_f64(&lift_point(p)?)
    }

    /// Largest component of the three-form `e∧de` at `(p, λ)`.
    pub fn frobenius_defect(&self, p: &[f64], lambda: f64) -> Result<f64> {
        let jets = Tape::compile(&self.at(lambda), &self.chart, &Params::new())?.eval_jets(&lift_point(p)?, 1)?;
        let de = |j: usize, k: usize| jets[k].d(j) - jets[j].d(k);
        let mut worst: f64 = 0.0;
        for i in 0..5 {
            for j in i + 1..5 {
                for k in j + 1..5 {
                    let v = jets[i].value() * de(j, k) + jets[j].value() * de(k, i) + jets[k].value() * de(i, j);
                    worst = worst.max(v.abs());
                }
            }
        }
        Ok(worst)
    }
}

fn levi5(idx: [usize; 5]) -> f64 {
    let mut sign = 1.0;
    for i in 0..5 {
        for j in i + 1..5 {
            if idx[i] == idx[j] {
                return 0.0;
            }
            if idx[i] > idx[j] {
                sign = -sign;
            }
        }
    }
    sign
}

/// `(P∧P)⌟Ω` with `P = Σ_{α<β} P^{αβ} ∂_α∧∂_β` and `Ω = omega·dx¹∧…∧dx⁵`.
pub fn wedge_square(p: &Bivector5, omega: f64) -> [Expr; 5] {
    let pairs: Vec<(usize, usize)> = (0..5).flat_map(|a| (a + 1..5).map(move |b| (a, b))).collect();
    std::array::from_fn(|m| {
        let mut s = Expr::zero();
        for &(a, b) in &pairs {
            for &(c, d) in &pairs {
                let sign = levi5([a, b, c, d, m]);
                if sign != 0.0 && !p.entries[a][b].is_zero() && !p.entries[c][d].is_zero() {
                    s = s + (omega * sign) * (&p.entries[a][b] * &p.entries[c][d]);
                }
            }
        }
        s
    })
}

/// Samples `(P(λ)∧P(λ))⌟Ω` at λ = 0, 1, -1 and solves for the λ-coefficients.
pub fn eform(pencil: &PoissonPencil, omega: f64) -> Result<EFormTriple> {
    if omega == 0.0 || !omega.is_finite() {
        return Err(Error::InvalidInput(format!("volume coefficient must be nonzero, got {omega}")));
    }
    let [e0, ep, em] = [0.0, 1.0, -1.0].map(|l| wedge_square(&pencil.at(l), omega));
    Ok(EFormTriple {
        chart: pencil.chart().clone(),
        e1: std::array::from_fn(|m| 0.5 * (&ep[m] + &em[m]) - &e0[m]),
        e2: std::array::from_fn(|m| 0.5 * (&ep[m] - &em[m])),
        e3: e0,
        omega,
    })
}

/// `h = e2⊗e2 - 2(e1⊗e3 + e3⊗e1)` restricted to the base.
pub fn conformal_from_eforms(ef: &EFormTriple) -> [[Expr; 3]; 3] {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let (i, j) = (i.min(j), i.max(j));
            &ef.e2[i] * &ef.e2[j] - 2.0 * (&ef.e1[i] * &ef.e3[j] + &ef.e3[i] * &ef.e1[j])
        })
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct JacobiatorRow {
    pub lambda: f64,
    pub point: Vec<f64>,
    pub max_j: f64,
}

pub fn jacobiator_sweep(pencil: &PoissonPencil, points: &[Vec<f64>], lambdas: &[f64]) -> Result<Vec<JacobiatorRow>> {
    let mut rows = Vec::with_capacity(points.len() * lambdas.len());
    for &lambda in lambdas {
        for p in points {
            rows.push(JacobiatorRow {
                lambda,
                point: p[..3].to_vec(),
                max_j: jacobiator(pencil, p, lambda)?.max_abs(),
            });
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[JacobiatorRow]) -> String {
    let mut s = String::from("lambda,x,y,z,maxJ\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{:e}", r.lambda, r.point[0], r.point[1], r.point[2], r.max_j);
    }
    s
}

/// Right-invariant fields of the Heisenberg group on `(X, Y, T)`:
/// `R_X = ∂_X - εT∂_Y`, `R_Y = ∂_Y`, `R_T = ∂_T`.
pub fn heisenberg_generators(eps: f64) -> [(&'static str, VectorField); 3] {
    [
        (
            "R_X",
            VectorField::new(vec![Expr::one(), -eps * Expr::var("T"), Expr::zero()]),
        ),
        ("R_Y", VectorField::from_consts(&[0.0, 1.0, 0.0])),
        ("R_T", VectorField::from_consts(&[0.0, 0.0, 1.0])),
    ]
}

/// The hyper-CR pencil of `H = εX²/2`.
pub fn heisenberg_pencil(eps: f64) -> Result<PoissonPencil> {
    let h = eps * Expr::var("X").powi(2) / 2.0;
    let (l0, l1) = hypercr_lax(&h)?;
    pencil_from_lax(&l0, &l1)
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub epsilon: f64,
    pub lambda: f64,
    /// `max |L_R P(λ)|` per generator over the sample points.
    pub norms: Vec<(String, f64)>,
    /// `max |L_{R_X} P(λ) - s ελ P0|` with `s` the conventions sign.
    pub rx_defect: f64,
    /// `max |[R_X, R_T] - ε R_Y|` and the two abelian brackets.
    pub algebra_defect: f64,
}

fn max_over(b: &Bivector5, points: &[Vec<f64>]) -> Result<f64> {
    let mut m: f64 = 0.0;
    for p in points {
        for row in b.eval(p)? {
            for v in row {
                m = m.max(v.abs());
            }
        }
    }
    Ok(m)
}

pub const INVARIANCE_TOL: f64 = 1e-11;

/// Lie derivatives of the Heisenberg pencil along the right-invariant fields.
pub fn heisenberg_invariance(eps: f64, lambda: f64, points: &[Vec<f64>]) -> Result<InvarianceReport> {
    if eps == 0.0 || !eps.is_finite() {
        return Err(Error::InvalidInput(format!("ε must be nonzero, got {eps}")));
    }
    let pencil = heisenberg_pencil(eps)?;
    let pl = pencil.at(lambda);
    let gens = heisenberg_generators(eps);
    let mut norms = Vec::new();
    let mut rx_defect = 0.0;
    for (name, g) in &gens {
        let lie = pl.lie_derivative(&lift(g));
        norms.push((name.to_string(), max_over(&lie, points)?));
        if *name == "R_X" {
            let s = conventions::HEISENBERG_LIE_SIGN * eps * lambda;
            let mut diff = lie.clone();
            for i in 0..5 {
                for j in 0..5 {
                    diff.entries[i][j] = &lie.entries[i][j] - s * &pencil.p0.entries[i][j];
                }
            }
            rx_defect = max_over(&diff, points)?;
        }
    }
    let chart = Chart::XYT();
    let [(_, rx), (_, ry), (_, rt)] = &gens;
    let brackets = [
        rx.bracket(rt, &chart).sub(&ry.scale(&Expr::constant(eps))),
        rx.bracket(ry, &chart),
        rt.bracket(ry, &chart),
    ];
    let mut algebra_defect: f64 = 0.0;
    for b in &brackets {
        for p in points {
            for v in b.eval(&chart, &p[..3])? {
                algebra_defect = algebra_defect.max(v.abs());
            }
        }
    }
    let report = InvarianceReport {
        epsilon: eps,
        lambda,
        norms,
        rx_defect,
        algebra_defect,
    };
    if report.rx_defect > INVARIANCE_TOL {
        return Err(Error::CheckFailed {
            name: "L_{R_X} P proportional to P0".into(),
            residual: report.rx_defect,
            tolerance: INVARIANCE_TOL,
        });
    }
    Ok(report)
}
