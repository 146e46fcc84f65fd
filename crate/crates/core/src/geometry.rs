//! Weyl structures on three-dimensional charts, their Einstein–Weyl
//! residual, gauge changes, and the reduction of a four-dimensional
//! conformal structure along a Killing vector.

use serde::ser::{Serialize, SerializeStruct, Serializer};

use crate::conventions;
use crate::error::{Error, Result};
use crate::fields::{Chart, Expr, Params, Tape};
use crate::jets::{Jet, DEGENERACY_TOL};
use crate::laxweb::{hirota_lax, LambdaVectorField};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardKind {
    NonZero,
    Positive,
}

/// A scalar that must stay away from zero (or be positive) wherever the
/// structure is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct Guard {
    pub what: String,
    pub expr: Expr,
    pub kind: GuardKind,
}

impl Guard {
    pub fn nonzero(what: &str, expr: Expr) -> Guard {
        Guard {
            what: what.into(),
            expr,
            kind: GuardKind::NonZero,
        }
    }

    pub fn positive(what: &str, expr: Expr) -> Guard {
        Guard {
            what: what.into(),
            expr,
            kind: GuardKind::Positive,
        }
    }
}

pub(crate) fn check_guards(guards: &[Guard], chart: &Chart, p: &[f64]) -> Result<()> {
    if guards.is_empty() {
        return Ok(());
    }
    let exprs: Vec<Expr> = guards.iter().map(|g| g.expr.clone()).collect();
    let vals = Tape::compile(&exprs, chart, &Params::new())?.eval_f64(p)?;
    for (g, v) in guards.iter().zip(vals) {
        match g.kind {
            GuardKind::NonZero if !(v.abs() >= DEGENERACY_TOL) => {
                return Err(Error::Degenerate {
                    what: g.what.clone(),
                    value: v,
                    point: p.to_vec(),
                })
            }
            GuardKind::Positive if !(v > 0.0) => {
                return Err(Error::NonPositive {
                    what: g.what.clone(),
                    value: v,
                    point: p.to_vec(),
                })
            }
            _ => {}
        }
    }
    Ok(())
}

/// Metric `h` (symmetric 3×3) and one-form `ω` on a three-coordinate chart.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylStructure {
    pub chart: Chart,
    pub h: [[Expr; 3]; 3],
    pub omega: [Expr; 3],
    pub guards: Vec<Guard>,
}

fn sym3(upper: [Expr; 6]) -> [[Expr; 3]; 3] {
    let [a, b, c, d, e, f] = upper;
    [
        [a, b.clone(), c.clone()],
        [b, d, e.clone()],
        [c, e, f],
    ]
}

impl WeylStructure {
    /// The upper triangle of `h` is authoritative; the lower one is mirrored.
    pub fn new(chart: Chart, mut h: [[Expr; 3]; 3], omega: [Expr; 3]) -> Result<WeylStructure> {
        if chart.dim() != 3 {
            return Err(Error::InvalidChart(format!("Weyl structures live on 3-charts, got {chart}")));
        }
        for i in 0..3 {
            for j in 0..i {
                h[i][j] = h[j][i].clone();
            }
        }
        Ok(WeylStructure {
            chart,
            h,
            omega,
            guards: Vec::new(),
        })
    }

    fn exprs(&self) -> Vec<Expr> {
        let mut v: Vec<Expr> = self.h.iter().flatten().cloned().collect();
        v.extend(self.omega.iter().cloned());
        v
    }

    pub fn check_at(&self, p: &[f64]) -> Result<()> {
        check_guards(&self.guards, &self.chart, p)
    }

    pub fn metric_at(&self, p: &[f64]) -> Result<[[f64; 3]; 3]> {
        self.check_at(p)?;
        let flat: Vec<Expr> = self.h.iter().flatten().cloned().collect();
        let v = Tape::compile(&flat, &self.chart, &Params::new())?.eval_f64(p)?;
        Ok([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]])
    }

    pub fn omega_at(&self, p: &[f64]) -> Result<[f64; 3]> {
        self.check_at(p)?;
        let v = Tape::compile(&self.omega, &self.chart, &Params::new())?.eval_f64(p)?;
        Ok([v[0], v[1], v[2]])
    }

    /// Symbolic `(L_V h, L_V ω)` for a vector field on the chart.
    pub fn lie_derivative(&self, v: &crate::laxweb::VectorField) -> ([[Expr; 3]; 3], [Expr; 3]) {
        let names = self.chart.names();
        let dv: Vec<Vec<Expr>> = v.comps.iter().map(|c| names.iter().map(|n| c.diff(n)).collect()).collect();
        let along = |f: &Expr| (0..3).fold(Expr::zero(), |acc, k| acc + &v.comps[k] * f.diff(&names[k]));
        let h = std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                (0..3).fold(along(&self.h[i][j]), |acc, k| {
                    acc + &self.h[k][j] * &dv[k][i] + &self.h[i][k] * &dv[k][j]
                })
            })
        });
        let omega = std::array::from_fn(|i| {
            (0..3).fold(along(&self.omega[i]), |acc, k| acc + &self.omega[k] * &dv[k][i])
        });
        (h, omega)
    }

    /// Largest component of `L_V h` and `L_V ω` at `p`; zero for a symmetry
    /// of the Weyl structure.
    pub fn killing_defect(&self, v: &crate::laxweb::VectorField, p: &[f64]) -> Result<f64> {
        let (h, omega) = self.lie_derivative(v);
        let mut flat: Vec<Expr> = h.into_iter().flatten().collect();
        flat.extend(omega);
        let vals = Tape::compile(&flat, &self.chart, &Params::new())?.eval_f64(p)?;
        Ok(vals.iter().fold(0.0, |m, x| m.max(x.abs())))
    }

    /// `h(u, v)` at `p`.
    pub fn pair(&self, p: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
        let h = self.metric_at(p)?;
        Ok((0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| h[i][j] * u[i] * v[j])
            .sum())
    }
}

fn check_constants(a: f64, b: f64) -> Result<()> {
    if !(a.is_finite() && b.is_finite()) || a == 0.0 || b == 0.0 || a == b {
        return Err(Error::InvalidInput(format!(
            "constants must be nonzero and distinct, got a = {a}, b = {b}"
        )));
    }
    Ok(())
}

/// The Weyl structure of a solution of the dispersionless Hirota equation:
///
/// ```text
/// h = w_x/(w_y w_z) dx² + a² w_y/((a-b)² w_x w_z) dy² + b² w_z/((a-b)² w_x w_y) dz²
///     + 2a/((a-b) w_z) dx dy - 2b/((a-b) w_y) dx dz + 2ab/((a-b)² w_x) dy dz
/// ω = -(w_xx/w_x) dx - (w_yy/w_y) dy - (w_zz/w_z) dz
/// ```
pub fn build_hirota_weyl(w: &Expr, a: f64, b: f64) -> Result<WeylStructure> {
    check_constants(a, b)?;
    let (wx, wy, wz) = (w.diff("x"), w.diff("y"), w.diff("z"));
    for (e, what) in [(&wx, "w_x"), (&wy, "w_y"), (&wz, "w_z")] {
        if e.is_zero() {
            return Err(Error::Degenerate {
                what: what.into(),
                value: 0.0,
                point: Vec::new(),
            });
        }
    }
    let d = a - b;
    let d2 = d * d;
    let h = sym3([
        &wx / (&wy * &wz),
        a / (d * &wz),
        -b / (d * &wy),
        (a * a / d2) * &wy / (&wx * &wz),
        (a * b / d2) / &wx,
        (b * b / d2) * &wz / (&wx * &wy),
    ]);
    let omega = [
        -(wx.diff("x") / &wx),
        -(wy.diff("y") / &wy),
        -(wz.diff("z") / &wz),
    ];
    let mut ws = WeylStructure::new(Chart::xyz(), h, omega)?;
    ws.guards = vec![
        Guard::nonzero("w_x", wx),
        Guard::nonzero("w_y", wy),
        Guard::nonzero("w_z", wz),
    ];
    Ok(ws)
}

/// `h = (dY + H_X dT)² - 4(dX - H_Y dT) dT`,
/// `ω = H_XX dY + (H_X H_XX + 2 H_XY) dT` on `(X, Y, T)`.
pub fn build_hypercr_weyl(hf: &Expr) -> Result<WeylStructure> {
    let (hx, hy) = (hf.diff("X"), hf.diff("Y"));
    let (hxx, hxy) = (hx.diff("X"), hx.diff("Y"));
    let h = sym3([
        Expr::zero(),
        Expr::zero(),
        Expr::constant(-2.0),
        Expr::one(),
        hx.clone(),
        &hx * &hx + 4.0 * &hy,
    ]);
    let omega = [Expr::zero(), hxx.clone(), &hx * &hxx + 2.0 * hxy];
    WeylStructure::new(Chart::XYT(), h, omega)
}

/// `(φ² h, ω + 2 d ln φ)`.
pub fn conformal_rescale(ws: &WeylStructure, phi: &Expr) -> Result<WeylStructure> {
    if let Some(c) = phi.as_const() {
        if !(c > 0.0) {
            return Err(Error::NonPositive {
                what: "conformal factor".into(),
                value: c,
                point: Vec::new(),
            });
        }
    }
    let phi2 = phi * phi;
    let h = std::array::from_fn(|i| std::array::from_fn(|j| &phi2 * &ws.h[i][j]));
    let omega = std::array::from_fn(|i| {
        let d = phi.diff(ws.chart.name(i));
        &ws.omega[i] + 2.0 * (d / phi)
    });
    let mut out = WeylStructure::new(ws.chart.clone(), h, omega)?;
    out.guards = ws.guards.clone();
    out.guards.push(Guard::positive("conformal factor", phi.clone()));
    Ok(out)
}

/// Christoffel symbols, Ricci data and the Einstein–Weyl residual at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureReport {
    pub chart: Chart,
    pub point: Vec<f64>,
    /// `gamma[k][i][j] = Γ^k_ij`
    pub gamma: [[[f64; 3]; 3]; 3],
    pub ricci: [[f64; 3]; 3],
    pub scalar: f64,
    pub e: [[f64; 3]; 3],
    /// `h^{ij} E_ij`
    pub trace: f64,
}

impl CurvatureReport {
    /// Frobenius norm of the Einstein–Weyl residual tensor.
    pub fn e_norm(&self) -> f64 {
        self.e.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn upper(m: &[[f64; 3]; 3]) -> [f64; 6] {
    [m[0][0], m[0][1], m[0][2], m[1][1], m[1][2], m[2][2]]
}

impl Serialize for CurvatureReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("CurvatureReport", 6)?;
        let gamma: Vec<f64> = self.gamma.iter().flatten().flatten().copied().collect();
        st.serialize_field("gamma", &gamma)?;
        st.serialize_field("ricci", &upper(&self.ricci))?;
        st.serialize_field("scalar", &self.scalar)?;
        st.serialize_field("E", &upper(&self.e))?;
        st.serialize_field("point", &self.point)?;
        st.serialize_field("chart", self.chart.names())?;
        st.end()
    }
}

/// Levi-Civita data of `h` and the Einstein–Weyl tensor
/// `E_ij = R_ij + ½∇_(iω_j) + ¼ω_iω_j - ⅓(R + ½∇^kω_k + ¼ω^kω_k) h_ij`.
pub fn curvature(ws: &WeylStructure, p: &[f64]) -> Result<CurvatureReport> {
    ws.check_at(p)?;
    let jets = Tape::compile(&ws.exprs(), &ws.chart, &Params::new())?.eval_jets(p, 2)?;
    let hj: Vec<Vec<Jet>> = (0..3).map(|i| jets[3 * i..3 * i + 3].to_vec()).collect();
    let om: Vec<Jet> = jets[9..12].iter().map(|j| j.truncate(1)).collect();

    let det = linalg::det(&hj);
    let scale = hj.iter().flatten().fold(0.0f64, |m, j| m.max(j.value().abs()));
    if !(det.value().abs() > 1e-12 * scale.powi(3).max(f64::MIN_POSITIVE)) {
        return Err(Error::SingularMetric {
            det: det.value(),
            point: p.to_vec(),
        });
    }
    let inv_det = det.recip()?;
    let hinv: Vec<Vec<Jet>> = linalg::adjugate(&hj)
        .iter()
        .map(|r| r.iter().map(|c| (c * &inv_det).truncate(1)).collect())
        .collect();
    // dh[a][i][j] = ∂_a h_ij
    let dh: Vec<Vec<Vec<Jet>>> = (0..3)
        .map(|a| {
            (0..3)
                .map(|i| (0..3).map(|j| hj[i][j].partial(a)).collect::<std::result::Result<_, _>>())
                .collect::<std::result::Result<_, _>>()
        })
        .collect::<std::result::Result<_, _>>()?;

    let zero1 = om[0].zero_like();
    let mut gam: Vec<Vec<Vec<Jet>>> = vec![vec![vec![zero1.clone(); 3]; 3]; 3];
    for k in 0..3 {
        for i in 0..3 {
            for j in i..3 {
                let mut acc = zero1.clone();
                for l in 0..3 {
                    let lower = &(&dh[i][l][j] + &dh[j][l][i]) - &dh[l][i][j];
                    acc = &acc + &(&hinv[k][l] * &lower);
                }
                acc = acc.scale(0.5);
                gam[k][j][i] = acc.clone();
                gam[k][i][j] = acc;
            }
        }
    }
    let g0 = |k: usize, i: usize, j: usize| gam[k][i][j].value();
    let dg = |a: usize, k: usize, i: usize, j: usize| gam[k][i][j].d(a);
    let hv: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| hj[i][j].value()));
    let hi: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| hinv[i][j].value()));
    let w: [f64; 3] = std::array::from_fn(|i| om[i].value());

    let mut ricci = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut r = 0.0;
            for k in 0..3 {
                r += dg(k, k, i, j) - dg(j, k, i, k);
                for l in 0..3 {
                    r += g0(k, k, l) * g0(l, i, j) - g0(k, j, l) * g0(l, i, k);
                }
            }
            ricci[i][j] = r;
        }
    }
    let contract = |m: &[[f64; 3]; 3]| -> f64 {
        (0..3).map(|i| (0..3).map(|j| hi[i][j] * m[i][j]).sum::<f64>()).sum()
    };
    let scalar = contract(&ricci);

    let mut nab = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            nab[i][j] = om[j].d(i) - (0..3).map(|k| g0(k, i, j) * w[k]).sum::<f64>();
        }
    }
    let div = contract(&nab);
    let ww: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| w[i] * w[j]));
    let wsq = contract(&ww);
    let trace_part = (scalar + 0.5 * div + 0.25 * wsq) / 3.0;
    let mut e = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            e[i][j] = ricci[i][j] + 0.25 * (nab[i][j] + nab[j][i]) + 0.25 * ww[i][j]
                - trace_part * hv[i][j];
        }
    }
    let trace = contract(&e);
    let gamma = std::array::from_fn(|k| std::array::from_fn(|i| std::array::from_fn(|j| g0(k, i, j))));
    Ok(CurvatureReport {
        chart: ws.chart.clone(),
        point: p.to_vec(),
        gamma,
        ricci,
        scalar,
        e,
        trace,
    })
}

/// Four vector fields on `base × ℝ_τ` whose Lax pair is
/// `L0' = W1 - λW2`, `L1' = W3 - λW4`; the symmetry is `K = ∂_τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct KillingExtension {
    pub chart4: Chart,
    pub w: [[Expr; 4]; 4],
}

impl KillingExtension {
    /// Extends a λ-linear Lax pair by `L0' = L0 + ∂_τ`, `L1' = L1`.
    pub fn from_lax(l0: &LambdaVectorField, l1: &LambdaVectorField) -> Result<KillingExtension> {
        if l0.degree() > 1 || l1.degree() > 1 || l0.chart.dim() != 3 || l0.chart != l1.chart {
            return Err(Error::InvalidInput(
                "extension needs a λ-linear Lax pair on one 3-chart".into(),
            ));
        }
        let chart4 = l0.chart.extend(&["tau"])?;
        let lift = |v: &crate::laxweb::VectorField, tau: f64, sign: f64| -> [Expr; 4] {
            [
                sign * &v.comps[0],
                sign * &v.comps[1],
                sign * &v.comps[2],
                Expr::constant(tau),
            ]
        };
        Ok(KillingExtension {
            chart4,
            w: [
                lift(&l0.coeff(0), 1.0, 1.0),
                lift(&l0.coeff(1), 0.0, -1.0),
                lift(&l1.coeff(0), 0.0, 1.0),
                lift(&l1.coeff(1), 0.0, -1.0),
            ],
        })
    }

    pub fn hirota(w: &Expr, a: f64, b: f64) -> Result<KillingExtension> {
        let (l0, l1) = hirota_lax(w, a, b)?;
        KillingExtension::from_lax(&l0, &l1)
    }

    /// Contravariant `g⁻¹ = W1⊙W4 - W2⊙W3`.
    pub fn inverse_metric(&self) -> Vec<Vec<Expr>> {
        let [w1, w2, w3, w4] = &self.w;
        (0..4)
            .map(|a| {
                (0..4)
                    .map(|b| {
                        0.5 * (&w1[a] * &w4[b] + &w4[a] * &w1[b])
                            - 0.5 * (&w2[a] * &w3[b] + &w3[a] * &w2[b])
                    })
                    .collect()
            })
            .collect()
    }
}

const TAU: usize = 3;

// sign of the permutation (i, j, k, l) for i < j < k and l the remaining index
const LEVI_REMAINING: [f64; 4] = [-1.0, 1.0, -1.0, 1.0];

/// `h = |K|⁻² g - |K|⁻⁴ 𝐊⊗𝐊`, `ω = 2|K|⁻² *_g(𝐊 ∧ d𝐊)` on the base chart.
pub fn jones_tod_reduce(ext: &KillingExtension) -> Result<WeylStructure> {
    let ginv = ext.inverse_metric();
    let det_inv = linalg::det(&ginv);
    if det_inv.is_zero() {
        return Err(Error::NonInvertible("contravariant metric of the extension".into()));
    }
    let adj = linalg::adjugate(&ginv);
    let g: Vec<Vec<Expr>> = adj.iter().map(|r| r.iter().map(|c| c / &det_inv).collect()).collect();
    let k: Vec<Expr> = (0..4).map(|a| g[a][TAU].clone()).collect();
    let k2 = k[TAU].clone();
    if k2.is_zero() {
        return Err(Error::NullKilling {
            norm: 0.0,
            point: Vec::new(),
        });
    }
    let names = ext.chart4.names();
    let dk = |i: usize, j: usize| k[j].diff(&names[i]) - k[i].diff(&names[j]);
    let alpha = |i: usize, j: usize, l: usize| &k[i] * dk(j, l) + &k[j] * dk(l, i) + &k[l] * dk(i, j);
    let triples = [(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)];
    let v: Vec<Expr> = (0..4)
        .map(|l| {
            let (i, j, m) = triples[l];
            LEVI_REMAINING[l] * conventions::ORIENTATION * alpha(i, j, m)
        })
        .collect();
    // sgn(det g)/sqrt|det g| = det(g⁻¹)/sqrt|det(g⁻¹)|, oriented by the frame W1∧W2∧W3∧W4
    let frame: Vec<Vec<Expr>> = ext.w.iter().map(|r| r.to_vec()).collect();
    let det_w = linalg::det(&frame);
    let density = &det_inv / det_inv.abs().sqrt() * (&det_w / det_w.abs());
    let star: Vec<Expr> = (0..3)
        .map(|m| {
            let s = (0..4).fold(Expr::zero(), |acc, l| acc + &v[l] * &g[l][m]);
            &density * s
        })
        .collect();

    let k4 = &k2 * &k2;
    let h = std::array::from_fn(|i| std::array::from_fn(|j| &g[i][j] / &k2 - &k[i] * &k[j] / &k4));
    let omega = std::array::from_fn(|m| 2.0 * &star[m] / &k2);
    let base = Chart::new(&names[..3])?;
    let ws_h: [[Expr; 3]; 3] = h;
    for e in ws_h.iter().flatten().chain(omega.iter()) {
        if e.depends_on(&names[TAU]) {
            return Err(Error::InvalidInput("extension is not invariant along the Killing field".into()));
        }
    }
    let mut ws = WeylStructure::new(base, ws_h, omega)?;
    ws.guards = vec![
        Guard::nonzero("det g^-1", det_inv.clone()),
        Guard::nonzero("|K|^2", k2.clone()),
    ];
    Ok(ws)
}

/// Evaluates `|K|²` of the extension at a base point, reporting a null
/// Killing vector as an error.
pub fn killing_norm(ext: &KillingExtension, p: &[f64]) -> Result<f64> {
    let ginv = ext.inverse_metric();
    let mut p4 = p.to_vec();
    p4.push(0.0);
    let flat: Vec<Expr> = ginv.iter().flatten().cloned().collect();
    let vals = Tape::compile(&flat, &ext.chart4, &Params::new())?.eval_f64(&p4)?;
    let m: Vec<Vec<f64>> = vals.chunks(4).map(<[f64]>::to_vec).collect();
    let g = linalg::inverse(&m).map_err(|_| Error::NonInvertible("contravariant metric".into()))?;
    let n = g[TAU][TAU];
    if !(n.abs() >= DEGENERACY_TOL) {
        return Err(Error::NullKilling {
            norm: n,
            point: p.to_vec(),
        });
    }
    Ok(n)
}
