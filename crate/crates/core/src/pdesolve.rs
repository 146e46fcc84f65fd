//! The hyper-CR equation as a Cauchy problem in `Y`,
//!
//! `H_YY = H_XT + H_Y H_XX - H_X H_XY`,
//!
//! solved by the method of lines on a periodic `(X, T)` grid, together with
//! grid residuals for the Hirota, hyper-CR and hierarchy equations and
//! observed convergence orders.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{fd_derivative, parse_expr, Chart, Expr, GridField, Params, Tape, MIN_FD_NODES};

/// Cauchy data on the periodic `(X, T)` grid at a fixed `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionState {
    /// `H` on the `(X, T)` grid.
    pub h: GridField,
    /// `G = H_Y` on the same grid.
    pub g: GridField,
    pub y: f64,
}

impl EvolutionState {
    pub fn new(h: GridField, g: GridField, y: f64) -> Result<EvolutionState> {
        if h.chart().dim() != 2 || !h.periodic().iter().all(|p| *p) {
            return Err(Error::InvalidInput("Cauchy data lives on a periodic 2-D (X, T) grid".into()));
        }
        if h.shape() != g.shape() || h.spacing() != g.spacing() || h.origin() != g.origin() {
            return Err(Error::InvalidInput("H and G grids differ".into()));
        }
        for (axis, &n) in h.shape().iter().enumerate() {
            if n < MIN_FD_NODES {
                return Err(Error::GridTooSmall {
                    axis,
                    nodes: n,
                    needed: MIN_FD_NODES,
                });
            }
        }
        if !(y.is_finite() && finite(h.values()) && finite(g.values())) {
            return Err(Error::NonFinite("Cauchy data".into()));
        }
        Ok(EvolutionState { h, g, y })
    }

    /// Samples `H` and `G` given as expressions in `X, Y, T` at `Y = y` on
    /// `[-lx/2, lx/2) × [-lt/2, lt/2)`.
    pub fn from_exprs(
        h: &Expr,
        g: &Expr,
        params: &Params,
        (nx, nt): (usize, usize),
        (lx, lt): (f64, f64),
        y: f64,
    ) -> Result<EvolutionState> {
        if !(lx > 0.0 && lt > 0.0 && lx.is_finite() && lt.is_finite()) {
            return Err(Error::InvalidInput(format!("periods must be positive, got {lx}, {lt}")));
        }
        let chart = Chart::new(&["X", "T"])?;
        let at_y = |e: &Expr| e.bind(&params.clone().with("Y", y));
        let origin = [-lx / 2.0, -lt / 2.0];
        let spacing = [lx / nx as f64, lt / nt as f64];
        let sample = |e: &Expr| GridField::sample(&at_y(e), &chart, params, &origin, &spacing, &[nx, nt], &[true, true]);
        EvolutionState::new(sample(h)?, sample(g)?, y)
    }

    pub fn nx(&self) -> usize {
        self.h.shape()[0]
    }

    pub fn nt(&self) -> usize {
        self.h.shape()[1]
    }
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Outcome of an evolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub steps_requested: usize,
    pub steps_taken: usize,
    pub y_start: f64,
    pub y_reached: f64,
    /// Largest hyper-CR residual (net of forcing) on the interior of the
    /// solved volume.
    pub max_residual: f64,
    pub blow_up: bool,
    pub wall_time_s: f64,
}

/// The evolved field on `(X, Y, T)` and the final Cauchy data.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub field: GridField,
    pub last: EvolutionState,
    pub report: SolveReport,
}

// Periodic central differences on an nx × nt row-major grid.
struct Stencil {
    nx: usize,
    nt: usize,
    hx: f64,
    ht: f64,
}

impl Stencil {
    #[inline]
    fn at(&self, i: usize, k: usize) -> usize {
        (i % self.nx) * self.nt + (k % self.nt)
    }

    fn rhs(&self, h: &[f64], g: &[f64], forcing: Option<&[f64]>, dh: &mut [f64], dg: &mut [f64]) {
        let (nx, nt) = (self.nx, self.nt);
        let (ix, ixx, ixt) = (0.5 / self.hx, 1.0 / (self.hx * self.hx), 0.25 / (self.hx * self.ht));
        for i in 0..nx {
            let (ip, im) = (i + 1, i + nx - 1);
            for k in 0..nt {
                let (kp, km) = (k + 1, k + nt - 1);
                let c = self.at(i, k);
                let hx = (h[self.at(ip, k)] - h[self.at(im, k)]) * ix;
                let hxx = (h[self.at(ip, k)] - 2.0 * h[c] + h[self.at(im, k)]) * ixx;
                let hxt = (h[self.at(ip, kp)] - h[self.at(ip, km)] - h[self.at(im, kp)] + h[self.at(im, km)]) * ixt;
                let gx = (g[self.at(ip, k)] - g[self.at(im, k)]) * ix;
                dh[c] = g[c];
                dg[c] = hxt + g[c] * hxx - hx * gx + forcing.map_or(0.0, |f| f[c]);
            }
        }
    }
}

struct Forcing {
    tape: Tape,
    xs: Vec<f64>,
    ts: Vec<f64>,
}

impl Forcing {
    fn sample(&self, y: f64) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.xs.len() * self.ts.len());
        for &x in &self.xs {
            for &t in &self.ts {
                out.push(self.tape.eval_f64(&[x, y, t])?[0]);
            }
        }
        Ok(out)
    }
}

/// Evolves the Cauchy data from `init.y` to `y_final` in `steps` classical
/// RK4 steps; `forcing` (in `X, Y, T`) is added to the `G` equation.
///
/// A non-finite value stops the run: the report carries `blow_up = true`
/// and the unreached slabs of the output are NaN.
pub fn hypercr_evolve(
    init: &EvolutionState,
    y_final: f64,
    steps: usize,
    forcing: Option<&Expr>,
    params: &Params,
) -> Result<Evolution> {
    let started = Instant::now();
    if steps == 0 {
        return Err(Error::InvalidInput("steps must be at least 1".into()));
    }
    if !y_final.is_finite() || y_final == init.y {
        return Err(Error::InvalidInput(format!("cannot evolve from Y = {} to Y = {y_final}", init.y)));
    }
    let (nx, nt) = (init.nx(), init.nt());
    let st = Stencil {
        nx,
        nt,
        hx: init.h.spacing()[0],
        ht: init.h.spacing()[1],
    };
    let forcing = match forcing {
        Some(f) => Some(Forcing {
            tape: Tape::compile(std::slice::from_ref(f), &Chart::XYT(), params)?,
            xs: (0..nx).map(|i| init.h.origin()[0] + i as f64 * st.hx).collect(),
            ts: (0..nt).map(|k| init.h.origin()[1] + k as f64 * st.ht).collect(),
        }),
        None => None,
    };

    let dy = (y_final - init.y) / steps as f64;
    let n = nx * nt;
    let mut h = init.h.values().to_vec();
    let mut g = init.g.values().to_vec();
    let mut slabs: Vec<Vec<f64>> = vec![h.clone()];
    let mut g_slabs: Vec<Vec<f64>> = vec![g.clone()];
    let mut f_now = forcing.as_ref().map(|f| f.sample(init.y)).transpose()?;
    let mut k = [(); 4].map(|_| (vec![0.0; n], vec![0.0; n]));
    let (mut th, mut tg) = (vec![0.0; n], vec![0.0; n]);
    let mut y = init.y;
    let mut blow_up = false;

    for _ in 0..steps {
        let f_half = forcing.as_ref().map(|f| f.sample(y + dy / 2.0)).transpose()?;
        let f_next = forcing.as_ref().map(|f| f.sample(y + dy)).transpose()?;
        let stage_forcing = [f_now.as_deref(), f_half.as_deref(), f_half.as_deref(), f_next.as_deref()];
        for s in 0..4 {
            let w = [0.0, 0.5, 0.5, 1.0][s] * dy;
            if s == 0 {
                th.copy_from_slice(&h);
                tg.copy_from_slice(&g);
            } else {
                let (ph, pg) = &k[s - 1];
                for c in 0..n {
                    th[c] = h[c] + w * ph[c];
                    tg[c] = g[c] + w * pg[c];
                }
            }
            let (dh, dg) = &mut k[s];
            st.rhs(&th, &tg, stage_forcing[s], dh, dg);
        }
        for c in 0..n {
            h[c] += dy / 6.0 * (k[0].0[c] + 2.0 * k[1].0[c] + 2.0 * k[2].0[c] + k[3].0[c]);
            g[c] += dy / 6.0 * (k[0].1[c] + 2.0 * k[1].1[c] + 2.0 * k[2].1[c] + k[3].1[c]);
        }
        if !(finite(&h) && finite(&g)) {
            blow_up = true;
            break;
        }
        y += dy;
        f_now = f_next;
        slabs.push(h.clone());
        g_slabs.push(g.clone());
    }

    let steps_taken = slabs.len() - 1;
    let y_reached = if steps_taken == steps { y_final } else { y };
    // lay the slabs out along an increasing Y axis
    let ascending = dy > 0.0;
    let mut values = vec![f64::NAN; nx * (steps + 1) * nt];
    for (j, slab) in slabs.iter().enumerate() {
        let row = if ascending { j } else { steps - j };
        for i in 0..nx {
            for kk in 0..nt {
                values[(i * (steps + 1) + row) * nt + kk] = slab[i * nt + kk];
            }
        }
    }
    let y_origin = if ascending { init.y } else { y_final };
    let field = GridField::new(
        Chart::XYT(),
        vec![init.h.origin()[0], y_origin, init.h.origin()[1]],
        vec![st.hx, dy.abs(), st.ht],
        vec![nx, steps + 1, nt],
        vec![true, false, true],
        values,
    )?;

    let last = EvolutionState {
        h: init.h.with_values(slabs.last().cloned().unwrap_or_default()),
        g: init.g.with_values(g_slabs.last().cloned().unwrap_or_default()),
        y: y_reached,
    };

    let max_residual = if blow_up || steps < 4 {
        f64::NAN
    } else {
        let res = residual_grid(&ResidualKind::HyperCr, &field)?;
        match &forcing {
            Some(f) => {
                let mut worst: f64 = 0.0;
                for c in 0..res.field.len() {
                    if res.field.is_interior(c, 1) {
                        let p = res.field.point(c);
                        worst = worst.max((res.field.values()[c] + f.tape.eval_f64(&p)?[0]).abs());
                    }
                }
                worst
            }
            None => res.max,
        }
    };

    Ok(Evolution {
        field,
        last,
        report: SolveReport {
            steps_requested: steps,
            steps_taken,
            y_start: init.y,
            y_reached,
            max_residual,
            blow_up,
            wall_time_s: started.elapsed().as_secs_f64(),
        },
    })
}

/// Which equation `residual_grid` evaluates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResidualKind {
    /// `(b-a) w_x w_yz + a w_y w_zx - b w_z w_xy` on `(x, y, z)`.
    Hirota { a: f64, b: f64 },
    /// `H_XT - H_YY + H_Y H_XX - H_X H_XY` on `(X, Y, T)`.
    HyperCr,
    /// `(a_i - a_j) w_x w_ij + a_j w_i w_jx - a_i w_j w_ix` on `(x, x_i, x_j)`.
    Hierarchy { ai: f64, aj: f64 },
}

#[derive(Debug, Clone)]
pub struct ResidualGrid {
    pub field: GridField,
    /// Max over nodes at least one node away from every open boundary.
    pub max: f64,
    /// `sqrt(Σ r² ΔV)` over the same nodes.
    pub l2: f64,
}

/// Pointwise residual of a sampled field from second-order differences.
pub fn residual_grid(kind: &ResidualKind, field: &GridField) -> Result<ResidualGrid> {
    if field.chart().dim() != 3 {
        return Err(Error::InvalidInput(format!(
            "residuals need a 3-D grid, got chart {}",
            field.chart()
        )));
    }
    let d = |a: [u32; 3]| fd_derivative(field, &a);
    let (f0, f1, f2) = (d([1, 0, 0])?, d([0, 1, 0])?, d([0, 0, 1])?);
    let (f01, f02, f12) = (d([1, 1, 0])?, d([1, 0, 1])?, d([0, 1, 1])?);
    let v = |g: &GridField, c: usize| g.values()[c];
    let mut out = vec![0.0; field.len()];
    match kind {
        ResidualKind::Hirota { a, b } => {
            for (c, r) in out.iter_mut().enumerate() {
                *r = (b - a) * v(&f0, c) * v(&f12, c) + a * v(&f1, c) * v(&f02, c) - b * v(&f2, c) * v(&f01, c);
            }
        }
        ResidualKind::Hierarchy { ai, aj } => {
            for (c, r) in out.iter_mut().enumerate() {
                *r = (ai - aj) * v(&f0, c) * v(&f12, c) + aj * v(&f1, c) * v(&f02, c) - ai * v(&f2, c) * v(&f01, c);
            }
        }
        ResidualKind::HyperCr => {
            let (f00, f11) = (d([2, 0, 0])?, d([0, 2, 0])?);
            for (c, r) in out.iter_mut().enumerate() {
                *r = v(&f02, c) - v(&f11, c) + v(&f1, c) * v(&f00, c) - v(&f0, c) * v(&f01, c);
            }
        }
    }
    let res = field.with_values(out);
    let cell: f64 = field.spacing().iter().product();
    let (mut max, mut sq) = (0.0f64, 0.0);
    for (c, r) in res.values().iter().enumerate() {
        if res.is_interior(c, 1) {
            max = max.max(r.abs());
            sq += r * r * cell;
        }
    }
    Ok(ResidualGrid {
        field: res,
        max,
        l2: sq.sqrt(),
    })
}

/// Errors below this are treated as rounding, and no order is fitted.
pub const EXACT_FLOOR: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Order { slope: f64 },
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    /// `(h, error)` per refinement.
    pub samples: Vec<(f64, f64)>,
    pub verdict: Verdict,
}

impl Convergence {
    pub fn slope(&self) -> Option<f64> {
        match self.verdict {
            Verdict::Order { slope } => Some(slope),
            Verdict::Exact => None,
        }
    }
}

/// Least-squares slope of `log error` against `log h`.
pub fn convergence_order(samples: &[(f64, f64)]) -> Result<Convergence> {
    if samples.len() < 3 {
        return Err(Error::TooFewPoints {
            got: samples.len(),
            needed: 3,
        });
    }
    if samples.iter().any(|(h, e)| !(*h > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidInput(format!("bad refinement data {samples:?}")));
    }
    let verdict = if samples.iter().all(|(_, e)| e.abs() <= EXACT_FLOOR) {
        Verdict::Exact
    } else if samples.iter().any(|(_, e)| *e == 0.0) {
        return Err(Error::InvalidInput(format!("zero error mixed with nonzero errors: {samples:?}")));
    } else {
        let pts: Vec<(f64, f64)> = samples.iter().map(|(h, e)| (h.ln(), e.abs().ln())).collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Verdict::Order { slope: sxy / sxx }
    };
    Ok(Convergence {
        samples: samples.to_vec(),
        verdict,
    })
}

fn default_y_cap() -> f64 {
    1.0
}

/// Solver job, as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub nx: usize,
    pub nt: usize,
    #[serde(rename = "Lx")]
    pub lx: f64,
    #[serde(rename = "Lt")]
    pub lt: f64,
    pub y_final: f64,
    pub steps: usize,
    #[serde(rename = "init_H")]
    pub init_h: String,
    #[serde(rename = "init_G")]
    pub init_g: String,
    #[serde(default)]
    pub forcing: Option<String>,
    #[serde(default)]
    pub params: Params,
    #[serde(default = "default_y_cap")]
    pub y_cap: f64,
}

impl SolverConfig {
    pub fn from_json(text: &str) -> Result<SolverConfig> {
        let cfg: SolverConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("solver config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidInput("steps must be at least 1".into()));
        }
        if !(self.y_final.is_finite() && self.y_final.abs() <= self.y_cap) {
            return Err(Error::InvalidInput(format!(
                "|y_final| = {} exceeds the cap {}",
                self.y_final.abs(),
                self.y_cap
            )));
        }
        Ok(())
    }

    pub fn with_resolution(&self, nx: usize, nt: usize) -> SolverConfig {
        SolverConfig { nx, nt, ..self.clone() }
    }

    pub fn initial_state(&self) -> Result<EvolutionState> {
        EvolutionState::from_exprs(
            &parse_expr(&self.init_h)?,
            &parse_expr(&self.init_g)?,
            &self.params,
            (self.nx, self.nt),
            (self.lx, self.lt),
            0.0,
        )
    }

    pub fn forcing_expr(&self) -> Result<Option<Expr>> {
        self.forcing.as_deref().map(parse_expr).transpose()
    }

    pub fn run(&self) -> Result<Evolution> {
        self.validate()?;
        let forcing = self.forcing_expr()?;
        hypercr_evolve(&self.initial_state()?, self.y_final, self.steps, forcing.as_ref(), &self.params)
    }
}

/// Max deviation of a solved field from `exact` over every node reached.
pub fn max_error(field: &GridField, exact: &Expr, params: &Params) -> Result<f64> {
    let tape = Tape::compile(std::slice::from_ref(exact), field.chart(), params)?;
    let mut worst: f64 = 0.0;
    for (c, v) in field.values().iter().enumerate() {
        if v.is_finite() {
            worst = worst.max((v - tape.eval_f64(&field.point(c))?[0]).abs());
        } else {
            return Err(Error::NonFinite(format!("solution at {:?}", field.point(c))));
        }
    }
    Ok(worst)
}

/// Observed order of the solver against `exact` with `nx = nt = n` for each
/// `n` in `refinements` (the `Y` step count is left as configured).
pub fn solver_convergence(config: &SolverConfig, exact: &Expr, refinements: &[usize]) -> Result<Convergence> {
    if refinements.len() < 3 {
        return Err(Error::TooFewPoints {
            got: refinements.len(),
            needed: 3,
        });
    }
    let mut samples = Vec::new();
    for &n in refinements {
        let run = config.with_resolution(n, n).run()?;
        if run.report.blow_up {
            return Err(Error::NonFinite(format!("blow-up at resolution {n}")));
        }
        samples.push((config.lx / n as f64, max_error(&run.field, exact, &config.params)?));
    }
    convergence_order(&samples)
}

/// Observed order of `residual_grid` on `exact` sampled with `n` nodes per
/// axis over the box `lo..hi` (endpoints included).
pub fn residual_convergence(
    kind: &ResidualKind,
    exact: &Expr,
    chart: &Chart,
    params: &Params,
    lo: [f64; 3],
    hi: [f64; 3],
    refinements: &[usize],
) -> Result<Convergence> {
    if refinements.len() < 3 {
        return Err(Error::TooFewPoints {
            got: refinements.len(),
            needed: 3,
        });
    }
    let mut samples = Vec::new();
    for &n in refinements {
        let spacing: Vec<f64> = (0..3).map(|a| (hi[a] - lo[a]) / (n - 1) as f64).collect();
        let g = GridField::sample(exact, chart, params, &lo, &spacing, &[n; 3], &[false; 3])?;
        samples.push((spacing[0], residual_grid(kind, &g)?.max));
    }
    convergence_order(&samples)
}

/// Smooth periodic window on `[-π, π)`: close to 1 near `X = 0`, vanishing
/// to fourth order at `X = ±π`.
pub fn window() -> Expr {
    parse_expr("1 - exp(-5*(1 + cos(X))^2)").expect("static")
}

/// `W(X) X²/2 + 0.1 sin X sin T · Y` and the forcing `-R[H*]` that makes it
/// an exact solution of the forced evolution.
pub fn manufactured() -> (Expr, Expr) {
    let exact = parse_expr("(1 - exp(-5*(1 + cos(X))^2))*X^2/2 + 0.1*sin(X)*sin(T)*Y").expect("static");
    let forcing = -crate::laxweb::hypercr_residual_expr(&exact);
    (exact, forcing)
}

/// A solver config reproducing `manufactured()` on `[-π, π)²`.
pub fn manufactured_config(n: usize, y_final: f64, steps: usize) -> SolverConfig {
    let (exact, forcing) = manufactured();
    let at0 = |e: &Expr| format!("{}", e.bind(&Params::new().with("Y", 0.0)));
    SolverConfig {
        nx: n,
        nt: n,
        lx: 2.0 * std::f64::consts::PI,
        lt: 2.0 * std::f64::consts::PI,
        y_final,
        steps,
        init_h: at0(&exact),
        init_g: at0(&exact.diff("Y")),
        forcing: Some(format!("{forcing}")),
        params: Params::new(),
        y_cap: default_y_cap(),
    }
}
