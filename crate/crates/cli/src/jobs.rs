use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use ewweb::conventions;
use ewweb::fields::{eval, parse_expr, Chart, Expr, Params, Tape};
use ewweb::geometry::{build_hirota_weyl, conformal_rescale, curvature, jones_tod_reduce, killing_norm, KillingExtension};
use ewweb::laxweb::{
    commutator, hierarchy_residual, hirota_lax, hirota_residual, hypercr_lax, hypercr_residual, residual_sweep_csv,
    span_compare, veronese_eval, veronese_fields, HierarchySpec, LambdaVectorField,
};
use ewweb::pdesolve::{max_error, solver_convergence, SolverConfig};
use ewweb::poisson::{conformal_from_eforms, eform, jacobiator, jacobiator_sweep, pencil_from_lax, sweep_csv};
use ewweb::report::Check;
use ewweb::sampling;
use ewweb::twistor::{
    extract_coordinates, heisenberg_pipeline, kodaira_deform, sample_parameters, verify_wave, CurveFamily,
    DeformationGenerator, ExprFamily, TwistorSeries, CONSISTENCY_TOL,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::report::{Report, Tolerances};
use crate::{
    Common, DeformJob, EformJob, HeisenbergJob, HierarchyJob, HirotaJob, JacobiJob, LambdaJob, LaxJob, SolveJob,
    TwistorJob,
};

// y and z stay positive so the exponential solutions have a definite metric
const HIROTA_LO: [f64; 3] = [-1.0, 0.1, 0.1];
const HIROTA_HI: [f64; 3] = [1.0, 1.0, 1.0];

type Values = BTreeMap<String, Value>;

fn params(c: &Common, extra: &[(&str, f64)]) -> Params {
    let mut p = Params::new();
    for (k, v) in extra {
        p.set(k, *v);
    }
    for (k, v) in &c.params {
        p.set(k, *v);
    }
    p
}

/// Parses and binds `text`; every name left over must be a coordinate.
fn bind(text: &str, p: &Params, chart: &Chart) -> Result<Expr> {
    let e = parse_expr(text).with_context(|| format!("parsing `{text}`"))?.bind(p);
    if let Some(name) = e.free_symbols().into_iter().find(|n| chart.index(n).is_none()) {
        return Err(ewweb::Error::UnboundParameter(name)).with_context(|| format!("in `{text}` on {chart}"));
    }
    Ok(e)
}

fn corner(given: &Option<Vec<f64>>, default: &[f64], which: &str) -> Result<Vec<f64>> {
    match given {
        Some(v) if v.len() != default.len() => bail!("--{which} needs {} values, got {}", default.len(), v.len()),
        Some(v) => Ok(v.clone()),
        None => Ok(default.to_vec()),
    }
}

/// Random points in the job's box where every first derivative of `w` in
/// `grad_of` clears the floor and `accept` holds.
fn admissible(
    c: &Common,
    w: &Expr,
    chart: &Chart,
    grad_of: &[&str],
    lo: &[f64],
    hi: &[f64],
    mut accept: impl FnMut(&[f64]) -> bool,
) -> Result<Vec<Vec<f64>>> {
    let lo = corner(&c.lo, lo, "lo")?;
    let hi = corner(&c.hi, hi, "hi")?;
    let grads: Vec<Expr> = grad_of.iter().map(|v| w.diff(v)).collect();
    let tape = Tape::compile(&grads, chart, &Params::new())?;
    // surface unbound names before sampling swallows them
    tape.eval_f64(&lo)?;
    let mut rng = sampling::rng(c.seed);
    Ok(sampling::sample_box(&mut rng, &lo, &hi, c.points, |p| {
        tape.eval_f64(p)
            .map(|g| g.iter().all(|v| v.abs() >= sampling::GRADIENT_FLOOR))
            .unwrap_or(false)
            && accept(p)
    })?)
}

fn hirota_points(j: &HirotaJob, w: &Expr, accept: impl FnMut(&[f64]) -> bool) -> Result<Vec<Vec<f64>>> {
    admissible(&j.common, w, &Chart::xyz(), &["x", "y", "z"], &HIROTA_LO, &HIROTA_HI, accept)
}

fn finish(command: &str, job: &impl Serialize, seed: u64, checks: Vec<Check>, values: Values, tols: Tolerances) -> Result<Report> {
    tols.finish()?;
    Ok(Report {
        command: command.to_string(),
        params: serde_json::to_value(job)?,
        seed,
        conventions_digest: conventions::digest(),
        checks,
        values,
        timestamp: chrono::Utc::now().to_rfc3339(),
    })
}

fn write_csv(path: &Option<impl AsRef<Path>>, text: &str) -> Result<()> {
    if let Some(p) = path {
        let p = p.as_ref();
        std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn hirota_setup(j: &HirotaJob) -> Result<(Expr, Tolerances)> {
    let p = params(&j.common, &[("a", j.a), ("b", j.b)]);
    Ok((bind(&j.w, &p, &Chart::xyz())?, Tolerances::new(&j.common.tols)?))
}

pub fn verify_ew(j: HirotaJob) -> Result<Report> {
    let (w, mut tols) = hirota_setup(&j)?;
    let ws = build_hirota_weyl(&w, j.a, j.b)?;
    let pts = hirota_points(&j, &w, |p| ws.check_at(p).is_ok())?;
    let mut worst: f64 = 0.0;
    for p in &pts {
        worst = worst.max(curvature(&ws, p)?.e_norm());
    }
    let checks = vec![tols.check("einstein_weyl", worst, 1e-9)];
    let values = Values::from([("max_e_norm".into(), json!(worst)), ("points".into(), json!(pts.len()))]);
    finish("verify-ew", &j, j.common.seed, checks, values, tols)
}

pub fn verify_jacobi(j: JacobiJob) -> Result<Report> {
    let (w, mut tols) = hirota_setup(&j.hirota)?;
    if j.at.is_empty() || j.at.len() % 3 != 0 {
        bail!("--at takes x,y,z triples, got {} values", j.at.len());
    }
    if j.lambda.is_empty() {
        bail!("--lambda needs at least one value");
    }
    let (l0, l1) = hirota_lax(&w, j.hirota.a, j.hirota.b)?;
    let pen = pencil_from_lax(&l0, &l1)?;
    let mut pts: Vec<Vec<f64>> = j.at.chunks(3).map(<[f64]>::to_vec).collect();
    let probe = pts[0].clone();
    pts.extend(hirota_points(&j.hirota, &w, |_| true)?);
    let rows = jacobiator_sweep(&pen, &pts, &j.lambda)?;
    let worst = rows.iter().map(|r| r.max_j).fold(0.0, f64::max);
    let j_probe = jacobiator(&pen, &probe, j.lambda[0])?.get(0, 3, 4);
    write_csv(&j.csv, &sweep_csv(&rows))?;
    let checks = vec![tols.check("jacobiator", worst, 1e-10)];
    let values = Values::from([
        ("J_x_p0_p1".into(), json!(j_probe)),
        ("probe_point".into(), json!(probe)),
        ("probe_lambda".into(), json!(j.lambda[0])),
        ("max_jacobiator".into(), json!(worst)),
    ]);
    finish("verify-jacobi", &j, j.hirota.common.seed, checks, values, tols)
}

pub fn lax_commutator(j: LaxJob) -> Result<Report> {
    let mut tols = Tolerances::new(&j.common.tols)?;
    let p = params(&j.common, &[("a", j.a), ("b", j.b)]);
    // `lift` is the power of λ that carries the residual
    let (l0, l1, field, lift, chart, grads, lo, hi) = match (&j.w, &j.h) {
        (Some(w), _) => {
            let w = bind(w, &p, &Chart::xyz())?;
            let (l0, l1) = hirota_lax(&w, j.a, j.b)?;
            (l0, l1, w, 1, Chart::xyz(), vec!["x"], HIROTA_LO.to_vec(), HIROTA_HI.to_vec())
        }
        (None, Some(h)) => {
            let h = bind(h, &p, &Chart::XYT())?;
            let (l0, l1) = hypercr_lax(&h)?;
            (l0, l1, h, 2, Chart::XYT(), vec![], vec![-1.0; 3], vec![1.0; 3])
        }
        (None, None) => bail!("give --w or --h"),
    };
    let pts = admissible(&j.common, &field, &chart, &grads, &lo, &hi, |_| true)?;
    let (mut identity, mut frob, mut rho_max): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut rows = Vec::new();
    for q in &pts {
        let br = commutator(&l0, &l1, q)?;
        let coeff = if lift == 1 {
            let wx = eval(&field.diff("x"), &chart, &Params::new(), q)?;
            let rho = hirota_residual(&field, j.a, j.b, q)?;
            rho_max = rho_max.max(rho.abs());
            rho / (wx * wx)
        } else {
            let rho = hypercr_residual(&field, q)?;
            rho_max = rho_max.max(rho.abs());
            rho
        };
        for k in 0..=2 {
            let want = if k == lift { coeff } else { 0.0 };
            let got = br.coeff(k);
            identity = identity.max((got[0] - want).abs()).max(got[1].abs()).max(got[2].abs());
        }
        for &lambda in &j.lambda {
            let v = br.at(lambda);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            frob = frob.max(norm);
            rows.push((q.clone(), lambda, norm));
        }
    }
    write_csv(&j.csv, &residual_sweep_csv(&rows))?;
    let checks = vec![
        tols.check("commutator_identity", identity, 1e-10),
        tols.check("frobenius", frob, 1e-10),
    ];
    let values = Values::from([
        ("max_equation_residual".into(), json!(rho_max)),
        ("max_commutator".into(), json!(frob)),
        ("equation".into(), json!(if lift == 1 { "hirota" } else { "hyper-cr" })),
    ]);
    finish("lax-commutator", &j, j.common.seed, checks, values, tols)
}

pub fn veronese_check(j: LambdaJob) -> Result<Report> {
    let h = &j.hirota;
    let (w, mut tols) = hirota_setup(h)?;
    let ws = build_hirota_weyl(&w, h.a, h.b)?;
    let vt = veronese_fields(&w, h.a, h.b)?;
    let (l0, l1) = hirota_lax(&w, h.a, h.b)?;
    let pts = hirota_points(h, &w, |p| ws.check_at(p).is_ok())?;
    let (mut null, mut orth, mut mismatches): (f64, f64, usize) = (0.0, 0.0, 0);
    for p in &pts {
        let [v1, v2, v3] = vt.eval(p)?;
        let base = ws.pair(p, &v1, &v1)?.abs().max(1.0);
        for &lambda in &j.lambda {
            let v = veronese_eval(&vt, lambda, p)?;
            let scale = base * (1.0 + lambda * lambda).powi(2);
            null = null.max(ws.pair(p, &v, &v)?.abs() / scale);
            let u: Vec<f64> = (0..3).map(|i| v1[i] - lambda * v2[i]).collect();
            let t: Vec<f64> = (0..3).map(|i| v2[i] - lambda * v3[i]).collect();
            orth = orth.max(ws.pair(p, &v, &u)?.abs() / scale).max(ws.pair(p, &v, &t)?.abs() / scale);
            if lambda != 0.0 {
                let lax = [l0.eval(p, lambda)?, l1.eval(p, lambda)?];
                let web = vt.plane(conventions::veronese_parameter(lambda), p)?;
                if span_compare(&lax, &web) != 2 {
                    mismatches += 1;
                }
            }
        }
    }
    let checks = vec![
        tols.check("null_curve", null, 1e-10),
        tols.check("orthogonality", orth, 1e-10),
        Check::new("lax_plane_mismatches", mismatches as f64, 0.0),
    ];
    let values = Values::from([("points".into(), json!(pts.len()))]);
    finish("veronese-check", &j, h.common.seed, checks, values, tols)
}

pub fn jones_tod(j: HirotaJob) -> Result<Report> {
    let (w, mut tols) = hirota_setup(&j)?;
    let ext = KillingExtension::hirota(&w, j.a, j.b)?;
    let phi2 = w.diff("z") / (w.diff("x") * w.diff("y"));
    let gauged = conformal_rescale(&jones_tod_reduce(&ext)?, &phi2.sqrt())?;
    let eq = build_hirota_weyl(&w, j.a, j.b)?;
    let phi_tape = Tape::compile(std::slice::from_ref(&phi2), &Chart::xyz(), &Params::new())?;
    let pts = hirota_points(&j, &w, |p| {
        phi_tape.eval_f64(p).map(|v| v[0] > 0.0).unwrap_or(false)
            && eq.check_at(p).is_ok()
            && gauged.check_at(p).is_ok()
            && killing_norm(&ext, p).is_ok()
    })?;
    let (mut metric, mut omega, mut knorm): (f64, f64, f64) = (0.0, 0.0, f64::INFINITY);
    for p in &pts {
        let (hg, he) = (gauged.metric_at(p)?, eq.metric_at(p)?);
        let (og, oe) = (gauged.omega_at(p)?, eq.omega_at(p)?);
        for i in 0..3 {
            for k in 0..3 {
                metric = metric.max((hg[i][k] - conventions::JONES_TOD_SCALE * he[i][k]).abs());
            }
            omega = omega.max((og[i] - oe[i]).abs());
        }
        knorm = knorm.min(killing_norm(&ext, p)?.abs());
    }
    let checks = vec![tols.check("reduced_metric", metric, 1e-10), tols.check("weyl_form", omega, 1e-10)];
    let values = Values::from([
        ("metric_scale".into(), json!(conventions::JONES_TOD_SCALE)),
        ("min_killing_norm".into(), json!(knorm)),
    ]);
    finish("jones-tod", &j, j.common.seed, checks, values, tols)
}

pub fn solve_hypercr(j: SolveJob) -> Result<Report> {
    let mut tols = Tolerances::new(&j.common.tols)?;
    let p = params(&j.common, &[]);
    let cfg = SolverConfig {
        nx: j.nx,
        nt: j.nt,
        lx: j.lx,
        lt: j.lt,
        y_final: j.y_final,
        steps: j.steps,
        init_h: j.init_h.clone(),
        init_g: j.init_g.clone(),
        forcing: j.forcing.clone(),
        params: p.clone(),
        y_cap: j.y_cap,
    };
    cfg.validate()?;
    let run = cfg.run()?;
    let r = &run.report;
    write_csv(&j.csv, &run.field.to_csv())?;
    let mut checks = vec![Check::new("no_blow_up", if r.blow_up { 1.0 } else { 0.0 }, 0.0)];
    let mut values = Values::from([
        ("steps_taken".into(), json!(r.steps_taken)),
        ("y_reached".into(), json!(r.y_reached)),
        ("blow_up".into(), json!(r.blow_up)),
    ]);
    if !r.blow_up {
        checks.push(tols.check("max_residual", r.max_residual, 1e-2));
        values.insert("max_residual".into(), json!(r.max_residual));
    }
    if let Some(text) = &j.exact {
        let exact = bind(text, &p, &Chart::XYT())?;
        if !r.blow_up {
            let err = max_error(&run.field, &exact, &Params::new())?;
            checks.push(tols.check("max_error", err, 1e-2));
        }
        if j.refine {
            if j.nx != j.nt {
                bail!("--refine needs nx = nt");
            }
            let conv = solver_convergence(&cfg, &exact, &[j.nx, 2 * j.nx, 4 * j.nx])?;
            let slope = conv.slope();
            let defect = slope.map_or(0.0, |s| (s - 2.0).abs());
            checks.push(tols.check("observed_order", defect, 0.2));
            values.insert("observed_order".into(), json!(slope));
            values.insert("convergence".into(), serde_json::to_value(&conv.samples)?);
        }
    }
    finish("solve-hypercr", &j, j.common.seed, checks, values, tols)
}

pub fn twistor_recursion(j: TwistorJob) -> Result<Report> {
    let mut tols = Tolerances::new(&j.common.tols)?;
    let p = params(&j.common, &[]);
    let h = parse_expr(&j.h).with_context(|| format!("parsing `{}`", j.h))?;
    let mut ts = TwistorSeries::new(&h, &p)?;
    let consistency_tol = tols.get("consistency", CONSISTENCY_TOL);
    // a potential that solves nothing stops the recursion; that is a failed
    // check, not bad input
    let mut defect: f64 = 0.0;
    let mut reached = 2;
    for i in 0..j.order {
        let d = ts.consistency_defect(i)?;
        defect = defect.max(d);
        if d > consistency_tol {
            break;
        }
        if i + 1 > reached {
            ts.extend_to(i + 1, consistency_tol)?;
            reached = i + 1;
        }
    }
    let mut checks = vec![Check::new("consistency", defect, consistency_tol)];
    let pts = admissible(&j.common, &Expr::zero(), &Chart::XYT(), &[], &[-1.0; 3], &[1.0; 3], |_| true)?;
    let mut wave: f64 = 0.0;
    for q in &pts {
        for i in 0..=reached {
            wave = wave.max(verify_wave(&ts, i, q)?.abs());
        }
    }
    checks.push(tols.check("wave_operator", wave, 1e-10));
    let coeffs: Vec<String> = ts.coeffs.iter().map(|c| c.to_string()).collect();
    let values = Values::from([("coefficients".into(), json!(coeffs)), ("order_reached".into(), json!(reached))]);
    finish("twistor-recursion", &j, j.common.seed, checks, values, tols)
}

pub fn deform(j: DeformJob) -> Result<Report> {
    let mut tols = Tolerances::new(&j.common.tols)?;
    let p = params(&j.common, &[]);
    let start = match &j.family {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExprFamily::from_json(&text)?
        }
        None => ExprFamily::new(bind(&j.psi, &p, &ExprFamily::chart())?, Params::new())?,
    };
    let gen = {
        let chart = DeformationGenerator::chart();
        DeformationGenerator::new(bind(&j.f, &p, &chart)?, bind(&j.g, &p, &chart)?, &Params::new())?
    };
    let def = kodaira_deform(start, gen, j.eps, j.steps)?;
    let lo = corner(&j.common.lo, &[-0.5; 3], "lo")?;
    let hi = corner(&j.common.hi, &[0.5; 3], "hi")?;
    let ms = sample_parameters(j.common.points, j.common.seed, [lo[0], lo[1], lo[2]], [hi[0], hi[1], hi[2]])?;
    let closed = match &j.closed_form {
        Some(text) => Some(ExprFamily::new(bind(text, &p, &ExprFamily::chart())?, Params::new())?),
        None => None,
    };
    let (mut resid, mut closed_err): (f64, f64) = (0.0, 0.0);
    let mut first = None;
    for m in &ms {
        let ex = extract_coordinates(&def, m)?;
        resid = resid.max(ex.hypercr_residual().abs());
        first.get_or_insert((ex.coords, ex.h));
        if let Some(cf) = &closed {
            for &l in &j.lambda {
                closed_err = closed_err.max((def.psi(m, l)? - cf.psi(m, l)?).abs());
            }
        }
    }
    let mut checks = vec![tols.check("extracted_hypercr_residual", resid, 1e-6)];
    if closed.is_some() {
        checks.push(tols.check("closed_form", closed_err, 1e-10));
    }
    let mut values = Values::new();
    if let Some((coords, h)) = first {
        values.insert("first_point".into(), json!({"m": ms[0], "XYT": coords, "H": h}));
    }
    finish("deform", &j, j.common.seed, checks, values, tols)
}

pub fn heisenberg(j: HeisenbergJob) -> Result<Report> {
    let tols = Tolerances::new(&j.common.tols)?;
    let r = heisenberg_pipeline(j.eps, j.a, j.b, j.common.points, j.common.seed)?;
    let values = Values::from([
        ("lambda4".into(), json!(r.constants.lambda4)),
        ("x_scale".into(), json!(r.constants.x_scale)),
        ("y_scale".into(), json!(r.constants.y_scale)),
        ("w".into(), json!(r.w)),
        ("coordinates".into(), json!(r.coordinates)),
    ]);
    finish("heisenberg", &j, j.common.seed, r.checks, values, tols)
}

pub fn hierarchy_check(j: HierarchyJob) -> Result<Report> {
    let mut tols = Tolerances::new(&j.common.tols)?;
    let spec = HierarchySpec::new(j.a.clone())?;
    let w = bind(&j.w, &params(&j.common, &[]), spec.chart())?;
    let n = spec.chart().dim();
    let pts = admissible(&j.common, &w, spec.chart(), &["x"], &vec![-1.0; n], &vec![1.0; n], |_| true)?;
    let mut worst: f64 = 0.0;
    for p in &pts {
        for i in 0..spec.len() {
            for k in 0..spec.len() {
                if i != k {
                    worst = worst.max(hierarchy_residual(&w, &spec, i, k, p)?.abs());
                }
            }
        }
    }
    let checks = vec![tols.check("hierarchy_residual", worst, 1e-12)];
    let values = Values::from([("flows".into(), json!(spec.len()))]);
    finish("hierarchy-check", &j, j.common.seed, checks, values, tols)
}

fn lax_pairing(l: &LambdaVectorField, e: &[f64], p: &[f64], lambda: f64) -> Result<f64> {
    let v = l.eval(p, lambda)?;
    Ok((0..3).map(|i| e[i] * v[i]).sum::<f64>().abs())
}

pub fn eform_check(j: EformJob) -> Result<Report> {
    let h = &j.hirota;
    let (w, mut tols) = hirota_setup(h)?;
    let (l0, l1) = hirota_lax(&w, h.a, h.b)?;
    let ef = eform(&pencil_from_lax(&l0, &l1)?, j.omega)?;
    let hc = conformal_from_eforms(&ef);
    let eq = build_hirota_weyl(&w, h.a, h.b)?;
    let pts = hirota_points(h, &w, |p| eq.check_at(p).is_ok())?;
    let (mut pairing, mut frob, mut spread): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for p in &pts {
        for &lambda in &j.lambda {
            let e = ef.eval(p, lambda)?;
            pairing = pairing.max(lax_pairing(&l0, &e, p, lambda)?).max(lax_pairing(&l1, &e, p, lambda)?);
            frob = frob.max(ef.frobenius_defect(p, lambda)?);
        }
        let he = eq.metric_at(p)?;
        let q = [p[0], p[1], p[2], 0.0, 0.0];
        let mut ratios = Vec::new();
        for i in 0..3 {
            for k in i..3 {
                let v = eval(&hc[i][k], &ef.chart, &Params::new(), &q)?;
                if he[i][k].abs() > 1e-12 {
                    ratios.push(v / he[i][k]);
                } else {
                    // a vanishing entry must vanish in both
                    spread = spread.max(v.abs());
                }
            }
        }
        let r0 = *ratios.first().ok_or_else(|| anyhow!("metric vanishes at {p:?}"))?;
        spread = spread.max(ratios.iter().map(|r| (r - r0).abs() / r0.abs()).fold(0.0, f64::max));
    }
    let checks = vec![
        tols.check("pairing", pairing, 1e-10),
        tols.check("frobenius", frob, 1e-10),
        tols.check("conformal_ratio_spread", spread, 1e-8),
    ];
    let values = Values::from([("points".into(), json!(pts.len()))]);
    finish("eform-check", &j, h.common.seed, checks, values, tols)
}
