//! `ewweb`: batch verification and solver jobs with JSON reports.
//!
//! Exit status is 0 when every check passes, 1 when a check fails and 2 on
//! invalid input.

mod config;
mod jobs;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "ewweb", version, about = "Verify and solve dispersionless Hirota and hyper-CR data")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Einstein-Weyl residual of the structure built from a Hirota potential.
    VerifyEw(HirotaJob),
    /// Jacobi identity of the five-dimensional Poisson pencil.
    VerifyJacobi(JacobiJob),
    /// Commutator of the Lax pair against the equation residual.
    LaxCommutator(LaxJob),
    /// Null Veronese curve and agreement of Lax and web planes.
    VeroneseCheck(LambdaJob),
    /// Reduction of the four-dimensional extension against the closed form.
    JonesTod(HirotaJob),
    /// Evolve hyper-CR Cauchy data in Y.
    SolveHypercr(SolveJob),
    /// Twistor series recursion for a hyper-CR potential.
    TwistorRecursion(TwistorJob),
    /// Deform a curve family along a homogeneous generator.
    Deform(DeformJob),
    /// The Heisenberg example end to end.
    Heisenberg(HeisenbergJob),
    /// Residuals of a finite Hirota hierarchy.
    HierarchyCheck(HierarchyJob),
    /// e-forms of the pencil: annihilation, integrability and conformal class.
    EformCheck(EformJob),
}

/// Random evaluation points and report output.
#[derive(Args, Serialize)]
pub struct Common {
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Lower corner of the sampling box, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lo: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub hi: Option<Vec<f64>>,
    /// Parameter binding `name=value`, repeatable.
    #[arg(long = "param", value_parser = parse_pair)]
    pub params: Vec<(String, f64)>,
    /// Tolerance override `check=value`, repeatable.
    #[arg(long = "tol", value_parser = parse_pair)]
    pub tols: Vec<(String, f64)>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct HirotaJob {
    #[arg(long, allow_hyphen_values = true)]
    pub w: String,
    #[arg(long)]
    pub a: f64,
    #[arg(long)]
    pub b: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct JacobiJob {
    #[command(flatten)]
    #[serde(flatten)]
    pub hirota: HirotaJob,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 1.0, -1.0, 3.0])]
    pub lambda: Vec<f64>,
    /// Probe point `x,y,z`, repeatable; evaluated along with the random
    /// points, and the first one is reported.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [1.0, 1.0, 1.0])]
    pub at: Vec<f64>,
    /// Per-point Jacobiator sweep as CSV.
    #[arg(long)]
    #[serde(skip)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct LaxJob {
    /// Hirota potential in `x, y, z`.
    #[arg(long, conflicts_with = "h", required_unless_present = "h", allow_hyphen_values = true)]
    pub w: Option<String>,
    /// Hyper-CR potential in `X, Y, T`.
    #[arg(long, allow_hyphen_values = true)]
    pub h: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value_t = 2.0)]
    pub b: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 1.0, -1.0, 3.0])]
    pub lambda: Vec<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Commutator norm per point and λ as CSV.
    #[arg(long)]
    #[serde(skip)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct LambdaJob {
    #[command(flatten)]
    #[serde(flatten)]
    pub hirota: HirotaJob,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, -1.0, 2.0, 5.0])]
    pub lambda: Vec<f64>,
}

#[derive(Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct EformJob {
    #[command(flatten)]
    #[serde(flatten)]
    pub hirota: HirotaJob,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.5, -1.0, 2.0])]
    pub lambda: Vec<f64>,
    /// Weight of the cross term in the wedge square.
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
}

#[derive(Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct SolveJob {
    #[arg(long)]
    pub nx: usize,
    #[arg(long)]
    pub nt: usize,
    #[arg(long)]
    pub lx: f64,
    #[arg(long)]
    pub lt: f64,
    #[arg(long)]
    pub y_final: f64,
    #[arg(long)]
    pub steps: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub init_h: String,
    #[arg(long, allow_hyphen_values = true)]
    pub init_g: String,
    #[arg(long, allow_hyphen_values = true)]
    pub forcing: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub y_cap: f64,
    /// Exact solution in `X, Y, T`; adds an error check.
    #[arg(long, allow_hyphen_values = true)]
    pub exact: Option<String>,
    /// With `--exact`, also solve at 2x and 4x resolution and check the
    /// observed order.
    #[arg(long, requires = "exact")]
    pub refine: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// The solved field on `(X, Y, T)` as CSV.
    #[arg(long)]
    #[serde(skip)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct TwistorJob {
    #[arg(long, default_value = "eps*X^2/2", allow_hyphen_values = true)]
    pub h: String,
    /// Highest coefficient `ψ_n` to construct.
    #[arg(long, default_value_t = 4)]
    pub order: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct DeformJob {
    /// Starting family in `m0, m1, m2, l`.
    #[arg(long, default_value = "m0 + l*m1 + l^2*m2", conflicts_with = "family", allow_hyphen_values = true)]
    pub psi: String,
    /// Starting family as `{"psi": ..., "params": {...}}`.
    #[arg(long)]
    pub family: Option<PathBuf>,
    /// `dψ/dε`, homogeneous of degree 2 in `(psi, pi0, pi1)`.
    #[arg(long, allow_hyphen_values = true)]
    pub f: String,
    /// Fibre rotation, homogeneous of degree 0.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub g: String,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    /// Closed form of the deformed family in `m0, m1, m2, l`.
    #[arg(long, allow_hyphen_values = true)]
    pub closed_form: Option<String>,
    #[arg(long, value_delimiter = ',', default_values_t = [-1.0, 0.0, 0.7])]
    pub lambda: Vec<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct HeisenbergJob {
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub a: f64,
    #[arg(long)]
    pub b: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct HierarchyJob {
    /// Potential in `x, x0, …, x{n-1}`.
    #[arg(long, allow_hyphen_values = true)]
    pub w: String,
    /// The constants `a_0 … a_{n-1}`, comma separated.
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    pub a: Vec<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

fn parse_pair(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("`{v}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

fn dispatch(cmd: Command) -> Result<report::Report> {
    match cmd {
        Command::VerifyEw(j) => jobs::verify_ew(j),
        Command::VerifyJacobi(j) => jobs::verify_jacobi(j),
        Command::LaxCommutator(j) => jobs::lax_commutator(j),
        Command::VeroneseCheck(j) => jobs::veronese_check(j),
        Command::JonesTod(j) => jobs::jones_tod(j),
        Command::SolveHypercr(j) => jobs::solve_hypercr(j),
        Command::TwistorRecursion(j) => jobs::twistor_recursion(j),
        Command::Deform(j) => jobs::deform(j),
        Command::Heisenberg(j) => jobs::heisenberg(j),
        Command::HierarchyCheck(j) => jobs::hierarchy_check(j),
        Command::EformCheck(j) => jobs::eform_check(j),
    }
}

fn run(argv: Vec<String>) -> Result<ExitCode> {
    let argv = config::expand(argv)?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return Ok(ExitCode::from(code));
        }
    };
    let out = match &cli.command {
        Command::VerifyEw(j) | Command::JonesTod(j) => j.common.out.clone(),
        Command::VerifyJacobi(j) => j.hirota.common.out.clone(),
        Command::LaxCommutator(j) => j.common.out.clone(),
        Command::VeroneseCheck(j) => j.hirota.common.out.clone(),
        Command::EformCheck(j) => j.hirota.common.out.clone(),
        Command::SolveHypercr(j) => j.common.out.clone(),
        Command::TwistorRecursion(j) => j.common.out.clone(),
        Command::Deform(j) => j.common.out.clone(),
        Command::Heisenberg(j) => j.common.out.clone(),
        Command::HierarchyCheck(j) => j.common.out.clone(),
    };
    let report = dispatch(cli.command)?;
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match out {
        Some(path) => std::fs::write(&path, text).map_err(|e| anyhow!("writing {}: {e}", path.display()))?,
        None => print!("{text}"),
    }
    for c in report.checks.iter().filter(|c| !c.pass) {
        eprintln!("FAIL {}: {:e} (tolerance {:e})", c.name, c.max_residual, c.tolerance);
    }
    Ok(ExitCode::from(if report.passed() { 0 } else { 1 }))
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("ewweb: {e:#}");
            ExitCode::from(2)
        }
    }
}
