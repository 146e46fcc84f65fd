//! Scalar fields: expression trees evaluated through jets, and sampled
//! uniform grids differentiated by finite differences.

mod expr;
mod grid;
mod parse;
mod tape;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use expr::{Expr, Func, Node};
pub use grid::{fd_derivative, GridField, MIN_FD_NODES};
pub use parse::parse_expr;
pub use tape::{Tape, TapeValue};

use crate::error::{Error, Result};
use crate::jets::Jet;

/// Ordered coordinate labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Chart {
    names: Vec<String>,
}

impl Chart {
    pub const MAX_DIM: usize = 9;

    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Chart> {
        let names: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
        if names.is_empty() || names.len() > Self::MAX_DIM {
            return Err(Error::InvalidChart(format!(
                "dimension {} outside 1..={}",
                names.len(),
                Self::MAX_DIM
            )));
        }
        for (i, n) in names.iter().enumerate() {
            let valid = n
                .chars()
                .next()
                .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            if !valid || Func::from_name(n).is_some() {
                return Err(Error::InvalidChart(format!("bad coordinate name `{n}`")));
            }
            if names[..i].contains(n) {
                return Err(Error::InvalidChart(format!("duplicate coordinate `{n}`")));
            }
        }
        Ok(Chart { names })
    }

    pub fn xyz() -> Chart {
        Chart::new(&["x", "y", "z"]).unwrap()
    }

    #[allow(non_snake_case)]
    pub fn XYT() -> Chart {
        Chart::new(&["X", "Y", "T"]).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// The coordinate functions as expressions.
    pub fn coords(&self) -> Vec<Expr> {
        self.names.iter().map(|n| Expr::var(n)).collect()
    }

    /// Appends coordinates, e.g. the fibre coordinates `p0, p1`.
    pub fn extend<S: AsRef<str>>(&self, more: &[S]) -> Result<Chart> {
        let mut names = self.names.clone();
        names.extend(more.iter().map(|s| s.as_ref().to_string()));
        Chart::new(&names)
    }
}

impl TryFrom<Vec<String>> for Chart {
    type Error = Error;
    fn try_from(names: Vec<String>) -> Result<Chart> {
        Chart::new(&names)
    }
}

impl From<Chart> for Vec<String> {
    fn from(c: Chart) -> Vec<String> {
        c.names
    }
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.names.join(","))
    }
}

/// Parameter bindings, name → value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Params(BTreeMap<String, f64>);

impl Params {
    pub fn new() -> Params {
        Params::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Params {
        self.0.insert(name.to_string(), value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl<const N: usize> From<[(&str, f64); N]> for Params {
    fn from(pairs: [(&str, f64); N]) -> Params {
        Params(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }
}

/// Truncated Taylor expansion of `f` at `p` to order `order`.
pub fn eval_jet(f: &Expr, chart: &Chart, params: &Params, p: &[f64], order: usize) -> Result<Jet> {
    Ok(Tape::compile(std::slice::from_ref(f), chart, params)?
        .eval_jets(p, order)?
        .remove(0))
}

/// Jets of several expressions at one point, sharing common subtrees.
pub fn eval_jets(
    fs: &[Expr],
    chart: &Chart,
    params: &Params,
    p: &[f64],
    order: usize,
) -> Result<Vec<Jet>> {
    Tape::compile(fs, chart, params)?.eval_jets(p, order)
}

/// Plain value of `f` at `p`.
pub fn eval(f: &Expr, chart: &Chart, params: &Params, p: &[f64]) -> Result<f64> {
    Ok(Tape::compile(std::slice::from_ref(f), chart, params)?
        .eval_f64(p)?
        .remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hirota_solution_jet() {
        let w = parse_expr("y*exp(x)+z*exp(2*x)").unwrap();
        let j = eval_jet(&w, &Chart::xyz(), &Params::new(), &[0.0, 1.0, 1.0], 1).unwrap();
        assert_relative_eq!(j.value(), 2.0, epsilon = 1e-15);
        assert_eq!(j.gradient(), vec![3.0, 1.0, 1.0]);
    }

    #[test]
    fn linear_field_has_no_curvature() {
        let w = parse_expr("x+y+z").unwrap();
        let j = eval_jet(&w, &Chart::xyz(), &Params::new(), &[0.3, -2.0, 7.0], 2).unwrap();
        assert_eq!(j.gradient(), vec![1.0, 1.0, 1.0]);
        for i in 0..3 {
            for k in 0..3 {
                assert_eq!(j.d2(i, k), 0.0);
            }
        }
    }

    #[test]
    fn quadratic_with_parameter() {
        let h = parse_expr("eps*X^2/2").unwrap();
        let params = Params::from([("eps", 1.0)]);
        let j = eval_jet(&h, &Chart::XYT(), &params, &[2.0, 0.0, 0.0], 2).unwrap();
        assert_eq!(j.value(), 2.0);
        assert_eq!(j.d(0), 2.0);
        assert_eq!(j.d2(0, 0), 1.0);
        assert_eq!(
            eval_jet(&h, &Chart::XYT(), &Params::new(), &[2.0, 0.0, 0.0], 2).unwrap_err(),
            Error::UnboundParameter("eps".into())
        );
    }

    #[test]
    fn symbolic_diff_matches_jets() {
        let f = parse_expr("sin(x*y)/(1+z^2) + ln(2+x) * exp(-y*z) + sqrt(3+x*z)").unwrap();
        let chart = Chart::xyz();
        let p = [0.4, -0.7, 1.1];
        let j = eval_jet(&f, &chart, &Params::new(), &p, 2).unwrap();
        for (i, a) in ["x", "y", "z"].iter().enumerate() {
            let d = eval(&f.diff(a), &chart, &Params::new(), &p).unwrap();
            assert_relative_eq!(d, j.d(i), epsilon = 1e-13);
            for (k, b) in ["x", "y", "z"].iter().enumerate() {
                let dd = eval(&f.diff(a).diff(b), &chart, &Params::new(), &p).unwrap();
                assert_relative_eq!(dd, j.d2(i, k), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn chart_validation() {
        assert!(Chart::new(&["x", "x"]).is_err());
        assert!(Chart::new::<&str>(&[]).is_err());
        assert!(Chart::new(&["exp"]).is_err());
        let c = Chart::xyz().extend(&["p0", "p1"]).unwrap();
        assert_eq!(c.dim(), 5);
        assert_eq!(c.index("p1"), Some(4));
    }

    #[test]
    fn bind_folds_parameters() {
        let e = parse_expr("a*x + b").unwrap();
        let bound = e.bind(&Params::from([("a", 2.0), ("b", 3.0)]));
        assert_eq!(bound.to_string(), "2*x + 3");
        assert!(!bound.depends_on("a"));
    }
}
