use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use super::Params;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    /// Folds the function on a constant when the result is admissible.
    fn fold(self, c: f64) -> Option<f64> {
        let v = match self {
            Func::Exp => c.exp(),
            Func::Ln if c > 0.0 => c.ln(),
            Func::Sin => c.sin(),
            Func::Cos => c.cos(),
            Func::Sqrt if c >= 0.0 => c.sqrt(),
            Func::Abs => c.abs(),
            _ => return None,
        };
        v.is_finite().then_some(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(Arc<str>),
    Neg(Expr),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Powi(Expr, i32),
    Func(Func, Expr),
}

/// Immutable, cheaply clonable expression tree.
///
/// Names are resolved only at evaluation time: a name declared in the chart
/// is a coordinate, any other name must be bound as a parameter.
#[derive(Clone, PartialEq)]
pub struct Expr(Arc<Node>);

impl Expr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    pub(crate) fn ptr(&self) -> *const Node {
        Arc::as_ptr(&self.0)
    }

    fn wrap(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    pub fn constant(c: f64) -> Expr {
        Expr::wrap(Node::Const(c))
    }

    pub fn zero() -> Expr {
        Expr::constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::constant(1.0)
    }

    pub fn var(name: &str) -> Expr {
        Expr::wrap(Node::Var(Arc::from(name)))
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn add(a: &Expr, b: &Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x + y),
            (Some(x), _) if x == 0.0 => b.clone(),
            (_, Some(y)) if y == 0.0 => a.clone(),
            _ => Expr::wrap(Node::Add(a.clone(), b.clone())),
        }
    }

    pub fn sub(a: &Expr, b: &Expr) -> Expr {
        if Arc::ptr_eq(&a.0, &b.0) {
            return Expr::zero();
        }
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x - y),
            (Some(x), _) if x == 0.0 => Expr::neg(b),
            (_, Some(y)) if y == 0.0 => a.clone(),
            _ => Expr::wrap(Node::Sub(a.clone(), b.clone())),
        }
    }

    pub fn mul(a: &Expr, b: &Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x * y),
            (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::zero(),
            (Some(x), _) if x == 1.0 => b.clone(),
            (_, Some(y)) if y == 1.0 => a.clone(),
            (Some(x), _) if x == -1.0 => Expr::neg(b),
            (_, Some(y)) if y == -1.0 => Expr::neg(a),
            _ => Expr::wrap(Node::Mul(a.clone(), b.clone())),
        }
    }

    pub fn div(a: &Expr, b: &Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != 0.0 => Expr::constant(x / y),
            (Some(x), _) if x == 0.0 => Expr::zero(),
            (_, Some(y)) if y == 1.0 => a.clone(),
            _ => Expr::wrap(Node::Div(a.clone(), b.clone())),
        }
    }

    pub fn neg(a: &Expr) -> Expr {
        match a.node() {
            Node::Const(c) => Expr::constant(-c),
            Node::Neg(inner) => inner.clone(),
            _ => Expr::wrap(Node::Neg(a.clone())),
        }
    }

    pub fn powi(&self, n: i32) -> Expr {
        match (n, self.as_const()) {
            (0, _) => Expr::one(),
            (1, _) => self.clone(),
            (_, Some(c)) if c != 0.0 || n > 0 => Expr::constant(c.powi(n)),
            _ => Expr::wrap(Node::Powi(self.clone(), n)),
        }
    }

    pub fn apply(&self, f: Func) -> Expr {
        if let Some(v) = self.as_const().and_then(|c| f.fold(c)) {
            return Expr::constant(v);
        }
        Expr::wrap(Node::Func(f, self.clone()))
    }

    pub fn exp(&self) -> Expr {
        self.apply(Func::Exp)
    }

    pub fn ln(&self) -> Expr {
        self.apply(Func::Ln)
    }

    pub fn sin(&self) -> Expr {
        self.apply(Func::Sin)
    }

    pub fn cos(&self) -> Expr {
        self.apply(Func::Cos)
    }

    pub fn sqrt(&self) -> Expr {
        self.apply(Func::Sqrt)
    }

    pub fn abs(&self) -> Expr {
        self.apply(Func::Abs)
    }

    /// Symbolic partial derivative with respect to the named symbol.
    pub fn diff(&self, name: &str) -> Expr {
        let mut memo = HashMap::new();
        self.diff_memo(name, &mut memo)
    }

    /// Mixed partial derivative, one symbol per differentiation.
    pub fn diff_many(&self, names: &[&str]) -> Expr {
        names.iter().fold(self.clone(), |e, n| e.diff(n))
    }

    fn diff_memo(&self, v: &str, memo: &mut HashMap<*const Node, Expr>) -> Expr {
        if let Some(d) = memo.get(&self.ptr()) {
            return d.clone();
        }
        let d = match self.node() {
            Node::Const(_) => Expr::zero(),
            Node::Var(n) => {
                if &**n == v {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Neg(a) => Expr::neg(&a.diff_memo(v, memo)),
            Node::Add(a, b) => Expr::add(&a.diff_memo(v, memo), &b.diff_memo(v, memo)),
            Node::Sub(a, b) => Expr::sub(&a.diff_memo(v, memo), &b.diff_memo(v, memo)),
            Node::Mul(a, b) => {
                let da = a.diff_memo(v, memo);
                let db = b.diff_memo(v, memo);
                Expr::add(&Expr::mul(&da, b), &Expr::mul(a, &db))
            }
            Node::Div(a, b) => {
                let da = a.diff_memo(v, memo);
                let db = b.diff_memo(v, memo);
                let first = Expr::div(&da, b);
                if db.is_zero() {
                    first
                } else {
                    Expr::sub(&first, &Expr::div(&Expr::mul(a, &db), &b.powi(2)))
                }
            }
            Node::Powi(a, n) => {
                let da = a.diff_memo(v, memo);
                Expr::mul(
                    &Expr::mul(&Expr::constant(*n as f64), &a.powi(n - 1)),
                    &da,
                )
            }
            Node::Func(f, a) => {
                let da = a.diff_memo(v, memo);
                if da.is_zero() {
                    Expr::zero()
                } else {
                    let outer = match f {
                        Func::Exp => self.clone(),
                        Func::Ln => Expr::div(&Expr::one(), a),
                        Func::Sin => a.cos(),
                        Func::Cos => Expr::neg(&a.sin()),
                        Func::Sqrt => Expr::div(&Expr::constant(0.5), self),
                        Func::Abs => Expr::div(a, self),
                    };
                    Expr::mul(&outer, &da)
                }
            }
        };
        memo.insert(self.ptr(), d.clone());
        d
    }

    /// Replaces named symbols by expressions, refolding constants.
    pub fn subst(&self, map: &HashMap<String, Expr>) -> Expr {
        let mut memo = HashMap::new();
        self.subst_memo(map, &mut memo)
    }

    fn subst_memo(
        &self,
        map: &HashMap<String, Expr>,
        memo: &mut HashMap<*const Node, Expr>,
    ) -> Expr {
        if let Some(e) = memo.get(&self.ptr()) {
            return e.clone();
        }
        let out = match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(n) => map.get(&**n).cloned().unwrap_or_else(|| self.clone()),
            Node::Neg(a) => Expr::neg(&a.subst_memo(map, memo)),
            Node::Add(a, b) => Expr::add(&a.subst_memo(map, memo), &b.subst_memo(map, memo)),
            Node::Sub(a, b) => Expr::sub(&a.subst_memo(map, memo), &b.subst_memo(map, memo)),
            Node::Mul(a, b) => Expr::mul(&a.subst_memo(map, memo), &b.subst_memo(map, memo)),
            Node::Div(a, b) => Expr::div(&a.subst_memo(map, memo), &b.subst_memo(map, memo)),
            Node::Powi(a, n) => a.subst_memo(map, memo).powi(*n),
            Node::Func(f, a) => a.subst_memo(map, memo).apply(*f),
        };
        memo.insert(self.ptr(), out.clone());
        out
    }

    /// Substitutes parameter values as constants.
    pub fn bind(&self, params: &Params) -> Expr {
        if params.is_empty() {
            return self.clone();
        }
        let map = params
            .iter()
            .map(|(k, v)| (k.to_string(), Expr::constant(v)))
            .collect();
        self.subst(&map)
    }

    pub fn rename(&self, pairs: &[(&str, &str)]) -> Expr {
        let map = pairs
            .iter()
            .map(|(from, to)| (from.to_string(), Expr::var(to)))
            .collect();
        self.subst(&map)
    }

    pub fn free_symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.ptr()) {
                continue;
            }
            match e.node() {
                Node::Const(_) => {}
                Node::Var(n) => {
                    out.insert(n.to_string());
                }
                Node::Neg(a) | Node::Powi(a, _) | Node::Func(_, a) => stack.push(a.clone()),
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                    stack.push(a.clone());
                    stack.push(b.clone());
                }
            }
        }
        out
    }

    pub fn depends_on(&self, name: &str) -> bool {
        self.free_symbols().contains(name)
    }

    fn precedence(&self) -> u8 {
        match self.node() {
            Node::Add(..) | Node::Sub(..) => 1,
            Node::Mul(..) | Node::Div(..) => 2,
            Node::Neg(_) => 3,
            Node::Const(c) if *c < 0.0 => 3,
            Node::Powi(..) => 4,
            _ => 5,
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if e.precedence() < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => {
                if *c < 0.0 {
                    write!(f, "-{}", -c)
                } else {
                    write!(f, "{c}")
                }
            }
            Node::Var(n) => write!(f, "{n}"),
            Node::Neg(a) => {
                write!(f, "-")?;
                write_operand(f, a, 4)
            }
            Node::Add(a, b) => {
                write_operand(f, a, 1)?;
                write!(f, " + ")?;
                write_operand(f, b, 2)
            }
            Node::Sub(a, b) => {
                write_operand(f, a, 1)?;
                write!(f, " - ")?;
                write_operand(f, b, 2)
            }
            Node::Mul(a, b) => {
                write_operand(f, a, 2)?;
                write!(f, "*")?;
                write_operand(f, b, 3)
            }
            Node::Div(a, b) => {
                write_operand(f, a, 2)?;
                write!(f, "/")?;
                write_operand(f, b, 4)
            }
            Node::Powi(a, n) => {
                write_operand(f, a, 5)?;
                if *n < 0 {
                    write!(f, "^({n})")
                } else {
                    write!(f, "^{n}")
                }
            }
            Node::Func(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

macro_rules! expr_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::$method(self, rhs)
            }
        }
        impl $trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$method(&self, &rhs)
            }
        }
        impl $trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::$method(&self, rhs)
            }
        }
        impl $trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$method(self, &rhs)
            }
        }
        impl $trait<f64> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::$method(self, &Expr::constant(rhs))
            }
        }
        impl $trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::$method(&self, &Expr::constant(rhs))
            }
        }
        impl $trait<&Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::$method(&Expr::constant(self), rhs)
            }
        }
        impl $trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$method(&Expr::constant(self), &rhs)
            }
        }
    };
}

expr_binop!(Add, add);
expr_binop!(Sub, sub);
expr_binop!(Mul, mul);
expr_binop!(Div, div);

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Expr {
        Expr::constant(c)
    }
}
