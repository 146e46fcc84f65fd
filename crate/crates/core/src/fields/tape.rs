//! Flattened evaluation tapes for expression trees.
//!
//! Shared subtrees (same allocation) are evaluated once. The same tape runs
//! on plain floats or on jets.

use std::collections::HashMap;

use super::expr::{Expr, Func, Node};
use super::{Chart, Params};
use crate::error::{Error, Result};
use crate::jets::{Jet, JetError, DEGENERACY_TOL};

#[derive(Debug, Clone)]
enum Op {
    Input(usize),
    Const(f64),
    Neg(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Scale(usize, f64),
    Shift(usize, f64),
    Powi(usize, i32),
    Func(Func, usize),
}

/// Values a tape can run on.
pub trait TapeValue: Sized + Clone {
    fn lift(c: f64, like: &Self) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> std::result::Result<Self, JetError>;
    fn neg(&self) -> Self;
    fn scale(&self, c: f64) -> Self;
    fn shift(&self, c: f64) -> Self;
    fn powi(&self, n: i32) -> std::result::Result<Self, JetError>;
    fn func(&self, f: Func) -> std::result::Result<Self, JetError>;
}

impl TapeValue for f64 {
    fn lift(c: f64, _: &Self) -> Self {
        c
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> std::result::Result<Self, JetError> {
        if !(o.abs() >= DEGENERACY_TOL) {
            return Err(JetError::DegenerateDivision { value: *o });
        }
        Ok(self / o)
    }
    fn neg(&self) -> Self {
        -self
    }
    fn scale(&self, c: f64) -> Self {
        self * c
    }
    fn shift(&self, c: f64) -> Self {
        self + c
    }
    fn powi(&self, n: i32) -> std::result::Result<Self, JetError> {
        if n < 0 && !(self.abs() >= DEGENERACY_TOL) {
            return Err(JetError::DegenerateDivision { value: *self });
        }
        Ok(f64::powi(*self, n))
    }
    fn func(&self, f: Func) -> std::result::Result<Self, JetError> {
        let x = *self;
        Ok(match f {
            Func::Exp => x.exp(),
            Func::Ln => {
                if !(x.abs() >= DEGENERACY_TOL) {
                    return Err(JetError::Domain {
                        func: "ln",
                        value: x,
                    });
                }
                x.abs().ln()
            }
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Sqrt => {
                if !(x >= 0.0) {
                    return Err(JetError::Domain {
                        func: "sqrt",
                        value: x,
                    });
                }
                x.sqrt()
            }
            Func::Abs => x.abs(),
        })
    }
}

impl TapeValue for Jet {
    fn lift(c: f64, like: &Self) -> Self {
        like.constant_like(c)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> std::result::Result<Self, JetError> {
        self.try_div(o)
    }
    fn neg(&self) -> Self {
        -self
    }
    fn scale(&self, c: f64) -> Self {
        Jet::scale(self, c)
    }
    fn shift(&self, c: f64) -> Self {
        self.add_scalar(c)
    }
    fn powi(&self, n: i32) -> std::result::Result<Self, JetError> {
        Jet::powi(self, n)
    }
    fn func(&self, f: Func) -> std::result::Result<Self, JetError> {
        match f {
            Func::Exp => Ok(self.exp()),
            Func::Ln => self.ln(),
            Func::Sin => Ok(self.sin()),
            Func::Cos => Ok(self.cos()),
            Func::Sqrt => self.sqrt(),
            Func::Abs => self.abs(),
        }
    }
}

/// Compiled, chart-resolved form of one or more expressions.
#[derive(Debug, Clone)]
pub struct Tape {
    ops: Vec<Op>,
    outputs: Vec<usize>,
    dim: usize,
}

impl Tape {
    pub fn compile(exprs: &[Expr], chart: &Chart, params: &Params) -> Result<Tape> {
        let mut b = Builder {
            ops: Vec::new(),
            memo: HashMap::new(),
            chart,
            params,
        };
        let outputs = exprs
            .iter()
            .map(|e| b.emit(e))
            .collect::<Result<Vec<_>>>()?;
        Ok(Tape {
            ops: b.ops,
            outputs,
            dim: chart.dim(),
        })
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn eval<T: TapeValue>(&self, inputs: &[T]) -> Result<Vec<T>> {
        if inputs.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "expected a point with {} coordinates, got {}",
                self.dim,
                inputs.len()
            )));
        }
        let like = &inputs[0];
        let mut slots: Vec<T> = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let v = match *op {
                Op::Input(i) => inputs[i].clone(),
                Op::Const(c) => T::lift(c, like),
                Op::Neg(a) => slots[a].neg(),
                Op::Add(a, b) => slots[a].add(&slots[b]),
                Op::Sub(a, b) => slots[a].sub(&slots[b]),
                Op::Mul(a, b) => slots[a].mul(&slots[b]),
                Op::Div(a, b) => slots[a].div(&slots[b])?,
                Op::Scale(a, c) => slots[a].scale(c),
                Op::Shift(a, c) => slots[a].shift(c),
                Op::Powi(a, n) => slots[a].powi(n)?,
                Op::Func(f, a) => slots[a].func(f)?,
            };
            slots.push(v);
        }
        Ok(self.outputs.iter().map(|&k| slots[k].clone()).collect())
    }

    pub fn eval_f64(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.eval(p)
    }

    pub fn eval_jets(&self, p: &[f64], order: usize) -> Result<Vec<Jet>> {
        let inputs = Jet::coordinates(p, order)?;
        self.eval(&inputs)
    }
}

struct Builder<'a> {
    ops: Vec<Op>,
    memo: HashMap<*const Node, usize>,
    chart: &'a Chart,
    params: &'a Params,
}

impl Builder<'_> {
    fn push(&mut self, op: Op) -> usize {
        self.ops.push(op);
        self.ops.len() - 1
    }

    fn constant_of(&self, e: &Expr, slot: usize) -> Option<f64> {
        e.as_const().or(match self.ops[slot] {
            Op::Const(c) => Some(c),
            _ => None,
        })
    }

    fn emit(&mut self, e: &Expr) -> Result<usize> {
        if let Some(&k) = self.memo.get(&e.ptr()) {
            return Ok(k);
        }
        let k = match e.node() {
            Node::Const(c) => self.push(Op::Const(*c)),
            Node::Var(name) => {
                if let Some(i) = self.chart.index(name) {
                    self.push(Op::Input(i))
                } else if let Some(v) = self.params.get(name) {
                    self.push(Op::Const(v))
                } else {
                    return Err(Error::UnboundParameter(name.to_string()));
                }
            }
            Node::Neg(a) => {
                let a = self.emit(a)?;
                self.push(Op::Neg(a))
            }
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                let (ka, kb) = (self.emit(a)?, self.emit(b)?);
                let (ca, cb) = (self.constant_of(a, ka), self.constant_of(b, kb));
                match (e.node(), ca, cb) {
                    (Node::Add(..), Some(c), None) => self.push(Op::Shift(kb, c)),
                    (Node::Add(..), _, Some(c)) => self.push(Op::Shift(ka, c)),
                    (Node::Add(..), ..) => self.push(Op::Add(ka, kb)),
                    (Node::Sub(..), _, Some(c)) => self.push(Op::Shift(ka, -c)),
                    (Node::Sub(..), ..) => self.push(Op::Sub(ka, kb)),
                    (Node::Mul(..), Some(c), None) => self.push(Op::Scale(kb, c)),
                    (Node::Mul(..), _, Some(c)) => self.push(Op::Scale(ka, c)),
                    (Node::Mul(..), ..) => self.push(Op::Mul(ka, kb)),
                    (Node::Div(..), _, Some(c)) if c.abs() >= DEGENERACY_TOL => {
                        self.push(Op::Scale(ka, 1.0 / c))
                    }
                    _ => self.push(Op::Div(ka, kb)),
                }
            }
            Node::Powi(a, n) => {
                let a = self.emit(a)?;
                self.push(Op::Powi(a, *n))
            }
            Node::Func(f, a) => {
                let a = self.emit(a)?;
                self.push(Op::Func(*f, a))
            }
        };
        self.memo.insert(e.ptr(), k);
        Ok(k)
    }
}
