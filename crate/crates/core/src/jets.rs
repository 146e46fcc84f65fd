//! Truncated multivariate Taylor series ("jets").
//!
//! A [`Jet`] stores the normalized Taylor coefficients `c_α = ∂^α f(p) / α!`
//! of a scalar function in `n` variables around a base point `p`, for every
//! multi-index with `|α| ≤ K`. Coefficients are laid out densely in graded
//! lexicographic order, so the jet of order `K - 1` is a prefix of the jet of
//! order `K`, and the first `n + 1` slots are the value and the gradient.
//!
//! All operations are exact on the truncated series (up to floating point):
//! products use a precomputed multiplication table, and elementary functions
//! are applied by composing their one-variable Taylor series with the
//! nilpotent part of the argument.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

/// Highest supported truncation order.
pub const MAX_ORDER: usize = 12;
/// Highest supported number of variables.
pub const MAX_DIM: usize = 10;
/// Smallest admissible constant-term magnitude for division, `ln` and friends.
pub const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("jet shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("axis {axis} out of range for a jet in {dim} variables")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("division by a jet with constant term {value:e}")]
    DegenerateDivision { value: f64 },
    #[error("{func} is not admissible at constant term {value:e}")]
    Domain { func: &'static str, value: f64 },
    #[error("cannot differentiate an order-0 jet")]
    OrderExhausted,
    #[error("jet order {order} in {dim} variables is not supported")]
    Unsupported { dim: usize, order: usize },
    #[error("singular Jacobian while inverting a jet map (|det| = {det:e})")]
    SingularJacobian { det: f64 },
}

pub type Result<T> = std::result::Result<T, JetError>;

/// Exponent tuple of a monomial.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: impl Into<Vec<u32>>) -> Self {
        MultiIndex(exponents.into())
    }

    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut e = vec![0; dim];
        e[axis] = 1;
        MultiIndex(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    /// `α! = Π α_i!`
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&e| factorial(e as usize)).product()
    }

    fn bumped(&self, axis: usize) -> Self {
        let mut e = self.0.clone();
        e[axis] += 1;
        MultiIndex(e)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Number of coefficients of a jet: `C(n + K, K)`.
pub fn coefficient_count(dim: usize, order: usize) -> usize {
    let mut c: usize = 1;
    for i in 1..=order {
        c = c * (dim + i) / i;
    }
    c
}

/// Index bookkeeping shared by every jet of a given `(dim, order)`.
#[derive(Debug)]
pub struct Layout {
    dim: usize,
    order: usize,
    indices: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
    /// For each left factor `i`: the pairs `(j, k)` with `α_i + α_j = α_k`.
    mul_rows: Vec<Vec<(u32, u32)>>,
    /// `raise[a][k]` is the slot of `α_k + e_a`, when `|α_k| < order`.
    raise: Vec<Vec<usize>>,
    /// `(axis, slot of α - e_axis)` for every non-constant slot.
    lower: Vec<(usize, usize)>,
}

impl Layout {
    fn build(dim: usize, order: usize) -> Layout {
        let mut indices = Vec::with_capacity(coefficient_count(dim, order));
        for degree in 0..=order {
            let mut current = vec![0u32; dim];
            push_degree(&mut indices, &mut current, 0, degree as u32);
        }
        let lookup: HashMap<MultiIndex, usize> = indices
            .iter()
            .enumerate()
            .map(|(k, a)| (a.clone(), k))
            .collect();

        let mut mul_rows = Vec::with_capacity(indices.len());
        for a in &indices {
            let mut row = Vec::new();
            let room = order - a.degree();
            for (j, b) in indices.iter().enumerate() {
                if b.degree() > room {
                    break;
                }
                let sum: Vec<u32> = a.0.iter().zip(&b.0).map(|(x, y)| x + y).collect();
                row.push((j as u32, lookup[&MultiIndex(sum)] as u32));
            }
            mul_rows.push(row);
        }

        let lower_len = if order == 0 {
            0
        } else {
            coefficient_count(dim, order - 1)
        };
        let raise = (0..dim)
            .map(|axis| {
                indices[..lower_len]
                    .iter()
                    .map(|a| lookup[&a.bumped(axis)])
                    .collect()
            })
            .collect();

        let lower = indices
            .iter()
            .map(|a| match a.0.iter().position(|&e| e > 0) {
                Some(axis) => {
                    let mut e = a.0.clone();
                    e[axis] -= 1;
                    (axis, lookup[&MultiIndex(e)])
                }
                None => (usize::MAX, usize::MAX),
            })
            .collect();

        Layout {
            dim,
            order,
            indices,
            lookup,
            mul_rows,
            raise,
            lower,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn slot(&self, alpha: &MultiIndex) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }
}

// Enumerates exponent vectors of a fixed degree, first axis descending.
fn push_degree(out: &mut Vec<MultiIndex>, current: &mut [u32], axis: usize, remaining: u32) {
    if axis + 1 == current.len() {
        current[axis] = remaining;
        out.push(MultiIndex(current.to_vec()));
        current[axis] = 0;
        return;
    }
    if current.is_empty() {
        out.push(MultiIndex(Vec::new()));
        return;
    }
    for e in (0..=remaining).rev() {
        current[axis] = e;
        push_degree(out, current, axis + 1, remaining - e);
    }
    current[axis] = 0;
}

/// Shared layout for `(dim, order)`; built once per process.
pub fn layout(dim: usize, order: usize) -> Result<Arc<Layout>> {
    if dim == 0 || dim > MAX_DIM || order > MAX_ORDER {
        return Err(JetError::Unsupported { dim, order });
    }
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Layout>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("jet layout cache poisoned");
    Ok(guard
        .entry((dim, order))
        .or_insert_with(|| Arc::new(Layout::build(dim, order)))
        .clone())
}

/// Truncated Taylor expansion of a scalar field at a point.
#[derive(Clone)]
pub struct Jet {
    layout: Arc<Layout>,
    base: Arc<[f64]>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("dim", &self.dim())
            .field("order", &self.order())
            .field("base", &&self.base[..])
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl Jet {
    pub fn constant(value: f64, base: &[f64], order: usize) -> Result<Jet> {
        let layout = layout(base.len(), order)?;
        let mut coeffs = vec![0.0; layout.len()];
        coeffs[0] = value;
        Ok(Jet {
            layout,
            base: base.into(),
            coeffs,
        })
    }

    /// The coordinate function `x_axis` expanded at `point`.
    pub fn coordinate(axis: usize, point: &[f64], order: usize) -> Result<Jet> {
        if axis >= point.len() {
            return Err(JetError::AxisOutOfRange {
                axis,
                dim: point.len(),
            });
        }
        let mut jet = Jet::constant(point[axis], point, order)?;
        if order >= 1 {
            jet.coeffs[1 + axis] = 1.0;
        }
        Ok(jet)
    }

    /// All coordinate functions at `point`, sharing one base allocation.
    pub fn coordinates(point: &[f64], order: usize) -> Result<Vec<Jet>> {
        let layout = layout(point.len(), order)?;
        let base: Arc<[f64]> = point.into();
        Ok((0..point.len())
            .map(|axis| {
                let mut coeffs = vec![0.0; layout.len()];
                coeffs[0] = point[axis];
                if order >= 1 {
                    coeffs[1 + axis] = 1.0;
                }
                Jet {
                    layout: layout.clone(),
                    base: base.clone(),
                    coeffs,
                }
            })
            .collect())
    }

    /// Builds a jet from normalized coefficients in layout order.
    pub fn from_coeffs(base: &[f64], order: usize, coeffs: Vec<f64>) -> Result<Jet> {
        let layout = layout(base.len(), order)?;
        if coeffs.len() != layout.len() {
            return Err(JetError::ShapeMismatch(format!(
                "expected {} coefficients, got {}",
                layout.len(),
                coeffs.len()
            )));
        }
        Ok(Jet {
            layout,
            base: base.into(),
            coeffs,
        })
    }

    pub fn dim(&self) -> usize {
        self.layout.dim
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn base_point(&self) -> &[f64] {
        &self.base
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Normalized coefficient `c_α`, or `None` when `|α| > K`.
    pub fn coeff(&self, alpha: &MultiIndex) -> Option<f64> {
        self.layout.slot(alpha).map(|k| self.coeffs[k])
    }

    /// The partial derivative `∂^α f(p) = c_α · α!`.
    pub fn derivative(&self, exponents: &[u32]) -> Option<f64> {
        let alpha = MultiIndex::new(exponents.to_vec());
        self.coeff(&alpha).map(|c| c * alpha.factorial())
    }

    /// First partial derivative along `axis` at the base point.
    pub fn d(&self, axis: usize) -> f64 {
        debug_assert!(self.order() >= 1);
        self.coeffs[1 + axis]
    }

    /// Second partial derivative `∂_i ∂_j f` at the base point.
    pub fn d2(&self, i: usize, j: usize) -> f64 {
        let mut e = vec![0u32; self.dim()];
        e[i] += 1;
        e[j] += 1;
        self.derivative(&e).expect("jet order below 2")
    }

    pub fn gradient(&self) -> Vec<f64> {
        (0..self.dim()).map(|a| self.d(a)).collect()
    }

    /// The jet of `∂f/∂x_axis`, one order lower.
    pub fn partial(&self, axis: usize) -> Result<Jet> {
        if axis >= self.dim() {
            return Err(JetError::AxisOutOfRange {
                axis,
                dim: self.dim(),
            });
        }
        if self.order() == 0 {
            return Err(JetError::OrderExhausted);
        }
        let lower = layout(self.dim(), self.order() - 1)?;
        let coeffs = self.layout.raise[axis]
            .iter()
            .enumerate()
            .map(|(k, &up)| {
                (self.layout.indices[k].0[axis] as f64 + 1.0) * self.coeffs[up]
            })
            .collect();
        Ok(Jet {
            layout: lower,
            base: self.base.clone(),
            coeffs,
        })
    }

    /// Drops all coefficients above `order` (no-op when already lower).
    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order() {
            return self.clone();
        }
        let layout = layout(self.dim(), order).expect("smaller layout always valid");
        let coeffs = self.coeffs[..layout.len()].to_vec();
        Jet {
            layout,
            base: self.base.clone(),
            coeffs,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    fn check_compatible(&self, other: &Jet) -> Result<()> {
        if !Arc::ptr_eq(&self.layout, &other.layout) {
            return Err(JetError::ShapeMismatch(format!(
                "(dim {}, order {}) vs (dim {}, order {})",
                self.dim(),
                self.order(),
                other.dim(),
                other.order()
            )));
        }
        if !Arc::ptr_eq(&self.base, &other.base) && self.base[..] != other.base[..] {
            return Err(JetError::ShapeMismatch("different base points".into()));
        }
        Ok(())
    }

    fn with_coeffs(&self, coeffs: Vec<f64>) -> Jet {
        Jet {
            layout: self.layout.clone(),
            base: self.base.clone(),
            coeffs,
        }
    }

    pub fn zero_like(&self) -> Jet {
        self.constant_like(0.0)
    }

    pub fn constant_like(&self, value: f64) -> Jet {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        coeffs[0] = value;
        self.with_coeffs(coeffs)
    }

    pub fn try_add(&self, other: &Jet) -> Result<Jet> {
        self.check_compatible(other)?;
        Ok(self.with_coeffs(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }

    pub fn try_sub(&self, other: &Jet) -> Result<Jet> {
        self.check_compatible(other)?;
        Ok(self.with_coeffs(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        ))
    }

    pub fn try_mul(&self, other: &Jet) -> Result<Jet> {
        self.check_compatible(other)?;
        let mut out = vec![0.0; self.coeffs.len()];
        for (i, row) in self.layout.mul_rows.iter().enumerate() {
            let a = self.coeffs[i];
            if a == 0.0 {
                continue;
            }
            for &(j, k) in row {
                out[k as usize] += a * other.coeffs[j as usize];
            }
        }
        Ok(self.with_coeffs(out))
    }

    pub fn try_div(&self, other: &Jet) -> Result<Jet> {
        self.check_compatible(other)?;
        self.try_mul(&other.recip()?)
    }

    pub fn scale(&self, s: f64) -> Jet {
        self.with_coeffs(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut coeffs = self.coeffs.clone();
        coeffs[0] += s;
        self.with_coeffs(coeffs)
    }

    /// `Σ_k d_k (f - f(p))^k`, i.e. the composition of a one-variable series
    /// with this jet. `d` must hold at least `order + 1` coefficients.
    fn compose_series(&self, d: &[f64]) -> Jet {
        let k_max = self.order();
        let mut nil = self.clone();
        nil.coeffs[0] = 0.0;
        let mut acc = self.constant_like(d[k_max]);
        for k in (0..k_max).rev() {
            acc = (&acc * &nil).add_scalar(d[k]);
        }
        acc
    }

    pub fn recip(&self) -> Result<Jet> {
        let a0 = self.value();
        if !(a0.abs() >= DEGENERACY_TOL) {
            return Err(JetError::DegenerateDivision { value: a0 });
        }
        let d: Vec<f64> = (0..=self.order())
            .map(|k| (-1f64).powi(k as i32) / a0.powi(k as i32 + 1))
            .collect();
        Ok(self.compose_series(&d))
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let d: Vec<f64> = (0..=self.order()).map(|k| e / factorial(k)).collect();
        self.compose_series(&d)
    }

    /// Natural logarithm. Negative constant terms use the real branch
    /// `ln|f|`, whose derivatives coincide with those of `ln f`.
    pub fn ln(&self) -> Result<Jet> {
        let a0 = self.value();
        if !(a0.abs() >= DEGENERACY_TOL) {
            return Err(JetError::Domain {
                func: "ln",
                value: a0,
            });
        }
        let mut d = vec![a0.abs().ln()];
        for k in 1..=self.order() {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            d.push(sign / (k as f64 * a0.powi(k as i32)));
        }
        Ok(self.compose_series(&d))
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let d: Vec<f64> = (0..=self.order())
            .map(|k| cycle[k % 4] / factorial(k))
            .collect();
        self.compose_series(&d)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let d: Vec<f64> = (0..=self.order())
            .map(|k| cycle[k % 4] / factorial(k))
            .collect();
        self.compose_series(&d)
    }

    pub fn sqrt(&self) -> Result<Jet> {
        let a0 = self.value();
        if !(a0 >= DEGENERACY_TOL) {
            return Err(JetError::Domain {
                func: "sqrt",
                value: a0,
            });
        }
        // binomial series of (a0 + t)^(1/2)
        let mut d = vec![a0.sqrt()];
        let mut coef = a0.sqrt();
        for k in 1..=self.order() {
            coef *= (0.5 - (k as f64 - 1.0)) / (k as f64 * a0);
            d.push(coef);
        }
        Ok(self.compose_series(&d))
    }

    /// `|f|`; smooth only away from zero.
    pub fn abs(&self) -> Result<Jet> {
        let a0 = self.value();
        if !(a0.abs() >= DEGENERACY_TOL) {
            return Err(JetError::Domain {
                func: "abs",
                value: a0,
            });
        }
        Ok(if a0 < 0.0 { -self } else { self.clone() })
    }

    pub fn powi(&self, n: i32) -> Result<Jet> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut result = self.constant_like(1.0);
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        Ok(result)
    }

    /// Composition `self ∘ inner`: `self` is a jet in `m` variables at `q`,
    /// each `inner[i]` a jet in `n` variables whose value is `q_i`.
    /// The result has order `min(self.order, inner.order)`.
    pub fn compose(&self, inner: &[Jet]) -> Result<Jet> {
        if inner.len() != self.dim() {
            return Err(JetError::ShapeMismatch(format!(
                "composition needs {} inner jets, got {}",
                self.dim(),
                inner.len()
            )));
        }
        let order = self.order().min(inner[0].order());
        let mut deltas = Vec::with_capacity(inner.len());
        for (i, g) in inner.iter().enumerate() {
            inner[0].check_compatible(g)?;
            let gap = g.value() - self.base[i];
            if gap.abs() > 1e-9 * (1.0 + self.base[i].abs()) {
                return Err(JetError::ShapeMismatch(format!(
                    "inner jet {i} has value {} but the outer base is {}",
                    g.value(),
                    self.base[i]
                )));
            }
            let mut t = g.truncate(order);
            t.coeffs[0] = 0.0;
            deltas.push(t);
        }
        let outer = self.truncate(order);
        let mut monomials: Vec<Jet> = Vec::with_capacity(outer.coeffs.len());
        let mut acc = deltas[0].constant_like(outer.coeffs[0]);
        monomials.push(deltas[0].constant_like(1.0));
        for k in 1..outer.coeffs.len() {
            let (axis, parent) = outer.layout.lower[k];
            let m = &monomials[parent] * &deltas[axis];
            if outer.coeffs[k] != 0.0 {
                acc = &acc + &m.scale(outer.coeffs[k]);
            }
            monomials.push(m);
        }
        Ok(acc)
    }
}

/// Inverts a square jet map `m ↦ u = F(m)` about its base point.
///
/// `forward[i]` are jets in `n` variables at `m*`; the result are jets in
/// `n` variables at `u* = F(m*)` of the same order with `F ∘ G = id`.
pub fn invert_map(forward: &[Jet]) -> Result<Vec<Jet>> {
    let n = forward.len();
    if n == 0 || forward[0].dim() != n {
        return Err(JetError::ShapeMismatch(
            "jet map inversion needs a square map".into(),
        ));
    }
    let order = forward[0].order();
    if order == 0 {
        return Err(JetError::OrderExhausted);
    }
    let jac: Vec<Vec<f64>> = forward.iter().map(|f| f.gradient()).collect();
    let jinv = crate::linalg::inverse(&jac).map_err(|det| JetError::SingularJacobian { det })?;
    let target: Vec<f64> = forward.iter().map(|f| f.value()).collect();
    let start = forward[0].base_point().to_vec();
    let ids = Jet::coordinates(&target, order)?;
    let shifted: Vec<Jet> = ids
        .iter()
        .zip(&target)
        .map(|(u, t)| u.add_scalar(-t))
        .collect();

    let apply = |vecs: &[Jet]| -> Vec<Jet> {
        (0..n)
            .map(|i| {
                let mut acc = vecs[0].scale(jinv[i][0]);
                for j in 1..n {
                    acc = &acc + &vecs[j].scale(jinv[i][j]);
                }
                acc
            })
            .collect()
    };

    let mut g: Vec<Jet> = apply(&shifted)
        .into_iter()
        .zip(&start)
        .map(|(j, s)| j.add_scalar(*s))
        .collect();
    for _ in 1..order {
        let residual: Vec<Jet> = forward
            .iter()
            .zip(&ids)
            .map(|(f, u)| f.compose(&g).map(|fg| &fg - u))
            .collect::<Result<_>>()?;
        let correction = apply(&residual);
        g = g.iter().zip(&correction).map(|(gi, ci)| gi - ci).collect();
    }
    Ok(g)
}

macro_rules! binop {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl $trait<&Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                self.$checked(rhs).expect("incompatible jets")
            }
        }
        impl $trait<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$checked(&rhs).expect("incompatible jets")
            }
        }
    };
}

binop!(Add, add, try_add);
binop!(Sub, sub, try_sub);
binop!(Mul, mul, try_mul);

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TranscendOp {
    Exp,
    Ln,
    IntPow(i32),
}

pub fn jet_arith(a: &Jet, b: &Jet, op: ArithOp) -> Result<Jet> {
    match op {
        ArithOp::Add => a.try_add(b),
        ArithOp::Sub => a.try_sub(b),
        ArithOp::Mul => a.try_mul(b),
        ArithOp::Div => a.try_div(b),
    }
}

pub fn jet_transcend(a: &Jet, op: TranscendOp) -> Result<Jet> {
    match op {
        TranscendOp::Exp => Ok(a.exp()),
        TranscendOp::Ln => a.ln(),
        TranscendOp::IntPow(n) => a.powi(n),
    }
}
