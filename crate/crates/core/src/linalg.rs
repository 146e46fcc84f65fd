//! Small dense matrix helpers.
//!
//! Determinants and adjugates are written by cofactor expansion over any
//! commutative ring (f64, jets, expressions), so exact derivative bookkeeping
//! survives inversion. Numeric rank goes through nalgebra's SVD.

use nalgebra::DMatrix;

use crate::fields::Expr;
use crate::jets::Jet;

pub trait Ring: Clone {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn r_add(&self, other: &Self) -> Self;
    fn r_sub(&self, other: &Self) -> Self;
    fn r_mul(&self, other: &Self) -> Self;
}

impl Ring for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn one_like(&self) -> Self {
        1.0
    }
    fn r_add(&self, other: &Self) -> Self {
        self + other
    }
    fn r_sub(&self, other: &Self) -> Self {
        self - other
    }
    fn r_mul(&self, other: &Self) -> Self {
        self * other
    }
}

impl Ring for Jet {
    fn zero_like(&self) -> Self {
        Jet::zero_like(self)
    }
    fn one_like(&self) -> Self {
        self.constant_like(1.0)
    }
    fn r_add(&self, other: &Self) -> Self {
        self + other
    }
    fn r_sub(&self, other: &Self) -> Self {
        self - other
    }
    fn r_mul(&self, other: &Self) -> Self {
        self * other
    }
}

impl Ring for Expr {
    fn zero_like(&self) -> Self {
        Expr::zero()
    }
    fn one_like(&self) -> Self {
        Expr::one()
    }
    fn r_add(&self, other: &Self) -> Self {
        self + other
    }
    fn r_sub(&self, other: &Self) -> Self {
        self - other
    }
    fn r_mul(&self, other: &Self) -> Self {
        self * other
    }
}

fn minor<T: Clone>(m: &[Vec<T>], row: usize, col: usize) -> Vec<Vec<T>> {
    m.iter()
        .enumerate()
        .filter(|(i, _)| *i != row)
        .map(|(_, r)| {
            r.iter()
                .enumerate()
                .filter(|(j, _)| *j != col)
                .map(|(_, v)| v.clone())
                .collect()
        })
        .collect()
}

/// Determinant by Laplace expansion along the first row (n ≤ 4 in practice).
pub fn det<T: Ring>(m: &[Vec<T>]) -> T {
    match m.len() {
        1 => m[0][0].clone(),
        2 => m[0][0].r_mul(&m[1][1]).r_sub(&m[0][1].r_mul(&m[1][0])),
        n => {
            let mut acc = m[0][0].zero_like();
            for j in 0..n {
                let term = m[0][j].r_mul(&det(&minor(m, 0, j)));
                acc = if j % 2 == 0 {
                    acc.r_add(&term)
                } else {
                    acc.r_sub(&term)
                };
            }
            acc
        }
    }
}

/// Adjugate matrix, so that `m · adj(m) = det(m) · I`.
pub fn adjugate<T: Ring>(m: &[Vec<T>]) -> Vec<Vec<T>> {
    let n = m.len();
    if n == 1 {
        return vec![vec![m[0][0].one_like()]];
    }
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    // transpose of the cofactor matrix
                    let c = det(&minor(m, j, i));
                    if (i + j) % 2 == 0 {
                        c
                    } else {
                        c.zero_like().r_sub(&c)
                    }
                })
                .collect()
        })
        .collect()
}

/// Inverse of a small f64 matrix by Gauss–Jordan elimination with partial
/// pivoting. On failure returns the (near-zero) determinant estimate.
pub fn inverse(m: &[Vec<f64>]) -> std::result::Result<Vec<Vec<f64>>, f64> {
    let n = m.len();
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |s, v| s.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if !(a[pivot][col].abs() > 1e-13 * scale) {
            return Err(det * a[pivot][col]);
        }
        if pivot != col {
            a.swap(pivot, col);
            inv.swap(pivot, col);
            det = -det;
        }
        let p = a[col][col];
        det *= p;
        for j in 0..n {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for i in 0..n {
            if i != col {
                let f = a[i][col];
                if f != 0.0 {
                    for j in 0..n {
                        a[i][j] -= f * a[col][j];
                        inv[i][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    Ok(inv)
}

/// Solves `m x = rhs` for small square systems.
pub fn solve(m: &[Vec<f64>], rhs: &[f64]) -> std::result::Result<Vec<f64>, f64> {
    let inv = inverse(m)?;
    Ok(inv
        .iter()
        .map(|row| row.iter().zip(rhs).map(|(a, b)| a * b).sum())
        .collect())
}

/// Numeric rank of the matrix whose rows are `rows`, after normalizing each
/// row to unit length. Zero rows do not count.
pub fn rank(rows: &[Vec<f64>], rel_tol: f64) -> usize {
    let rows: Vec<Vec<f64>> = rows
        .iter()
        .filter_map(|r| {
            let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            (n > 0.0).then(|| r.iter().map(|v| v / n).collect())
        })
        .collect();
    if rows.is_empty() {
        return 0;
    }
    let cols = rows[0].len();
    let m = DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]);
    let sv = m.singular_values();
    let top = sv.iter().fold(0.0f64, |s, v| s.max(*v));
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

/// Smallest singular value over the largest, of row-normalized `rows`.
pub fn conditioning(rows: &[Vec<f64>]) -> f64 {
    let rows: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let n = r.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            r.iter().map(|v| v / n).collect()
        })
        .collect();
    let cols = rows[0].len();
    let m = DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]);
    let sv = m.singular_values();
    let top = sv.iter().fold(0.0f64, |s, v| s.max(*v));
    let k = rows.len().min(cols);
    let mut sorted: Vec<f64> = sv.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted[k - 1] / top
}
