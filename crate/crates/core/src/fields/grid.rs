use std::fmt::Write as _;

use super::{Chart, Expr, Params, Tape};
use crate::error::{Error, Result};

/// Node values on a uniform tensor-product grid, row-major (last axis fastest).
///
/// Node `i` along an axis sits at `origin + i * spacing`. A periodic axis
/// with `n` nodes has period `n * spacing`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    chart: Chart,
    origin: Vec<f64>,
    spacing: Vec<f64>,
    shape: Vec<usize>,
    periodic: Vec<bool>,
    values: Vec<f64>,
}

pub const MIN_FD_NODES: usize = 5;

impl GridField {
    pub fn new(
        chart: Chart,
        origin: Vec<f64>,
        spacing: Vec<f64>,
        shape: Vec<usize>,
        periodic: Vec<bool>,
        values: Vec<f64>,
    ) -> Result<GridField> {
        let d = chart.dim();
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidChart(format!(
                "grids are 1-, 2- or 3-dimensional, chart {chart} has {d} axes"
            )));
        }
        if origin.len() != d || spacing.len() != d || shape.len() != d || periodic.len() != d {
            return Err(Error::InvalidInput("grid metadata length mismatch".into()));
        }
        if let Some(h) = spacing.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidInput(format!("grid spacing {h} must be positive")));
        }
        if shape.contains(&0) {
            return Err(Error::InvalidInput("grid with an empty axis".into()));
        }
        let count: usize = shape.iter().product();
        if values.len() != count {
            return Err(Error::InvalidInput(format!(
                "grid has {} values, shape needs {count}",
                values.len()
            )));
        }
        Ok(GridField {
            chart,
            origin,
            spacing,
            shape,
            periodic,
            values,
        })
    }

    /// Samples `f` at every node.
    pub fn sample(
        f: &Expr,
        chart: &Chart,
        params: &Params,
        origin: &[f64],
        spacing: &[f64],
        shape: &[usize],
        periodic: &[bool],
    ) -> Result<GridField> {
        let tape = Tape::compile(std::slice::from_ref(f), chart, params)?;
        let mut g = GridField::new(
            chart.clone(),
            origin.to_vec(),
            spacing.to_vec(),
            shape.to_vec(),
            periodic.to_vec(),
            vec![0.0; shape.iter().product()],
        )?;
        for k in 0..g.values.len() {
            let p = g.point(k);
            g.values[k] = tape.eval_f64(&p)?[0];
        }
        Ok(g)
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.shape.len()];
        for a in (0..self.shape.len().saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.shape[a + 1];
        }
        s
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut rest = flat;
        let mut idx = vec![0; self.shape.len()];
        for a in (0..self.shape.len()).rev() {
            idx[a] = rest % self.shape[a];
            rest /= self.shape[a];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(self.strides()).map(|(i, s)| i * s).sum()
    }

    /// Coordinates of node `flat`.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.origin[a] + i as f64 * self.spacing[a])
            .collect()
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[self.flat_index(idx)]
    }

    /// True when the node is at least `margin` nodes away from every
    /// non-periodic boundary.
    pub fn is_interior(&self, flat: usize, margin: usize) -> bool {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .all(|(a, &i)| self.periodic[a] || (i >= margin && i + margin < self.shape[a]))
    }

    pub fn with_values(&self, values: Vec<f64>) -> GridField {
        assert_eq!(values.len(), self.values.len());
        GridField {
            values,
            ..self.clone()
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    // Applies a 1-D kernel along every grid line parallel to `axis`.
    fn along_axis(&self, axis: usize, kernel: impl Fn(&[f64], f64, bool) -> Vec<f64>) -> GridField {
        let stride = self.strides()[axis];
        let n = self.shape[axis];
        let h = self.spacing[axis];
        let mut out = vec![0.0; self.values.len()];
        let mut line = vec![0.0; n];
        for start in 0..self.values.len() {
            if self.multi_index(start)[axis] != 0 {
                continue;
            }
            for i in 0..n {
                line[i] = self.values[start + i * stride];
            }
            let res = kernel(&line, h, self.periodic[axis]);
            for i in 0..n {
                out[start + i * stride] = res[i];
            }
        }
        self.with_values(out)
    }

    /// Writes the grid as CSV: one column per chart axis, then `value`.
    pub fn to_csv(&self) -> String {
        let mut s = self.chart.names().join(",");
        s.push_str(",value\n");
        for k in 0..self.values.len() {
            for c in self.point(k) {
                let _ = write!(s, "{c:.17e},");
            }
            let _ = writeln!(s, "{:.17e}", self.values[k]);
        }
        s
    }

    /// Reads the CSV layout written by [`GridField::to_csv`].
    pub fn from_csv(text: &str, periodic: &[bool]) -> Result<GridField> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty CSV".into()))?
            .split(',')
            .map(str::trim)
            .collect();
        if header.last() != Some(&"value") {
            return Err(Error::InvalidInput("CSV header must end with `value`".into()));
        }
        let chart = Chart::new(&header[..header.len() - 1])?;
        let d = chart.dim();
        let mut coords: Vec<Vec<f64>> = vec![Vec::new(); d];
        let mut values = Vec::new();
        for (row, line) in lines.enumerate() {
            let cells: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidInput(format!("CSV row {}: {e}", row + 2)))?;
            if cells.len() != d + 1 {
                return Err(Error::InvalidInput(format!("CSV row {} has {} cells", row + 2, cells.len())));
            }
            for a in 0..d {
                if !coords[a].iter().any(|&c| c == cells[a]) {
                    coords[a].push(cells[a]);
                }
            }
            values.push(cells[d]);
        }
        let shape: Vec<usize> = coords.iter().map(Vec::len).collect();
        let origin: Vec<f64> = coords.iter().map(|c| c[0]).collect();
        let spacing: Vec<f64> = coords
            .iter()
            .map(|c| if c.len() > 1 { (c[c.len() - 1] - c[0]) / (c.len() - 1) as f64 } else { 1.0 })
            .collect();
        GridField::new(chart, origin, spacing, shape, periodic.to_vec(), values)
    }
}

fn first_derivative(f: &[f64], h: f64, periodic: bool) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] = if periodic {
            (f[(i + 1) % n] - f[(i + n - 1) % n]) / (2.0 * h)
        } else if i == 0 {
            (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
        } else if i == n - 1 {
            (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h)
        } else {
            (f[i + 1] - f[i - 1]) / (2.0 * h)
        };
    }
    out
}

fn second_derivative(f: &[f64], h: f64, periodic: bool) -> Vec<f64> {
    let n = f.len();
    let h2 = h * h;
    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] = if periodic {
            (f[(i + 1) % n] - 2.0 * f[i] + f[(i + n - 1) % n]) / h2
        } else if i == 0 {
            (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2
        } else if i == n - 1 {
            (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / h2
        } else {
            (f[i + 1] - 2.0 * f[i] + f[i - 1]) / h2
        };
    }
    out
}

/// Second-order finite-difference approximation of `∂^α g`, `|α| ≤ 2`.
///
/// Central stencils in the interior and along periodic axes; one-sided
/// second-order stencils at the ends of non-periodic axes.
pub fn fd_derivative(g: &GridField, alpha: &[u32]) -> Result<GridField> {
    if alpha.len() != g.shape.len() {
        return Err(Error::InvalidInput(format!(
            "multi-index has {} entries for a {}-dimensional grid",
            alpha.len(),
            g.shape.len()
        )));
    }
    let total: u32 = alpha.iter().sum();
    if total > 2 {
        return Err(Error::InvalidInput(format!(
            "finite differences support |alpha| <= 2, got {total}"
        )));
    }
    for (axis, &e) in alpha.iter().enumerate() {
        if e > 0 && g.shape[axis] < MIN_FD_NODES {
            return Err(Error::GridTooSmall {
                axis,
                nodes: g.shape[axis],
                needed: MIN_FD_NODES,
            });
        }
    }
    let mut out = g.clone();
    for (axis, &e) in alpha.iter().enumerate() {
        out = match e {
            1 => out.along_axis(axis, first_derivative),
            2 => out.along_axis(axis, second_derivative),
            _ => out,
        };
    }
    Ok(out)
}
