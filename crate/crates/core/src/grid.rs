//! Uniform grids on `[a, b]` and functions sampled on them.

use std::io::{Read, Write};
use std::sync::Arc;

use thiserror::Error;

/// Smallest number of subintervals a grid may have.
pub const MIN_INTERVALS: usize = 4;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid needs a < b, got a = {a}, b = {b}")]
    EmptyInterval { a: f64, b: f64 },
    #[error("grid needs at least {MIN_INTERVALS} subintervals, got {0}")]
    TooFewIntervals(usize),
    #[error("non-finite value {value} at node {index} (t = {t})")]
    NonFinite { index: usize, t: f64, value: f64 },
    #[error("expected {expected} values for the grid, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("point {t} lies outside [{a}, {b}]")]
    OutOfRange { t: f64, a: f64, b: f64 },
    #[error("sampled functions live on different grids")]
    GridMismatch,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv: {0}")]
    Format(String),
}

/// Uniform discretization `t_i = a + i h`, `i = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    a: f64,
    b: f64,
    nodes: Arc<[f64]>,
}

impl Grid {
    pub fn uniform(a: f64, b: f64, intervals: usize) -> Result<Self, GridError> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(GridError::EmptyInterval { a, b });
        }
        if intervals < MIN_INTERVALS {
            return Err(GridError::TooFewIntervals(intervals));
        }
        let h = (b - a) / intervals as f64;
        let nodes: Vec<f64> = (0..=intervals).map(|i| if i == intervals { b } else { a + i as f64 * h }).collect();
        Ok(Self { a, b, nodes: nodes.into() })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Number of subintervals `N`.
    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.b - self.a) / self.intervals() as f64
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    /// Mirror image `a + b - t` of a point.
    pub fn reflect(&self, t: f64) -> f64 {
        self.a + self.b - t
    }

    /// Index of the subinterval `[t_j, t_{j+1}]` containing `t`.
    pub(crate) fn cell_of(&self, t: f64) -> usize {
        let j = ((t - self.a) / self.spacing()).floor();
        (j.max(0.0) as usize).min(self.intervals() - 1)
    }

    fn same_as(&self, other: &Grid) -> bool {
        Arc::ptr_eq(&self.nodes, &other.nodes) || self == other
    }
}

/// Values `f(t_i)` on every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(GridError::NonFinite { index: i, t: grid.node(i), value: v });
        }
        Ok(Self { grid, values })
    }

    /// Evaluates `f` at every node.
    pub fn sample<F: Fn(f64) -> f64>(grid: &Grid, f: F) -> Result<Self, GridError> {
        let values = grid.nodes().iter().map(|&t| f(t)).collect();
        Self::new(grid.clone(), values)
    }

    /// Like [`SampledFunction::sample`] for a fallible evaluator.
    pub fn try_sample<E, F>(grid: &Grid, f: F) -> Result<Result<Self, GridError>, E>
    where
        F: Fn(f64) -> Result<f64, E>,
    {
        let mut values = Vec::with_capacity(grid.len());
        for &t in grid.nodes() {
            values.push(f(t)?);
        }
        Ok(Self::new(grid.clone(), values))
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    pub(crate) fn from_raw(grid: &Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Derivative by second-order finite differences: central in the
    /// interior, the one-sided three-point stencil at both ends.
    pub fn differentiate(&self) -> SampledFunction {
        let v = &self.values;
        let n = v.len() - 1;
        let h = self.grid.spacing();
        let mut d = vec![0.0; n + 1];
        d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
        for i in 1..n {
            d[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
        }
        d[n] = (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * h);
        Self::from_raw(&self.grid, d)
    }

    /// Piecewise-linear interpolation, exact at nodes.
    pub fn interpolate(&self, t: f64) -> Result<f64, GridError> {
        let (a, b) = (self.grid.a(), self.grid.b());
        if !(a..=b).contains(&t) {
            return Err(GridError::OutOfRange { t, a, b });
        }
        Ok(self.interpolate_unchecked(t))
    }

    pub(crate) fn interpolate_unchecked(&self, t: f64) -> f64 {
        let j = self.grid.cell_of(t);
        let (t0, t1) = (self.grid.node(j), self.grid.node(j + 1));
        if t == t0 {
            return self.values[j];
        }
        if t == t1 {
            return self.values[j + 1];
        }
        let theta = (t - t0) / (t1 - t0);
        self.values[j] + theta * (self.values[j + 1] - self.values[j])
    }

    /// Composite trapezoid rule over the whole grid.
    pub fn trapezoid(&self) -> f64 {
        trapezoid(self.grid.spacing(), &self.values)
    }

    /// `f(a + b - t)` sampled on the same grid.
    pub fn reflected(&self) -> SampledFunction {
        let mut v = self.values.clone();
        v.reverse();
        Self::from_raw(&self.grid, v)
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> SampledFunction {
        Self::from_raw(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Node-wise `f(self, other)`.
    pub fn zip_with<F: Fn(f64, f64) -> f64>(
        &self,
        other: &SampledFunction,
        f: F,
    ) -> Result<SampledFunction, GridError> {
        if !self.grid.same_as(&other.grid) {
            return Err(GridError::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(&x, &y)| f(x, y)).collect();
        Ok(Self::from_raw(&self.grid, values))
    }

    pub fn scale(&self, c: f64) -> SampledFunction {
        self.map(|v| c * v)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max-norm over nodes `lo..=hi`.
    pub fn max_abs_range(&self, lo: usize, hi: usize) -> f64 {
        self.values[lo..=hi].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Writes `t,value` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), GridError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "value"])?;
        for (t, v) in self.grid.nodes().iter().zip(&self.values) {
            w.write_record([format_f64(*t), format_f64(*v)])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads a `t,value` table and checks that it sits on a uniform grid.
    pub fn read_csv<R: Read>(input: R) -> Result<SampledFunction, GridError> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "value" {
            return Err(GridError::Format(format!("expected header t,value, got {headers:?}")));
        }
        let mut ts = Vec::new();
        let mut vs = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| GridError::Format(format!("{s:?}: {e}")));
            ts.push(parse(&rec[0])?);
            vs.push(parse(&rec[1])?);
        }
        if ts.len() < MIN_INTERVALS + 1 {
            return Err(GridError::TooFewIntervals(ts.len().saturating_sub(1)));
        }
        let grid = Grid::uniform(ts[0], ts[ts.len() - 1], ts.len() - 1)?;
        let tol = 1e-9 * grid.spacing();
        for (i, (&t, &node)) in ts.iter().zip(grid.nodes()).enumerate() {
            if (t - node).abs() > tol {
                return Err(GridError::Format(format!("row {i}: t = {t} does not match uniform node {node}")));
            }
        }
        SampledFunction::new(grid, vs)
    }
}

/// Trapezoid rule for equally spaced samples.
pub fn trapezoid(h: f64, values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..n - 1].iter().sum();
    h * (0.5 * (values[0] + values[n - 1]) + inner)
}

/// Trapezoid weights, so that `Σ w_i v_i == trapezoid(h, v)`.
pub fn trapezoid_weights(h: f64, len: usize) -> Vec<f64> {
    let mut w = vec![h; len];
    w[0] = 0.5 * h;
    w[len - 1] = 0.5 * h;
    w
}

/// 17 significant digits in scientific notation; round-trips any f64.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}
