//! Variable-order Riemann–Liouville integrals and derivatives and Caputo
//! derivatives on uniform grids.
//!
//! Every operator reduces to a weakly singular integral
//! `∫ w(τ) |t - τ|^{e(τ)} f(τ) dτ`. On each cell the exponent `e` and the
//! weight `w` (a reciprocal gamma value) are frozen at the cell midpoint, `f`
//! is replaced by its linear interpolant, and the resulting moment integrals
//! are taken in closed form. The singularity at `τ = t` is therefore
//! integrated exactly for the frozen exponent.
//!
//! Because the discrete operators are linear in the samples, each one is
//! assembled once as a dense triangular [`OperatorMatrix`]; applying it is a
//! matrix-vector product. Values at the degenerate endpoint (`t = a` for left
//! operators, `t = b` for right ones) are 0.

pub mod ibp;

use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{trapezoid_weights, Grid, GridError, SampledFunction};
use crate::specfun::gamma_positive;
use crate::varorder::{OrderFunction, ValidationMode, ValidationReport};

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("order validation failed: {0}")]
    Validation(Box<ValidationReport>),
    #[error("kernel exponent {exponent} at tau = {tau} is not integrable")]
    NonIntegrable { exponent: f64, tau: f64 },
    #[error("integration range [{lower}, {upper}] is not on the {side:?} side of t = {t} within [a, b]")]
    BadRange { t: f64, lower: f64, upper: f64, side: Side },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// Integration over `[a, t]`, kernel `(t - τ)^e`.
    Left,
    /// Integration over `[t, b]`, kernel `(τ - t)^e`.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    RlIntegral,
    RlDerivative,
    Caputo,
}

impl Family {
    /// Whether the kernel uses the complementary order `1 - α`.
    pub fn complement(self) -> bool {
        !matches!(self, Family::RlIntegral)
    }

    pub fn validation_mode(self) -> ValidationMode {
        if self.complement() {
            ValidationMode::Derivative
        } else {
            ValidationMode::Integral
        }
    }
}

/// Exponent and weight of the kernel on one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrozenKernel {
    pub exponent: f64,
    pub weight: f64,
}

impl FrozenKernel {
    /// `(t-τ)^{α-1} / Γ(α)`.
    pub fn integral(alpha: f64) -> Self {
        Self { exponent: alpha - 1.0, weight: 1.0 / gamma_positive(alpha) }
    }

    /// `(t-τ)^{-α} / Γ(1-α)`.
    pub fn complement(alpha: f64) -> Self {
        Self { exponent: -alpha, weight: 1.0 / gamma_positive(1.0 - alpha) }
    }

    fn for_order(alpha: f64, complement: bool) -> Self {
        if complement {
            Self::complement(alpha)
        } else {
            Self::integral(alpha)
        }
    }
}

/// Weights `(w_near, w_far)` with
/// `∫_near^far u^e ℓ(u) du = w_near f(near) + w_far f(far)` for the linear
/// interpolant `ℓ` between distances `near < far` from the evaluation point.
fn cell_weights(near: f64, far: f64, e: f64) -> (f64, f64) {
    let h = far - near;
    let (p1, p2) = (e + 1.0, e + 2.0);
    if near == 0.0 {
        let m = far.powf(p1);
        let w_far = m / p2;
        return (m / p1 - w_far, w_far);
    }
    let l = (h / near).ln_1p();
    let m0 = near.powf(p1) * (p1 * l).exp_m1() / p1;
    let m1 = near.powf(p2) * (p2 * l).exp_m1() / p2;
    let w_far = (m1 - near * m0) / h;
    (m0 - w_far, w_far)
}

/// `∫ K(t, τ) f(τ) dτ` over `[lower, upper]` with the frozen-exponent rule.
///
/// `kernel` receives each cell's midpoint `τ`. For [`Side::Left`] the range
/// must lie below `t`, for [`Side::Right`] above it. Cells are clipped to the
/// range, with `f` interpolated linearly at clipped ends.
pub fn singular_product_quad<K>(
    t: f64,
    lower: f64,
    upper: f64,
    density: &SampledFunction,
    side: Side,
    kernel: K,
) -> Result<f64, OperatorError>
where
    K: Fn(f64) -> FrozenKernel,
{
    let grid = density.grid();
    let (a, b) = (grid.a(), grid.b());
    let ordered = match side {
        Side::Left => upper <= t,
        Side::Right => lower >= t,
    };
    if !(a <= lower && lower <= upper && upper <= b) || !ordered || !(a..=b).contains(&t) {
        return Err(OperatorError::BadRange { t, lower, upper, side });
    }
    if lower == upper {
        return Ok(0.0);
    }
    let first = grid.cell_of(lower);
    let last = grid.cell_of(upper);
    let mut total = 0.0;
    for j in first..=last {
        let t0 = grid.node(j).max(lower);
        let t1 = grid.node(j + 1).min(upper);
        if t1 <= t0 {
            continue;
        }
        let (f0, f1) = (density.interpolate_unchecked(t0), density.interpolate_unchecked(t1));
        let k = kernel(0.5 * (t0 + t1));
        if !(k.exponent > -1.0) {
            return Err(OperatorError::NonIntegrable { exponent: k.exponent, tau: 0.5 * (t0 + t1) });
        }
        let contribution = match side {
            Side::Left => {
                let (w_near, w_far) = cell_weights(t - t1, t - t0, k.exponent);
                w_near * f1 + w_far * f0
            }
            Side::Right => {
                let (w_near, w_far) = cell_weights(t0 - t, t1 - t, k.exponent);
                w_near * f0 + w_far * f1
            }
        };
        total += k.weight * contribution;
    }
    Ok(total)
}

/// Dense `(N+1) × (N+1)` matrix of a discrete linear operator.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        self.data.par_chunks(self.dim).map(|row| row.iter().zip(x).map(|(w, v)| w * v).sum()).collect()
    }

    /// `Mᵀ y`.
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.dim);
        let mut out = vec![0.0; self.dim];
        for (row, &yi) in self.data.chunks(self.dim).zip(y) {
            if yi != 0.0 {
                for (o, w) in out.iter_mut().zip(row) {
                    *o += w * yi;
                }
            }
        }
        out
    }

    pub fn scale(mut self, c: f64) -> OperatorMatrix {
        self.data.iter_mut().for_each(|v| *v *= c);
        self
    }
}

/// Assembles the frozen-exponent integral operator with the given side and
/// kernel family on the whole grid.
pub fn integral_matrix(grid: &Grid, order: &OrderFunction, side: Side, complement: bool) -> OperatorMatrix {
    let n = grid.len();
    let h = grid.spacing();
    let nodes = grid.nodes();
    let mut data = vec![0.0; n * n];
    data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let t = nodes[i];
        let cells = match side {
            Side::Left => 0..i,
            Side::Right => i..n - 1,
        };
        for j in cells {
            let mid = 0.5 * (nodes[j] + nodes[j + 1]);
            let alpha = match side {
                Side::Left => order.value(t, mid),
                Side::Right => order.value(mid, t),
            };
            let k = FrozenKernel::for_order(alpha, complement);
            match side {
                Side::Left => {
                    let (w_near, w_far) = cell_weights((i - j - 1) as f64 * h, (i - j) as f64 * h, k.exponent);
                    row[j + 1] += k.weight * w_near;
                    row[j] += k.weight * w_far;
                }
                Side::Right => {
                    let (w_near, w_far) = cell_weights((j - i) as f64 * h, (j + 1 - i) as f64 * h, k.exponent);
                    row[j] += k.weight * w_near;
                    row[j + 1] += k.weight * w_far;
                }
            }
        }
    });
    OperatorMatrix { dim: n, data }
}

fn validated(order: &OrderFunction, grid: &Grid, mode: ValidationMode) -> Result<(), OperatorError> {
    let report = order.validate(grid, mode);
    if report.passed {
        Ok(())
    } else {
        Err(OperatorError::Validation(Box::new(report)))
    }
}

fn same_grid(f: &SampledFunction, g: &SampledFunction) -> Result<(), OperatorError> {
    if f.grid() != g.grid() {
        return Err(GridError::GridMismatch.into());
    }
    Ok(())
}

fn apply(m: &OperatorMatrix, f: &SampledFunction) -> SampledFunction {
    SampledFunction::from_raw(f.grid(), m.apply(f.values()))
}

/// Left Riemann–Liouville integral `ₐI^α_t f`.
pub fn left_rl_integral(f: &SampledFunction, order: &OrderFunction) -> Result<SampledFunction, OperatorError> {
    validated(order, f.grid(), ValidationMode::Integral)?;
    Ok(apply(&integral_matrix(f.grid(), order, Side::Left, false), f))
}

/// Right Riemann–Liouville integral `ₜI^α_b f`, kernel order `α(τ, t)`.
pub fn right_rl_integral(f: &SampledFunction, order: &OrderFunction) -> Result<SampledFunction, OperatorError> {
    validated(order, f.grid(), ValidationMode::Integral)?;
    Ok(apply(&integral_matrix(f.grid(), order, Side::Right, false), f))
}

/// `ₐI^{1-α}_t f`, the integral under the left RL and Caputo derivatives.
pub fn left_complement_integral(f: &SampledFunction, order: &OrderFunction) -> Result<SampledFunction, OperatorError> {
    validated(order, f.grid(), ValidationMode::Derivative)?;
    Ok(apply(&integral_matrix(f.grid(), order, Side::Left, true), f))
}

/// `ₜI^{1-α}_b f`.
pub fn right_complement_integral(f: &SampledFunction, order: &OrderFunction) -> Result<SampledFunction, OperatorError> {
    validated(order, f.grid(), ValidationMode::Derivative)?;
    Ok(apply(&integral_matrix(f.grid(), order, Side::Right, true), f))
}

/// Left Caputo derivative. `fprime` is the derivative of `f`, from the
/// expression when one is available.
pub fn left_caputo(
    f: &SampledFunction,
    fprime: &SampledFunction,
    order: &OrderFunction,
) -> Result<SampledFunction, OperatorError> {
    same_grid(f, fprime)?;
    left_complement_integral(fprime, order)
}

/// Right Caputo derivative, `-ₜI^{1-α}_b f'`.
pub fn right_caputo(
    f: &SampledFunction,
    fprime: &SampledFunction,
    order: &OrderFunction,
) -> Result<SampledFunction, OperatorError> {
    same_grid(f, fprime)?;
    Ok(right_complement_integral(fprime, order)?.scale(-1.0))
}

/// Left RL derivative `d/dt ₐI^{1-α}_t f`.
///
/// The complement integral is taken as cell averages and differentiated by
/// differencing neighbouring cells, which makes this operator the exact
/// trapezoid-weighted adjoint of the right [`caputo_matrix`]. `result[0] = 0`;
/// the value at `b` is extrapolated linearly.
pub fn left_rl_derivative(f: &SampledFunction, order: &OrderFunction) -> Result<SampledFunction, OperatorError> {
    let m = caputo_matrix(f.grid(), order, Side::Right)?;
    let mut d = weighted_adjoint(&m, f);
    let last = d.len() - 1;
    d[0] = 0.0;
    d[last] = 2.0 * d[last - 1] - d[last - 2];
    Ok(SampledFunction::from_raw(f.grid(), d))
}

/// Right RL derivative `-d/dt ₜI^{1-α}_b f`, the adjoint of the left
/// [`caputo_matrix`]. `result[N] = 0`; the value at `a` is extrapolated.
pub fn right_rl_derivative(f: &SampledFunction, order: &OrderFunction) -> Result<SampledFunction, OperatorError> {
    let m = caputo_matrix(f.grid(), order, Side::Left)?;
    let mut d = weighted_adjoint(&m, f);
    let last = d.len() - 1;
    d[last] = 0.0;
    d[0] = 2.0 * d[1] - d[2];
    Ok(SampledFunction::from_raw(f.grid(), d))
}

/// `W⁻¹ Mᵀ W f` with `W` the trapezoid weights.
fn weighted_adjoint(m: &OperatorMatrix, f: &SampledFunction) -> Vec<f64> {
    let w = trapezoid_weights(f.grid().spacing(), f.grid().len());
    let wf: Vec<f64> = f.values().iter().zip(&w).map(|(v, w)| v * w).collect();
    let mut d = m.apply_transpose(&wf);
    d.iter_mut().zip(&w).for_each(|(v, w)| *v /= w);
    d
}

/// One of the six operators, ready to apply.
#[derive(Debug, Clone)]
pub struct OperatorKind {
    pub side: Side,
    pub family: Family,
    pub order: OrderFunction,
}

impl OperatorKind {
    pub fn new(side: Side, family: Family, order: OrderFunction) -> Self {
        Self { side, family, order }
    }

    pub fn complement(&self) -> bool {
        self.family.complement()
    }

    /// Applies the operator. Caputo derivatives use `fprime` when given and
    /// fall back to finite differences of `f`.
    pub fn apply(
        &self,
        f: &SampledFunction,
        fprime: Option<&SampledFunction>,
    ) -> Result<SampledFunction, OperatorError> {
        let derived;
        let fprime = match fprime {
            Some(d) => d,
            None => {
                derived = f.differentiate();
                &derived
            }
        };
        match (self.side, self.family) {
            (Side::Left, Family::RlIntegral) => left_rl_integral(f, &self.order),
            (Side::Right, Family::RlIntegral) => right_rl_integral(f, &self.order),
            (Side::Left, Family::RlDerivative) => left_rl_derivative(f, &self.order),
            (Side::Right, Family::RlDerivative) => right_rl_derivative(f, &self.order),
            (Side::Left, Family::Caputo) => left_caputo(f, fprime, &self.order),
            (Side::Right, Family::Caputo) => right_caputo(f, fprime, &self.order),
        }
    }
}

/// Discrete Caputo derivatives as matrices acting on samples of `q`.
///
/// `q` is taken piecewise linear, so its derivative is the constant slope on
/// each cell and only the kernel is integrated, exactly for the frozen
/// exponent. Unlike a centred difference of `q`, this sees every nonconstant
/// grid function, including the odd-even one.
pub fn caputo_matrix(grid: &Grid, order: &OrderFunction, side: Side) -> Result<OperatorMatrix, OperatorError> {
    validated(order, grid, ValidationMode::Derivative)?;
    let n = grid.len();
    let h = grid.spacing();
    let nodes = grid.nodes();
    let mut data = vec![0.0; n * n];
    data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let t = nodes[i];
        let (cells, sign) = match side {
            Side::Left => (0..i, 1.0),
            Side::Right => (i..n - 1, -1.0),
        };
        for j in cells {
            let mid = 0.5 * (nodes[j] + nodes[j + 1]);
            let (alpha, near) = match side {
                Side::Left => (order.value(t, mid), (i - j - 1) as f64 * h),
                Side::Right => (order.value(mid, t), (j - i) as f64 * h),
            };
            let k = FrozenKernel::complement(alpha);
            let (w0, w1) = cell_weights(near, near + h, k.exponent);
            let c = sign * k.weight * (w0 + w1) / h;
            row[j + 1] += c;
            row[j] -= c;
        }
    });
    Ok(OperatorMatrix { dim: n, data })
}
