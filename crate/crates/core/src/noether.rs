//! Fractional product brackets, the invariance condition and the Noether
//! conserved-quantity residual.

use serde::Serialize;
use thiserror::Error;

use crate::dsl::{self, EvalError, Expr, ParseError};
use crate::grid::{Grid, GridError, SampledFunction};
use crate::operators::{left_caputo, left_rl_derivative, right_caputo, right_rl_derivative, OperatorError};
use crate::variational::{partials_along, Partials, VariationalError, VariationalProblem};
use crate::varorder::OrderFunction;

#[derive(Debug, Error)]
pub enum NoetherError {
    #[error("symmetry generator: {0}")]
    Parse(#[from] ParseError),
    #[error("evaluating {what} at t = {t}: {source}")]
    Eval { what: String, t: f64, source: EvalError },
    #[error("order {0} is outside (0, 1)")]
    BadOrder(f64),
    #[error("window margin {0} must lie in [0, 0.5)")]
    BadMargin(f64),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Variational(#[from] VariationalError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// `D₋^γ[f, g] = -f · ₜD^γ_b g + g · ᶜₐD^γ_t f`.
pub fn bracket_minus(
    f: &SampledFunction,
    fprime: &SampledFunction,
    g: &SampledFunction,
    order: &OrderFunction,
) -> Result<SampledFunction, OperatorError> {
    let rl = right_rl_derivative(g, order)?;
    let cap = left_caputo(f, fprime, order)?;
    combine(f, g, &rl, &cap)
}

/// `D₊^γ[f, g] = -f · ₐD^γ_t g + g · ᶜₜD^γ_b f`.
pub fn bracket_plus(
    f: &SampledFunction,
    fprime: &SampledFunction,
    g: &SampledFunction,
    order: &OrderFunction,
) -> Result<SampledFunction, OperatorError> {
    let rl = left_rl_derivative(g, order)?;
    let cap = right_caputo(f, fprime, order)?;
    combine(f, g, &rl, &cap)
}

fn combine(
    f: &SampledFunction,
    g: &SampledFunction,
    rl: &SampledFunction,
    cap: &SampledFunction,
) -> Result<SampledFunction, OperatorError> {
    let values = (0..f.grid().len()).map(|i| -f.value(i) * rl.value(i) + g.value(i) * cap.value(i)).collect();
    Ok(SampledFunction::new(f.grid().clone(), values)?)
}

/// Distance of both brackets from their order-one limits `±(fg)'` over an
/// inner window, one entry per order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassicalLimitProbe {
    pub gammas: Vec<f64>,
    pub minus: Vec<f64>,
    pub plus: Vec<f64>,
    /// Fraction of the interval left out at each end.
    pub margin: f64,
}

impl ClassicalLimitProbe {
    /// Whether both distances shrink as `γ` grows (gammas given ascending).
    pub fn monotone(&self) -> bool {
        let dec = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
        dec(&self.minus) && dec(&self.plus)
    }
}

/// Smallest `n` for which a constant order `γ` passes derivative mode.
fn bound_n_for(gamma: f64) -> u32 {
    let mut n = ((1.0 / (1.0 - gamma)).floor() as u32).max(2);
    while !(gamma < 1.0 - 1.0 / n as f64) {
        n += 1;
    }
    n
}

/// `f` and `g` are expressions in `t`. Nodes within `margin · (b - a)` of
/// either end are excluded, where the right and left RL derivatives carry
/// their endpoint singularities.
pub fn classical_limit_probe(
    f: &Expr,
    g: &Expr,
    gammas: &[f64],
    grid: &Grid,
    margin: f64,
) -> Result<ClassicalLimitProbe, NoetherError> {
    if !(0.0..0.5).contains(&margin) {
        return Err(NoetherError::BadMargin(margin));
    }
    let sample = |e: &Expr, what: &str| -> Result<SampledFunction, NoetherError> {
        let v = grid
            .nodes()
            .iter()
            .map(|&t| e.eval(&[t]).map_err(|source| NoetherError::Eval { what: what.into(), t, source }))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SampledFunction::new(grid.clone(), v)?)
    };
    let fs = sample(f, "f")?;
    let fp =
        sample(&f.differentiate("t").map_err(|e| NoetherError::Eval { what: "f'".into(), t: 0.0, source: e })?, "f'")?;
    let gs = sample(g, "g")?;
    let gp =
        sample(&g.differentiate("t").map_err(|e| NoetherError::Eval { what: "g'".into(), t: 0.0, source: e })?, "g'")?;
    let classical: Vec<f64> = (0..grid.len()).map(|i| fp.value(i) * gs.value(i) + fs.value(i) * gp.value(i)).collect();

    let span = grid.b() - grid.a();
    let inside: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            let t = grid.node(i);
            t >= grid.a() + margin * span - 1e-12 && t <= grid.b() - margin * span + 1e-12
        })
        .collect();

    let (mut minus, mut plus) = (Vec::new(), Vec::new());
    for &gamma in gammas {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(NoetherError::BadOrder(gamma));
        }
        let order = OrderFunction::constant(gamma, bound_n_for(gamma)).map_err(|_| NoetherError::BadOrder(gamma))?;
        let m = bracket_minus(&fs, &fp, &gs, &order)?;
        let p = bracket_plus(&fs, &fp, &gs, &order)?;
        minus.push(inside.iter().fold(0.0f64, |acc, &i| acc.max((m.value(i) - classical[i]).abs())));
        plus.push(inside.iter().fold(0.0f64, |acc, &i| acc.max((p.value(i) + classical[i]).abs())));
    }
    Ok(ClassicalLimitProbe { gammas: gammas.to_vec(), minus, plus, margin })
}

/// Infinitesimal generator `ξ(t, q)` of a transformation `q ↦ q + ε ξ`.
#[derive(Debug, Clone)]
pub struct SymmetryGenerator {
    xi: Expr,
}

impl SymmetryGenerator {
    pub fn parse(src: &str) -> Result<Self, NoetherError> {
        Ok(Self { xi: dsl::parse(src, &["t", "q"])? })
    }

    pub fn expr(&self) -> &Expr {
        &self.xi
    }

    /// `ξ(t, q(t))` and its time derivative along `q`.
    pub fn along(&self, q: &SampledFunction) -> Result<(SampledFunction, SampledFunction), NoetherError> {
        let grid = q.grid();
        let values = (0..grid.len())
            .map(|i| {
                let t = grid.node(i);
                self.xi.eval(&[t, q.value(i)]).map_err(|source| NoetherError::Eval { what: "xi".into(), t, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let xi = SampledFunction::new(grid.clone(), values)?;
        let dxi = xi.differentiate();
        Ok((xi, dxi))
    }
}

/// Max and discrete L2 norms of a residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualSummary {
    pub max_norm: f64,
    pub l2_norm: f64,
    /// Max-norm over the nodes `2..=N-2`.
    pub interior_max_norm: f64,
    #[serde(rename = "N")]
    pub intervals: usize,
}

impl ResidualSummary {
    pub fn of(r: &SampledFunction) -> Self {
        let n = r.grid().intervals();
        let sq = r.map(|v| v * v);
        Self {
            max_norm: r.max_abs(),
            l2_norm: sq.trapezoid().sqrt(),
            interior_max_norm: r.max_abs_range(2, n - 2),
            intervals: n,
        }
    }
}

fn setup(
    problem: &VariationalProblem,
    q: &SampledFunction,
    xi: &SymmetryGenerator,
) -> Result<(Partials, SampledFunction, SampledFunction), NoetherError> {
    let p = partials_along(problem, q)?;
    let (x, dx) = xi.along(q)?;
    Ok((p, x, dx))
}

/// `∂_q L · ξ + Σ ∂_{d_i} L · ᶜₐD^{α_i}_t ξ + Σ ∂_{e_i} L · ᶜₜD^{β_i}_b ξ`,
/// zero when `ξ` generates a symmetry of the Lagrangian.
pub fn invariance_residual(
    problem: &VariationalProblem,
    q: &SampledFunction,
    xi: &SymmetryGenerator,
) -> Result<SampledFunction, NoetherError> {
    let (p, x, dx) = setup(problem, q, xi)?;
    let mut r: Vec<f64> = p.d_q.values().iter().zip(x.values()).map(|(a, b)| a * b).collect();
    for (g, order) in p.left.iter().zip(&problem.alphas) {
        let c = left_caputo(&x, &dx, order)?;
        r.iter_mut().enumerate().for_each(|(i, v)| *v += g.value(i) * c.value(i));
    }
    for (g, order) in p.right.iter().zip(&problem.betas) {
        let c = right_caputo(&x, &dx, order)?;
        r.iter_mut().enumerate().for_each(|(i, v)| *v += g.value(i) * c.value(i));
    }
    Ok(SampledFunction::new(q.grid().clone(), r)?)
}

/// `Σ D₋^{α_i}[ξ, ∂_{d_i} L] + Σ D₊^{β_i}[ξ, ∂_{e_i} L]`, which vanishes
/// along extremals when `ξ` generates a symmetry.
pub fn noether_residual(
    problem: &VariationalProblem,
    q: &SampledFunction,
    xi: &SymmetryGenerator,
) -> Result<SampledFunction, NoetherError> {
    let (p, x, dx) = setup(problem, q, xi)?;
    let mut r = vec![0.0; q.grid().len()];
    for (g, order) in p.left.iter().zip(&problem.alphas) {
        let b = bracket_minus(&x, &dx, g, order)?;
        r.iter_mut().zip(b.values()).for_each(|(v, w)| *v += w);
    }
    for (g, order) in p.right.iter().zip(&problem.betas) {
        let b = bracket_plus(&x, &dx, g, order)?;
        r.iter_mut().zip(b.values()).for_each(|(v, w)| *v += w);
    }
    Ok(SampledFunction::new(q.grid().clone(), r)?)
}
