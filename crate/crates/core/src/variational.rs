//! Fractional variational problems of variable order: the action functional,
//! the Euler–Lagrange residual and a direct minimizer.

use thiserror::Error;

use crate::dsl::{self, EvalError, Expr, ParseError};
use crate::grid::{trapezoid_weights, Grid, GridError, SampledFunction};
use crate::noether::{bracket_minus, bracket_plus};
use crate::operators::{caputo_matrix, left_rl_derivative, right_rl_derivative, OperatorError, OperatorMatrix, Side};
use crate::varorder::{OrderFunction, ValidationMode};

/// Smallest grid the direct solver accepts.
pub const MIN_SOLVER_INTERVALS: usize = 32;

#[derive(Debug, Error)]
pub enum VariationalError {
    #[error("lagrangian: {0}")]
    Parse(#[from] ParseError),
    #[error("lagrangian needs at least one fractional derivative")]
    NoDerivatives,
    #[error("problem has {orders} {side} order(s) but the lagrangian uses {declared}")]
    OrderCount { side: &'static str, orders: usize, declared: usize },
    #[error("interval [{a}, {b}] is empty")]
    EmptyInterval { a: f64, b: f64 },
    #[error("{which} order is not admissible for derivatives: {report}")]
    Order { which: String, report: String },
    #[error("q does not meet the boundary values: q(a) = {qa_got} (want {qa}), q(b) = {qb_got} (want {qb})")]
    Boundary { qa: f64, qb: f64, qa_got: f64, qb_got: f64 },
    #[error("q lives on [{got_a}, {got_b}], the problem on [{a}, {b}]")]
    IntervalMismatch { a: f64, b: f64, got_a: f64, got_b: f64 },
    #[error("evaluating {what} at t = {t}: {source}")]
    Eval { what: String, t: f64, source: EvalError },
    #[error("solver needs N >= {MIN_SOLVER_INTERVALS}, got {0}")]
    SolverGrid(usize),
    #[error("line search produced a non-finite functional after {iterations} iterations")]
    Diverged { iterations: usize },
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// `L(t, q, d_1..d_n, e_1..e_m)` with `d_i` standing for the left Caputo
/// derivative of order `α_i` and `e_i` for the right one of order `β_i`,
/// together with its symbolic partials.
#[derive(Debug, Clone)]
pub struct Lagrangian {
    expr: Expr,
    num_left: usize,
    num_right: usize,
    d_q: Expr,
    d_left: Vec<Expr>,
    d_right: Vec<Expr>,
}

impl Lagrangian {
    /// Variable names in slot order.
    pub fn variable_names(num_left: usize, num_right: usize) -> Vec<String> {
        let mut names = vec!["t".to_string(), "q".to_string()];
        names.extend((1..=num_left).map(|i| format!("d{i}")));
        names.extend((1..=num_right).map(|i| format!("e{i}")));
        names
    }

    pub fn parse(src: &str, num_left: usize, num_right: usize) -> Result<Self, VariationalError> {
        if num_left + num_right == 0 {
            return Err(VariationalError::NoDerivatives);
        }
        let names = Self::variable_names(num_left, num_right);
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let expr = dsl::parse(src, &refs)?;
        Ok(Self::from_expr(expr, num_left, num_right))
    }

    fn from_expr(expr: Expr, num_left: usize, num_right: usize) -> Self {
        let diff = |name: &str| expr.differentiate(name).expect("declared variable");
        let d_q = diff("q");
        let d_left = (1..=num_left).map(|i| diff(&format!("d{i}"))).collect();
        let d_right = (1..=num_right).map(|i| diff(&format!("e{i}"))).collect();
        Self { expr, num_left, num_right, d_q, d_left, d_right }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn num_left(&self) -> usize {
        self.num_left
    }

    pub fn num_right(&self) -> usize {
        self.num_right
    }

    /// `∂L/∂q`.
    pub fn partial_q(&self) -> &Expr {
        &self.d_q
    }

    /// `∂L/∂d_i`, zero-based.
    pub fn partial_left(&self, i: usize) -> &Expr {
        &self.d_left[i]
    }

    /// `∂L/∂e_i`, zero-based.
    pub fn partial_right(&self, i: usize) -> &Expr {
        &self.d_right[i]
    }
}

#[derive(Debug, Clone)]
pub struct VariationalProblem {
    pub a: f64,
    pub b: f64,
    pub q_a: f64,
    pub q_b: f64,
    pub alphas: Vec<OrderFunction>,
    pub betas: Vec<OrderFunction>,
    pub lagrangian: Lagrangian,
}

/// Boundary values must match to this absolute tolerance.
const BOUNDARY_TOL: f64 = 1e-12;

impl VariationalProblem {
    pub fn new(
        (a, b): (f64, f64),
        (q_a, q_b): (f64, f64),
        alphas: Vec<OrderFunction>,
        betas: Vec<OrderFunction>,
        lagrangian: Lagrangian,
    ) -> Result<Self, VariationalError> {
        if !(a < b) {
            return Err(VariationalError::EmptyInterval { a, b });
        }
        if alphas.len() != lagrangian.num_left() {
            return Err(VariationalError::OrderCount {
                side: "left",
                orders: alphas.len(),
                declared: lagrangian.num_left(),
            });
        }
        if betas.len() != lagrangian.num_right() {
            return Err(VariationalError::OrderCount {
                side: "right",
                orders: betas.len(),
                declared: lagrangian.num_right(),
            });
        }
        Ok(Self { a, b, q_a, q_b, alphas, betas, lagrangian })
    }

    pub fn grid(&self, intervals: usize) -> Result<Grid, VariationalError> {
        Ok(Grid::uniform(self.a, self.b, intervals)?)
    }

    /// Straight line through both boundary values.
    pub fn initial_guess(&self, grid: &Grid) -> SampledFunction {
        let slope = (self.q_b - self.q_a) / (self.b - self.a);
        let mut values: Vec<f64> = grid.nodes().iter().map(|&t| self.q_a + slope * (t - self.a)).collect();
        let last = values.len() - 1;
        values[0] = self.q_a;
        values[last] = self.q_b;
        SampledFunction::new(grid.clone(), values).expect("finite line")
    }

    /// Checks every order against the derivative-mode bound on `grid`.
    pub fn validate_orders(&self, grid: &Grid) -> Result<(), VariationalError> {
        let labelled = self
            .alphas
            .iter()
            .enumerate()
            .map(|(i, o)| (format!("alpha{}", i + 1), o))
            .chain(self.betas.iter().enumerate().map(|(i, o)| (format!("beta{}", i + 1), o)));
        for (which, order) in labelled {
            let report = order.validate(grid, ValidationMode::Derivative);
            if !report.passed {
                return Err(VariationalError::Order { which, report: report.to_string() });
            }
        }
        Ok(())
    }

    fn check_q(&self, q: &SampledFunction) -> Result<(), VariationalError> {
        let g = q.grid();
        if (g.a() - self.a).abs() > 1e-12 || (g.b() - self.b).abs() > 1e-12 {
            return Err(VariationalError::IntervalMismatch { a: self.a, b: self.b, got_a: g.a(), got_b: g.b() });
        }
        let (qa_got, qb_got) = (q.value(0), q.value(g.len() - 1));
        if (qa_got - self.q_a).abs() > BOUNDARY_TOL || (qb_got - self.q_b).abs() > BOUNDARY_TOL {
            return Err(VariationalError::Boundary { qa: self.q_a, qb: self.q_b, qa_got, qb_got });
        }
        Ok(())
    }
}

/// The discretized problem on one grid: Caputo derivatives of every order as
/// weight matrices, assembled once.
#[derive(Debug, Clone)]
pub struct Discretization {
    grid: Grid,
    left: Vec<OperatorMatrix>,
    right: Vec<OperatorMatrix>,
    weights: Vec<f64>,
}

/// Everything `L` needs at each node along one `q`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub q: Vec<f64>,
    pub left: Vec<Vec<f64>>,
    pub right: Vec<Vec<f64>>,
}

impl Discretization {
    pub fn new(problem: &VariationalProblem, grid: &Grid) -> Result<Self, VariationalError> {
        problem.validate_orders(grid)?;
        let left = problem.alphas.iter().map(|o| caputo_matrix(grid, o, Side::Left)).collect::<Result<Vec<_>, _>>()?;
        let right = problem.betas.iter().map(|o| caputo_matrix(grid, o, Side::Right)).collect::<Result<Vec<_>, _>>()?;
        let weights = trapezoid_weights(grid.spacing(), grid.len());
        Ok(Self { grid: grid.clone(), left, right, weights })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn trajectory(&self, q: &[f64]) -> Trajectory {
        Trajectory {
            q: q.to_vec(),
            left: self.left.iter().map(|m| m.apply(q)).collect(),
            right: self.right.iter().map(|m| m.apply(q)).collect(),
        }
    }

    fn slots(&self, traj: &Trajectory, i: usize, buf: &mut Vec<f64>) {
        buf.clear();
        buf.push(self.grid.node(i));
        buf.push(traj.q[i]);
        buf.extend(traj.left.iter().map(|d| d[i]));
        buf.extend(traj.right.iter().map(|e| e[i]));
    }

    /// Node-wise values of `expr` along a trajectory.
    pub fn along(&self, expr: &Expr, traj: &Trajectory, what: &str) -> Result<Vec<f64>, VariationalError> {
        let mut buf = Vec::new();
        (0..self.grid.len())
            .map(|i| {
                self.slots(traj, i, &mut buf);
                expr.eval(&buf).map_err(|source| VariationalError::Eval {
                    what: what.to_string(),
                    t: self.grid.node(i),
                    source,
                })
            })
            .collect()
    }

    /// Trapezoid value of the discrete action.
    pub fn functional(&self, lagrangian: &Lagrangian, q: &[f64]) -> Result<f64, VariationalError> {
        let traj = self.trajectory(q);
        let l = self.along(lagrangian.expr(), &traj, "L")?;
        Ok(l.iter().zip(&self.weights).map(|(v, w)| v * w).sum())
    }

    /// Exact gradient of the discrete action with respect to every nodal
    /// value, by the chain rule through the weight matrices.
    pub fn gradient(&self, lagrangian: &Lagrangian, q: &[f64]) -> Result<Vec<f64>, VariationalError> {
        let traj = self.trajectory(q);
        let weighted = |v: Vec<f64>| -> Vec<f64> { v.iter().zip(&self.weights).map(|(a, w)| a * w).collect() };
        let mut grad = weighted(self.along(lagrangian.partial_q(), &traj, "dL/dq")?);
        for (i, m) in self.left.iter().enumerate() {
            let p = weighted(self.along(lagrangian.partial_left(i), &traj, "dL/dd")?);
            grad.iter_mut().zip(m.apply_transpose(&p)).for_each(|(g, v)| *g += v);
        }
        for (i, m) in self.right.iter().enumerate() {
            let p = weighted(self.along(lagrangian.partial_right(i), &traj, "dL/de")?);
            grad.iter_mut().zip(m.apply_transpose(&p)).for_each(|(g, v)| *g += v);
        }
        Ok(grad)
    }

    /// Forward-difference gradient with step `1e-6 max(1, |q_k|)`.
    pub fn gradient_fd(&self, lagrangian: &Lagrangian, q: &[f64]) -> Result<Vec<f64>, VariationalError> {
        let base_traj = self.trajectory(q);
        let base = self.along(lagrangian.expr(), &base_traj, "L")?;
        let j0: f64 = base.iter().zip(&self.weights).map(|(v, w)| v * w).sum();
        let mut grad = vec![0.0; q.len()];
        let mut buf = Vec::new();
        for (k, g) in grad.iter_mut().enumerate() {
            let step = 1e-6 * q[k].abs().max(1.0);
            let mut traj = base_traj.clone();
            traj.q[k] += step;
            for (d, m) in traj.left.iter_mut().zip(&self.left) {
                d.iter_mut().enumerate().for_each(|(i, v)| *v += m.get(i, k) * step);
            }
            for (e, m) in traj.right.iter_mut().zip(&self.right) {
                e.iter_mut().enumerate().for_each(|(i, v)| *v += m.get(i, k) * step);
            }
            let mut j1 = 0.0;
            for i in 0..q.len() {
                self.slots(&traj, i, &mut buf);
                let v = lagrangian.expr().eval(&buf).map_err(|source| VariationalError::Eval {
                    what: "L".into(),
                    t: self.grid.node(i),
                    source,
                })?;
                j1 += self.weights[i] * v;
            }
            *g = (j1 - j0) / step;
        }
        Ok(grad)
    }
}

/// `J[q]` by the trapezoid rule, Caputo derivatives from finite differences
/// of `q`.
pub fn evaluate_functional(problem: &VariationalProblem, q: &SampledFunction) -> Result<f64, VariationalError> {
    problem.check_q(q)?;
    let disc = Discretization::new(problem, q.grid())?;
    disc.functional(&problem.lagrangian, q.values())
}

/// Partials of `L` sampled along `q`.
#[derive(Debug, Clone)]
pub struct Partials {
    pub d_q: SampledFunction,
    pub left: Vec<SampledFunction>,
    pub right: Vec<SampledFunction>,
}

pub fn partials_along(problem: &VariationalProblem, q: &SampledFunction) -> Result<Partials, VariationalError> {
    problem.check_q(q)?;
    let disc = Discretization::new(problem, q.grid())?;
    partials_with(&disc, &problem.lagrangian, q)
}

pub(crate) fn partials_with(
    disc: &Discretization,
    lagrangian: &Lagrangian,
    q: &SampledFunction,
) -> Result<Partials, VariationalError> {
    let traj = disc.trajectory(q.values());
    let grid = q.grid();
    let sampled = |v: Vec<f64>| SampledFunction::new(grid.clone(), v);
    let d_q = sampled(disc.along(lagrangian.partial_q(), &traj, "dL/dq")?)?;
    let left = (0..lagrangian.num_left())
        .map(|i| Ok(sampled(disc.along(lagrangian.partial_left(i), &traj, &format!("dL/dd{}", i + 1))?)?))
        .collect::<Result<Vec<_>, VariationalError>>()?;
    let right = (0..lagrangian.num_right())
        .map(|i| Ok(sampled(disc.along(lagrangian.partial_right(i), &traj, &format!("dL/de{}", i + 1))?)?))
        .collect::<Result<Vec<_>, VariationalError>>()?;
    Ok(Partials { d_q, left, right })
}

/// Euler–Lagrange residual in bracket form,
/// `∂_q L - Σ D₋^{α_i}[1, ∂_{d_i} L] - Σ D₊^{β_i}[1, ∂_{e_i} L]`.
pub fn el_residual(problem: &VariationalProblem, q: &SampledFunction) -> Result<SampledFunction, VariationalError> {
    let p = partials_along(problem, q)?;
    let grid = q.grid();
    let one = SampledFunction::constant(grid, 1.0);
    let zero = SampledFunction::zeros(grid);
    let mut r = p.d_q.into_values();
    for (g, order) in p.left.iter().zip(&problem.alphas) {
        let br = bracket_minus(&one, &zero, g, order)?;
        r.iter_mut().zip(br.values()).for_each(|(x, v)| *x -= v);
    }
    for (g, order) in p.right.iter().zip(&problem.betas) {
        let br = bracket_plus(&one, &zero, g, order)?;
        r.iter_mut().zip(br.values()).for_each(|(x, v)| *x -= v);
    }
    Ok(SampledFunction::new(grid.clone(), r)?)
}

/// The same residual written with RL derivatives,
/// `∂_q L + Σ ₜD^{α_i}_b ∂_{d_i} L + Σ ₐD^{β_i}_t ∂_{e_i} L`.
pub fn el_residual_rl_form(
    problem: &VariationalProblem,
    q: &SampledFunction,
) -> Result<SampledFunction, VariationalError> {
    let p = partials_along(problem, q)?;
    let mut r = p.d_q.into_values();
    for (g, order) in p.left.iter().zip(&problem.alphas) {
        let d = right_rl_derivative(g, order)?;
        r.iter_mut().zip(d.values()).for_each(|(x, v)| *x += v);
    }
    for (g, order) in p.right.iter().zip(&problem.betas) {
        let d = left_rl_derivative(g, order)?;
        r.iter_mut().zip(d.values()).for_each(|(x, v)| *x += v);
    }
    Ok(SampledFunction::new(q.grid().clone(), r)?)
}

/// Max-norm over the interior nodes `2..=N-2`.
pub fn interior_max(f: &SampledFunction) -> f64 {
    let n = f.grid().intervals();
    f.max_abs_range(2, n - 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMode {
    /// Chain rule through the weight matrices.
    Exact,
    /// Forward differences, one coordinate at a time.
    ForwardDifference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub armijo: f64,
    pub gradient: GradientMode,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 5000, armijo: 1e-4, gradient: GradientMode::Exact }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Max-norm of the gradient over the free (interior) nodes.
    pub grad_norm: f64,
    pub functional: f64,
    pub initial_functional: f64,
    pub converged: bool,
    /// The line search could not decrease `J` any further.
    pub stalled: bool,
    pub intervals: usize,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub q: SampledFunction,
    pub report: SolveReport,
}

/// Halvings before a line search gives up.
const MAX_HALVINGS: usize = 60;

/// Minimizes the discrete action over interior nodal values, endpoints pinned
/// to the boundary data, by gradient descent with an Armijo backtracking line
/// search. Each search starts from the Barzilai–Borwein step and halves.
pub fn solve_direct(
    problem: &VariationalProblem,
    intervals: usize,
    opts: &SolverOptions,
) -> Result<Solution, VariationalError> {
    if intervals < MIN_SOLVER_INTERVALS {
        return Err(VariationalError::SolverGrid(intervals));
    }
    let grid = problem.grid(intervals)?;
    let disc = Discretization::new(problem, &grid)?;
    let lagrangian = &problem.lagrangian;
    let last = grid.len() - 1;

    let grad_of = |q: &[f64]| -> Result<Vec<f64>, VariationalError> {
        let mut g = match opts.gradient {
            GradientMode::Exact => disc.gradient(lagrangian, q)?,
            GradientMode::ForwardDifference => disc.gradient_fd(lagrangian, q)?,
        };
        g[0] = 0.0;
        g[last] = 0.0;
        Ok(g)
    };
    let max_norm = |g: &[f64]| g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();

    let mut q = problem.initial_guess(&grid).into_values();
    let mut j = disc.functional(lagrangian, &q)?;
    let initial_functional = j;
    let mut g = grad_of(&q)?;
    let mut step = 1.0 / max_norm(&g).max(1e-300);
    let mut iterations = 0;
    let mut stalled = false;

    while max_norm(&g) > opts.tol && iterations < opts.max_iter {
        let gg = dot(&g, &g);
        let mut trial_step = step;
        let mut accepted = None;
        let mut any_finite = false;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = q.iter().zip(&g).map(|(x, d)| x - trial_step * d).collect();
            if let Ok(jt) = disc.functional(lagrangian, &trial) {
                if jt.is_finite() {
                    any_finite = true;
                    if jt <= j - opts.armijo * trial_step * gg {
                        accepted = Some((trial, jt));
                        break;
                    }
                }
            }
            trial_step *= 0.5;
        }
        let Some((q_new, j_new)) = accepted else {
            if !any_finite {
                return Err(VariationalError::Diverged { iterations });
            }
            stalled = true;
            break;
        };
        let g_new = grad_of(&q_new)?;
        iterations += 1;
        let s: Vec<f64> = q_new.iter().zip(&q).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        step = if sy > 0.0 { dot(&s, &s) / sy } else { 2.0 * trial_step };
        q = q_new;
        j = j_new;
        g = g_new;
    }

    let grad_norm = max_norm(&g);
    let report = SolveReport {
        iterations,
        grad_norm,
        functional: j,
        initial_functional,
        converged: grad_norm <= opts.tol,
        stalled,
        intervals,
    };
    Ok(Solution { q: SampledFunction::new(grid, q)?, report })
}
