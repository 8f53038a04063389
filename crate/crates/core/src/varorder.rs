//! Variable fractional orders `α(t, τ)` and their admissibility checks.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::dsl::Expr;
use crate::grid::Grid;
use crate::specfun::gamma_positive;

/// Default `n` in the admissibility bounds `1/n < α` and `α < 1 - 1/n`.
pub const DEFAULT_BOUND_N: u32 = 4;

/// Violations kept verbatim in a report; the rest are only counted.
const MAX_LISTED_VIOLATIONS: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrderError {
    #[error("declared bounds must satisfy 0 < min <= max < 1, got [{min}, {max}]")]
    BadDeclaredRange { min: f64, max: f64 },
    #[error("bound n must be at least 2, got {0}")]
    BadBoundN(u32),
    #[error("constant order {0} is outside (0, 1)")]
    BadConstant(f64),
    #[error("order expression must be over (t, tau), got {0:?}")]
    BadVariables(Vec<String>),
    #[error("kernel integrability needs b > 0, got {0}")]
    BadHorizon(f64),
    #[error("kernel integrability check failed: {0}")]
    MajorantExceeded(MajorantStep),
}

/// Which link of the majorant chain broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MajorantStep {
    /// The order left `(0, 1 - 1/n)` somewhere on `(0, b]`.
    Hypothesis,
    /// `∫|k|` exceeded the bound obtained from `1/Γ(1-α) <= (x²+x)/(x²+1)`.
    GammaBound,
    /// The Γ-bounded integral exceeded the power-law majorant.
    PowerBound,
    /// The integral is not finite.
    NotFinite,
}

impl fmt::Display for MajorantStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MajorantStep::Hypothesis => "order outside (0, 1 - 1/n)",
            MajorantStep::GammaBound => "integral above the gamma-bound majorant",
            MajorantStep::PowerBound => "gamma-bound majorant above the power majorant",
            MajorantStep::NotFinite => "integral is not finite",
        })
    }
}

#[derive(Clone)]
enum Source {
    Constant(f64),
    Expr(Expr),
    Closure(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

/// An order function `(t, τ) ↦ α(t, τ)` with declared bounds and the
/// integer `n` its admissibility is checked against.
#[derive(Clone)]
pub struct OrderFunction {
    source: Source,
    declared_min: f64,
    declared_max: f64,
    bound_n: u32,
}

impl fmt::Debug for OrderFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let src = match &self.source {
            Source::Constant(c) => format!("{c}"),
            Source::Expr(e) => e.to_string(),
            Source::Closure(_) => "<closure>".into(),
        };
        f.debug_struct("OrderFunction")
            .field("source", &src)
            .field("declared_min", &self.declared_min)
            .field("declared_max", &self.declared_max)
            .field("bound_n", &self.bound_n)
            .finish()
    }
}

fn check_range(min: f64, max: f64, n: u32) -> Result<(), OrderError> {
    if !(0.0 < min && min <= max && max < 1.0) {
        return Err(OrderError::BadDeclaredRange { min, max });
    }
    if n < 2 {
        return Err(OrderError::BadBoundN(n));
    }
    Ok(())
}

impl OrderFunction {
    pub fn constant(value: f64, bound_n: u32) -> Result<Self, OrderError> {
        if !(value > 0.0 && value < 1.0) {
            return Err(OrderError::BadConstant(value));
        }
        check_range(value, value, bound_n)?;
        Ok(Self { source: Source::Constant(value), declared_min: value, declared_max: value, bound_n })
    }

    /// An order given by an expression in the variables `t` and `tau`.
    pub fn from_expr(expr: Expr, declared_min: f64, declared_max: f64, bound_n: u32) -> Result<Self, OrderError> {
        if expr.vars() != ["t", "tau"] {
            return Err(OrderError::BadVariables(expr.vars().to_vec()));
        }
        check_range(declared_min, declared_max, bound_n)?;
        let source = match expr.as_constant() {
            Some(c) => Source::Constant(c),
            None => Source::Expr(expr),
        };
        Ok(Self { source, declared_min, declared_max, bound_n })
    }

    pub fn from_fn<F>(f: F, declared_min: f64, declared_max: f64, bound_n: u32) -> Result<Self, OrderError>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        check_range(declared_min, declared_max, bound_n)?;
        Ok(Self { source: Source::Closure(Arc::new(f)), declared_min, declared_max, bound_n })
    }

    pub fn with_bound_n(mut self, n: u32) -> Result<Self, OrderError> {
        check_range(self.declared_min, self.declared_max, n)?;
        self.bound_n = n;
        Ok(self)
    }

    /// `α(t, τ)`; NaN where an expression fails to evaluate.
    pub fn value(&self, t: f64, tau: f64) -> f64 {
        match &self.source {
            Source::Constant(c) => *c,
            Source::Expr(e) => e.eval(&[t, tau]).unwrap_or(f64::NAN),
            Source::Closure(f) => f(t, tau),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self.source {
            Source::Constant(c) => Some(c),
            _ => None,
        }
    }

    pub fn declared_min(&self) -> f64 {
        self.declared_min
    }

    pub fn declared_max(&self) -> f64 {
        self.declared_max
    }

    pub fn bound_n(&self) -> u32 {
        self.bound_n
    }

    /// Samples the order on every grid pair `(t_i, t_j)`, `j < i`, and checks
    /// the mode's bound together with the declared range. Only grid pairs are
    /// inspected, so a pass is necessary, not sufficient.
    pub fn validate(&self, grid: &Grid, mode: ValidationMode) -> ValidationReport {
        let n = self.bound_n as f64;
        let nodes = grid.nodes();
        let mut report = ValidationReport {
            mode,
            bound_n: self.bound_n,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            passed: true,
            violation_count: 0,
            violations: Vec::new(),
        };
        for (i, &t) in nodes.iter().enumerate() {
            for &tau in &nodes[..i] {
                let v = self.value(t, tau);
                let kind = if !v.is_finite() {
                    Some(ViolationKind::NotFinite)
                } else {
                    report.min = report.min.min(v);
                    report.max = report.max.max(v);
                    match mode {
                        ValidationMode::Integral if !(v > 1.0 / n && v < 1.0) => Some(ViolationKind::ModeBound),
                        ValidationMode::Derivative if !(v > 0.0 && v < 1.0 - 1.0 / n) => Some(ViolationKind::ModeBound),
                        _ if v < self.declared_min || v > self.declared_max => Some(ViolationKind::DeclaredRange),
                        _ => None,
                    }
                };
                if let Some(kind) = kind {
                    report.passed = false;
                    report.violation_count += 1;
                    if report.violations.len() < MAX_LISTED_VIOLATIONS {
                        report.violations.push(Violation { t, tau, value: v, kind });
                    }
                }
            }
        }
        report
    }

    /// Integrates `|k(s)| = s^{-α(s)} / Γ(1 - α(s))` over `(0, b]` for a
    /// difference kernel `α(t, τ) = α(t - τ)`, read here as `s ↦ α(s, 0)`,
    /// and checks it against the majorant chain step by step.
    pub fn kernel_integrability_check(&self, b: f64, n: u32) -> Result<IntegrabilityReport, OrderError> {
        self.kernel_integrability(b, n, 2048)
    }

    pub(crate) fn kernel_integrability(&self, b: f64, n: u32, cells: usize) -> Result<IntegrabilityReport, OrderError> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(OrderError::BadHorizon(b));
        }
        if n < 2 {
            return Err(OrderError::BadBoundN(n));
        }
        let inv_n = 1.0 / n as f64;
        let h = b / cells as f64;
        let mut integral = 0.0;
        let mut gamma_majorant = 0.0;
        let mut hypothesis_ok = true;
        for j in 0..cells {
            let (s0, s1) = (j as f64 * h, (j + 1) as f64 * h);
            let alpha = self.value(0.5 * (s0 + s1), 0.0);
            if !(alpha > 0.0 && alpha < 1.0 - inv_n) {
                hypothesis_ok = false;
            }
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(OrderError::MajorantExceeded(MajorantStep::Hypothesis));
            }
            let e = 1.0 - alpha;
            let moment = (s1.powf(e) - s0.powf(e)) / e;
            integral += moment / gamma_positive(e);
            // 1/Γ(1-α) = x / Γ(x+1) <= x (x+1) / (x² + 1) with x = 1 - α.
            gamma_majorant += moment * e * (e + 1.0) / (e * e + 1.0);
        }
        let power_majorant = corrected_power_majorant(b, n);
        let report = IntegrabilityReport {
            integral,
            gamma_majorant,
            power_majorant,
            printed_majorant: 1.0 + n as f64 * b.powf(inv_n) - n as f64,
        };
        let slack = 1e-9 * (1.0 + power_majorant);
        if !integral.is_finite() {
            return Err(OrderError::MajorantExceeded(MajorantStep::NotFinite));
        }
        if !hypothesis_ok {
            return Err(OrderError::MajorantExceeded(MajorantStep::Hypothesis));
        }
        if integral > gamma_majorant + slack {
            return Err(OrderError::MajorantExceeded(MajorantStep::GammaBound));
        }
        if gamma_majorant > power_majorant + slack {
            return Err(OrderError::MajorantExceeded(MajorantStep::PowerBound));
        }
        Ok(report)
    }
}

/// `∫_0^b` of `s^{1/n - 1}` on `s < 1` and `1` on `s >= 1`.
fn corrected_power_majorant(b: f64, n: u32) -> f64 {
    let n = n as f64;
    if b <= 1.0 {
        n * b.powf(1.0 / n)
    } else {
        n + (b - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationMode {
    /// `1/n < α < 1`, the hypothesis for integrals.
    Integral,
    /// `0 < α < 1 - 1/n`, the hypothesis for derivatives.
    Derivative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    ModeBound,
    DeclaredRange,
    NotFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub t: f64,
    pub tau: f64,
    pub value: f64,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub mode: ValidationMode,
    pub bound_n: u32,
    pub min: f64,
    pub max: f64,
    pub passed: bool,
    pub violation_count: usize,
    /// The first violations found, in scan order.
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} mode, n = {}: min {}, max {}, {} violation(s)",
            self.mode, self.bound_n, self.min, self.max, self.violation_count
        )?;
        if let Some(v) = self.violations.first() {
            write!(f, ", first at (t, tau) = ({}, {}) value {} ({:?})", v.t, v.tau, v.value, v.kind)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrabilityReport {
    /// `∫_0^b |k(s)| ds` by frozen-exponent quadrature.
    pub integral: f64,
    /// Same integral with `1/Γ(1-α)` replaced by its rational upper bound.
    pub gamma_majorant: f64,
    /// `∫_0^b max(s^{1/n-1}, 1)`-type power majorant, split at `s = 1`.
    pub power_majorant: f64,
    /// `1 + n b^{1/n} - n`, kept for comparison; it is not an upper bound
    /// when `b <= 1`.
    pub printed_majorant: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    fn demo_order() -> OrderFunction {
        let e = parse("0.5 + 0.2*sin(t - tau)", &["t", "tau"]).unwrap();
        OrderFunction::from_expr(e, 0.5, 0.67, 4).unwrap()
    }

    #[test]
    fn declared_range_checks() {
        assert!(OrderFunction::constant(0.0, 4).is_err());
        assert!(OrderFunction::constant(1.0, 4).is_err());
        assert!(OrderFunction::constant(0.5, 1).is_err());
        assert!(OrderFunction::from_fn(|_, _| 0.5, 0.6, 0.5, 4).is_err());
        let e = parse("t", &["t"]).unwrap();
        assert!(matches!(OrderFunction::from_expr(e, 0.1, 0.9, 4), Err(OrderError::BadVariables(_))));
    }

    #[test]
    fn boundary_arithmetic_in_derivative_mode() {
        let g = Grid::uniform(0.0, 1.0, 16).unwrap();
        let half = OrderFunction::constant(0.5, 2).unwrap();
        let r = half.validate(&g, ValidationMode::Derivative);
        assert!(!r.passed);
        assert_eq!(r.violation_count, 16 * 17 / 2);
        assert!(r.violations.iter().all(|v| v.kind == ViolationKind::ModeBound));
        let r = half.with_bound_n(4).unwrap().validate(&g, ValidationMode::Derivative);
        assert!(r.passed);
        assert_eq!((r.min, r.max), (0.5, 0.5));
    }

    #[test]
    fn demo_order_passes_integral_mode() {
        let g = Grid::uniform(0.0, 1.0, 64).unwrap();
        let r = demo_order().validate(&g, ValidationMode::Integral);
        assert!(r.passed, "{r}");
        // Dense-sampling oracle over the triangle, independent of the grid scan.
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..=2000 {
            let d = i as f64 / 2000.0;
            let v = 0.5 + 0.2 * d.sin();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        assert!(r.min >= lo - 1e-15 && r.max <= hi + 1e-15);
        assert!((hi - 0.668_294_197).abs() < 1e-9);
        assert!(lo > 0.25 && hi < 1.0);
    }

    #[test]
    fn declared_range_violations_are_reported() {
        let g = Grid::uniform(0.0, 1.0, 8).unwrap();
        let e = parse("0.5 + 0.2*sin(t - tau)", &["t", "tau"]).unwrap();
        let tight = OrderFunction::from_expr(e, 0.5, 0.6, 4).unwrap();
        let r = tight.validate(&g, ValidationMode::Integral);
        assert!(!r.passed);
        assert!(r.violations.iter().all(|v| v.kind == ViolationKind::DeclaredRange && v.value > 0.6));
    }

    #[test]
    fn non_finite_orders_fail() {
        let g = Grid::uniform(0.0, 1.0, 8).unwrap();
        let e = parse("0.5 + ln(tau)", &["t", "tau"]).unwrap();
        let of = OrderFunction::from_expr(e, 0.1, 0.9, 4).unwrap();
        let r = of.validate(&g, ValidationMode::Integral);
        assert!(r.violations.iter().any(|v| v.kind == ViolationKind::NotFinite));
    }

    #[test]
    fn derivative_mode_is_monotone_in_n() {
        let g = Grid::uniform(0.0, 1.0, 32).unwrap();
        let of = demo_order();
        let mut passed_once = false;
        for n in 2..12 {
            let r = of.clone().with_bound_n(n).unwrap().validate(&g, ValidationMode::Derivative);
            if passed_once {
                assert!(r.passed, "n = {n}");
            }
            passed_once |= r.passed;
        }
        assert!(passed_once);
    }

    #[test]
    fn integrability_half_order() {
        // ∫_0^1 s^{-1/2} ds / Γ(1/2) = 2 / √π, but α = 1/2 violates α < 1 - 1/2.
        let of = OrderFunction::constant(0.5, 2).unwrap();
        let err = of.kernel_integrability_check(1.0, 2).unwrap_err();
        assert_eq!(err, OrderError::MajorantExceeded(MajorantStep::Hypothesis));
        let r = of.kernel_integrability_check(1.0, 4).unwrap();
        let want = 2.0 / std::f64::consts::PI.sqrt();
        assert!((r.integral - want).abs() < 1e-12, "{}", r.integral);
        // The printed closed form is 1 here and sits below the integral.
        assert_eq!(r.printed_majorant, 1.0 + 4.0 - 4.0);
        assert!(r.integral > r.printed_majorant);
        assert!(r.integral <= r.gamma_majorant && r.gamma_majorant <= r.power_majorant);
    }

    #[test]
    fn integrability_quarter_order() {
        let of = OrderFunction::constant(0.25, 2).unwrap();
        let r = of.kernel_integrability_check(1.0, 2).unwrap();
        let want = (4.0 / 3.0) / 1.225_416_702_465_177_6;
        assert!((r.integral - want).abs() < 1e-12);
        assert!((r.integral - 1.0881).abs() < 1e-4);
    }

    #[test]
    fn integrability_vanishes_with_horizon() {
        let of = OrderFunction::constant(0.25, 4).unwrap();
        let small = of.kernel_integrability_check(1e-8, 4).unwrap();
        assert!(small.integral < 1e-5);
        assert!(of.kernel_integrability_check(0.0, 4).is_err());
        let big = of.kernel_integrability_check(5.0, 4).unwrap();
        assert!(big.power_majorant >= big.integral);
    }

    #[test]
    fn integrability_variable_order() {
        let of = OrderFunction::from_fn(|t, tau| 0.3 + 0.2 * (t - tau).sin().abs(), 0.3, 0.5, 2).unwrap();
        let r = of.kernel_integrability_check(3.0, 3).unwrap();
        assert!(r.integral.is_finite() && r.integral > 0.0);
    }
}
