//! C ABI over `varfrac`.
//!
//! Every function returns a [`VarfracStatus`]. On failure a message is kept
//! per thread and can be read with [`varfrac_last_error_message`]. Handles
//! come from `varfrac_problem_from_json` and are released with
//! `varfrac_problem_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use varfrac::config::{Problem, ProblemConfig};
use varfrac::dsl;
use varfrac::grid::SampledFunction;
use varfrac::noether::{invariance_residual, noether_residual, ResidualSummary};
use varfrac::operators::{ibp, Family, OperatorKind, Side};
use varfrac::specfun;
use varfrac::variational::{solve_direct, VariationalError};
use varfrac::varorder::OrderFunction;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarfracStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    BufferSize = 4,
    NotConverged = 5,
    NoSymmetry = 6,
    Panic = 7,
}

/// Operator selector for [`varfrac_op_eval`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarfracOp {
    LeftIntegral = 0,
    RightIntegral = 1,
    LeftRlDerivative = 2,
    RightRlDerivative = 3,
    LeftCaputo = 4,
    RightCaputo = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarfracIbp {
    Integrals = 0,
    DerivativesLeft = 1,
    DerivativesRight = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct VarfracIbpReport {
    pub lhs: f64,
    pub rhs: f64,
    pub relative_discrepancy: f64,
    pub intervals: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct VarfracSolveReport {
    pub functional: f64,
    pub initial_functional: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stalled: bool,
    pub intervals: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct VarfracResidualSummary {
    pub max_norm: f64,
    pub l2_norm: f64,
    pub interior_max_norm: f64,
    pub invariance_max: f64,
    pub intervals: usize,
}

/// A problem built from a JSON configuration.
pub struct VarfracProblem {
    inner: Problem,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(VarfracStatus, String);

impl Failure {
    fn input(e: impl std::fmt::Display) -> Self {
        Failure(VarfracStatus::InvalidInput, e.to_string())
    }
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> VarfracStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            VarfracStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            VarfracStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(VarfracStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(VarfracStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(VarfracStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure(VarfracStatus::NullPointer, format!("{name} is null")))
}

unsafe fn buffer<'a>(p: *mut f64, len: usize, expected: usize, name: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(Failure(VarfracStatus::NullPointer, format!("{name} is null")));
    }
    if len != expected {
        return Err(Failure(VarfracStatus::BufferSize, format!("{name} has length {len}, expected {expected}")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn sample_expr(src: &str, name: &str, problem: &Problem) -> Result<(SampledFunction, SampledFunction), Failure> {
    let expr = dsl::parse(src, &["t"]).map_err(|e| Failure::input(format!("{name}: {e}")))?;
    let deriv = expr.differentiate("t").map_err(Failure::input)?;
    let sample = |e: &dsl::Expr| {
        let values = problem
            .grid
            .nodes()
            .iter()
            .map(|&t| e.eval(&[t]).map_err(|err| Failure::input(format!("{name} at t = {t}: {err}"))))
            .collect::<Result<Vec<_>, _>>()?;
        SampledFunction::new(problem.grid.clone(), values).map_err(Failure::input)
    };
    Ok((sample(&expr)?, sample(&deriv)?))
}

fn first_order(p: &Problem, side: Side) -> Result<OrderFunction, Failure> {
    let (first, second) = match side {
        Side::Left => (&p.problem.alphas, &p.problem.betas),
        Side::Right => (&p.problem.betas, &p.problem.alphas),
    };
    first.first().or(second.first()).cloned().ok_or_else(|| Failure::input("problem declares no orders"))
}

/// The message for the last failed call on this thread, or null. Valid until
/// the next call on the same thread.
#[no_mangle]
pub extern "C" fn varfrac_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Γ(x) for x > 0.
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn varfrac_gamma(x: f64, out: *mut f64) -> VarfracStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = specfun::gamma(x).map_err(Failure::input)?;
        Ok(())
    })
}

/// Parses and validates a JSON problem configuration.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn varfrac_problem_from_json(
    json: *const c_char,
    out: *mut *mut VarfracProblem,
) -> VarfracStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let src = str_arg(json, "json")?;
        let inner = ProblemConfig::from_json_str(src).and_then(|c| c.build()).map_err(Failure::input)?;
        *out = Box::into_raw(Box::new(VarfracProblem { inner }));
        Ok(())
    })
}

/// # Safety
/// `problem` must come from `varfrac_problem_from_json` and not be used
/// afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn varfrac_problem_free(problem: *mut VarfracProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of grid nodes, `N + 1`; the length every buffer must have.
///
/// # Safety
/// `problem` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn varfrac_problem_len(problem: *const VarfracProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.inner.grid.len())
}

/// Applies one operator to the expression `f` in `t` on the problem grid.
/// The first order on the operator's side is used, else the first order on
/// the other side.
///
/// # Safety
/// `problem` must be a live handle, `f` a NUL-terminated string and `out` a
/// buffer of `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn varfrac_op_eval(
    problem: *const VarfracProblem,
    op: VarfracOp,
    f: *const c_char,
    out: *mut f64,
    len: usize,
) -> VarfracStatus {
    guard(|| {
        let p = &ref_arg(problem, "problem")?.inner;
        let src = str_arg(f, "f")?;
        let out = buffer(out, len, p.grid.len(), "out")?;
        let (side, family) = match op {
            VarfracOp::LeftIntegral => (Side::Left, Family::RlIntegral),
            VarfracOp::RightIntegral => (Side::Right, Family::RlIntegral),
            VarfracOp::LeftRlDerivative => (Side::Left, Family::RlDerivative),
            VarfracOp::RightRlDerivative => (Side::Right, Family::RlDerivative),
            VarfracOp::LeftCaputo => (Side::Left, Family::Caputo),
            VarfracOp::RightCaputo => (Side::Right, Family::Caputo),
        };
        let (fs, fp) = sample_expr(src, "f", p)?;
        let r = OperatorKind::new(side, family, first_order(p, side)?).apply(&fs, Some(&fp)).map_err(Failure::input)?;
        out.copy_from_slice(r.values());
        Ok(())
    })
}

/// Evaluates both sides of an integration-by-parts identity for `f` and `g`
/// with the first left order.
///
/// # Safety
/// `problem` must be a live handle, `f` and `g` NUL-terminated strings and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn varfrac_check_ibp(
    problem: *const VarfracProblem,
    which: VarfracIbp,
    f: *const c_char,
    g: *const c_char,
    out: *mut VarfracIbpReport,
) -> VarfracStatus {
    guard(|| {
        let p = &ref_arg(problem, "problem")?.inner;
        let out = out_arg(out, "out")?;
        let (fs, fp) = sample_expr(str_arg(f, "f")?, "f", p)?;
        let (gs, _) = sample_expr(str_arg(g, "g")?, "g", p)?;
        let order = first_order(p, Side::Left)?;
        let r = match which {
            VarfracIbp::Integrals => ibp::integrals(&fs, &gs, &order),
            VarfracIbp::DerivativesLeft => ibp::derivatives_left(&fs, &fp, &gs, &order),
            VarfracIbp::DerivativesRight => ibp::derivatives_right(&fs, &fp, &gs, &order),
        }
        .map_err(Failure::input)?;
        *out = VarfracIbpReport {
            lhs: r.lhs,
            rhs: r.rhs,
            relative_discrepancy: r.relative_discrepancy,
            intervals: r.intervals,
        };
        Ok(())
    })
}

/// Minimizes the action. The extremal is written to `q_out` and the report
/// to `report` even when the solver stops early, in which case
/// `NotConverged` is returned.
///
/// # Safety
/// `problem` must be a live handle, `q_out` a buffer of `len` doubles and
/// `report` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn varfrac_solve(
    problem: *const VarfracProblem,
    q_out: *mut f64,
    len: usize,
    report: *mut VarfracSolveReport,
) -> VarfracStatus {
    guard(|| {
        let p = &ref_arg(problem, "problem")?.inner;
        let q_out = buffer(q_out, len, p.grid.len(), "q_out")?;
        let report = out_arg(report, "report")?;
        let sol = solve_direct(&p.problem, p.grid.intervals(), &p.solver).map_err(|e| match e {
            VariationalError::Diverged { .. } => Failure(VarfracStatus::NotConverged, e.to_string()),
            other => Failure::input(other),
        })?;
        q_out.copy_from_slice(sol.q.values());
        let r = &sol.report;
        *report = VarfracSolveReport {
            functional: r.functional,
            initial_functional: r.initial_functional,
            grad_norm: r.grad_norm,
            iterations: r.iterations,
            converged: r.converged,
            stalled: r.stalled,
            intervals: r.intervals,
        };
        if !r.converged {
            return Err(Failure(
                VarfracStatus::NotConverged,
                format!("gradient norm {:e} after {} iterations", r.grad_norm, r.iterations),
            ));
        }
        Ok(())
    })
}

/// Noether residual of the configured symmetry along the path `q`, written
/// to `out`, with its summary and the invariance residual's max-norm.
///
/// # Safety
/// `problem` must be a live handle, `q` and `out` buffers of `len` doubles
/// and `summary` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn varfrac_noether_residual(
    problem: *const VarfracProblem,
    q: *const f64,
    out: *mut f64,
    len: usize,
    summary: *mut VarfracResidualSummary,
) -> VarfracStatus {
    guard(|| {
        let p = &ref_arg(problem, "problem")?.inner;
        if q.is_null() {
            return Err(Failure(VarfracStatus::NullPointer, "q is null".into()));
        }
        let out = buffer(out, len, p.grid.len(), "out")?;
        let summary = out_arg(summary, "summary")?;
        let xi = p
            .symmetry
            .as_ref()
            .ok_or_else(|| Failure(VarfracStatus::NoSymmetry, "problem has no symmetry generator".into()))?;
        let path = SampledFunction::new(p.grid.clone(), std::slice::from_raw_parts(q, len).to_vec())
            .map_err(Failure::input)?;
        let inv = invariance_residual(&p.problem, &path, xi).map_err(Failure::input)?;
        let r = noether_residual(&p.problem, &path, xi).map_err(Failure::input)?;
        let s = ResidualSummary::of(&r);
        out.copy_from_slice(r.values());
        *summary = VarfracResidualSummary {
            max_norm: s.max_norm,
            l2_norm: s.l2_norm,
            interior_max_norm: s.interior_max_norm,
            invariance_max: inv.max_abs(),
            intervals: s.intervals,
        };
        Ok(())
    })
}
