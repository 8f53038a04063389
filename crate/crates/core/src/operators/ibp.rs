//! Discrete integration-by-parts checks.
//!
//! Each check evaluates both sides of an identity with the trapezoid rule and
//! reports the relative discrepancy `|lhs - rhs| / max(|lhs|, |rhs|)`.
//!
//! The derivative identities move a right RL derivative onto `g` (or a left
//! one, for the mirror). Those derivatives are singular at the far endpoint
//! unless `g` vanishes there, and a difference quotient resolves the singular
//! part only to `O(h^{1-α})`. Use `g` with `g(a) = g(b) = 0` for tight
//! comparisons.

use serde::Serialize;

use super::{
    left_caputo, left_complement_integral, left_rl_derivative, left_rl_integral, right_caputo,
    right_complement_integral, right_rl_derivative, right_rl_integral, OperatorError,
};
use crate::grid::{GridError, SampledFunction};
use crate::varorder::OrderFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IbpReport {
    pub lhs: f64,
    pub rhs: f64,
    pub relative_discrepancy: f64,
    #[serde(rename = "N")]
    pub intervals: usize,
}

impl IbpReport {
    fn new(lhs: f64, rhs: f64, intervals: usize) -> Self {
        let scale = lhs.abs().max(rhs.abs());
        let relative_discrepancy = if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale };
        Self { lhs, rhs, relative_discrepancy, intervals }
    }
}

fn inner(f: &SampledFunction, g: &SampledFunction) -> Result<f64, GridError> {
    Ok(f.zip_with(g, |a, b| a * b)?.trapezoid())
}

/// `∫ g · ₐI^α_t f = ∫ f · ₜI^α_b g`.
pub fn integrals(f: &SampledFunction, g: &SampledFunction, order: &OrderFunction) -> Result<IbpReport, OperatorError> {
    let lhs = inner(g, &left_rl_integral(f, order)?)?;
    let rhs = inner(f, &right_rl_integral(g, order)?)?;
    Ok(IbpReport::new(lhs, rhs, f.grid().intervals()))
}

/// `∫ g · ᶜₐD^α_t f = [f · ₜI^{1-α}_b g]ₐᵇ + ∫ f · ₜD^α_b g`.
pub fn derivatives_left(
    f: &SampledFunction,
    fprime: &SampledFunction,
    g: &SampledFunction,
    order: &OrderFunction,
) -> Result<IbpReport, OperatorError> {
    let n = f.grid().intervals();
    let lhs = inner(g, &left_caputo(f, fprime, order)?)?;
    let comp = right_complement_integral(g, order)?;
    let boundary = f.value(n) * comp.value(n) - f.value(0) * comp.value(0);
    let rhs = boundary + inner(f, &right_rl_derivative(g, order)?)?;
    Ok(IbpReport::new(lhs, rhs, n))
}

/// `∫ g · ᶜₜD^α_b f = -[f · ₐI^{1-α}_t g]ₐᵇ + ∫ f · ₐD^α_t g`.
pub fn derivatives_right(
    f: &SampledFunction,
    fprime: &SampledFunction,
    g: &SampledFunction,
    order: &OrderFunction,
) -> Result<IbpReport, OperatorError> {
    let n = f.grid().intervals();
    let lhs = inner(g, &right_caputo(f, fprime, order)?)?;
    let comp = left_complement_integral(g, order)?;
    let boundary = f.value(n) * comp.value(n) - f.value(0) * comp.value(0);
    let rhs = -boundary + inner(f, &left_rl_derivative(g, order)?)?;
    Ok(IbpReport::new(lhs, rhs, n))
}
