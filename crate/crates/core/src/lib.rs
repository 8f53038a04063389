//! Variable-order fractional integrals and derivatives on uniform grids,
//! with integration-by-parts checks, a direct solver for fractional
//! variational problems and Noether residuals along its extremals.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Reference constants are written with every published digit.
#![allow(clippy::excessive_precision)]

pub mod cli;
pub mod config;
pub mod dsl;
pub mod grid;
pub mod noether;
pub mod operators;
pub mod specfun;
pub mod variational;
pub mod varorder;
