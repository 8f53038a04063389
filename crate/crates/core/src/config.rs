//! JSON problem configuration and report serialization.
//!
//! ```json
//! {
//!   "interval": {"a": 0, "b": 1},
//!   "boundary": {"qa": 0, "qb": 1},
//!   "orders": {
//!     "left":  [{"expr": "0.5", "declared_min": 0.5, "declared_max": 0.5, "n": 4}],
//!     "right": [{"expr": "0.5", "declared_min": 0.5, "declared_max": 0.5, "n": 4}]
//!   },
//!   "lagrangian": {"expr": "0.5*d1^2 + 0.5*e1^2", "num_left": 1, "num_right": 1},
//!   "symmetry": {"xi_expr": "1"},
//!   "grid": {"N": 256},
//!   "solver": {"tol": 1e-6, "max_iter": 5000},
//!   "thresholds": {"ibp": 5e-3, "invariance": 1e-10, "noether_relative": 0.05}
//! }
//! ```
//!
//! `symmetry`, `solver`, `thresholds` and the per-order `n` are optional.

use std::io::{self, Write};
use std::path::Path;

use serde::ser::Serialize;
use serde::Deserialize;
use thiserror::Error;

use crate::dsl::{self, ParseError};
use crate::grid::{Grid, GridError};
use crate::noether::{NoetherError, SymmetryGenerator};
use crate::variational::{Lagrangian, SolverOptions, VariationalError, VariationalProblem};
use crate::varorder::{OrderError, OrderFunction, DEFAULT_BOUND_N};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("config is not valid: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{field}: {source}")]
    Expr { field: String, source: ParseError },
    #[error("{field}: {source}")]
    Order { field: String, source: OrderError },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error(transparent)]
    Problem(#[from] VariationalError),
    #[error(transparent)]
    Symmetry(#[from] NoetherError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub interval: IntervalConfig,
    pub boundary: BoundaryConfig,
    pub orders: OrdersConfig,
    pub lagrangian: LagrangianConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetry: Option<SymmetryConfig>,
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalConfig {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    pub qa: f64,
    pub qb: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct OrdersConfig {
    #[serde(default)]
    pub left: Vec<OrderConfig>,
    #[serde(default)]
    pub right: Vec<OrderConfig>,
}

/// An order `α(t, tau)`; `n` is the bound parameter of the admissibility
/// check.
#[derive(Debug, Clone, PartialEq, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct OrderConfig {
    pub expr: String,
    pub declared_min: f64,
    pub declared_max: f64,
    #[serde(default = "default_bound_n")]
    pub n: u32,
}

fn default_bound_n() -> u32 {
    DEFAULT_BOUND_N
}

#[derive(Debug, Clone, PartialEq, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct LagrangianConfig {
    pub expr: String,
    pub num_left: usize,
    pub num_right: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetryConfig {
    pub xi_expr: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "N")]
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self { tol: d.tol, max_iter: d.max_iter }
    }
}

/// Pass/fail limits used by the checking commands.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Relative discrepancy allowed in integration-by-parts checks.
    pub ibp: f64,
    /// Absolute max-norm allowed for the invariance residual.
    pub invariance: f64,
    /// Interior Noether residual allowed, relative to the largest partial
    /// `∂L/∂d_i`, `∂L/∂e_i` along the solution.
    pub noether_relative: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { ibp: 5e-3, invariance: 1e-10, noether_relative: 0.05 }
    }
}

/// A configuration with every expression parsed and checked.
#[derive(Debug, Clone)]
pub struct Problem {
    pub problem: VariationalProblem,
    pub grid: Grid,
    pub symmetry: Option<SymmetryGenerator>,
    pub solver: SolverOptions,
    pub thresholds: Thresholds,
}

impl ProblemConfig {
    pub fn from_json_str(src: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(src)?)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json_str(&src)
    }

    pub fn build(&self) -> Result<Problem, ConfigError> {
        let grid = Grid::uniform(self.interval.a, self.interval.b, self.grid.intervals)?;
        let orders = |list: &[OrderConfig], side: &str| -> Result<Vec<OrderFunction>, ConfigError> {
            list.iter().enumerate().map(|(i, o)| build_order(o, &format!("orders.{side}[{i}]"))).collect()
        };
        let alphas = orders(&self.orders.left, "left")?;
        let betas = orders(&self.orders.right, "right")?;
        let lagrangian = Lagrangian::parse(&self.lagrangian.expr, self.lagrangian.num_left, self.lagrangian.num_right)
            .map_err(|e| match e {
                VariationalError::Parse(source) => ConfigError::Expr { field: "lagrangian.expr".into(), source },
                other => ConfigError::Problem(other),
            })?;
        let problem = VariationalProblem::new(
            (self.interval.a, self.interval.b),
            (self.boundary.qa, self.boundary.qb),
            alphas,
            betas,
            lagrangian,
        )?;
        problem.validate_orders(&grid)?;
        let symmetry = match &self.symmetry {
            Some(s) => Some(SymmetryGenerator::parse(&s.xi_expr).map_err(|e| match e {
                NoetherError::Parse(source) => ConfigError::Expr { field: "symmetry.xi_expr".into(), source },
                other => ConfigError::Symmetry(other),
            })?),
            None => None,
        };
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 {
            return Err(ConfigError::Invalid {
                field: "solver".into(),
                message: "tol must be positive and max_iter at least 1".into(),
            });
        }
        let t = &self.thresholds;
        if ![t.ibp, t.invariance, t.noether_relative].iter().all(|v| *v >= 0.0 && v.is_finite()) {
            return Err(ConfigError::Invalid {
                field: "thresholds".into(),
                message: "thresholds must be finite and nonnegative".into(),
            });
        }
        let solver = SolverOptions { tol: self.solver.tol, max_iter: self.solver.max_iter, ..Default::default() };
        Ok(Problem { problem, grid, symmetry, solver, thresholds: self.thresholds })
    }
}

fn build_order(o: &OrderConfig, field: &str) -> Result<OrderFunction, ConfigError> {
    let expr = dsl::parse(&o.expr, &["t", "tau"])
        .map_err(|source| ConfigError::Expr { field: format!("{field}.expr"), source })?;
    OrderFunction::from_expr(expr, o.declared_min, o.declared_max, o.n)
        .map_err(|source| ConfigError::Order { field: field.to_string(), source })
}

/// Compact JSON with every float printed to 17 significant digits, so values
/// read back bit for bit. Non-finite floats become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, ExactFloats);
    value.serialize(&mut ser).expect("serializing to memory");
    String::from_utf8(out).expect("serde_json writes UTF-8")
}

struct ExactFloats;

impl serde_json::ser::Formatter for ExactFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEMO: &str = r#"{
        "interval": {"a": 0, "b": 1},
        "boundary": {"qa": 0, "qb": 1},
        "orders": {
            "left": [{"expr": "0.5", "declared_min": 0.5, "declared_max": 0.5, "n": 4}],
            "right": [{"expr": "0.5", "declared_min": 0.5, "declared_max": 0.5}]
        },
        "lagrangian": {"expr": "0.5*d1^2 + 0.5*e1^2", "num_left": 1, "num_right": 1},
        "symmetry": {"xi_expr": "1"},
        "grid": {"N": 64}
    }"#;

    #[test]
    fn demo_builds_with_defaults() {
        let cfg = ProblemConfig::from_json_str(DEMO).unwrap();
        assert_eq!(cfg.orders.right[0].n, DEFAULT_BOUND_N);
        assert_eq!(cfg.solver, SolverConfig { tol: 1e-6, max_iter: 5000 });
        assert_eq!(cfg.thresholds, Thresholds::default());
        let p = cfg.build().unwrap();
        assert_eq!(p.grid.intervals(), 64);
        assert_eq!(p.problem.alphas[0].as_constant(), Some(0.5));
        assert!(p.symmetry.is_some());
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(ProblemConfig::from_json_str("{"), Err(ConfigError::Json(_))));
        let unknown = DEMO.replace("\"grid\"", "\"grdi\"");
        assert!(matches!(ProblemConfig::from_json_str(&unknown), Err(ConfigError::Json(_))));
        let bad_expr = DEMO.replace("0.5*d1^2", "0.5*d1**2");
        let err = ProblemConfig::from_json_str(&bad_expr).unwrap().build().unwrap_err();
        assert!(matches!(&err, ConfigError::Expr { field, .. } if field == "lagrangian.expr"), "{err}");
        let bad_order = DEMO.replacen("\"expr\": \"0.5\"", "\"expr\": \"0.9\"", 1).replacen(
            "\"declared_min\": 0.5, \"declared_max\": 0.5, \"n\": 4",
            "\"declared_min\": 0.9, \"declared_max\": 0.9, \"n\": 4",
            1,
        );
        assert!(ProblemConfig::from_json_str(&bad_order).unwrap().build().is_err());
        let small = DEMO.replace("\"N\": 64", "\"N\": 2");
        assert!(matches!(ProblemConfig::from_json_str(&small).unwrap().build(), Err(ConfigError::Grid(_))));
    }

    #[test]
    fn json_floats_round_trip() {
        #[derive(serde::Serialize)]
        struct R {
            x: f64,
            y: f64,
            z: f64,
        }
        let s = to_json(&R { x: 0.1, y: 1.0 / 3.0, z: f64::NAN });
        assert_eq!(s, r#"{"x":1.0000000000000001e-1,"y":3.3333333333333331e-1,"z":null}"#);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["y"].as_f64().unwrap(), 1.0 / 3.0);
    }
}
