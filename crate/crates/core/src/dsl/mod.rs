//! A small expression language for Lagrangians, order functions and
//! symmetry generators.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := "-" unary | power
//! power   := primary ("^" unary)?          right associative
//! primary := number | ident | func "(" expr ")" | "(" expr ")"
//! func    := sin | cos | exp | ln | abs | sqrt | sign
//! ```
//!
//! Variables are resolved against a declared list at parse time and stored as
//! slot indices, so evaluation takes a plain `&[f64]` in declaration order.

mod derive;
mod parser;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use parser::{parse, ParseError, ParseErrorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Abs,
    Sqrt,
    /// Derivative of `abs`; also accepted by the parser so printed
    /// derivatives parse back.
    Sign,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Sign => "sign",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "sign" => Func::Sign,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("no binding for variable `{0}`")]
    MissingBinding(String),
    #[error("expected {expected} variable values, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("domain error in {op}: argument {arg}")]
    Domain { op: &'static str, arg: f64 },
    #[error("`{0}` is not a declared variable")]
    UnknownVariable(String),
}

/// A parsed expression over a fixed, ordered list of variable names.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub(crate) root: Node,
    vars: Arc<[String]>,
}

impl Expr {
    pub(crate) fn from_parts(root: Node, vars: Arc<[String]>) -> Self {
        Self { root, vars }
    }

    pub fn constant(value: f64, vars: &[&str]) -> Self {
        Self::from_parts(Node::Num(value), vars.iter().map(|s| s.to_string()).collect())
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    /// Evaluates with `values[i]` bound to the `i`-th declared variable.
    pub fn eval(&self, values: &[f64]) -> Result<f64, EvalError> {
        if values.len() != self.vars.len() {
            return Err(EvalError::Arity { expected: self.vars.len(), got: values.len() });
        }
        eval_node(&self.root, values)
    }

    /// Evaluates with named bindings; every variable the expression actually
    /// uses must be bound.
    pub fn eval_named(&self, bindings: &[(&str, f64)]) -> Result<f64, EvalError> {
        let mut values = vec![f64::NAN; self.vars.len()];
        for (name, v) in bindings {
            if let Some(i) = self.var_index(name) {
                values[i] = *v;
            }
        }
        for i in self.used_vars() {
            if bindings.iter().all(|(n, _)| *n != self.vars[i]) {
                return Err(EvalError::MissingBinding(self.vars[i].clone()));
            }
        }
        eval_node(&self.root, &values)
    }

    /// Symbolic partial derivative with respect to a declared variable.
    pub fn differentiate(&self, var: &str) -> Result<Expr, EvalError> {
        let slot = self.var_index(var).ok_or_else(|| EvalError::UnknownVariable(var.into()))?;
        Ok(Self::from_parts(derive::derivative(&self.root, slot), self.vars.clone()))
    }

    /// The literal value if the expression contains no variables.
    pub fn as_constant(&self) -> Option<f64> {
        if self.used_vars().is_empty() {
            eval_node(&self.root, &vec![0.0; self.vars.len()]).ok()
        } else {
            None
        }
    }

    pub fn depends_on(&self, var: &str) -> bool {
        self.var_index(var).is_some_and(|i| self.used_vars().contains(&i))
    }

    fn used_vars(&self) -> Vec<usize> {
        let mut out = Vec::new();
        collect_vars(&self.root, &mut out);
        out.sort_unstable();
        out.dedup();
        out
    }
}

fn collect_vars(node: &Node, out: &mut Vec<usize>) {
    match node {
        Node::Num(_) => {}
        Node::Var(i) => out.push(*i),
        Node::Neg(x) | Node::Call(_, x) => collect_vars(x, out),
        Node::Bin(_, l, r) => {
            collect_vars(l, out);
            collect_vars(r, out);
        }
    }
}

/// A literal exponent: a number, possibly negated.
fn literal_value(node: &Node) -> Option<f64> {
    match node {
        Node::Num(v) => Some(*v),
        Node::Neg(x) => literal_value(x).map(|v| -v),
        _ => None,
    }
}

fn checked(op: &'static str, arg: f64, v: f64) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::Domain { op, arg })
    }
}

fn eval_node(node: &Node, vals: &[f64]) -> Result<f64, EvalError> {
    match node {
        Node::Num(v) => Ok(*v),
        Node::Var(i) => Ok(vals[*i]),
        Node::Neg(x) => Ok(-eval_node(x, vals)?),
        Node::Bin(op, l, r) => {
            let x = eval_node(l, vals)?;
            match op {
                BinOp::Add => Ok(x + eval_node(r, vals)?),
                BinOp::Sub => Ok(x - eval_node(r, vals)?),
                BinOp::Mul => Ok(x * eval_node(r, vals)?),
                BinOp::Div => {
                    let y = eval_node(r, vals)?;
                    if y == 0.0 {
                        return Err(EvalError::Domain { op: "/", arg: y });
                    }
                    checked("/", y, x / y)
                }
                BinOp::Pow => match literal_value(r) {
                    Some(c) if c.fract() == 0.0 && c.abs() <= i32::MAX as f64 => checked("^", x, x.powi(c as i32)),
                    Some(c) => {
                        if x < 0.0 {
                            return Err(EvalError::Domain { op: "^", arg: x });
                        }
                        checked("^", x, x.powf(c))
                    }
                    None => {
                        if !(x > 0.0) {
                            return Err(EvalError::Domain { op: "^", arg: x });
                        }
                        let y = eval_node(r, vals)?;
                        checked("^", x, x.powf(y))
                    }
                },
            }
        }
        Node::Call(f, x) => {
            let x = eval_node(x, vals)?;
            match f {
                Func::Sin => Ok(x.sin()),
                Func::Cos => Ok(x.cos()),
                Func::Exp => checked("exp", x, x.exp()),
                Func::Ln => {
                    if !(x > 0.0) {
                        return Err(EvalError::Domain { op: "ln", arg: x });
                    }
                    Ok(x.ln())
                }
                Func::Abs => Ok(x.abs()),
                Func::Sqrt => {
                    if x < 0.0 {
                        return Err(EvalError::Domain { op: "sqrt", arg: x });
                    }
                    Ok(x.sqrt())
                }
                Func::Sign => Ok(if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }),
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(&self.root, &self.vars, f)
    }
}

fn write_node(node: &Node, vars: &[String], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match node {
        Node::Num(v) if *v < 0.0 => write!(f, "(-{:?})", -v),
        Node::Num(v) => write!(f, "{v:?}"),
        Node::Var(i) => f.write_str(&vars[*i]),
        Node::Neg(x) => {
            f.write_str("(-")?;
            write_node(x, vars, f)?;
            f.write_str(")")
        }
        Node::Bin(op, l, r) => {
            let sym = match op {
                BinOp::Add => "+",
                BinOp::Sub => "-",
                BinOp::Mul => "*",
                BinOp::Div => "/",
                BinOp::Pow => "^",
            };
            f.write_str("(")?;
            write_node(l, vars, f)?;
            write!(f, " {sym} ")?;
            write_node(r, vars, f)?;
            f.write_str(")")
        }
        Node::Call(func, x) => {
            write!(f, "{}(", func.name())?;
            write_node(x, vars, f)?;
            f.write_str(")")
        }
    }
}
