//! Symbolic scalar functions of the tangential variables `x' = (x1, ..., x{N-1})`.
//!
//! The grammar is closed: constants, variables, `+ - * /`, integer powers and
//! the unary functions `sin`, `cos`, `atan`, `exp`. Every derivative of an
//! [`Expr`] is again an [`Expr`], and evaluation is a plain tree walk.
//!
//! Expressions are immutable and reference counted, so cloning is cheap and
//! sub-expressions can be shared freely between threads.

mod collect;
mod diff;
mod grid;
mod parse;
mod print;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use grid::{sample_expr, BoxGrid, ExprGridProfile, SampleError};
pub use parse::{parse_expr, ParseError, ParseErrorKind};

/// Unary functions of the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Atan,
    Exp,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Atan => "atan",
            Func::Exp => "exp",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "atan" => Some(Func::Atan),
            "exp" => Some(Func::Exp),
            _ => None,
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Atan => x.atan(),
            Func::Exp => x.exp(),
        }
    }
}

/// One node of an expression tree. Variables are zero-based axes; `Var(0)`
/// prints as `x1`.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Neg(Expr),
    Pow(Expr, i32),
    Call(Func, Expr),
}

/// Shared, immutable expression. Equality is structural.
#[derive(Clone, PartialEq)]
pub struct Expr(Arc<Node>);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero in `{at}`")]
    DivisionByZero { at: String },
    #[error("non-finite value produced by `{at}`")]
    NonFinite { at: String },
    #[error("variable x{} is not bound (point has {len} coordinates)", .index + 1)]
    UnboundVariable { index: usize, len: usize },
}

impl Expr {
    /// Wraps a node without any simplification.
    pub fn raw(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(c: f64) -> Expr {
        Expr::raw(Node::Const(c))
    }

    pub fn zero() -> Expr {
        Expr::constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::constant(1.0)
    }

    /// Variable on the zero-based `axis`.
    pub fn var(axis: usize) -> Expr {
        Expr::raw(Node::Var(axis))
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    pub(crate) fn ptr_id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    // Smart constructors: constant folding and 0/1 identities, nothing more.

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => fold(x + y).unwrap_or_else(|| Expr::raw(Node::Add(a, b))),
            (Some(x), _) if x == 0.0 => b,
            (_, Some(y)) if y == 0.0 => a,
            _ => Expr::raw(Node::Add(a, b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => fold(x - y).unwrap_or_else(|| Expr::raw(Node::Sub(a, b))),
            (_, Some(y)) if y == 0.0 => a,
            (Some(x), _) if x == 0.0 => Expr::neg(b),
            _ => Expr::raw(Node::Sub(a, b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => fold(x * y).unwrap_or_else(|| Expr::raw(Node::Mul(a, b))),
            (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::zero(),
            (Some(x), _) if x == 1.0 => b,
            (_, Some(y)) if y == 1.0 => a,
            (Some(x), _) if x == -1.0 => Expr::neg(b),
            (_, Some(y)) if y == -1.0 => Expr::neg(a),
            _ => Expr::raw(Node::Mul(a, b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != 0.0 => {
                fold(x / y).unwrap_or_else(|| Expr::raw(Node::Div(a, b)))
            }
            (_, Some(y)) if y == 1.0 => a,
            (Some(x), _) if x == 0.0 && !b.is_zero() => Expr::zero(),
            _ => Expr::raw(Node::Div(a, b)),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match &*a.0 {
            Node::Const(c) => Expr::constant(-c),
            Node::Neg(inner) => inner.clone(),
            _ => Expr::raw(Node::Neg(a)),
        }
    }

    pub fn pow(a: Expr, n: i32) -> Expr {
        match (n, a.as_const()) {
            (0, _) => Expr::one(),
            (1, _) => a,
            (_, Some(x)) if !(x == 0.0 && n < 0) => {
                fold(x.powi(n)).unwrap_or_else(|| Expr::raw(Node::Pow(a, n)))
            }
            _ => Expr::raw(Node::Pow(a, n)),
        }
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        match a.as_const() {
            Some(x) => fold(f.apply(x)).unwrap_or_else(|| Expr::raw(Node::Call(f, a))),
            None => Expr::raw(Node::Call(f, a)),
        }
    }

    pub fn sin(a: Expr) -> Expr {
        Expr::call(Func::Sin, a)
    }

    pub fn cos(a: Expr) -> Expr {
        Expr::call(Func::Cos, a)
    }

    pub fn atan(a: Expr) -> Expr {
        Expr::call(Func::Atan, a)
    }

    pub fn exp(a: Expr) -> Expr {
        Expr::call(Func::Exp, a)
    }

    /// `k * self`, folded.
    pub fn scale(&self, k: f64) -> Expr {
        Expr::mul(Expr::constant(k), self.clone())
    }

    /// Evaluates at `point`, where `point[i]` is the value of `x{i+1}`.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        let v = match &*self.0 {
            Node::Const(c) => return Ok(*c),
            Node::Var(i) => {
                return point.get(*i).copied().ok_or(EvalError::UnboundVariable {
                    index: *i,
                    len: point.len(),
                })
            }
            Node::Add(a, b) => a.eval(point)? + b.eval(point)?,
            Node::Sub(a, b) => a.eval(point)? - b.eval(point)?,
            Node::Mul(a, b) => a.eval(point)? * b.eval(point)?,
            Node::Div(a, b) => {
                let num = a.eval(point)?;
                let den = b.eval(point)?;
                if den == 0.0 {
                    return Err(EvalError::DivisionByZero { at: self.to_string() });
                }
                num / den
            }
            Node::Neg(a) => -a.eval(point)?,
            Node::Pow(a, n) => {
                let base = a.eval(point)?;
                if base == 0.0 && *n < 0 {
                    return Err(EvalError::DivisionByZero { at: self.to_string() });
                }
                base.powi(*n)
            }
            Node::Call(f, a) => f.apply(a.eval(point)?),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite { at: self.to_string() })
        }
    }

    /// Largest zero-based variable index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        match &*self.0 {
            Node::Const(_) => None,
            Node::Var(i) => Some(*i),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                match (a.max_var(), b.max_var()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                }
            }
            Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => a.max_var(),
        }
    }

    /// True when no variable occurs, i.e. the expression is a constant
    /// (possibly not yet folded).
    pub fn is_variable_free(&self) -> bool {
        self.max_var().is_none()
    }

    /// Number of nodes when the expression is expanded as a tree. Saturates
    /// at `cap` so the count stays cheap on heavily shared DAGs.
    pub fn tree_size(&self, cap: usize) -> usize {
        fn walk(e: &Expr, acc: &mut usize, cap: usize) {
            if *acc >= cap {
                return;
            }
            *acc += 1;
            match e.node() {
                Node::Const(_) | Node::Var(_) => {}
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                    walk(a, acc, cap);
                    walk(b, acc, cap);
                }
                Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => walk(a, acc, cap),
            }
        }
        let mut acc = 0;
        walk(self, &mut acc, cap);
        acc.min(cap)
    }
}

fn fold(v: f64) -> Option<Expr> {
    v.is_finite().then(|| Expr::constant(v))
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Expr {
        Expr::constant(c)
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::add(self, rhs)
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::mul(self, rhs)
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::div(self, rhs)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl serde::Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}
