//! Precedence-aware printing. The output reparses to the same tree, up to
//! folding of negated literals.

use std::fmt;

use super::{Expr, Node};

const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e.node() {
        Node::Const(c) if c.is_sign_negative() => PREC_UNARY,
        Node::Const(_) | Node::Var(_) | Node::Call(..) => PREC_ATOM,
        Node::Add(..) | Node::Sub(..) => PREC_SUM,
        Node::Mul(..) | Node::Div(..) => PREC_PRODUCT,
        Node::Neg(_) => PREC_UNARY,
        Node::Pow(..) => 4,
    }
}

fn child(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if precedence(e) >= min_prec {
        write!(f, "{e}")
    } else {
        write!(f, "({e})")
    }
}

fn binary(f: &mut fmt::Formatter<'_>, a: &Expr, op: &str, b: &Expr, prec: u8) -> fmt::Result {
    child(f, a, prec)?;
    f.write_str(op)?;
    child(f, b, prec + 1)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => write!(f, "{c}"),
            Node::Var(i) => write!(f, "x{}", i + 1),
            Node::Add(a, b) => binary(f, a, "+", b, PREC_SUM),
            Node::Sub(a, b) => binary(f, a, "-", b, PREC_SUM),
            Node::Mul(a, b) => binary(f, a, "*", b, PREC_PRODUCT),
            Node::Div(a, b) => binary(f, a, "/", b, PREC_PRODUCT),
            Node::Neg(a) => {
                f.write_str("-")?;
                child(f, a, PREC_UNARY)
            }
            Node::Pow(a, n) => {
                child(f, a, PREC_ATOM)?;
                if *n < 0 {
                    write!(f, "^({n})")
                } else {
                    write!(f, "^{n}")
                }
            }
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}
