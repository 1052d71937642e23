//! Exact symbolic differentiation.

use std::collections::HashMap;

use super::{Expr, Func, Node};

impl Expr {
    /// Partial derivative with respect to the zero-based `axis`.
    ///
    /// Shared sub-expressions are differentiated once; the result shares
    /// structure with `self`.
    pub fn differentiate(&self, axis: usize) -> Expr {
        let mut memo = HashMap::new();
        d(self, axis, &mut memo)
    }
}

fn d(e: &Expr, axis: usize, memo: &mut HashMap<usize, Expr>) -> Expr {
    if let Some(hit) = memo.get(&e.ptr_id()) {
        return hit.clone();
    }
    let out = match e.node() {
        Node::Const(_) => Expr::zero(),
        Node::Var(i) => {
            if *i == axis {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Add(a, b) => Expr::add(d(a, axis, memo), d(b, axis, memo)),
        Node::Sub(a, b) => Expr::sub(d(a, axis, memo), d(b, axis, memo)),
        Node::Mul(a, b) => {
            let da = d(a, axis, memo);
            let db = d(b, axis, memo);
            Expr::add(Expr::mul(da, b.clone()), Expr::mul(a.clone(), db))
        }
        Node::Div(a, b) => {
            let da = d(a, axis, memo);
            let db = d(b, axis, memo);
            if db.is_zero() {
                Expr::div(da, b.clone())
            } else {
                let num = Expr::sub(Expr::mul(da, b.clone()), Expr::mul(a.clone(), db));
                Expr::div(num, Expr::pow(b.clone(), 2))
            }
        }
        Node::Neg(a) => Expr::neg(d(a, axis, memo)),
        Node::Pow(a, n) => {
            let da = d(a, axis, memo);
            if da.is_zero() {
                Expr::zero()
            } else {
                let outer = Expr::mul(Expr::constant(f64::from(*n)), Expr::pow(a.clone(), n - 1));
                chain(outer, da)
            }
        }
        Node::Call(func, a) => {
            let da = d(a, axis, memo);
            if da.is_zero() {
                Expr::zero()
            } else {
                match func {
                    Func::Sin => chain(Expr::cos(a.clone()), da),
                    Func::Cos => Expr::neg(chain(Expr::sin(a.clone()), da)),
                    Func::Exp => chain(e.clone(), da),
                    Func::Atan => {
                        Expr::div(da, Expr::add(Expr::one(), Expr::pow(a.clone(), 2)))
                    }
                }
            }
        }
    };
    memo.insert(e.ptr_id(), out.clone());
    out
}

/// `outer * inner`, absorbing a reciprocal `inner = 1/q` into a quotient.
fn chain(outer: Expr, inner: Expr) -> Expr {
    if let Node::Div(n, q) = inner.node() {
        if n.is_one() {
            return Expr::div(outer, q.clone());
        }
    }
    Expr::mul(outer, inner)
}
