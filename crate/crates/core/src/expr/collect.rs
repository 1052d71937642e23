//! Like-term collection: rewrites an expression as a linear combination of
//! non-constant terms plus a constant, merging terms that print identically.
//!
//! Only the linear structure is touched. Products, quotients, powers and
//! calls are kept as opaque terms after collecting their operands. A merged
//! coefficient that is pure round-off (|c| ≤ 16ε·Σ|contributions|) is dropped.

use std::collections::HashMap;

use super::{Expr, Node};

#[derive(Default)]
struct LinComb {
    constant: f64,
    constant_mag: f64,
    terms: Vec<Term>,
    index: HashMap<String, usize>,
}

struct Term {
    expr: Expr,
    coeff: f64,
    mag: f64,
}

impl LinComb {
    fn constant(c: f64) -> LinComb {
        LinComb { constant: c, constant_mag: c.abs(), ..LinComb::default() }
    }

    fn atom(e: Expr) -> LinComb {
        let mut out = LinComb::default();
        out.push(e, 1.0);
        out
    }

    fn push(&mut self, e: Expr, c: f64) {
        let key = e.to_string();
        match self.index.get(&key) {
            Some(&i) => {
                self.terms[i].coeff += c;
                self.terms[i].mag += c.abs();
            }
            None => {
                self.index.insert(key, self.terms.len());
                self.terms.push(Term { expr: e, coeff: c, mag: c.abs() });
            }
        }
    }

    fn merge(&mut self, other: LinComb, k: f64) {
        self.constant += k * other.constant;
        self.constant_mag += (k * other.constant_mag).abs();
        for t in other.terms {
            self.push(t.expr, k * t.coeff);
        }
    }

    fn scaled(mut self, k: f64) -> LinComb {
        self.constant *= k;
        self.constant_mag *= k.abs();
        for t in &mut self.terms {
            t.coeff *= k;
            t.mag *= k.abs();
        }
        self
    }

    fn live_terms(&self) -> impl Iterator<Item = &Term> {
        self.terms.iter().filter(|t| !negligible(t.coeff, t.mag))
    }

    fn constant_value(&self) -> Option<f64> {
        if self.live_terms().next().is_some() {
            return None;
        }
        Some(if negligible(self.constant, self.constant_mag) { 0.0 } else { self.constant })
    }

    /// `(c, t)` when the combination is exactly `c * t` with no constant part.
    fn single(&self) -> Option<(f64, Expr)> {
        let mut live = self.live_terms();
        let first = live.next()?;
        if live.next().is_some() || !negligible(self.constant, self.constant_mag) {
            return None;
        }
        Some((first.coeff, first.expr.clone()))
    }

    fn build(&self) -> Expr {
        let mut acc: Option<Expr> = None;
        let mut add = |c: f64, t: Option<&Expr>| {
            let magnitude = match t {
                Some(t) => Expr::mul(Expr::constant(c.abs()), t.clone()),
                None => Expr::constant(c.abs()),
            };
            acc = Some(match acc.take() {
                None if c < 0.0 => Expr::neg(magnitude),
                None => magnitude,
                Some(prev) if c < 0.0 => Expr::sub(prev, magnitude),
                Some(prev) => Expr::add(prev, magnitude),
            });
        };
        if !negligible(self.constant, self.constant_mag) {
            add(self.constant, None);
        }
        for t in self.live_terms() {
            add(t.coeff, Some(&t.expr));
        }
        acc.unwrap_or_else(Expr::zero)
    }
}

fn negligible(c: f64, mag: f64) -> bool {
    c == 0.0 || c.abs() <= 16.0 * f64::EPSILON * mag
}

fn lin(e: &Expr) -> LinComb {
    match e.node() {
        Node::Const(c) => LinComb::constant(*c),
        Node::Var(_) => LinComb::atom(e.clone()),
        Node::Add(a, b) => {
            let mut l = lin(a);
            l.merge(lin(b), 1.0);
            l
        }
        Node::Sub(a, b) => {
            let mut l = lin(a);
            l.merge(lin(b), -1.0);
            l
        }
        Node::Neg(a) => lin(a).scaled(-1.0),
        Node::Mul(a, b) => {
            let la = lin(a);
            let lb = lin(b);
            if let Some(k) = la.constant_value() {
                return lb.scaled(k);
            }
            if let Some(k) = lb.constant_value() {
                return la.scaled(k);
            }
            match (la.single(), lb.single()) {
                (Some((ca, ta)), Some((cb, tb))) => {
                    let mut out = LinComb::default();
                    out.push(Expr::mul(ta, tb), ca * cb);
                    out
                }
                (Some((ca, ta)), None) => {
                    let mut out = LinComb::default();
                    out.push(Expr::mul(ta, lb.build()), ca);
                    out
                }
                (None, Some((cb, tb))) => {
                    let mut out = LinComb::default();
                    out.push(Expr::mul(la.build(), tb), cb);
                    out
                }
                (None, None) => LinComb::atom(Expr::mul(la.build(), lb.build())),
            }
        }
        Node::Div(a, b) => {
            let la = lin(a);
            let lb = lin(b);
            match lb.constant_value() {
                Some(k) if k != 0.0 => la.scaled(1.0 / k),
                _ => match la.single() {
                    Some((ca, ta)) => {
                        let mut out = LinComb::default();
                        out.push(Expr::div(ta, lb.build()), ca);
                        out
                    }
                    None => match la.constant_value() {
                        Some(k) if k != 0.0 => {
                            let mut out = LinComb::default();
                            out.push(Expr::div(Expr::one(), lb.build()), k);
                            out
                        }
                        _ => LinComb::atom(Expr::div(la.build(), lb.build())),
                    },
                },
            }
        }
        Node::Pow(a, n) => {
            let la = lin(a);
            if let Some(k) = la.constant_value() {
                if k != 0.0 || *n >= 0 {
                    return LinComb::constant(k.powi(*n));
                }
            }
            LinComb::atom(Expr::pow(la.build(), *n))
        }
        Node::Call(f, a) => {
            let la = lin(a);
            match la.constant_value() {
                Some(k) => LinComb::constant(f.apply(k)),
                None => LinComb::atom(Expr::call(*f, la.build())),
            }
        }
    }
}

impl Expr {
    /// Collects like terms. Evaluates equal to `self` up to round-off
    /// wherever `self` evaluates without error.
    ///
    /// Cost is proportional to the expanded tree size; callers holding large
    /// shared DAGs should check [`Expr::tree_size`] first.
    pub fn collect(&self) -> Expr {
        lin(self).build()
    }
}
