//! Equations satisfied by the x_N-Fourier coefficients of a solution:
//!
//! ```text
//! L a_m = (m²−1) a_m + c_m + (1/π)(u_N(·,0) − u_N(·,2π))     m ≥ 0
//! L b_m = (m²−1) b_m + d_m + (m/π) u(·,2π)                    m ≥ 1
//! ```
//!
//! with `L = div′(Â∇′·)`, plus the sign tests that discharge the trace terms.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{sample_expr, BoxGrid, Expr, Node, SampleError};
use crate::fourier::Kind;
use crate::model::{DiffusionMatrix, ProblemSpec, TrigSeries};

pub const RULE_D1: &str = "R-D1-POS";
pub const RULE_C1: &str = "R-C1-POS";
pub const RULE_ASSUMED: &str = "ASSUMED-BASE-STEP";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error("source has mode {mode} but the system was requested up to mode {max_mode}")]
    ModeBound { mode: u32, max_mode: u32 },
    #[error(transparent)]
    Sample(#[from] SampleError),
}

/// `div′(Â ∇′ e) = Σ_i ∂_i (Σ_j a_ij ∂_j e)`.
pub fn apply_div_form(a: &DiffusionMatrix, e: &Expr) -> Expr {
    let n = a.size();
    let grads: Vec<Expr> = (0..n).map(|j| e.differentiate(j)).collect();
    let mut out = Expr::zero();
    for i in 0..n {
        let mut flux = Expr::zero();
        for (j, g) in grads.iter().enumerate() {
            flux = Expr::add(flux, Expr::mul(a.entry(i, j).clone(), g.clone()));
        }
        out = Expr::add(out, flux.differentiate(i));
    }
    out
}

/// `c_m = (1/π)∫₀^{2π} g cos(m x_N)`, including the affine term
/// (`(1/π)∫₀^{2π} x_N dx_N = 2π`, orthogonal to `cos(m x_N)` for `m ≥ 1`).
pub fn strip_cos(g: &TrigSeries, m: u32) -> Expr {
    match (m, g.affine()) {
        (0, Some(alpha)) => Expr::add(g.cos(0), alpha.scale(2.0 * PI)),
        _ => g.cos(m),
    }
}

/// `d_m = (1/π)∫₀^{2π} g sin(m x_N)`, including the affine term
/// (`(1/π)∫₀^{2π} x_N sin(m x_N) dx_N = −2/m`).
pub fn strip_sin(g: &TrigSeries, m: u32) -> Expr {
    match g.affine() {
        Some(alpha) => Expr::add(g.sin(m), alpha.scale(-2.0 / f64::from(m))),
        None => g.sin(m),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceTerm {
    /// `(1/π)(u_N(·,0) − u_N(·,2π))`
    Flux,
    /// `(m/π) u(·,2π)`
    Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TraceStatus {
    Unknown,
    ProvenZero { rule: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientEquation {
    pub mode: u32,
    pub kind: Kind,
    /// `m² − 1`.
    pub lambda: f64,
    /// `c_m` or `d_m`.
    pub source: Expr,
    pub trace: TraceTerm,
    /// `1/π` for the flux term, `m/π` for the value term.
    pub trace_factor: f64,
    pub trace_status: TraceStatus,
}

impl CoefficientEquation {
    /// Pointwise residual `L v − (m²−1) v − source` for a candidate coefficient
    /// `v`, valid once the trace is proven zero.
    pub fn residual(&self, a: &DiffusionMatrix, v: &Expr) -> Expr {
        Expr::sub(
            apply_div_form(a, v),
            Expr::add(v.scale(self.lambda), self.source.clone()),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientSystem {
    pub max_mode: u32,
    pub equations: Vec<CoefficientEquation>,
}

impl CoefficientSystem {
    pub fn equation(&self, kind: Kind, mode: u32) -> Option<&CoefficientEquation> {
        self.equations.iter().find(|e| e.kind == kind && e.mode == mode)
    }

    fn mark(&mut self, kind: Kind, rule: &str) {
        for e in self.equations.iter_mut().filter(|e| e.kind == kind) {
            e.trace_status = TraceStatus::ProvenZero { rule: rule.to_string() };
        }
    }

    pub fn all_traces_zero(&self) -> bool {
        self.equations.iter().all(|e| e.trace_status != TraceStatus::Unknown)
    }
}

/// Cos equations for `m = 0..=M` and sin equations for `m = 1..=M`, traces unknown.
pub fn build_system(p: &ProblemSpec, max_mode: u32) -> Result<CoefficientSystem, SystemError> {
    let g = &p.source;
    if g.max_mode() > max_mode {
        return Err(SystemError::ModeBound { mode: g.max_mode(), max_mode });
    }
    let mut equations = Vec::new();
    for m in 0..=max_mode {
        equations.push(CoefficientEquation {
            mode: m,
            kind: Kind::Cos,
            lambda: f64::from(m * m) - 1.0,
            source: strip_cos(g, m),
            trace: TraceTerm::Flux,
            trace_factor: 1.0 / PI,
            trace_status: TraceStatus::Unknown,
        });
    }
    for m in 1..=max_mode {
        equations.push(CoefficientEquation {
            mode: m,
            kind: Kind::Sin,
            lambda: f64::from(m * m) - 1.0,
            source: strip_sin(g, m),
            trace: TraceTerm::Value,
            trace_factor: f64::from(m) / PI,
            trace_status: TraceStatus::Unknown,
        });
    }
    Ok(CoefficientSystem { max_mode, equations })
}

/// Which boundary traces of a solution are known to vanish.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct TraceAssumption {
    pub u_at_2pi_zero: bool,
    pub un_at_0_zero: bool,
    pub un_at_2pi_zero: bool,
    pub rules: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("u(.,2pi) = 0 for a nonnegative u forces u_N(.,2pi) = 0; the assumption must set both")]
pub struct TraceAssumptionError;

impl TraceAssumption {
    pub fn new(u_at_2pi_zero: bool, un_at_0_zero: bool, un_at_2pi_zero: bool) -> Result<TraceAssumption, TraceAssumptionError> {
        if u_at_2pi_zero && !un_at_2pi_zero {
            return Err(TraceAssumptionError);
        }
        Ok(TraceAssumption { u_at_2pi_zero, un_at_0_zero, un_at_2pi_zero, rules: Vec::new() })
    }

    pub fn base_step(&self) -> bool {
        self.u_at_2pi_zero && self.un_at_0_zero && self.un_at_2pi_zero
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignClass {
    /// `|e| ≤ τ` everywhere sampled.
    Zero,
    /// `e ≥ −τ` everywhere and `e > 10τ` somewhere.
    NonNegative,
    /// `e ≥ −τ` everywhere and `τ < max e ≤ 10τ`: too close to call.
    Borderline,
    /// `e < −τ` somewhere and `e ≤ τ` everywhere.
    NonPositive,
    /// Both signs beyond τ.
    Indefinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceLevel {
    /// Exact: the expression is a literal constant.
    Exact,
    /// Recognized as nonnegative from its form; magnitude from the grid.
    Symbolic,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignEvidence {
    pub expr: String,
    pub class: SignClass,
    pub level: EvidenceLevel,
    pub min: f64,
    pub max: f64,
    pub argmin: Vec<f64>,
    pub argmax: Vec<f64>,
    pub tol: f64,
}

fn classify_range(min: f64, max: f64, tol: f64) -> SignClass {
    if min < -tol {
        if max > tol {
            SignClass::Indefinite
        } else {
            SignClass::NonPositive
        }
    } else if max <= tol {
        SignClass::Zero
    } else if max > 10.0 * tol {
        SignClass::NonNegative
    } else {
        SignClass::Borderline
    }
}

/// Nonnegativity visible from the form: literal constants, even powers,
/// exponentials, and sums, products and quotients of those.
pub fn evidently_nonnegative(e: &Expr) -> bool {
    match e.node() {
        Node::Const(c) => *c >= 0.0,
        Node::Pow(a, n) => n % 2 == 0 || evidently_nonnegative(a),
        Node::Call(crate::expr::Func::Exp, _) => true,
        Node::Add(a, b) | Node::Mul(a, b) | Node::Div(a, b) => evidently_nonnegative(a) && evidently_nonnegative(b),
        _ => false,
    }
}

/// Sign class of `e` on `grid` with tolerance `tol`.
pub fn sign_evidence(e: &Expr, grid: &BoxGrid, tol: f64) -> Result<SignEvidence, SampleError> {
    if e.is_variable_free() {
        let v = e.eval(&vec![0.0; grid.dim()]).map_err(|source| SampleError::Eval { point: vec![0.0; grid.dim()], source })?;
        let origin = vec![0.0; grid.dim()];
        return Ok(SignEvidence {
            expr: e.to_string(),
            class: classify_range(v, v, tol),
            level: EvidenceLevel::Exact,
            min: v,
            max: v,
            argmin: origin.clone(),
            argmax: origin,
            tol,
        });
    }
    let prof = sample_expr(e, grid)?;
    let level = if evidently_nonnegative(e) { EvidenceLevel::Symbolic } else { EvidenceLevel::Grid };
    let min = if level == EvidenceLevel::Symbolic { prof.min.max(0.0) } else { prof.min };
    Ok(SignEvidence {
        expr: e.to_string(),
        class: classify_range(min, prof.max, tol),
        level,
        min: prof.min,
        max: prof.max,
        argmin: prof.argmin,
        argmax: prof.argmax,
        tol,
    })
}

/// A necessary condition whose failure rules out solutions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonExistenceSignal {
    pub rule: &'static str,
    pub reason: String,
    pub evidence: SignEvidence,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Discharge {
    pub system: CoefficientSystem,
    pub assumption: TraceAssumption,
    pub d1: Option<SignEvidence>,
    pub c1: Option<SignEvidence>,
    pub nonexistence: Option<NonExistenceSignal>,
    /// Reasons why some trace stays unknown.
    pub obstructions: Vec<String>,
}

/// Discharges trace terms in the order d₁ then c₁:
///
/// * `d₁ ≡ 0` gives `u(·,2π) ≡ 0` and `u_N(·,2π) ≡ 0`; `d₁ ≥ 0`, `d₁ ≢ 0` rules out solutions;
/// * given `d₁ ≡ 0`, `c₁ ≡ 0` gives `u_N(·,0) ≡ 0`; `c₁ ≥ 0`, `c₁ ≢ 0` rules out solutions.
///
/// Both steps rely on uniqueness of bounded solutions, valid only for N ∈ {2, 3}. For
/// N ≥ 4, or for any trace left unknown, the caller's base-step assertion
/// is used when present.
pub fn discharge_traces(mut system: CoefficientSystem, p: &ProblemSpec) -> Result<Discharge, SystemError> {
    let grid = p.verification.xp_grid();
    let tol = p.tolerances.zero;
    let mut assumption = TraceAssumption::default();
    let mut obstructions = Vec::new();
    let mut nonexistence = None;
    let (mut d1, mut c1) = (None, None);

    if p.dimension <= 3 {
        let ev = sign_evidence(&strip_sin(&p.source, 1), &grid, tol)?;
        match ev.class {
            SignClass::Zero => {
                assumption.u_at_2pi_zero = true;
                assumption.un_at_2pi_zero = true;
                assumption.rules.push(RULE_D1.into());
                system.mark(Kind::Sin, RULE_D1);
            }
            SignClass::NonNegative => {
                nonexistence = Some(NonExistenceSignal {
                    rule: RULE_D1,
                    reason: format!("d1 >= 0 and d1 is not identically zero (max {:e} at x'={:?})", ev.max, ev.argmax),
                    evidence: ev.clone(),
                });
            }
            SignClass::Borderline => obstructions.push(format!(
                "d1 is nonnegative but its maximum {:e} is within 10*tol_zero; cannot decide d1 = 0",
                ev.max
            )),
            SignClass::NonPositive | SignClass::Indefinite => obstructions.push(format!(
                "sign-indefinite d1: min {:e} at x'={:?}",
                ev.min, ev.argmin
            )),
        }
        let d1_zero = ev.class == SignClass::Zero;
        d1 = Some(ev);

        if d1_zero {
            let ev = sign_evidence(&strip_cos(&p.source, 1), &grid, tol)?;
            match ev.class {
                SignClass::Zero => {
                    assumption.un_at_0_zero = true;
                    assumption.rules.push(RULE_C1.into());
                    system.mark(Kind::Cos, RULE_C1);
                }
                SignClass::NonNegative => {
                    nonexistence = Some(NonExistenceSignal {
                        rule: RULE_C1,
                        reason: format!("d1 = 0, c1 >= 0 and c1 is not identically zero (max {:e} at x'={:?})", ev.max, ev.argmax),
                        evidence: ev.clone(),
                    });
                }
                SignClass::Borderline => obstructions.push(format!(
                    "c1 is nonnegative but its maximum {:e} is within 10*tol_zero; cannot decide c1 = 0",
                    ev.max
                )),
                SignClass::NonPositive | SignClass::Indefinite => obstructions.push(format!(
                    "sign-indefinite c1: min {:e} at x'={:?}",
                    ev.min, ev.argmin
                )),
            }
            c1 = Some(ev);
        } else if nonexistence.is_none() {
            obstructions.push("c1 step skipped: it presumes d1 = 0".into());
        }
    } else {
        obstructions.push(format!(
            "dimension {} >= 4: traces are not discharged without an explicit base-step assumption",
            p.dimension
        ));
    }

    if nonexistence.is_none() && !system.all_traces_zero() && p.assume_base_step {
        assumption.u_at_2pi_zero = true;
        assumption.un_at_2pi_zero = true;
        assumption.un_at_0_zero = true;
        assumption.rules.push(RULE_ASSUMED.into());
        for e in system.equations.iter_mut().filter(|e| e.trace_status == TraceStatus::Unknown) {
            e.trace_status = TraceStatus::ProvenZero { rule: RULE_ASSUMED.into() };
        }
        obstructions.clear();
    }

    Ok(Discharge { system, assumption, d1, c1, nonexistence, obstructions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    fn p1(s: &str) -> Expr {
        parse_expr(s, 1).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * (1.0 + b.abs())
    }

    #[test]
    fn div_form_examples() {
        let id = DiffusionMatrix::identity(1);
        let r = apply_div_form(&id, &p1("cos(x1)"));
        for x in [-1.0, 0.3, 2.0] {
            assert!(close(r.eval(&[x]).unwrap(), -(x as f64).cos()));
        }

        let a = DiffusionMatrix::scalar(p1("1+0.5*sin(x1)")).unwrap();
        let r = apply_div_form(&a, &p1("x1"));
        for x in [-1.0, 0.3, 2.0] {
            assert!(close(r.eval(&[x]).unwrap(), 0.5 * (x as f64).cos()));
        }

        let id2 = DiffusionMatrix::identity(2);
        let r = apply_div_form(&id2, &parse_expr("x1^2+x2^2", 2).unwrap());
        assert_eq!(r.eval(&[0.7, -3.0]).unwrap(), 4.0);
    }

    #[test]
    fn div_form_matches_finite_differences() {
        let a = DiffusionMatrix::scalar(p1("2+cos(x1)")).unwrap();
        let e = p1("atan(x1)^2*exp(-x1^2)");
        let r = apply_div_form(&a, &e);
        let flux = |x: f64| {
            let h = 1e-5;
            (2.0 + x.cos()) * (e.eval(&[x + h]).unwrap() - e.eval(&[x - h]).unwrap()) / (2.0 * h)
        };
        for x in [-1.2, 0.1, 0.9] {
            let h = 1e-4;
            let fd = (flux(x + h) - flux(x - h)) / (2.0 * h);
            assert!((r.eval(&[x]).unwrap() - fd).abs() < 1e-5, "{x}: {} vs {fd}", r.eval(&[x]).unwrap());
        }
    }

    fn spec(cos: &[(u32, f64)], sin: &[(u32, f64)]) -> ProblemSpec {
        ProblemSpec::with_identity(2, TrigSeries::from_values(cos, sin)).unwrap()
    }

    #[test]
    fn system_for_constant_source() {
        let p = spec(&[(0, 2.0)], &[]);
        let s = build_system(&p, 3).unwrap();
        let e1 = s.equation(Kind::Cos, 1).unwrap();
        assert_eq!(e1.lambda, 0.0);
        assert!(e1.source.is_zero());
        assert_eq!(e1.trace, TraceTerm::Flux);
        let e0 = s.equation(Kind::Cos, 0).unwrap();
        assert_eq!(e0.lambda, -1.0);
        assert_eq!(e0.source.as_const(), Some(2.0));
        let s2 = s.equation(Kind::Sin, 2).unwrap();
        assert_eq!(s2.lambda, 3.0);
        assert!(s2.source.is_zero());
        assert_eq!(s2.trace, TraceTerm::Value);
        assert!(close(s2.trace_factor, 2.0 / PI));
    }

    #[test]
    fn system_for_one_dimensional_source() {
        let p = spec(&[(0, 2.0 / 3.0), (2, 1.0)], &[]);
        let s = build_system(&p, 2).unwrap();
        let e2 = s.equation(Kind::Cos, 2).unwrap();
        assert_eq!((e2.lambda, e2.source.as_const()), (3.0, Some(1.0)));
        assert!(matches!(build_system(&p, 1), Err(SystemError::ModeBound { mode: 2, .. })));
    }

    #[test]
    fn exact_solution_satisfies_the_equations() {
        // u = atan(x1)^2 (1 - cos 2xN) for the matching source; traces vanish.
        let t = p1("atan(x1)^2");
        let d2 = apply_div_form(&DiffusionMatrix::identity(1), &t);
        let mut g = TrigSeries::new();
        g.set_cos(0, Expr::add(d2.scale(2.0), t.scale(2.0)));
        g.set_cos(2, Expr::sub(t.scale(3.0), d2.clone()));
        let p = ProblemSpec::with_identity(2, g).unwrap();
        let s = build_system(&p, 2).unwrap();
        let u = TrigSeries::from_modes([(0, t.scale(2.0)), (2, Expr::neg(t.clone()))], []).unwrap();
        for eq in &s.equations {
            let coeff = match eq.kind {
                Kind::Cos => u.cos(eq.mode),
                Kind::Sin => u.sin(eq.mode),
            };
            let r = eq.residual(&p.diffusion, &coeff);
            for x in [-3.0, -0.4, 0.0, 1.1, 3.7] {
                assert!(r.eval(&[x]).unwrap().abs() < 1e-10, "mode {} {:?}", eq.mode, eq.kind);
            }
        }
    }

    #[test]
    fn strip_coefficients_of_affine_term() {
        let mut g = TrigSeries::new();
        g.set_affine(Some(Expr::one()));
        assert!(close(strip_cos(&g, 0).as_const().unwrap(), 2.0 * PI));
        assert!(strip_cos(&g, 3).is_zero());
        assert_eq!(strip_sin(&g, 1).as_const(), Some(-2.0));
        assert_eq!(strip_sin(&g, 2).as_const(), Some(-1.0));
    }

    #[test]
    fn discharge_constant_source() {
        let p = spec(&[(0, 2.0)], &[]);
        let d = discharge_traces(build_system(&p, 2).unwrap(), &p).unwrap();
        assert!(d.assumption.base_step());
        assert!(d.system.all_traces_zero());
        assert!(d.nonexistence.is_none());
    }

    #[test]
    fn discharge_positive_d1() {
        let p = spec(&[], &[(1, 1.0)]);
        let d = discharge_traces(build_system(&p, 1).unwrap(), &p).unwrap();
        assert_eq!(d.nonexistence.unwrap().rule, RULE_D1);
    }

    #[test]
    fn discharge_positive_c1() {
        let p = spec(&[(1, 1.0)], &[]);
        let d = discharge_traces(build_system(&p, 1).unwrap(), &p).unwrap();
        assert_eq!(d.nonexistence.unwrap().rule, RULE_C1);
        assert!(d.assumption.u_at_2pi_zero);
    }

    #[test]
    fn discharge_affine_source_is_obstructed() {
        let mut g = TrigSeries::new();
        g.set_affine(Some(Expr::one()));
        let p = ProblemSpec::with_identity(2, g).unwrap();
        let d = discharge_traces(build_system(&p, 1).unwrap(), &p).unwrap();
        assert!(d.nonexistence.is_none());
        assert_eq!(d.d1.as_ref().unwrap().class, SignClass::NonPositive);
        assert!(d.obstructions[0].contains("sign-indefinite d1"));
        assert!(!d.system.all_traces_zero());
    }

    #[test]
    fn discharge_borderline_and_large_dimension() {
        let p = spec(&[(0, 2.0)], &[(1, 5e-9)]);
        let d = discharge_traces(build_system(&p, 1).unwrap(), &p).unwrap();
        assert_eq!(d.d1.unwrap().class, SignClass::Borderline);
        assert!(d.nonexistence.is_none());

        let mut p4 = ProblemSpec::with_identity(4, TrigSeries::from_values(&[(0, 2.0)], &[])).unwrap();
        p4.verification.grid = 5;
        let d = discharge_traces(build_system(&p4, 1).unwrap(), &p4).unwrap();
        assert!(!d.system.all_traces_zero());
        p4.assume_base_step = true;
        let d = discharge_traces(build_system(&p4, 1).unwrap(), &p4).unwrap();
        assert!(d.system.all_traces_zero());
        assert_eq!(d.assumption.rules, vec![RULE_ASSUMED.to_string()]);
    }

    #[test]
    fn trace_assumption_consistency() {
        assert!(TraceAssumption::new(true, true, false).is_err());
        assert!(TraceAssumption::new(true, false, true).is_ok());
    }

    #[test]
    fn sign_classes() {
        let g = BoxGrid::cube(1, -4.0, 4.0, 33).unwrap();
        assert_eq!(sign_evidence(&p1("atan(x1)^2"), &g, 1e-9).unwrap().class, SignClass::NonNegative);
        assert_eq!(sign_evidence(&p1("atan(x1)^2"), &g, 1e-9).unwrap().level, EvidenceLevel::Symbolic);
        assert_eq!(sign_evidence(&p1("sin(x1)"), &g, 1e-9).unwrap().class, SignClass::Indefinite);
        assert_eq!(sign_evidence(&p1("-exp(x1)"), &g, 1e-9).unwrap().class, SignClass::NonPositive);
        assert_eq!(sign_evidence(&p1("0*x1"), &g, 1e-9).unwrap().class, SignClass::Zero);
        assert_eq!(sign_evidence(&Expr::constant(-0.5), &g, 1e-9).unwrap().level, EvidenceLevel::Exact);
    }
}
