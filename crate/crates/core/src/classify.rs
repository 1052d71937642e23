//! Decision tree from a problem to a verdict with a rule id, a candidate
//! where one exists, and the evidence behind the verdict.
//!
//! Order: spec validation, constant source, source in `x′` only, the `d₁`
//! step, the maximum principle, the `c₁` step, 1-D series, single-mode
//! patterns, elimination, the `x_N` family, otherwise inconclusive.
//! Every `Unique` and `Family` payload is re-verified before it is returned.

use serde::Serialize;
use thiserror::Error;

use crate::elimination::{determine_parameters, eliminate, EliminationState, ParameterOutcome};
use crate::expr::{sample_expr, Expr, Node};
use crate::fourier::{coefficient_audit, series_sampler, AuditReport};
use crate::model::{validate_spec, Finding, ModelError, ProblemSpec, TrigSeries};
use crate::system::{build_system, discharge_traces, strip_cos, strip_sin, SignClass, SignEvidence, SystemError, RULE_C1, RULE_D1};
use crate::verify::residual::{scan_field, xn_samples};
use crate::verify::{nonnegativity_scan, residual, verify, NonnegScan, VerificationReport, VerifyError, VerifyOptions};

pub const R_THETA_NONNEG: &str = "R-THETA-NONNEG";
pub const R_THETA_NEG: &str = "R-THETA-NEG";
pub const R_G_XPRIME: &str = "R-G-XPRIME";
pub const R_D1_POS: &str = RULE_D1;
pub const R_C1_POS: &str = RULE_C1;
pub const R_SERIES_1D: &str = "R-SERIES-1D";
pub const R_TEO10: &str = "R-TEO10";
pub const R_TEO11: &str = "R-TEO11";
pub const R_ELIM: &str = "R-ELIM";
pub const R_MAXPRIN: &str = "R-MAXPRIN";
pub const R_FAMILY_XN: &str = "R-FAMILY-XN";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("the problem is inadmissible: {}", .0.iter().filter(|f| f.fatal).map(|f| f.message.as_str()).collect::<Vec<_>>().join("; "))]
    Spec(Vec<Finding>),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error("construct_series_1d contract: {0}")]
    Contract(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    NonExistence,
    Unique,
    Family,
    Inconclusive,
}

/// A violated necessary condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub condition: String,
    /// `exact`, `symbolic` or `grid`.
    pub level: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

/// `u_A = base + A·direction`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilySolution {
    pub base: TrigSeries,
    pub direction: TrigSeries,
    pub text: String,
    pub parameter_range: (f64, f64),
    /// Widest interval of `A` whose member passed the nonnegativity scan.
    pub sampled_nonnegative: (f64, f64),
    /// `(A, residual sup)` for the checked members.
    pub residual_checks: Vec<(f64, f64)>,
    pub completeness: &'static str,
}

impl FamilySolution {
    pub fn member(&self, a: f64) -> TrigSeries {
        self.base.add(&self.direction.scale(a)).collected()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    None,
    Series { series: TrigSeries, text: String },
    Family(FamilySolution),
    Obstructions { items: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EliminationSummary {
    pub cos_modes: Vec<u32>,
    pub sin_modes: Vec<u32>,
    pub cos_rounds: usize,
    pub sin_rounds: usize,
    pub substitutions: Vec<String>,
    pub outcome: Option<ParameterOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Evidence {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub signs: Vec<SignEvidence>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan: Option<NonnegScan>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elimination: Option<EliminationSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub findings: Vec<Finding>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub rule_id: Option<&'static str>,
    pub statement: String,
    pub assumptions: Vec<String>,
    pub payload: Payload,
    pub evidence: Evidence,
    pub obstructions: Vec<String>,
}

impl Classification {
    fn new(verdict: Verdict, rule_id: Option<&'static str>, statement: &str) -> Classification {
        Classification {
            verdict,
            rule_id,
            statement: statement.to_string(),
            assumptions: Vec::new(),
            payload: Payload::None,
            evidence: Evidence::default(),
            obstructions: Vec::new(),
        }
    }

    fn inconclusive(obstructions: Vec<String>) -> Classification {
        let mut c = Classification::new(
            Verdict::Inconclusive,
            None,
            "No implemented rule decides this problem; the obstructions list what is missing.",
        );
        c.payload = Payload::Obstructions { items: obstructions.clone() };
        c.obstructions = obstructions;
        c
    }

    /// Printed payload: the series or the family.
    pub fn payload_text(&self) -> Option<String> {
        match &self.payload {
            Payload::Series { text, .. } => Some(text.clone()),
            Payload::Family(f) => Some(f.text.clone()),
            _ => None,
        }
    }

    /// The unique solution, if any.
    pub fn series(&self) -> Option<&TrigSeries> {
        match &self.payload {
            Payload::Series { series, .. } => Some(series),
            _ => None,
        }
    }
}

const S_THETA_NONNEG: &str = "For a constant source theta >= 0 the only nonnegative solution bounded on strips is theta*(1 - cos(xN)).";
const S_THETA_NEG: &str = "A negative constant source admits no nonnegative solution bounded on strips.";
const S_G_XPRIME: &str = "A source depending on x' only admits a nonnegative solution bounded on strips only when it is constant.";
const S_D1: &str = "If d1 >= 0 and d1 is not identically zero, there is no nonnegative solution bounded on strips.";
const S_C1: &str = "If d1 = 0, c1 >= 0 and c1 is not identically zero, there is no nonnegative solution bounded on strips.";
const S_MAXPRIN: &str = "For a non-constant source g <= 0 a nonnegative solution is positive, while d1 >= 0 forces u(x', 2pi) = 0; no solution exists.";
const S_SERIES: &str = "For a 2pi-periodic source in xN with c1 = d1 = 0, every solution equals the 1-D series candidate, so a solution exists exactly when the candidate is nonnegative.";
const S_SINGLE_MODE: &str = "A source f(x')cos(m xN) or f(x')sin(m xN) with m >= 2 and f not identically zero admits no nonnegative solution bounded on strips.";
const S_LONE_MODE: &str = "A source whose sine part is a single non-constant mode n >= 2, or whose cosine part is a single non-constant mode m != 1, admits no nonnegative solution bounded on strips.";
const S_ELIM: &str = "With c1 = d1 = 0 and finitely many modes, the boundary conditions and mode equations fix every coefficient up to a1 and b1, and the equation then fixes a1 and b1.";
const S_FAMILY: &str = "Every u_A = alpha*(xN + A sin(xN)) solves the problem; A in [-1, 1] gives nonnegative solutions. Whether other solutions exist is not known.";

/// Variation of a coefficient over the x′ grid.
enum Variation {
    Constant(f64),
    Borderline(f64),
    Varies { min: f64, max: f64, argmin: Vec<f64>, argmax: Vec<f64> },
}

fn variation(e: &Expr, p: &ProblemSpec) -> Result<Variation, ClassifyError> {
    if e.is_variable_free() {
        let v = e.eval(&vec![0.0; p.n_tangential()]).map_err(|source| VerifyError::Eval { point: vec![], source })?;
        return Ok(Variation::Constant(v));
    }
    let prof = sample_expr(e, &p.verification.xp_grid()).map_err(SystemError::from)?;
    let spread = prof.max - prof.min;
    let tol = p.tolerances.zero;
    Ok(if spread <= tol {
        Variation::Constant(0.5 * (prof.max + prof.min))
    } else if spread <= 10.0 * tol {
        Variation::Borderline(spread)
    } else {
        Variation::Varies { min: prof.min, max: prof.max, argmin: prof.argmin, argmax: prof.argmax }
    })
}

/// Source with every coefficient replaced by its constant value, when all
/// coefficients are constant on the grid. `Err` carries a borderline message.
fn numeric_xn_source(p: &ProblemSpec) -> Result<Result<Option<TrigSeries>, String>, ClassifyError> {
    let g = &p.source;
    if g.affine().is_some() {
        return Ok(Ok(None));
    }
    let mut out = TrigSeries::new();
    for (m, e) in g.cos_modes() {
        match variation(e, p)? {
            Variation::Constant(v) => out.set_cos(m, Expr::constant(v)),
            Variation::Borderline(s) => return Ok(Err(format!("c{m} varies by only {s:e}; cannot decide whether it is constant"))),
            Variation::Varies { .. } => return Ok(Ok(None)),
        }
    }
    for (m, e) in g.sin_modes() {
        match variation(e, p)? {
            Variation::Constant(v) => out.set_sin(m, Expr::constant(v))?,
            Variation::Borderline(s) => return Ok(Err(format!("d{m} varies by only {s:e}; cannot decide whether it is constant"))),
            Variation::Varies { .. } => return Ok(Ok(None)),
        }
    }
    Ok(Ok(Some(out)))
}

/// The unique candidate for a finite source in `x_N` only with `c₁ = d₁ = 0`:
/// `a₀ = c₀`, `a₁ = −c₀/2 + Σ c_m/(m²−1)`, `b₁ = Σ m d_m/(m²−1)`,
/// `a_m = −c_m/(m²−1)`, `b_m = −d_m/(m²−1)`.
pub fn construct_series_1d(g: &TrigSeries) -> Result<TrigSeries, ClassifyError> {
    if g.affine().is_some() {
        return Err(ClassifyError::Contract("the source has an affine xN term".into()));
    }
    let value = |e: &Expr, what: String| {
        e.as_const().ok_or_else(|| ClassifyError::Contract(format!("{what} depends on x'")))
    };
    if value(&g.cos(1), "c1".into())? != 0.0 || value(&g.sin(1), "d1".into())? != 0.0 {
        return Err(ClassifyError::Contract("c1 and d1 must vanish".into()));
    }
    let c0 = value(&g.cos(0), "c0".into())?;
    let mut u = TrigSeries::new();
    u.set_cos(0, Expr::constant(c0));
    let mut a1 = -c0 / 2.0;
    let mut b1 = 0.0;
    for (m, e) in g.cos_modes().filter(|(m, _)| *m >= 2) {
        let mu = f64::from(m * m - 1);
        let c = value(e, format!("c{m}"))?;
        a1 += c / mu;
        u.set_cos(m, Expr::constant(-c / mu));
    }
    for (m, e) in g.sin_modes().filter(|(m, _)| *m >= 2) {
        let mu = f64::from(m * m - 1);
        let d = value(e, format!("d{m}"))?;
        b1 += f64::from(m) * d / mu;
        u.set_sin(m, Expr::constant(-d / mu))?;
    }
    u.set_cos(1, Expr::constant(a1));
    u.set_sin(1, Expr::constant(b1))?;
    Ok(u)
}

// Printing.

/// `(k, rest)` with `e = k·rest`; `rest = None` for constants.
fn split_factor(e: &Expr) -> (f64, Option<Expr>) {
    match e.node() {
        Node::Const(c) => (*c, None),
        Node::Neg(a) => {
            let (k, r) = split_factor(a);
            (-k, r)
        }
        Node::Mul(a, b) => match (a.as_const(), b.as_const()) {
            (Some(k), _) => {
                let (k2, r) = split_factor(b);
                (k * k2, r)
            }
            (_, Some(k)) => {
                let (k2, r) = split_factor(a);
                (k * k2, r)
            }
            _ => (1.0, Some(e.clone())),
        },
        _ => (1.0, Some(e.clone())),
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

fn trig_atom(kind: &str, m: u32) -> String {
    if m == 1 {
        format!("{kind}(xN)")
    } else {
        format!("{kind}({m}*xN)")
    }
}

fn join_terms(terms: &[(f64, String)]) -> String {
    let mut out = String::new();
    for (i, (k, atom)) in terms.iter().enumerate() {
        let body = match (k.abs() == 1.0, atom.is_empty()) {
            (_, true) => fmt_num(k.abs()),
            (true, false) => atom.clone(),
            (false, false) => format!("{}*{atom}", fmt_num(k.abs())),
        };
        match (i, *k < 0.0) {
            (0, true) => out.push_str(&format!("-{body}")),
            (0, false) => out.push_str(&body),
            (_, true) => out.push_str(&format!(" - {body}")),
            (_, false) => out.push_str(&format!(" + {body}")),
        }
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

/// Human-readable series, with a common factor pulled out when every
/// coefficient is a multiple of the same expression or of the same number:
/// `1 - cos(xN)`, `atan(x1)^2*(1 - cos(2*xN))`.
pub fn format_series(u: &TrigSeries) -> String {
    let mut parts: Vec<(Expr, String)> = Vec::new();
    let half = u.cos(0).scale(0.5);
    if !half.is_zero() {
        parts.push((if half.tree_size(4096) < 4096 { half.collect() } else { half }, String::new()));
    }
    if let Some(a) = u.affine() {
        parts.push((a.clone(), "xN".into()));
    }
    let mut modes: Vec<(u32, u8, Expr)> = u
        .cos_modes()
        .filter(|(m, _)| *m > 0)
        .map(|(m, e)| (m, 0u8, e.clone()))
        .chain(u.sin_modes().map(|(m, e)| (m, 1u8, e.clone())))
        .collect();
    modes.sort_by_key(|(m, k, _)| (*m, *k));
    for (m, k, e) in modes {
        parts.push((e, trig_atom(if k == 0 { "cos" } else { "sin" }, m)));
    }
    if parts.is_empty() {
        return "0".into();
    }
    let split: Vec<(f64, Option<Expr>, String)> =
        parts.iter().map(|(e, atom)| {
            let (k, r) = split_factor(e);
            (k, r, atom.clone())
        }).collect();
    let rest0 = split[0].1.as_ref().map(|e| e.to_string());
    let common = split.iter().all(|(_, r, _)| r.as_ref().map(|e| e.to_string()) == rest0);
    if common {
        let k0 = split[0].0.abs();
        let same_k = split.len() > 1 && split.iter().all(|(k, _, _)| k.abs() == k0) && k0 != 1.0;
        let terms: Vec<(f64, String)> =
            split.iter().map(|(k, _, atom)| (if same_k { k / k0 } else { *k }, atom.clone())).collect();
        let inner = join_terms(&terms);
        let mut prefix = Vec::new();
        if same_k {
            prefix.push(fmt_num(k0));
        }
        if let Some(r) = &rest0 {
            let needs_paren = matches!(split[0].1.as_ref().map(Expr::node), Some(Node::Add(..) | Node::Sub(..)));
            prefix.push(if needs_paren { format!("({r})") } else { r.clone() });
        }
        if prefix.is_empty() {
            return inner;
        }
        if terms.len() == 1 && terms[0].1.is_empty() {
            let sign = if terms[0].0 < 0.0 { "-" } else { "" };
            let k = terms[0].0.abs();
            return if k == 1.0 { format!("{sign}{}", prefix.join("*")) } else { format!("{sign}{}*{}", fmt_num(k), prefix.join("*")) };
        }
        let wrapped = if terms.len() == 1 { inner } else { format!("({inner})") };
        return format!("{}*{wrapped}", prefix.join("*"));
    }
    let mut out = String::new();
    for (i, (e, atom)) in parts.iter().enumerate() {
        let s = e.to_string();
        let paren = matches!(e.node(), Node::Add(..) | Node::Sub(..));
        let coef = if paren { format!("({s})") } else { s };
        let term = if atom.is_empty() { coef } else { format!("{coef}*{atom}") };
        if i > 0 {
            out.push_str(" + ");
        }
        out.push_str(&term);
    }
    out
}

fn series_payload(u: TrigSeries) -> Payload {
    let text = format_series(&u);
    Payload::Series { series: u, text }
}

// Tree.

fn base_assumptions(p: &ProblemSpec) -> Vec<String> {
    let mut a = vec![format!(
        "sampled evidence on the box {:?} x [0, {}*2pi] with {} points per axis, tol_zero = {:e}",
        p.verification.bbox, p.verification.periods, p.verification.grid, p.tolerances.zero
    )];
    if p.dimension >= 4 {
        a.push("u(x',2pi) = 0 and u_N(x',0) = 0 asserted by the caller".into());
    }
    a
}

/// Verifies `u`; `Ok(report)` when it passed, otherwise an Inconclusive classification.
fn checked(u: &TrigSeries, p: &ProblemSpec) -> Result<Result<VerificationReport, Classification>, ClassifyError> {
    let rep = verify(u, p, VerifyOptions::default())?;
    if rep.passed {
        return Ok(Ok(rep));
    }
    let mut c = Classification::inconclusive(
        rep.failures.iter().map(|f| format!("internal verification of the candidate failed: {f}")).collect(),
    );
    c.evidence.verification = Some(rep);
    Ok(Err(c))
}

fn unique(rule: &'static str, statement: &str, u: TrigSeries, p: &ProblemSpec) -> Result<Classification, ClassifyError> {
    let rep = match checked(&u, p)? {
        Ok(r) => r,
        Err(c) => return Ok(c),
    };
    let mut c = Classification::new(Verdict::Unique, Some(rule), statement);
    c.assumptions = base_assumptions(p);
    c.payload = series_payload(u);
    c.evidence.verification = Some(rep);
    Ok(c)
}

fn negative_candidate(rule: &'static str, statement: &str, u: TrigSeries, scan: NonnegScan, p: &ProblemSpec) -> Classification {
    let (x, v) = scan.witness();
    let mut c = Classification::new(Verdict::NonExistence, Some(rule), statement);
    c.assumptions = base_assumptions(p);
    c.evidence.certificate = Some(Certificate {
        condition: format!("the only possible solution {} takes a negative value", format_series(&u)),
        level: "grid",
        point: Some(x.to_vec()),
        value: Some(v),
    });
    c.evidence.scan = Some(scan);
    c.payload = Payload::None;
    c
}

/// Sole stored mode `(is_sine, m, coefficient)` if the source has exactly one.
fn single_mode(g: &TrigSeries) -> Option<(bool, u32, Expr)> {
    if g.affine().is_some() {
        return None;
    }
    let cos: Vec<_> = g.cos_modes().collect();
    let sin: Vec<_> = g.sin_modes().collect();
    match (cos.as_slice(), sin.as_slice()) {
        ([(m, e)], []) => Some((false, *m, (*e).clone())),
        ([], [(m, e)]) => Some((true, *m, (*e).clone())),
        _ => None,
    }
}

pub fn classify(p: &ProblemSpec) -> Result<Classification, ClassifyError> {
    p.check()?;
    let findings = validate_spec(p);
    if findings.iter().any(|f| f.fatal) {
        return Err(ClassifyError::Spec(findings));
    }
    let mut c = decide(p)?;
    c.evidence.findings = findings;
    Ok(c)
}

fn decide(p: &ProblemSpec) -> Result<Classification, ClassifyError> {
    let g = &p.source;
    let tol = p.tolerances.zero;
    let large_n = p.dimension >= 4;
    if large_n && !p.assume_base_step {
        let mut c = Classification::inconclusive(vec![format!(
            "dimension {} >= 4: no rule applies unless u(x',2pi) = 0 and u_N(x',0) = 0 are asserted (assume_base_step)",
            p.dimension
        )]);
        if let Ok(Ok(Some(src))) = numeric_xn_source(p) {
            if let Ok(u) = construct_series_1d(&src) {
                let points: Vec<Vec<f64>> = p.verification.xp_grid_with(3).points().collect();
                let m = u.max_mode() + 2;
                c.evidence.audit = coefficient_audit(series_sampler(&u), m, &points, (4 * m as usize + 4).max(64), tol).ok();
                c.obstructions.push("coefficient audit of the 1-D candidate attached".into());
            }
        }
        return Ok(c);
    }

    // Constant source.
    let trig_free = g.affine().is_none() && g.cos_modes().all(|(m, _)| m == 0) && g.sin_modes().next().is_none();
    if trig_free {
        match variation(&g.cos(0), p)? {
            Variation::Constant(c0) => {
                let theta = c0 / 2.0;
                if theta >= 0.0 {
                    let u = TrigSeries::from_values(&[(0, 2.0 * theta), (1, -theta)], &[]);
                    return unique(R_THETA_NONNEG, S_THETA_NONNEG, u, p);
                }
                let mut c = Classification::new(Verdict::NonExistence, Some(R_THETA_NEG), S_THETA_NEG);
                c.assumptions = base_assumptions(p);
                c.evidence.certificate = Some(Certificate {
                    condition: format!("the constant source theta = {theta} is negative"),
                    level: if g.cos(0).is_variable_free() { "exact" } else { "grid" },
                    point: None,
                    value: Some(theta),
                });
                return Ok(c);
            }
            Variation::Borderline(s) => {
                return Ok(Classification::inconclusive(vec![format!(
                    "the source depends on x' only and varies by {s:e}, within 10*tol_zero; cannot decide whether it is constant"
                )]))
            }
            Variation::Varies { min, max, argmin, argmax } if !large_n => {
                let mut c = Classification::new(Verdict::NonExistence, Some(R_G_XPRIME), S_G_XPRIME);
                c.assumptions = base_assumptions(p);
                c.evidence.certificate = Some(Certificate {
                    condition: format!(
                        "g depends on x' only and is not constant: g = {} at x'={argmin:?} and g = {} at x'={argmax:?}",
                        min / 2.0,
                        max / 2.0
                    ),
                    level: "grid",
                    point: Some(argmax),
                    value: Some(max / 2.0 - min / 2.0),
                });
                return Ok(c);
            }
            Variation::Varies { .. } => {}
        }
    }

    // Trace discharge.
    let system = build_system(p, g.max_mode().max(1))?;
    let dis = discharge_traces(system, p)?;
    let mut signs: Vec<SignEvidence> = dis.d1.iter().chain(dis.c1.iter()).cloned().collect();
    if let Some(sig) = &dis.nonexistence {
        if sig.rule == RULE_D1 {
            let mut c = Classification::new(Verdict::NonExistence, Some(R_D1_POS), S_D1);
            c.assumptions = base_assumptions(p);
            c.evidence.certificate = Some(Certificate {
                condition: sig.reason.clone(),
                level: level_name(&sig.evidence),
                point: Some(sig.evidence.argmax.clone()),
                value: Some(sig.evidence.max),
            });
            c.evidence.signs = signs;
            return Ok(c);
        }
    }

    // Maximum principle: g <= 0, g not constant, d1 >= 0.
    let d1_nonneg = dis.d1.as_ref().is_some_and(|e| e.class == SignClass::Zero);
    if d1_nonneg && !large_n {
        let v = &p.verification;
        let xn = xn_samples(v.periods, v.grid);
        let scan = scan_field(&v.xp_grid(), &xn, f64::NEG_INFINITY, |x| {
            let s = g.at(x)?;
            Ok(xn.iter().map(|&t| s.eval(t)).collect())
        })?;
        if scan.max <= tol && scan.max - scan.min > 10.0 * tol {
            let mut c = Classification::new(Verdict::NonExistence, Some(R_MAXPRIN), S_MAXPRIN);
            c.assumptions = base_assumptions(p);
            c.evidence.certificate = Some(Certificate {
                condition: format!(
                    "g <= 0 on the sampled region (max {:e} at {:?}), g is not constant (min {:e} at {:?}) and d1 = 0",
                    scan.max, scan.argmax, scan.min, scan.argmin
                ),
                level: "grid",
                point: Some(scan.argmin),
                value: Some(scan.min),
            });
            c.evidence.signs = signs;
            return Ok(c);
        }
    }

    if let Some(sig) = &dis.nonexistence {
        let mut c = Classification::new(Verdict::NonExistence, Some(R_C1_POS), S_C1);
        c.assumptions = base_assumptions(p);
        c.evidence.certificate = Some(Certificate {
            condition: sig.reason.clone(),
            level: level_name(&sig.evidence),
            point: Some(sig.evidence.argmax.clone()),
            value: Some(sig.evidence.max),
        });
        c.evidence.signs = signs;
        return Ok(c);
    }

    if !dis.system.all_traces_zero() {
        if let Some(c) = family(p)? {
            return Ok(c);
        }
        let mut c = Classification::inconclusive(dis.obstructions.clone());
        c.evidence.signs = std::mem::take(&mut signs);
        return Ok(c);
    }
    let mut assumptions = base_assumptions(p);
    assumptions.push(format!("vanishing traces from: {}", dis.assumption.rules.join(", ")));

    if g.affine().is_some() {
        let mut c = Classification::inconclusive(vec![
            "the affine xN term of the source has infinitely many strip modes; finite-mode rules do not apply".into(),
        ]);
        c.evidence.signs = signs;
        return Ok(c);
    }

    // 1-D series.
    match numeric_xn_source(p)? {
        Err(msg) => {
            let mut c = Classification::inconclusive(vec![msg]);
            c.evidence.signs = signs;
            return Ok(c);
        }
        Ok(Some(src)) => {
            let u = construct_series_1d(&src)?;
            let scan = nonnegativity_scan(&u, p)?;
            if !scan.passed {
                let rule = if single_mode(&src).is_some_and(|(_, m, _)| m >= 2) { R_TEO10 } else { R_SERIES_1D };
                let stmt = if rule == R_TEO10 { S_SINGLE_MODE } else { S_SERIES };
                let mut c = negative_candidate(rule, stmt, u, scan, p);
                c.assumptions = assumptions;
                c.evidence.signs = signs;
                return Ok(c);
            }
            let mut c = unique(R_SERIES_1D, S_SERIES, u, p)?;
            if c.verdict == Verdict::Unique {
                c.assumptions = assumptions;
            }
            return Ok(c);
        }
        Ok(None) => {}
    }
    if large_n {
        return Ok(Classification::inconclusive(vec![
            "for dimension >= 4 only constant sources and sources in xN alone are decided".into(),
        ]));
    }

    // Single-mode patterns.
    if let Some((is_sin, m, f)) = single_mode(g) {
        if m >= 2 {
            if let Variation::Varies { min, max, argmin, argmax } = variation(&f, p)? {
                let name = if is_sin { format!("d{m}") } else { format!("c{m}") };
                let mut c = Classification::new(Verdict::NonExistence, Some(R_TEO10), S_SINGLE_MODE);
                c.assumptions = assumptions;
                c.evidence.certificate = Some(Certificate {
                    condition: format!(
                        "a solution forces {name} to be constant, but {name} = {min} at x'={argmin:?} and {max} at x'={argmax:?}"
                    ),
                    level: "grid",
                    point: Some(argmax),
                    value: Some(max - min),
                });
                c.evidence.signs = signs;
                return Ok(c);
            }
        }
    }
    if let Some((name, min, max, argmin, argmax)) = lone_mode_pattern(p)? {
        let mut c = Classification::new(Verdict::NonExistence, Some(R_TEO11), S_LONE_MODE);
        c.assumptions = assumptions;
        c.evidence.certificate = Some(Certificate {
            condition: format!(
                "{name} is the only mode of its kind and is not constant: {min} at x'={argmin:?}, {max} at x'={argmax:?}"
            ),
            level: "grid",
            point: Some(argmax),
            value: Some(max - min),
        });
        c.evidence.signs = signs;
        return Ok(c);
    }

    // Elimination.
    let variable_3d = p.dimension == 3 && !p.diffusion.is_constant();
    let (summary, outcome) = run_elimination(p);
    let mut c = match outcome {
        None => Classification::inconclusive(vec![format!(
            "elimination failed: {}",
            summary.error.clone().unwrap_or_default()
        )]),
        Some(_) if variable_3d => Classification::inconclusive(vec![
            "elimination for N = 3 with a variable diffusion matrix is reported as evidence only".into(),
        ]),
        Some(ParameterOutcome::Inconsistent { ref witness, .. }) => {
            let mut c = Classification::new(Verdict::NonExistence, Some(R_ELIM), S_ELIM);
            c.evidence.certificate = Some(Certificate {
                condition: format!("{} does not vanish: {}", witness.label, witness.residual),
                level: "grid",
                point: Some(witness.point.clone()),
                value: Some(witness.value),
            });
            c
        }
        Some(ParameterOutcome::Undetermined { ref reason, .. }) => Classification::inconclusive(vec![reason.clone()]),
        Some(ParameterOutcome::Consistent { ref candidate, .. }) => {
            let scan = nonnegativity_scan(candidate, p)?;
            if scan.passed {
                unique(R_ELIM, S_ELIM, candidate.clone(), p)?
            } else {
                negative_candidate(R_ELIM, S_ELIM, candidate.clone(), scan, p)
            }
        }
    };
    if c.verdict != Verdict::Inconclusive {
        c.assumptions = assumptions;
    }
    c.evidence.signs = signs;
    c.evidence.elimination = Some(summary);
    Ok(c)
}

fn level_name(e: &SignEvidence) -> &'static str {
    match e.level {
        crate::system::EvidenceLevel::Exact => "exact",
        crate::system::EvidenceLevel::Symbolic => "symbolic",
        crate::system::EvidenceLevel::Grid => "grid",
    }
}

type Pattern = (String, f64, f64, Vec<f64>, Vec<f64>);

/// Sine part is one non-constant mode `n̄ ≥ 2` (any cosine modes besides),
/// or cosine part is one non-constant mode `m̄ ≠ 1` (any sine modes besides).
fn lone_mode_pattern(p: &ProblemSpec) -> Result<Option<Pattern>, ClassifyError> {
    let g = &p.source;
    let cos: Vec<_> = g.cos_modes().collect();
    let sin: Vec<_> = g.sin_modes().collect();
    if let [(n, d)] = sin.as_slice() {
        if *n >= 2 && cos.iter().all(|(m, _)| *m != 1) {
            if let Variation::Varies { min, max, argmin, argmax } = variation(d, p)? {
                return Ok(Some((format!("d{n}"), min, max, argmin, argmax)));
            }
        }
    }
    if let [(m, c)] = cos.as_slice() {
        if *m != 1 && sin.iter().all(|(n, _)| *n >= 2) {
            if let Variation::Varies { min, max, argmin, argmax } = variation(c, p)? {
                return Ok(Some((format!("c{m}"), min, max, argmin, argmax)));
            }
        }
    }
    Ok(None)
}

fn describe(name: &str, a: &crate::elimination::Affine, param: &str) -> String {
    let base = if a.base.tree_size(400) < 400 { a.base.to_string() } else { format!("<expression of {}+ nodes>", 400) };
    format!("{name} = {base} + ({})*{param}", a.slope)
}

fn summarize(st: &EliminationState) -> EliminationSummary {
    let mut substitutions = Vec::new();
    for (m, a) in &st.cos_chain.solved {
        substitutions.push(describe(&format!("a{m}"), a, "a1"));
    }
    for (m, a) in &st.sin_chain.solved {
        substitutions.push(describe(&format!("b{m}"), a, "b1"));
    }
    EliminationSummary {
        cos_modes: st.cos_modes.clone(),
        sin_modes: st.sin_modes.clone(),
        cos_rounds: st.cos_chain.rounds.len() + 1,
        sin_rounds: st.sin_chain.rounds.len(),
        substitutions,
        outcome: None,
        error: None,
    }
}

fn run_elimination(p: &ProblemSpec) -> (EliminationSummary, Option<ParameterOutcome>) {
    let failed = |e: String| EliminationSummary {
        cos_modes: vec![],
        sin_modes: vec![],
        cos_rounds: 0,
        sin_rounds: 0,
        substitutions: vec![],
        outcome: None,
        error: Some(e),
    };
    let st = match eliminate(p) {
        Ok(st) => st,
        Err(e) => return (failed(e.to_string()), None),
    };
    let mut summary = summarize(&st);
    match determine_parameters(p, &st, &p.verification.xp_grid()) {
        Ok(o) => {
            summary.outcome = Some(o.clone());
            (summary, Some(o))
        }
        Err(e) => {
            summary.error = Some(e.to_string());
            (summary, None)
        }
    }
}

/// `g = α x_N` with a positive constant `α`.
fn family(p: &ProblemSpec) -> Result<Option<Classification>, ClassifyError> {
    let g = &p.source;
    let Some(alpha) = g.affine() else { return Ok(None) };
    if g.cos_modes().next().is_some() || g.sin_modes().next().is_some() {
        return Ok(None);
    }
    let alpha = match variation(alpha, p)? {
        Variation::Constant(a) if a > 10.0 * p.tolerances.zero => a,
        _ => return Ok(None),
    };
    let mut base = TrigSeries::new();
    base.set_affine(Some(Expr::constant(alpha)));
    let direction = TrigSeries::from_values(&[], &[(1, alpha)]);
    let member = |a: f64| base.add(&direction.scale(a)).collected();

    let mut residual_checks = Vec::new();
    let mut failures = Vec::new();
    for a in [-1.0, 0.0, 1.0] {
        let u = member(a);
        let r = residual(&u, p)?;
        residual_checks.push((a, r.sup));
        let scan = nonnegativity_scan(&u, p)?;
        if r.sup > p.tolerances.residual || !scan.passed {
            failures.push(format!("member A = {a} failed verification"));
        }
    }
    if !failures.is_empty() {
        return Ok(Some(Classification::inconclusive(failures)));
    }
    let ok = |a: f64| nonnegativity_scan(&member(a), p).map(|s| s.passed);
    let lo = edge(0.0, -1.0, &ok)?;
    let hi = edge(0.0, 1.0, &ok)?;
    let text = format!("{}*(xN + A*sin(xN))", fmt_num(alpha));
    let text = if alpha == 1.0 { "xN + A*sin(xN)".to_string() } else { text };
    let sol = FamilySolution {
        base,
        direction,
        text,
        parameter_range: (-1.0, 1.0),
        sampled_nonnegative: (lo, hi),
        residual_checks,
        completeness: "unknown: other solutions, including members with A outside [-1, 1], are not excluded",
    };
    let mut c = Classification::new(Verdict::Family, Some(R_FAMILY_XN), S_FAMILY);
    c.assumptions = base_assumptions(p);
    c.obstructions.push(
        "the family is unbounded in xN and traces u(x',2pi) do not vanish; uniqueness rules do not apply".into(),
    );
    c.payload = Payload::Family(sol);
    Ok(Some(c))
}

/// Boundary of the convex set `{A : ok(A)}` from a member `start` in direction `dir`.
fn edge(start: f64, dir: f64, ok: &dyn Fn(f64) -> Result<bool, VerifyError>) -> Result<f64, VerifyError> {
    let mut inside = start;
    let mut step = 1.0;
    let mut outside = None;
    while step <= 1e6 {
        let a = start + dir * step;
        if ok(a)? {
            inside = a;
            step *= 2.0;
        } else {
            outside = Some(a);
            break;
        }
    }
    let Some(mut out) = outside else { return Ok(dir * f64::INFINITY) };
    while (out - inside).abs() > 1e-6 {
        let mid = 0.5 * (inside + out);
        if ok(mid)? {
            inside = mid;
        } else {
            out = mid;
        }
    }
    Ok(inside)
}

/// Strip coefficients of the source up to mode `m`, for reports.
pub fn source_modes(g: &TrigSeries, m: u32) -> Vec<(u32, Expr, Expr)> {
    (0..=m).map(|k| (k, strip_cos(g, k), if k == 0 { Expr::zero() } else { strip_sin(g, k) })).collect()
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::model::DiffusionMatrix;
    use std::f64::consts::PI;

    fn spec(n: usize, g: TrigSeries) -> ProblemSpec {
        let mut p = ProblemSpec::with_identity(n, g).unwrap();
        p.verification.grid = 65;
        p
    }

    fn xn_only(c: &[(u32, f64)], s: &[(u32, f64)]) -> TrigSeries {
        TrigSeries::from_values(c, s)
    }

    #[test]
    fn constant_sources() {
        let c = classify(&spec(2, xn_only(&[(0, 2.0)], &[]))).unwrap();
        assert_eq!((c.verdict, c.rule_id), (Verdict::Unique, Some(R_THETA_NONNEG)));
        assert_eq!(format_series(c.series().unwrap()), "1 - cos(xN)");

        let c = classify(&spec(2, xn_only(&[(0, -1.0)], &[]))).unwrap();
        assert_eq!((c.verdict, c.rule_id), (Verdict::NonExistence, Some(R_THETA_NEG)));
        assert!(c.evidence.certificate.is_some());

        let c = classify(&spec(2, TrigSeries::new())).unwrap();
        assert_eq!(c.verdict, Verdict::Unique);
        assert!(c.series().unwrap().is_empty());
    }

    #[test]
    fn xprime_source() {
        let g = TrigSeries::from_modes([(0, parse_expr("2*atan(x1)", 1).unwrap())], []).unwrap();
        let c = classify(&spec(2, g)).unwrap();
        assert_eq!((c.verdict, c.rule_id), (Verdict::NonExistence, Some(R_G_XPRIME)));
    }

    #[test]
    fn trace_rules() {
        let c = classify(&spec(2, xn_only(&[], &[(1, 1.0)]))).unwrap();
        assert_eq!(c.rule_id, Some(R_D1_POS));
        let c = classify(&spec(2, xn_only(&[(1, 1.0)], &[]))).unwrap();
        assert_eq!(c.rule_id, Some(R_C1_POS));
        let c = classify(&spec(2, xn_only(&[(0, -2.0), (1, -1.0)], &[]))).unwrap();
        assert_eq!((c.verdict, c.rule_id), (Verdict::NonExistence, Some(R_MAXPRIN)));
    }

    #[test]
    fn one_dimensional_series() {
        let g = xn_only(&[(0, 2.0 / 3.0), (2, 1.0)], &[]);
        let u = construct_series_1d(&g).unwrap();
        assert_eq!(u.cos(0).as_const(), Some(2.0 / 3.0));
        assert!(u.cos(1).is_zero());
        assert_eq!(u.cos(2).as_const(), Some(-1.0 / 3.0));
        let c = classify(&spec(2, g)).unwrap();
        assert_eq!((c.verdict, c.rule_id), (Verdict::Unique, Some(R_SERIES_1D)));
        assert_eq!(c.series().unwrap(), &u);
        assert_eq!(format_series(&u), "0.3333333333333333*(1 - cos(2*xN))");

        let sin2 = construct_series_1d(&xn_only(&[], &[(2, 1.0)])).unwrap();
        assert_eq!(sin2.sin(1).as_const(), Some(2.0 / 3.0));
        assert_eq!(sin2.sin(2).as_const(), Some(-1.0 / 3.0));
        assert!(matches!(construct_series_1d(&xn_only(&[(1, 1.0)], &[])), Err(ClassifyError::Contract(_))));
    }

    #[test]
    fn single_mode_sources() {
        for g in [xn_only(&[(2, 3.0)], &[]), xn_only(&[], &[(5, 1.0)]), xn_only(&[], &[(2, 1.0)])] {
            let c = classify(&spec(2, g)).unwrap();
            assert_eq!((c.verdict, c.rule_id), (Verdict::NonExistence, Some(R_TEO10)));
        }
        let g = TrigSeries::from_modes([(2, parse_expr("sin(3*x1)", 1).unwrap())], []).unwrap();
        let c = classify(&spec(2, g)).unwrap();
        assert_eq!((c.verdict, c.rule_id), (Verdict::NonExistence, Some(R_TEO10)));
    }

    #[test]
    fn lone_sine_mode_source() {
        let g = TrigSeries::from_modes(
            [(0, Expr::constant(1.0)), (3, Expr::constant(0.5))],
            [(2, parse_expr("exp(-x1^2)", 1).unwrap())],
        )
        .unwrap();
        let c = classify(&spec(2, g)).unwrap();
        assert_eq!((c.verdict, c.rule_id), (Verdict::NonExistence, Some(R_TEO11)));
    }

    #[test]
    fn elimination_routes() {
        let half_c0 = parse_expr("2/(1+x1^2)^2 - 4*x1/(1+x1^2)^2*atan(x1) + atan(x1)^2", 1).unwrap();
        let c2 = parse_expr("-2/(1+x1^2)^2 + 4*x1/(1+x1^2)^2*atan(x1) + 3*atan(x1)^2", 1).unwrap();
        let g = TrigSeries::from_modes([(0, half_c0.scale(2.0)), (2, c2)], []).unwrap();
        let c = classify(&spec(2, g)).unwrap();
        assert_eq!((c.verdict, c.rule_id), (Verdict::Unique, Some(R_ELIM)));
        assert_eq!(c.payload_text(), Some("atan(x1)^2*(1 - cos(2*xN))".to_string()));

        let g = TrigSeries::from_modes(
            [(0, parse_expr("2*cos(2*x1)", 1).unwrap()), (2, parse_expr("sin(3*x1)", 1).unwrap())],
            [],
        )
        .unwrap();
        let c = classify(&spec(2, g)).unwrap();
        assert_eq!((c.verdict, c.rule_id), (Verdict::NonExistence, Some(R_ELIM)));
        assert!(c.evidence.certificate.as_ref().unwrap().point.is_some());
    }

    #[test]
    fn xn_family() {
        let mut g = TrigSeries::new();
        g.set_affine(Some(Expr::one()));
        let c = classify(&spec(2, g)).unwrap();
        assert_eq!((c.verdict, c.rule_id), (Verdict::Family, Some(R_FAMILY_XN)));
        let Payload::Family(f) = &c.payload else { panic!() };
        assert_eq!(f.parameter_range, (-1.0, 1.0));
        assert!(f.residual_checks.iter().all(|(_, r)| *r == 0.0));
        // Below A = -1 the member is negative only on x < sqrt(6(-1-A)); a grid of
        // step h misses that for -1-A < h^2/6.
        let h = 2.0 * PI * 2.0 / 64.0;
        let lo = f.sampled_nonnegative.0;
        assert!(lo <= -1.0 && lo >= -1.0 - 1.2 * h * h / 6.0, "{:?}", f.sampled_nonnegative);
        // x + A sin x >= 0 up to A = -x/sin x at tan x = x, x ≈ 4.4934.
        assert!((f.sampled_nonnegative.1 - 4.6033).abs() < 2e-2, "{:?}", f.sampled_nonnegative);
    }

    #[test]
    fn divergence_form_invariance() {
        let a = DiffusionMatrix::scalar(parse_expr("1+0.5*sin(x1)", 1).unwrap()).unwrap();
        let mut p = ProblemSpec::new(2, a, xn_only(&[(0, 2.0)], &[])).unwrap();
        p.verification.grid = 65;
        let c = classify(&p).unwrap();
        let base = classify(&spec(2, xn_only(&[(0, 2.0)], &[]))).unwrap();
        assert_eq!(c.verdict, base.verdict);
        assert_eq!(c.series(), base.series());
    }

    #[test]
    fn large_dimension_needs_base_step() {
        let mut p = spec(4, xn_only(&[(0, 2.0)], &[]));
        p.verification.grid = 9;
        let c = classify(&p).unwrap();
        assert_eq!(c.verdict, Verdict::Inconclusive);
        assert!(c.evidence.audit.is_some());
        p.assume_base_step = true;
        let c = classify(&p).unwrap();
        assert_eq!(c.verdict, Verdict::Unique);
    }

    #[test]
    fn non_elliptic_is_rejected() {
        let a = DiffusionMatrix::scalar(parse_expr("x1", 1).unwrap()).unwrap();
        let p = ProblemSpec::new(2, a, xn_only(&[(0, 2.0)], &[])).unwrap();
        assert!(matches!(classify(&p), Err(ClassifyError::Spec(_))));
    }

    #[test]
    fn payload_formatting() {
        assert_eq!(format_series(&xn_only(&[(0, 4.0), (1, -2.0)], &[])), "2*(1 - cos(xN))");
        assert_eq!(format_series(&xn_only(&[(0, 2.0), (1, -1.0), (2, 0.5)], &[(3, -1.0)])), "1 - cos(xN) + 0.5*cos(2*xN) - sin(3*xN)");
        let mut fam = xn_only(&[], &[(1, 1.0)]);
        fam.set_affine(Some(Expr::one()));
        assert_eq!(format_series(&fam), "xN + sin(xN)");
        assert_eq!(format_series(&TrigSeries::new()), "0");
    }
}
