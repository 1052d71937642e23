//! Problem data: the block diffusion matrix, finite Fourier series in x_N and
//! the problem specification with its tolerances.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{sample_expr, BoxGrid, EvalError, Expr, SampleError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension must be at least 2, got {0}")]
    Dimension(usize),
    #[error("diffusion matrix is {got}x{got} but x' has {expected} components")]
    MatrixShape { expected: usize, got: usize },
    #[error("diffusion matrix is not symmetric: entry ({i},{j}) is `{aij}` but ({j},{i}) is `{aji}`")]
    Asymmetric { i: usize, j: usize, aij: String, aji: String },
    #[error("`{expr}` uses x{var} but x' only has {n} components")]
    VariableOutOfRange { expr: String, var: usize, n: usize },
    #[error("sine modes start at 1")]
    SineModeZero,
    #[error("tolerance `{name}` must be positive and finite, got {value}")]
    Tolerance { name: &'static str, value: f64 },
    #[error("invalid verification setting: {0}")]
    Verification(String),
}

/// Symmetric (N−1)×(N−1) matrix Â(x′). The full operator matrix is
/// `diag(Â, 1)`; the trailing 1 is implied.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionMatrix {
    n: usize,
    /// Row-major upper triangle, `i <= j`.
    upper: Vec<Expr>,
    identity: bool,
}

impl DiffusionMatrix {
    pub fn identity(n: usize) -> DiffusionMatrix {
        let mut upper = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                upper.push(if i == j { Expr::one() } else { Expr::zero() });
            }
        }
        DiffusionMatrix { n, upper, identity: true }
    }

    /// Scalar Â for N = 2.
    pub fn scalar(a: Expr) -> Result<DiffusionMatrix, ModelError> {
        DiffusionMatrix::from_rows(vec![vec![a]])
    }

    /// Full matrix given by rows; symmetry is checked structurally.
    pub fn from_rows(rows: Vec<Vec<Expr>>) -> Result<DiffusionMatrix, ModelError> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(ModelError::MatrixShape { expected: n, got: rows.iter().map(Vec::len).max().unwrap_or(0) });
        }
        let mut upper = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                let (aij, aji) = (rows[i][j].to_string(), rows[j][i].to_string());
                if aij != aji {
                    return Err(ModelError::Asymmetric { i: i + 1, j: j + 1, aij, aji });
                }
                upper.push(rows[i][j].clone());
            }
        }
        for e in &upper {
            check_vars(e, n)?;
        }
        let identity = (0..n).all(|i| {
            (0..n).all(|j| {
                let e = &upper[Self::slot(n, i.min(j), i.max(j))];
                e.as_const() == Some(if i == j { 1.0 } else { 0.0 })
            })
        });
        Ok(DiffusionMatrix { n, upper, identity })
    }

    fn slot(n: usize, i: usize, j: usize) -> usize {
        i * n - i * (i + 1) / 2 + j
    }

    /// Number of tangential variables N − 1.
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        &self.upper[Self::slot(self.n, i.min(j), i.max(j))]
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn is_constant(&self) -> bool {
        self.upper.iter().all(Expr::is_variable_free)
    }

    /// Numeric matrix at `x′`, row-major.
    pub fn at(&self, xp: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut out = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for j in i..self.n {
                let v = self.entry(i, j).eval(xp)?;
                out[i * self.n + j] = v;
                out[j * self.n + i] = v;
            }
        }
        Ok(out)
    }

    pub fn rows(&self) -> Vec<Vec<Expr>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.entry(i, j).clone()).collect()).collect()
    }
}

impl Serialize for DiffusionMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

fn check_vars(e: &Expr, n: usize) -> Result<(), ModelError> {
    match e.max_var() {
        Some(v) if v >= n => Err(ModelError::VariableOutOfRange { expr: e.to_string(), var: v + 1, n }),
        _ => Ok(()),
    }
}

/// Finite Fourier series in x_N with coefficients in x′, plus an optional
/// term `affine(x′)·x_N`:
///
/// `u = a₀/2 + Σ_m (a_m cos(m x_N) + b_m sin(m x_N)) + affine·x_N`.
///
/// The stored `a₀` is the full coefficient; the halving happens at synthesis.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TrigSeries {
    cos: BTreeMap<u32, Expr>,
    sin: BTreeMap<u32, Expr>,
    #[serde(rename = "affine_xn")]
    affine: Option<Expr>,
}

impl TrigSeries {
    pub fn new() -> TrigSeries {
        TrigSeries::default()
    }

    pub fn from_modes(
        cos: impl IntoIterator<Item = (u32, Expr)>,
        sin: impl IntoIterator<Item = (u32, Expr)>,
    ) -> Result<TrigSeries, ModelError> {
        let mut s = TrigSeries::new();
        for (m, e) in cos {
            s.set_cos(m, e);
        }
        for (m, e) in sin {
            s.set_sin(m, e)?;
        }
        Ok(s)
    }

    /// Constant-in-x′ series from plain numbers.
    pub fn from_values(cos: &[(u32, f64)], sin: &[(u32, f64)]) -> TrigSeries {
        let mut s = TrigSeries::new();
        for &(m, v) in cos {
            s.set_cos(m, Expr::constant(v));
        }
        for &(m, v) in sin {
            s.set_sin(m, Expr::constant(v)).expect("sine modes start at 1");
        }
        s
    }

    /// Sets `a_m` (full `a₀` when `m = 0`). Literal zeros are not stored.
    pub fn set_cos(&mut self, m: u32, e: Expr) {
        if e.is_zero() {
            self.cos.remove(&m);
        } else {
            self.cos.insert(m, e);
        }
    }

    pub fn set_sin(&mut self, m: u32, e: Expr) -> Result<(), ModelError> {
        if m == 0 {
            return Err(ModelError::SineModeZero);
        }
        if e.is_zero() {
            self.sin.remove(&m);
        } else {
            self.sin.insert(m, e);
        }
        Ok(())
    }

    pub fn set_affine(&mut self, e: Option<Expr>) {
        self.affine = e.filter(|e| !e.is_zero());
    }

    pub fn cos(&self, m: u32) -> Expr {
        self.cos.get(&m).cloned().unwrap_or_else(Expr::zero)
    }

    pub fn sin(&self, m: u32) -> Expr {
        self.sin.get(&m).cloned().unwrap_or_else(Expr::zero)
    }

    pub fn affine(&self) -> Option<&Expr> {
        self.affine.as_ref()
    }

    pub fn cos_modes(&self) -> impl Iterator<Item = (u32, &Expr)> {
        self.cos.iter().map(|(m, e)| (*m, e))
    }

    pub fn sin_modes(&self) -> impl Iterator<Item = (u32, &Expr)> {
        self.sin.iter().map(|(m, e)| (*m, e))
    }

    /// Largest stored mode (0 for an empty or constant series).
    pub fn max_mode(&self) -> u32 {
        let c = self.cos.keys().next_back().copied().unwrap_or(0);
        let s = self.sin.keys().next_back().copied().unwrap_or(0);
        c.max(s)
    }

    pub fn is_empty(&self) -> bool {
        self.cos.is_empty() && self.sin.is_empty() && self.affine.is_none()
    }

    /// True when every coefficient is free of x′ (the series is a function of x_N only).
    pub fn is_xn_only(&self) -> bool {
        self.cos.values().chain(self.sin.values()).chain(self.affine.iter()).all(Expr::is_variable_free)
    }

    pub fn max_var(&self) -> Option<usize> {
        self.cos.values().chain(self.sin.values()).chain(self.affine.iter()).filter_map(Expr::max_var).max()
    }

    /// Coefficients evaluated at `x′`.
    pub fn at(&self, xp: &[f64]) -> Result<NumericSeries, EvalError> {
        let m = self.max_mode() as usize;
        let mut a = vec![0.0; m + 1];
        let mut b = vec![0.0; m + 1];
        for (k, e) in &self.cos {
            a[*k as usize] = e.eval(xp)?;
        }
        for (k, e) in &self.sin {
            b[*k as usize] = e.eval(xp)?;
        }
        let affine = match &self.affine {
            Some(e) => e.eval(xp)?,
            None => 0.0,
        };
        Ok(NumericSeries { a, b, affine })
    }

    /// `u(x′, x_N)`.
    pub fn synth(&self, xp: &[f64], xn: f64) -> Result<f64, EvalError> {
        Ok(self.at(xp)?.eval(xn))
    }

    /// Exact `∂^order/∂x_N^order`, mode by mode:
    /// `(a_m, b_m) ↦ (m b_m, −m a_m)`; the affine term differentiates to a constant.
    pub fn derivative_xn(&self, order: u32) -> TrigSeries {
        let mut s = self.clone();
        for _ in 0..order {
            let mut next = TrigSeries::new();
            for (m, a) in &s.cos {
                if *m > 0 {
                    next.sin.insert(*m, Expr::neg(a.scale(f64::from(*m))));
                }
            }
            for (m, b) in &s.sin {
                next.cos.insert(*m, b.scale(f64::from(*m)));
            }
            if let Some(alpha) = &s.affine {
                next.cos.insert(0, alpha.scale(2.0));
            }
            s = next;
        }
        s
    }

    /// Applies `f` to every coefficient, including the affine one.
    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> TrigSeries {
        let mut out = TrigSeries::new();
        for (m, e) in &self.cos {
            out.set_cos(*m, f(e));
        }
        for (m, e) in &self.sin {
            out.set_sin(*m, f(e)).expect("stored sine modes are >= 1");
        }
        out.set_affine(self.affine.as_ref().map(&f));
        out
    }

    pub fn scale(&self, k: f64) -> TrigSeries {
        self.map(|e| e.scale(k))
    }

    /// Mode-wise sum.
    pub fn add(&self, other: &TrigSeries) -> TrigSeries {
        let mut out = self.clone();
        for (m, e) in &other.cos {
            out.set_cos(*m, Expr::add(out.cos(*m), e.clone()));
        }
        for (m, e) in &other.sin {
            out.set_sin(*m, Expr::add(out.sin(*m), e.clone())).expect("stored sine modes are >= 1");
        }
        let affine = match (&out.affine, &other.affine) {
            (Some(a), Some(b)) => Some(Expr::add(a.clone(), b.clone())),
            (a, b) => a.clone().or_else(|| b.clone()),
        };
        out.set_affine(affine);
        out
    }

    /// Like terms collected in every coefficient.
    pub fn collected(&self) -> TrigSeries {
        self.map(|e| if e.tree_size(4096) < 4096 { e.collect() } else { e.clone() })
    }
}

/// A [`TrigSeries`] with coefficients evaluated at one `x′`.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericSeries {
    /// `a[m]`, full `a[0]`.
    pub a: Vec<f64>,
    /// `b[m]`; `b[0]` is unused and zero.
    pub b: Vec<f64>,
    pub affine: f64,
}

impl NumericSeries {
    pub fn eval(&self, xn: f64) -> f64 {
        let mut s = self.a[0] / 2.0 + self.affine * xn;
        for m in 1..self.a.len() {
            let t = m as f64 * xn;
            s += self.a[m] * t.cos() + self.b[m] * t.sin();
        }
        s
    }

    /// `∂u/∂x_N`.
    pub fn eval_dxn(&self, xn: f64) -> f64 {
        let mut s = self.affine;
        for m in 1..self.a.len() {
            let k = m as f64;
            let t = k * xn;
            s += k * (self.b[m] * t.cos() - self.a[m] * t.sin());
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Sign and zero decisions.
    pub zero: f64,
    /// PDE residuals.
    pub residual: f64,
    /// Smallest admissible eigenvalue of Â.
    pub pd: f64,
}

impl Default for Tolerances {
    fn default() -> Tolerances {
        Tolerances { zero: 1e-9, residual: 1e-8, pd: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleSettings {
    /// Half-width of the truncated x′ box.
    #[serde(rename = "R")]
    pub r: f64,
    /// Mesh width.
    pub h: f64,
}

impl Default for OracleSettings {
    fn default() -> OracleSettings {
        OracleSettings { r: 4.0, h: 2.0 * PI / 128.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationSettings {
    /// x′ box, one range per tangential axis.
    #[serde(rename = "box")]
    pub bbox: Vec<(f64, f64)>,
    /// Points per axis, x_N included.
    pub grid: usize,
    /// Number of 2π periods scanned in x_N.
    pub periods: usize,
    pub oracle: OracleSettings,
}

impl VerificationSettings {
    pub fn default_for(n_tangential: usize) -> VerificationSettings {
        VerificationSettings {
            bbox: vec![(-4.0, 4.0); n_tangential],
            grid: 257,
            periods: 2,
            oracle: OracleSettings::default(),
        }
    }

    /// x′ grid at the configured resolution.
    pub fn xp_grid(&self) -> BoxGrid {
        BoxGrid::new(self.bbox.clone(), vec![self.grid; self.bbox.len()])
            .expect("settings are validated on construction")
    }

    /// x′ grid with a different resolution.
    pub fn xp_grid_with(&self, count: usize) -> BoxGrid {
        BoxGrid::new(self.bbox.clone(), vec![count.max(2); self.bbox.len()])
            .expect("settings are validated on construction")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemSpec {
    pub dimension: usize,
    pub diffusion: DiffusionMatrix,
    /// Source g as a series in x_N; `cos(0)` holds the full `c₀`.
    pub source: TrigSeries,
    pub tolerances: Tolerances,
    pub verification: VerificationSettings,
    /// Caller asserts `u(·,2π) ≡ 0` and `u_N(·,0) ≡ 0` (needed for N ≥ 4).
    pub assume_base_step: bool,
}

impl ProblemSpec {
    pub fn new(dimension: usize, diffusion: DiffusionMatrix, source: TrigSeries) -> Result<ProblemSpec, ModelError> {
        let spec = ProblemSpec {
            dimension,
            tolerances: Tolerances::default(),
            verification: VerificationSettings::default_for(dimension.saturating_sub(1)),
            diffusion,
            source,
            assume_base_step: false,
        };
        spec.check()?;
        Ok(spec)
    }

    /// Identity diffusion.
    pub fn with_identity(dimension: usize, source: TrigSeries) -> Result<ProblemSpec, ModelError> {
        if dimension < 2 {
            return Err(ModelError::Dimension(dimension));
        }
        ProblemSpec::new(dimension, DiffusionMatrix::identity(dimension - 1), source)
    }

    /// Structural invariants: shapes, variable ranges, positive tolerances.
    pub fn check(&self) -> Result<(), ModelError> {
        if self.dimension < 2 {
            return Err(ModelError::Dimension(self.dimension));
        }
        let n = self.n_tangential();
        if self.diffusion.size() != n {
            return Err(ModelError::MatrixShape { expected: n, got: self.diffusion.size() });
        }
        for e in self.source.cos.values().chain(self.source.sin.values()).chain(self.source.affine.iter()) {
            check_vars(e, n)?;
        }
        for (name, value) in [
            ("zero", self.tolerances.zero),
            ("residual", self.tolerances.residual),
            ("pd", self.tolerances.pd),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ModelError::Tolerance { name, value });
            }
        }
        let v = &self.verification;
        if v.bbox.len() != n {
            return Err(ModelError::Verification(format!("box has {} ranges, expected {n}", v.bbox.len())));
        }
        if v.grid < 2 {
            return Err(ModelError::Verification("grid needs at least 2 points per axis".into()));
        }
        if v.periods == 0 {
            return Err(ModelError::Verification("periods must be at least 1".into()));
        }
        if !(v.oracle.r > 0.0 && v.oracle.r.is_finite() && v.oracle.h > 0.0 && v.oracle.h.is_finite()) {
            return Err(ModelError::Verification("oracle R and h must be positive".into()));
        }
        BoxGrid::new(v.bbox.clone(), vec![v.grid; n]).map_err(|e| ModelError::Verification(e.to_string()))?;
        Ok(())
    }

    pub fn n_tangential(&self) -> usize {
        self.dimension - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    NotPositiveDefinite,
    Unbounded,
    EvaluationError,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub kind: FindingKind,
    /// Fatal findings make the problem inadmissible for classification.
    pub fatal: bool,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

/// Smallest eigenvalue of a symmetric matrix (row-major, `n ≤ 2`), or the
/// smallest Rayleigh quotient over a fixed probe set (`n ≥ 3`).
pub fn min_quadratic_form(m: &[f64], n: usize) -> f64 {
    match n {
        1 => m[0],
        2 => {
            let (a, b, d) = (m[0], m[1], m[3]);
            let mean = 0.5 * (a + d);
            let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
            mean - r
        }
        _ => probe_directions(n)
            .iter()
            .map(|xi| {
                let mut q = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        q += m[i * n + j] * xi[i] * xi[j];
                    }
                }
                q
            })
            .fold(f64::INFINITY, f64::min),
    }
}

/// Unit coordinate directions and the normalized pairwise sums and differences.
fn probe_directions(n: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        out.push(e);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..n {
        for j in i + 1..n {
            for sign in [1.0, -1.0] {
                let mut e = vec![0.0; n];
                e[i] = s;
                e[j] = sign * s;
                out.push(e);
            }
        }
    }
    out
}

/// Sampled admissibility checks on the diffusion matrix and source.
/// An empty list means admissible.
pub fn validate_spec(p: &ProblemSpec) -> Vec<Finding> {
    let mut findings = Vec::new();
    let n = p.n_tangential();
    let grid = p.verification.xp_grid();
    let a = &p.diffusion;

    let mut forms = Vec::with_capacity(grid.len());
    for x in grid.points() {
        match a.at(&x) {
            Ok(m) => forms.push(min_quadratic_form(&m, n)),
            Err(e) => {
                findings.push(Finding {
                    kind: FindingKind::EvaluationError,
                    fatal: true,
                    message: format!("diffusion matrix cannot be evaluated: {e}"),
                    point: Some(x),
                    value: None,
                });
                return findings;
            }
        }
    }
    let bad = forms.iter().filter(|q| **q < p.tolerances.pd).count();
    if bad > 0 {
        let (imin, qmin) = forms
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, q)| if *q < acc.1 { (i, *q) } else { acc });
        let x = grid.point(imin);
        findings.push(Finding {
            kind: FindingKind::NotPositiveDefinite,
            fatal: true,
            message: format!(
                "positive-definiteness violated at {bad} of {} sampled points; worst at x'={x:?} with form {qmin}",
                grid.len()
            ),
            point: Some(x),
            value: Some(qmin),
        });
    }

    // Boundedness: entries sampled on the box and on a box four times wider.
    let wide: Vec<(f64, f64)> = p.verification.bbox.iter().map(|(lo, hi)| (4.0 * lo, 4.0 * hi)).collect();
    let coarse = p.verification.grid.min(129);
    if let (Ok(g1), Ok(g4)) = (
        BoxGrid::new(p.verification.bbox.clone(), vec![coarse; n]),
        BoxGrid::new(wide, vec![4 * coarse; n]),
    ) {
        for i in 0..n {
            for j in i..n {
                let e = a.entry(i, j);
                if e.is_variable_free() {
                    continue;
                }
                match (sample_expr(e, &g1), sample_expr(e, &g4)) {
                    (Ok(s1), Ok(s4)) => {
                        let inner = s1.sup_abs().max(1.0);
                        if s4.sup_abs() > 4.0 * inner {
                            findings.push(Finding {
                                kind: FindingKind::Unbounded,
                                fatal: false,
                                message: format!(
                                    "entry ({},{}) grows from {:.3e} on the box to {:.3e} on the 4x box",
                                    i + 1,
                                    j + 1,
                                    s1.sup_abs(),
                                    s4.sup_abs()
                                ),
                                value: Some(s4.sup_abs()),
                                point: Some(if s4.max.abs() >= s4.min.abs() { s4.argmax } else { s4.argmin }),
                            });
                        }
                    }
                    (Err(SampleError::Eval { point, source }), _) | (_, Err(SampleError::Eval { point, source })) => {
                        findings.push(Finding {
                            kind: FindingKind::EvaluationError,
                            fatal: false,
                            message: format!("entry ({},{}) cannot be evaluated: {source}", i + 1, j + 1),
                            point: Some(point),
                            value: None,
                        });
                    }
                    _ => {}
                }
            }
        }
    }

    // Source coefficients must evaluate on the verification box.
    let src = &p.source;
    for (label, e) in src
        .cos_modes()
        .map(|(m, e)| (format!("c{m}"), e))
        .chain(src.sin_modes().map(|(m, e)| (format!("d{m}"), e)))
        .chain(src.affine().map(|e| ("affine_xn".to_string(), e)))
    {
        if e.is_variable_free() {
            continue;
        }
        if let Err(SampleError::Eval { point, source }) = sample_expr(e, &grid) {
            findings.push(Finding {
                kind: FindingKind::EvaluationError,
                fatal: true,
                message: format!("source coefficient {label} cannot be evaluated: {source}"),
                point: Some(point),
                value: None,
            });
        }
    }
    findings
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    fn p1(s: &str) -> Expr {
        parse_expr(s, 1).unwrap()
    }

    fn model() -> TrigSeries {
        TrigSeries::from_values(&[(0, 2.0), (1, -1.0)], &[])
    }

    #[test]
    fn synthesis_examples() {
        let u = model();
        assert_eq!(u.synth(&[0.3], 0.0).unwrap(), 0.0);
        assert!((u.synth(&[0.3], PI).unwrap() - 2.0).abs() < 1e-15);

        let atan2 = p1("atan(x1)^2");
        let v = TrigSeries::from_modes([(0, atan2.scale(2.0)), (2, Expr::neg(atan2))], []).unwrap();
        let want = 2.0 * (PI / 4.0).powi(2);
        assert!((v.synth(&[1.0], PI / 2.0).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn derivative_examples() {
        let d = TrigSeries::from_values(&[(1, -1.0)], &[]).derivative_xn(1);
        assert_eq!(d, TrigSeries::from_values(&[], &[(1, 1.0)]));

        let c = p1("sin(x1)");
        let s = TrigSeries::from_modes([(2, c.clone())], []).unwrap();
        let d2 = s.derivative_xn(2);
        assert_eq!(d2.cos(2).eval(&[0.4]).unwrap(), -4.0 * c.eval(&[0.4]).unwrap());

        for a in [-1.0, 0.0, 0.5, 1.0] {
            let mut fam = TrigSeries::from_values(&[], &[(1, a)]);
            fam.set_affine(Some(Expr::one()));
            let d = fam.derivative_xn(1);
            assert_eq!(d.synth(&[0.0], 0.0).unwrap(), 1.0 + a);
            assert_eq!(fam.at(&[0.0]).unwrap().eval_dxn(0.0), 1.0 + a);
        }
    }

    #[test]
    fn second_derivative_is_minus_m_squared() {
        let s = TrigSeries::from_values(&[(0, 3.0), (1, 0.5), (3, -2.0)], &[(2, 1.5), (5, 0.25)]);
        let d2 = s.derivative_xn(2);
        for m in 1..=5u32 {
            let k = -f64::from(m * m);
            assert_eq!(d2.cos(m).eval(&[]).unwrap(), k * s.cos(m).eval(&[]).unwrap());
            assert_eq!(d2.sin(m).eval(&[]).unwrap(), k * s.sin(m).eval(&[]).unwrap());
        }
        assert!(d2.cos(0).is_zero());
    }

    #[test]
    fn sine_mode_zero_rejected() {
        assert_eq!(TrigSeries::new().set_sin(0, Expr::one()), Err(ModelError::SineModeZero));
    }

    #[test]
    fn matrix_symmetry_is_structural() {
        let x = parse_expr("x1", 2).unwrap();
        let y = parse_expr("x2", 2).unwrap();
        let ok = DiffusionMatrix::from_rows(vec![vec![Expr::constant(2.0), x.clone()], vec![x.clone(), Expr::one()]]);
        assert!(ok.is_ok());
        let bad = DiffusionMatrix::from_rows(vec![vec![Expr::one(), x], vec![y, Expr::one()]]);
        assert!(matches!(bad, Err(ModelError::Asymmetric { i: 1, j: 2, .. })));
        let m = DiffusionMatrix::from_rows(vec![vec![Expr::one(), Expr::zero()], vec![Expr::zero(), Expr::one()]]).unwrap();
        assert!(m.is_identity());
    }

    #[test]
    fn variables_must_fit_the_dimension() {
        let g = TrigSeries::from_modes([(0, parse_expr("x2", 2).unwrap())], []).unwrap();
        assert!(matches!(ProblemSpec::with_identity(2, g), Err(ModelError::VariableOutOfRange { var: 2, .. })));
    }

    fn spec_with_a(a: &str) -> ProblemSpec {
        let d = DiffusionMatrix::scalar(p1(a)).unwrap();
        ProblemSpec::new(2, d, TrigSeries::from_values(&[(0, 2.0)], &[])).unwrap()
    }

    #[test]
    fn validate_examples() {
        assert!(validate_spec(&spec_with_a("1")).is_empty());
        assert!(validate_spec(&spec_with_a("1+0.5*sin(x1)")).is_empty());
        let f = validate_spec(&spec_with_a("sin(x1)"));
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].kind, FindingKind::NotPositiveDefinite);
        assert!(f[0].fatal);
        assert!(f[0].value.unwrap() < 0.0);
    }

    #[test]
    fn validate_flags_growth_and_bad_sources() {
        let f = validate_spec(&spec_with_a("1+x1^2"));
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].kind, FindingKind::Unbounded);
        assert!(!f[0].fatal);

        let mut s = spec_with_a("1");
        s.source.set_cos(2, p1("1/x1"));
        s.verification.grid = 9;
        let f = validate_spec(&s);
        assert!(f.iter().any(|f| f.kind == FindingKind::EvaluationError && f.fatal));
    }

    #[test]
    fn min_form_two_by_two() {
        // eigenvalues of [[2,1],[1,2]] are 1 and 3
        assert!((min_quadratic_form(&[2.0, 1.0, 1.0, 2.0], 2) - 1.0).abs() < 1e-15);
        assert!(min_quadratic_form(&[1.0, 2.0, 2.0, 1.0], 2) < 0.0);
        let id3 = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        assert_eq!(min_quadratic_form(&id3, 3), 1.0);
    }

    #[test]
    fn series_linearity() {
        let s = TrigSeries::from_values(&[(0, 1.0), (2, 3.0)], &[(1, -2.0)]);
        let t = TrigSeries::from_values(&[(2, -1.0), (4, 0.5)], &[(3, 1.0)]);
        let sum = s.scale(2.0).add(&t.scale(-3.0));
        for xn in [0.0, 0.7, 2.0, 5.5] {
            let want = 2.0 * s.synth(&[], xn).unwrap() - 3.0 * t.synth(&[], xn).unwrap();
            assert!((sum.synth(&[], xn).unwrap() - want).abs() < 1e-13);
        }
    }
}
