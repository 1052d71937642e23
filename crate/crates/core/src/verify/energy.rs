//! Cutoff profiles, the Caccioppoli estimate for subsolutions of
//! `−v″ + λv ≤ 0`, and the doubling iteration.
//!
//! The cutoff is `φ_R(x) = φ(|x|/R)` with
//! `φ(t) = ψ(2−t) / (ψ(2−t) + ψ(t−1))`, `ψ(s) = exp(−1/s)` for `s > 0`, else 0.
//! Testing the inequality with `v⁺φ_R²` gives
//! `λ∫(v⁺)²φ_R² ≤ ∫(v⁺)²|φ_R′|²`, hence
//! `∫_{B_R}(v⁺)² ≤ C/(λR²) ∫_{B_2R}(v⁺)²` with `C = (sup|φ′|)²`.

use serde::Serialize;
use thiserror::Error;

use crate::expr::{EvalError, Expr};

fn psi(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

fn dpsi(s: f64) -> f64 {
    if s > 0.0 {
        psi(s) / (s * s)
    } else {
        0.0
    }
}

/// Radial profile `φ(t)`: 1 on `[0,1]`, 0 on `[2,∞)`.
pub fn cutoff(t: f64) -> f64 {
    let (a, b) = (psi(2.0 - t), psi(t - 1.0));
    a / (a + b)
}

/// `φ′(t)`.
pub fn cutoff_derivative(t: f64) -> f64 {
    let (a, b) = (psi(2.0 - t), psi(t - 1.0));
    let (da, db) = (-dpsi(2.0 - t), dpsi(t - 1.0));
    (da * b - a * db) / ((a + b) * (a + b))
}

/// Samples of `φ_R` and `|∇φ_R|` along a ray.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffProfile {
    pub r: f64,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub gradient: Vec<f64>,
    /// `R · sup |∇φ_R|` over the samples.
    pub constant: f64,
}

/// Samples `[0, 3R]` at `per_unit` points per unit length.
pub fn cutoff_profile(r: f64, per_unit: usize) -> CutoffProfile {
    let count = ((3.0 * r * per_unit as f64).ceil() as usize).max(2);
    let radii: Vec<f64> = (0..=count).map(|i| 3.0 * r * i as f64 / count as f64).collect();
    let values: Vec<f64> = radii.iter().map(|x| cutoff(x / r)).collect();
    let gradient: Vec<f64> = radii.iter().map(|x| cutoff_derivative(x / r).abs() / r).collect();
    let constant = r * gradient.iter().copied().fold(0.0, f64::max);
    CutoffProfile { r, radii, values, gradient, constant }
}

/// `sup |φ′|` on a fine grid of `[1, 2]`.
pub fn cutoff_gradient_constant() -> f64 {
    (0..=100_000).map(|i| cutoff_derivative(1.0 + i as f64 / 100_000.0).abs()).fold(0.0, f64::max)
}

/// Composite Simpson on `[a, b]` with at least `per_unit` points per unit length.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, per_unit: usize) -> f64 {
    let mut n = (((b - a) * per_unit as f64).ceil() as usize).max(2);
    if n % 2 == 1 {
        n += 1;
    }
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error("lambda must be positive, got {0}")]
    Lambda(f64),
    #[error("radii must be positive and finite")]
    Radius,
    #[error("expression must depend on x1 only")]
    Variables,
    #[error("evaluation failed at x = {at}: {source}")]
    Eval { at: f64, source: EvalError },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaccioppoliRow {
    pub r: f64,
    /// `∫_{B_R}(v⁺)²`.
    pub lhs: f64,
    /// `C/(λR²) ∫_{B_2R}(v⁺)²`.
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaccioppoliReport {
    pub lambda: f64,
    pub constant: f64,
    pub hypothesis_met: bool,
    /// First grid point where `−v″ + λv > τ`, with the value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subsolution_violation: Option<(f64, f64)>,
    pub rows: Vec<CaccioppoliRow>,
}

const PER_UNIT: usize = 64;

/// Checks the subsolution hypothesis on `[−2R_max, 2R_max]`, then the
/// estimate at every radius.
pub fn caccioppoli_check(v: &Expr, lambda: f64, radii: &[f64], tol: f64) -> Result<CaccioppoliReport, EnergyError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(EnergyError::Lambda(lambda));
    }
    if radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(EnergyError::Radius);
    }
    if v.max_var().is_some_and(|i| i > 0) {
        return Err(EnergyError::Variables);
    }
    let eval = |e: &Expr, x: f64| e.eval(&[x]).map_err(|source| EnergyError::Eval { at: x, source });
    let constant = cutoff_gradient_constant().powi(2);
    let vpp = v.differentiate(0).differentiate(0);
    let top = 2.0 * radii.iter().copied().fold(0.0, f64::max);
    let n = ((2.0 * top * PER_UNIT as f64).ceil() as usize).max(2);
    let mut violation = None;
    for i in 0..=n {
        let x = -top + 2.0 * top * i as f64 / n as f64;
        let val = -eval(&vpp, x)? + lambda * eval(v, x)?;
        if val > tol * (1.0 + eval(v, x)?.abs()) {
            violation = Some((x, val));
            break;
        }
    }
    if violation.is_some() {
        return Ok(CaccioppoliReport {
            lambda,
            constant,
            hypothesis_met: false,
            subsolution_violation: violation,
            rows: Vec::new(),
        });
    }
    let sq = |x: f64| v.eval(&[x]).map(|y| y.max(0.0).powi(2)).unwrap_or(f64::NAN);
    let mut rows = Vec::new();
    for &r in radii {
        let lhs = simpson(sq, -r, r, PER_UNIT);
        let rhs = constant / (lambda * r * r) * simpson(sq, -2.0 * r, 2.0 * r, PER_UNIT);
        rows.push(CaccioppoliRow { r, lhs, rhs, holds: lhs <= rhs });
    }
    Ok(CaccioppoliReport { lambda, constant, hypothesis_met: true, subsolution_violation: None, rows })
}

/// Inputs of the doubling iteration: `I(R) ≤ θ I(2R)` and `I(R) ≤ C R^γ` for `R > R₀`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoublingWitness {
    pub r0: f64,
    pub theta: f64,
    pub gamma: f64,
    pub c: f64,
    /// `(R, I(R))`, typically at `R, 2R, 4R, …`.
    pub samples: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DoublingError {
    #[error("theta = {theta} must be below 2^-gamma = {limit}")]
    Contract { theta: f64, limit: f64 },
    #[error("doubling samples must have R > R0 and finite I >= 0")]
    Samples,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "conclusion", rename_all = "snake_case")]
pub enum DoublingConclusion {
    /// Both premises hold on the samples and `C(θ2^γ)^k R^γ ≤ τ` at the largest `R`.
    Vanishes { k: u32, bound: f64 },
    PremiseFailed { premise: &'static str, r: f64, lhs: f64, rhs: f64 },
}

pub fn doubling_check(w: &DoublingWitness, tol: f64) -> Result<DoublingConclusion, DoublingError> {
    let limit = 2f64.powf(-w.gamma);
    if !(w.theta < limit) || w.theta < 0.0 {
        return Err(DoublingError::Contract { theta: w.theta, limit });
    }
    if w.samples.iter().any(|&(r, i)| !(r > w.r0 && r.is_finite() && i >= 0.0 && i.is_finite())) {
        return Err(DoublingError::Samples);
    }
    let mut s = w.samples.clone();
    s.sort_by(|a, b| a.0.total_cmp(&b.0));
    let value_at = |r: f64| s.iter().find(|p| (p.0 - r).abs() <= 1e-12 * r).map(|p| p.1);
    for &(r, i) in &s {
        if let Some(i2) = value_at(2.0 * r) {
            if i > w.theta * i2 {
                return Ok(DoublingConclusion::PremiseFailed { premise: "I(R) <= theta*I(2R)", r, lhs: i, rhs: w.theta * i2 });
            }
        }
        let growth = w.c * r.powf(w.gamma);
        if i > growth {
            return Ok(DoublingConclusion::PremiseFailed { premise: "I(R) <= C*R^gamma", r, lhs: i, rhs: growth });
        }
    }
    if s.iter().all(|p| p.1 <= tol) {
        return Ok(DoublingConclusion::Vanishes { k: 0, bound: s.iter().map(|p| p.1).fold(0.0, f64::max) });
    }
    let r = s.last().map_or(1.0, |p| p.0);
    let q = w.theta * 2f64.powf(w.gamma);
    let mut k = 0u32;
    let mut bound = w.c * r.powf(w.gamma);
    while bound > tol {
        k += 1;
        bound *= q;
        if k > 100_000 {
            break;
        }
    }
    Ok(DoublingConclusion::Vanishes { k, bound })
}
