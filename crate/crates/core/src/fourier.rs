//! Fourier analysis in x_N on one period `[0, 2π]`:
//! `a_m = (1/π)∫ f cos(m x_N)`, `b_m = (1/π)∫ f sin(m x_N)`, by the composite
//! trapezoid rule with `Q` intervals.
//!
//! For 2π-periodic integrands the rule is exact on trigonometric polynomials
//! of degree below `Q/2`. The endpoint values are averaged, so integrands with
//! a jump across the period (such as `x_N`) get the standard trapezoid
//! treatment.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::EvalError;
use crate::model::TrigSeries;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FourierError {
    #[error("quadrature resolution {q} is too small for mode {mode} (need at least {need})")]
    Resolution { q: usize, mode: u32, need: usize },
    #[error("sampler failed at x'={point:?}, xN={xn}: {source}")]
    Sample { point: Vec<f64>, xn: f64, source: EvalError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Cos,
    Sin,
}

/// One mode measured at a list of x′ points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientMeasurement {
    pub mode: u32,
    pub kind: Kind,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub resolution: usize,
    /// `max |T_Q − T_{Q/2}|` over the points; zero for band-limited input.
    pub error_bound: f64,
}

/// All modes `0..=max_mode` measured at a list of x′ points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub points: Vec<Vec<f64>>,
    pub max_mode: u32,
    pub resolution: usize,
    /// `a[point][m]`, full `a₀`.
    pub a: Vec<Vec<f64>>,
    /// `b[point][m]`, `b[point][0] = 0`.
    pub b: Vec<Vec<f64>>,
    pub error_bound: f64,
}

fn need(mode: u32) -> usize {
    (2 * mode as usize + 2).max(4)
}

fn check_resolution(q: usize, mode: u32) -> Result<(), FourierError> {
    let need = need(mode);
    if q < need {
        return Err(FourierError::Resolution { q, mode, need });
    }
    Ok(())
}

/// Samples at `x_k = 2πk/Q`, `k = 0..=Q`.
fn nodes<F>(f: &F, point: &[f64], q: usize) -> Result<Vec<f64>, FourierError>
where
    F: Fn(&[f64], f64) -> Result<f64, EvalError>,
{
    (0..=q)
        .map(|k| {
            let xn = if k == q { 2.0 * PI } else { 2.0 * PI * k as f64 / q as f64 };
            f(point, xn).map_err(|source| FourierError::Sample { point: point.to_vec(), xn, source })
        })
        .collect()
}

/// Trapezoid value of `(1/π)∫ f·trig(m x_N)` using every `stride`-th node.
fn trapezoid(samples: &[f64], m: u32, kind: Kind, stride: usize) -> f64 {
    let q = samples.len() - 1;
    let n = q / stride;
    let h = 2.0 * PI / n as f64;
    let weight = |k: usize| {
        let t = f64::from(m) * 2.0 * PI * k as f64 / n as f64;
        match kind {
            Kind::Cos => t.cos(),
            Kind::Sin => t.sin(),
        }
    };
    let mut s = 0.5 * (samples[0] * weight(0) + samples[q] * weight(n));
    for k in 1..n {
        s += samples[k * stride] * weight(k);
    }
    s * h / PI
}

fn with_bound(samples: &[f64], m: u32, kind: Kind) -> (f64, f64) {
    let q = samples.len() - 1;
    let full = trapezoid(samples, m, kind, 1);
    let half_ok = q % 2 == 0 && q / 2 >= need(m);
    let bound = if half_ok { (full - trapezoid(samples, m, kind, 2)).abs() } else { f64::NAN };
    (full, bound)
}

/// Measures mode `m` of `f(x′, ·)` at every point in `points`.
pub fn analyze_mode<F>(
    f: F,
    m: u32,
    kind: Kind,
    points: &[Vec<f64>],
    q: usize,
) -> Result<CoefficientMeasurement, FourierError>
where
    F: Fn(&[f64], f64) -> Result<f64, EvalError> + Sync,
{
    check_resolution(q, m)?;
    let per_point: Vec<(f64, f64)> = points
        .par_iter()
        .map(|x| nodes(&f, x, q).map(|s| with_bound(&s, m, kind)))
        .collect::<Result<_, _>>()?;
    Ok(CoefficientMeasurement {
        mode: m,
        kind,
        points: points.to_vec(),
        values: per_point.iter().map(|v| v.0).collect(),
        resolution: q,
        error_bound: per_point.iter().map(|v| v.1).fold(0.0, f64::max),
    })
}

/// Measures all modes up to `max_mode` from one set of samples per point.
pub fn analyze_spectrum<F>(f: F, max_mode: u32, points: &[Vec<f64>], q: usize) -> Result<Spectrum, FourierError>
where
    F: Fn(&[f64], f64) -> Result<f64, EvalError> + Sync,
{
    check_resolution(q, max_mode)?;
    let rows: Vec<(Vec<f64>, Vec<f64>, f64)> = points
        .par_iter()
        .map(|x| {
            let s = nodes(&f, x, q)?;
            let mut a = Vec::with_capacity(max_mode as usize + 1);
            let mut b = Vec::with_capacity(max_mode as usize + 1);
            let mut bound: f64 = 0.0;
            for m in 0..=max_mode {
                let (av, ae) = with_bound(&s, m, Kind::Cos);
                let (bv, be) = if m == 0 { (0.0, 0.0) } else { with_bound(&s, m, Kind::Sin) };
                a.push(av);
                b.push(bv);
                bound = bound.max(ae).max(be);
            }
            Ok((a, b, bound))
        })
        .collect::<Result<_, FourierError>>()?;
    let error_bound = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let (a, b) = rows.into_iter().map(|(a, b, _)| (a, b)).unzip();
    Ok(Spectrum { points: points.to_vec(), max_mode, resolution: q, a, b, error_bound })
}

/// `|(1/π)∫f² − (a₀²/2 + Σ a_m² + b_m²)|` at one point, trapezoid on `q` intervals.
pub fn parseval_gap<F>(f: F, max_mode: u32, point: &[f64], q: usize) -> Result<f64, FourierError>
where
    F: Fn(&[f64], f64) -> Result<f64, EvalError> + Sync,
{
    let spec = analyze_spectrum(&f, max_mode, &[point.to_vec()], q)?;
    let s = nodes(&f, point, q)?;
    let sq: Vec<f64> = s.iter().map(|v| v * v).collect();
    let energy = trapezoid(&sq, 0, Kind::Cos, 1);
    let (a, b) = (&spec.a[0], &spec.b[0]);
    let mut sum = 0.5 * a[0] * a[0];
    for m in 1..a.len() {
        sum += a[m] * a[m] + b[m] * b[m];
    }
    Ok((energy - sum).abs())
}

/// Sampler for a stored series.
pub fn series_sampler(u: &TrigSeries) -> impl Fn(&[f64], f64) -> Result<f64, EvalError> + Sync + '_ {
    move |x, xn| u.synth(x, xn)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditWitness {
    pub modes: Vec<u32>,
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditCheck {
    pub name: &'static str,
    pub description: &'static str,
    pub passed: bool,
    pub violations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<AuditWitness>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignPattern {
    /// `|b_m| ≤ τ` at every sampled point.
    Zero,
    /// `b_m < −τ` at every sampled point.
    Negative,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeDichotomy {
    pub mode: u32,
    pub pattern: SignPattern,
    pub min: f64,
    pub max: f64,
}

/// Sign audit of the sine coefficients `b_m`, `m ≥ 2`, of a sampled field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub max_mode: u32,
    pub points: usize,
    pub resolution: usize,
    pub tol_zero: f64,
    pub checks: Vec<AuditCheck>,
    pub dichotomy: Vec<ModeDichotomy>,
    pub passed: bool,
}

/// Checks, at every point:
/// (i) `b_m ≤ τ` for `m ≥ 2`;
/// (ii) `b_n/n ≥ b_m/m − τ` for `n > m ≥ 2`;
/// (iii) per mode, `b_m` is either ≤ τ in magnitude everywhere or `< −τ` everywhere.
pub fn coefficient_audit<F>(
    u: F,
    max_mode: u32,
    points: &[Vec<f64>],
    q: usize,
    tol_zero: f64,
) -> Result<AuditReport, FourierError>
where
    F: Fn(&[f64], f64) -> Result<f64, EvalError> + Sync,
{
    let spec = analyze_spectrum(u, max_mode, points, q)?;
    Ok(audit_spectrum(&spec, tol_zero))
}

pub fn audit_spectrum(spec: &Spectrum, tol_zero: f64) -> AuditReport {
    let modes: Vec<u32> = (2..=spec.max_mode).collect();
    let mut sign = AuditCheck {
        name: "i",
        description: "b_m <= tol for every m >= 2",
        passed: true,
        violations: 0,
        witness: None,
    };
    let mut order = AuditCheck {
        name: "ii",
        description: "b_n/n >= b_m/m - tol for n > m >= 2",
        passed: true,
        violations: 0,
        witness: None,
    };
    for (p, b) in spec.points.iter().zip(&spec.b) {
        for &m in &modes {
            let bm = b[m as usize];
            if bm > tol_zero {
                sign.violations += 1;
                sign.witness.get_or_insert(AuditWitness { modes: vec![m], point: p.clone(), value: bm });
            }
            for n in m + 1..=spec.max_mode {
                let gap = b[n as usize] / f64::from(n) - bm / f64::from(m);
                if gap < -tol_zero {
                    order.violations += 1;
                    order.witness.get_or_insert(AuditWitness { modes: vec![n, m], point: p.clone(), value: gap });
                }
            }
        }
    }
    sign.passed = sign.violations == 0;
    order.passed = order.violations == 0;

    let mut dichotomy = Vec::new();
    let mut mixed = AuditCheck {
        name: "iii",
        description: "each b_m is either zero everywhere or negative everywhere",
        passed: true,
        violations: 0,
        witness: None,
    };
    for &m in &modes {
        let vals: Vec<f64> = spec.b.iter().map(|b| b[m as usize]).collect();
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pattern = if vals.iter().all(|v| v.abs() <= tol_zero) {
            SignPattern::Zero
        } else if vals.iter().all(|v| *v < -tol_zero) {
            SignPattern::Negative
        } else {
            SignPattern::Mixed
        };
        if pattern == SignPattern::Mixed {
            mixed.violations += 1;
            let i = vals.iter().position(|v| *v >= -tol_zero).unwrap_or(0);
            mixed.witness.get_or_insert(AuditWitness { modes: vec![m], point: spec.points[i].clone(), value: vals[i] });
        }
        dichotomy.push(ModeDichotomy { mode: m, pattern, min, max });
    }
    mixed.passed = mixed.violations == 0;

    let passed = sign.passed && order.passed && mixed.passed;
    AuditReport {
        max_mode: spec.max_mode,
        points: spec.points.len(),
        resolution: spec.resolution,
        tol_zero,
        checks: vec![sign, order, mixed],
        dichotomy,
        passed,
    }
}
