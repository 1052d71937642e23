//! Sampled fields read from CSV for the coefficient audit.

use std::f64::consts::PI;

use thiserror::Error;

use crate::expr::EvalError;
use crate::fourier::{coefficient_audit, AuditReport, FourierError};

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("CSV header must be x1[,x2,...],xN,value; got {0:?}")]
    Header(Vec<String>),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("x'={point:?}: {message}")]
    Column { point: Vec<f64>, message: String },
    #[error(transparent)]
    Fourier(#[from] FourierError),
}

/// Columns of samples `u(x′, k·step)`, `k = 0..`, one per x′ point.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub points: Vec<Vec<f64>>,
    pub step: f64,
    /// Samples per column covering exactly one period `[0, 2π]`, endpoints included.
    pub period_len: usize,
    pub columns: Vec<Vec<f64>>,
}

pub fn read_field(text: &str, n_tangential: usize) -> Result<SampledField, FieldError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut expected: Vec<String> = (1..=n_tangential).map(|i| format!("x{i}")).collect();
    expected.push("xN".into());
    expected.push("value".into());
    if header != expected {
        return Err(FieldError::Header(header));
    }
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let nums = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| FieldError::Row { line, message: format!("`{f}` is not a number") }))
            .collect::<Result<Vec<f64>, _>>()?;
        let (xp, rest) = nums.split_at(n_tangential);
        match points.last() {
            Some(last) if last.as_slice() == xp => {}
            _ => {
                if points.iter().any(|p| p.as_slice() == xp) {
                    return Err(FieldError::Row { line, message: "rows of one x' point must be contiguous".into() });
                }
                points.push(xp.to_vec());
                xs.push(Vec::new());
                columns.push(Vec::new());
            }
        }
        xs.last_mut().expect("pushed above").push(rest[0]);
        columns.last_mut().expect("pushed above").push(rest[1]);
    }
    let Some(first) = xs.first() else {
        return Err(FieldError::Row { line: 1, message: "no data rows".into() });
    };
    if first.len() < 2 {
        return Err(FieldError::Column { point: points[0].clone(), message: "need at least two xN samples".into() });
    }
    let step = first[1] - first[0];
    for (p, col) in points.iter().zip(&xs) {
        if col.len() != first.len() {
            return Err(FieldError::Column { point: p.clone(), message: "columns differ in length".into() });
        }
        for (k, &t) in col.iter().enumerate() {
            if (t - k as f64 * step).abs() > 1e-9 * (1.0 + t.abs()) {
                return Err(FieldError::Column {
                    point: p.clone(),
                    message: format!("xN samples must be uniform from 0; sample {k} is {t}"),
                });
            }
        }
    }
    let q = 2.0 * PI / step;
    let period_len = q.round() as usize;
    if (q - period_len as f64).abs() > 1e-6 || period_len + 1 > first.len() {
        return Err(FieldError::Column {
            point: points[0].clone(),
            message: format!("xN step {step} must divide 2pi and the samples must cover [0, 2pi]"),
        });
    }
    Ok(SampledField { points, step, period_len: period_len + 1, columns })
}

/// Coefficient audit of a sampled field with modes up to `Q/4 − 1` (at most 16).
pub fn audit_field(f: &SampledField, tol_zero: f64) -> Result<AuditReport, FieldError> {
    let q = f.period_len - 1;
    let max_mode = (q / 4).saturating_sub(1).min(16) as u32;
    if max_mode < 2 {
        return Err(FieldError::Column {
            point: f.points[0].clone(),
            message: format!("{q} intervals per period resolve no sine mode >= 2"),
        });
    }
    let sampler = |x: &[f64], xn: f64| -> Result<f64, EvalError> {
        let i = f.points.iter().position(|p| p.as_slice() == x).expect("audit samples the field's own points");
        Ok(f.columns[i][(xn / f.step).round() as usize])
    };
    Ok(coefficient_audit(sampler, max_mode, &f.points, q, tol_zero)?)
}
