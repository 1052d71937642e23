//! Independent checks of candidate solutions.

pub mod energy;
pub mod oracle;
pub mod residual;

use serde::Serialize;
use thiserror::Error;

use crate::expr::EvalError;
use crate::fourier::{coefficient_audit, series_sampler, AuditReport, FourierError};
use crate::model::{ProblemSpec, TrigSeries};

pub use energy::{
    caccioppoli_check, cutoff, cutoff_profile, doubling_check, CaccioppoliReport, CutoffProfile, DoublingConclusion,
    DoublingError, DoublingWitness, EnergyError,
};
pub use oracle::{oracle_convergence, oracle_solve, ConvergenceReport, OracleError, OracleField, OracleReport};
pub use residual::{
    nonnegativity_scan, residual, residual_series, strip_bounds, trace_check, trace_check_sampler, NonnegScan,
    ResidualSummary, TraceReport,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("evaluation failed at {point:?}: {source}")]
    Eval { point: Vec<f64>, source: EvalError },
    #[error(transparent)]
    Fourier(#[from] FourierError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VerifyOptions {
    pub oracle: bool,
    pub audit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub residual_sup: f64,
    pub residual_witness: Vec<f64>,
    pub boundary: TraceReport,
    pub nonnegativity: NonnegScan,
    /// `sup u` per period.
    pub strip_bound: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<ConvergenceReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditReport>,
    pub passed: bool,
    pub failures: Vec<String>,
}

/// Residual, traces, nonnegativity and strip bounds on the verification
/// grid; oracle and coefficient audit on request. `passed` requires
/// residual ≤ τ_res, min ≥ −τ_zero and `|u(·,0)| ≤ τ_zero`.
pub fn verify(u: &TrigSeries, p: &ProblemSpec, opts: VerifyOptions) -> Result<VerificationReport, VerifyError> {
    let tol = p.tolerances;
    let res = residual(u, p)?;
    let boundary = trace_check(u, &p.verification.xp_grid())?;
    let nonnegativity = nonnegativity_scan(u, p)?;
    let strip_bound = strip_bounds(u, p)?;
    let mut failures = Vec::new();
    if !(res.sup <= tol.residual) {
        failures.push(format!("residual {:e} exceeds tol_res {:e} at {:?}", res.sup, tol.residual, res.witness));
    }
    if !nonnegativity.passed {
        let (x, v) = nonnegativity.witness();
        failures.push(format!("candidate is negative: u = {v:e} at {x:?}"));
    }
    if !(boundary.u_at_0 <= tol.zero) {
        failures.push(format!("u(.,0) does not vanish: sup {:e}", boundary.u_at_0));
    }
    let oracle = if opts.oracle {
        let o = p.verification.oracle;
        Some(oracle_convergence(p, u, o.r, o.h)?)
    } else {
        None
    };
    let audit = if opts.audit && u.affine().is_none() {
        let points = p.verification.xp_grid_with(5).points().collect::<Vec<_>>();
        let m = u.max_mode() + 2;
        let q = (4 * m as usize + 4).max(64);
        Some(coefficient_audit(series_sampler(u), m, &points, q, tol.zero)?)
    } else {
        None
    };
    Ok(VerificationReport {
        residual_sup: res.sup,
        residual_witness: res.witness,
        boundary,
        nonnegativity,
        strip_bound,
        oracle,
        audit,
        passed: failures.is_empty(),
        failures,
    })
}
