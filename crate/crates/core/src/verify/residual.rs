//! Pointwise checks of a series candidate: PDE residual, boundary traces,
//! nonnegativity and strip bounds.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::expr::{BoxGrid, EvalError, Expr};
use crate::model::{NumericSeries, ProblemSpec, TrigSeries};
use crate::system::apply_div_form;

use super::VerifyError;

/// Mode-wise residual of `−div(A∇u) − u + g`:
/// `−L a_m + (m²−1) a_m + c_m` (same for `b_m`, `d_m`) and
/// `−L α − α + γ` for the affine parts `α x_N`, `γ x_N`.
pub fn residual_series(u: &TrigSeries, p: &ProblemSpec) -> TrigSeries {
    let a = &p.diffusion;
    let g = &p.source;
    let term = |coeff: Expr, src: Expr, m: u32| {
        let mu = f64::from(m) * f64::from(m) - 1.0;
        Expr::add(Expr::sub(coeff.scale(mu), apply_div_form(a, &coeff)), src)
    };
    let mut out = TrigSeries::new();
    let cos_modes: std::collections::BTreeSet<u32> = u.cos_modes().chain(g.cos_modes()).map(|(m, _)| m).collect();
    for m in cos_modes {
        out.set_cos(m, term(u.cos(m), g.cos(m), m));
    }
    let sin_modes: std::collections::BTreeSet<u32> = u.sin_modes().chain(g.sin_modes()).map(|(m, _)| m).collect();
    for m in sin_modes {
        out.set_sin(m, term(u.sin(m), g.sin(m), m)).expect("sine modes are >= 1");
    }
    let affine = match (u.affine(), g.affine()) {
        (None, None) => None,
        (alpha, gamma) => {
            let alpha = alpha.cloned().unwrap_or_else(Expr::zero);
            let gamma = gamma.cloned().unwrap_or_else(Expr::zero);
            Some(term(alpha, gamma, 0))
        }
    };
    out.set_affine(affine);
    out.collected()
}

/// `x_N` samples on `[0, 2πK]`.
pub fn xn_samples(periods: usize, count: usize) -> Vec<f64> {
    let top = 2.0 * PI * periods.max(1) as f64;
    let n = count.max(2);
    (0..n).map(|j| top * j as f64 / (n - 1) as f64).collect()
}

/// Extrema of a field over `x′-grid × x_N samples`, plus the first value
/// below a threshold in `x_N`-ascending order (ties: first `x′` in row-major order).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldScan {
    pub min: f64,
    pub argmin: Vec<f64>,
    pub max: f64,
    pub argmax: Vec<f64>,
    pub first_below: Option<(Vec<f64>, f64)>,
}

struct Partial {
    min: (f64, usize),
    max: (f64, usize),
    first: Option<(usize, f64)>,
}

/// Scans `f(x′)(x_N)` where `f` yields the column of values along `xn` at `x′`.
pub fn scan_field<F>(grid: &BoxGrid, xn: &[f64], threshold: f64, f: F) -> Result<FieldScan, VerifyError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, EvalError> + Sync,
{
    let parts: Vec<Partial> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.point(i);
            let col = f(&x).map_err(|source| VerifyError::Eval { point: x.clone(), source })?;
            let mut part = Partial { min: (f64::INFINITY, 0), max: (f64::NEG_INFINITY, 0), first: None };
            for (j, &v) in col.iter().enumerate() {
                if v < part.min.0 {
                    part.min = (v, j);
                }
                if v > part.max.0 {
                    part.max = (v, j);
                }
                if part.first.is_none() && v < threshold {
                    part.first = Some((j, v));
                }
            }
            Ok(part)
        })
        .collect::<Result<_, VerifyError>>()?;
    let at = |i: usize, j: usize| {
        let mut p = grid.point(i);
        p.push(xn[j]);
        p
    };
    let (mut imin, mut imax) = (0, 0);
    let mut first: Option<(usize, usize, f64)> = None;
    for (i, part) in parts.iter().enumerate() {
        if part.min.0 < parts[imin].min.0 {
            imin = i;
        }
        if part.max.0 > parts[imax].max.0 {
            imax = i;
        }
        if let Some((j, v)) = part.first {
            if first.is_none_or(|(_, fj, _)| j < fj) {
                first = Some((i, j, v));
            }
        }
    }
    Ok(FieldScan {
        min: parts[imin].min.0,
        argmin: at(imin, parts[imin].min.1),
        max: parts[imax].max.0,
        argmax: at(imax, parts[imax].max.1),
        first_below: first.map(|(i, j, v)| (at(i, j), v)),
    })
}

fn series_column<'a>(u: &'a TrigSeries, xn: &[f64]) -> impl Fn(&[f64]) -> Result<Vec<f64>, EvalError> + Sync + 'a {
    let xn = xn.to_vec();
    move |x| {
        let s: NumericSeries = u.at(x)?;
        Ok(xn.iter().map(|&t| s.eval(t)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualSummary {
    /// Mode-wise residual coefficients.
    pub series: TrigSeries,
    pub sup: f64,
    pub witness: Vec<f64>,
}

/// Residual series and its sup over the verification box × K periods.
pub fn residual(u: &TrigSeries, p: &ProblemSpec) -> Result<ResidualSummary, VerifyError> {
    let series = residual_series(u, p);
    let v = &p.verification;
    let xn = xn_samples(v.periods, v.grid);
    let scan = scan_field(&v.xp_grid(), &xn, f64::NEG_INFINITY, series_column(&series, &xn))?;
    let (sup, witness) =
        if scan.max.abs() >= scan.min.abs() { (scan.max.abs(), scan.argmax) } else { (scan.min.abs(), scan.argmin) };
    Ok(ResidualSummary { series, sup, witness })
}

/// Sups over the x′ grid of the four boundary quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceReport {
    pub u_at_0: f64,
    pub un_at_0: f64,
    pub u_at_2pi: f64,
    pub un_at_2pi: f64,
}

impl TraceReport {
    pub fn base_step_holds(&self, tol: f64) -> bool {
        self.u_at_2pi <= tol && self.un_at_0 <= tol && self.un_at_2pi <= tol
    }
}

fn trace_fold(values: impl ParallelIterator<Item = Result<[f64; 4], VerifyError>>) -> Result<TraceReport, VerifyError> {
    let rows: Vec<[f64; 4]> = values.collect::<Result<_, _>>()?;
    let mut s = [0.0f64; 4];
    for r in rows {
        for k in 0..4 {
            s[k] = s[k].max(r[k].abs());
        }
    }
    Ok(TraceReport { u_at_0: s[0], un_at_0: s[1], u_at_2pi: s[2], un_at_2pi: s[3] })
}

/// Boundary traces from the exact series derivative.
pub fn trace_check(u: &TrigSeries, grid: &BoxGrid) -> Result<TraceReport, VerifyError> {
    trace_fold((0..grid.len()).into_par_iter().map(|i| {
        let x = grid.point(i);
        let s = u.at(&x).map_err(|source| VerifyError::Eval { point: x.clone(), source })?;
        Ok([s.eval(0.0), s.eval_dxn(0.0), s.eval(2.0 * PI), s.eval_dxn(2.0 * PI)])
    }))
}

/// Boundary traces of a sampled field; `x_N` derivatives by second-order
/// one-sided differences with step `h`.
pub fn trace_check_sampler<F>(u: F, grid: &BoxGrid, h: f64) -> Result<TraceReport, VerifyError>
where
    F: Fn(&[f64], f64) -> Result<f64, EvalError> + Sync,
{
    let top = 2.0 * PI;
    trace_fold((0..grid.len()).into_par_iter().map(|i| {
        let x = grid.point(i);
        let at = |t: f64| u(&x, t).map_err(|source| VerifyError::Eval { point: x.clone(), source });
        let (u0, u1, u2) = (at(0.0)?, at(h)?, at(2.0 * h)?);
        let (v0, v1, v2) = (at(top)?, at(top - h)?, at(top - 2.0 * h)?);
        Ok([u0, (-3.0 * u0 + 4.0 * u1 - u2) / (2.0 * h), v0, (3.0 * v0 - 4.0 * v1 + v2) / (2.0 * h)])
    }))
}

/// Minimum of a candidate over the verification box × K periods.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonnegScan {
    pub min: f64,
    pub argmin: Vec<f64>,
    /// First point with `u < −τ_zero`, scanning `x_N` upwards.
    pub first_violation: Option<(Vec<f64>, f64)>,
    pub tol: f64,
    pub passed: bool,
}

impl NonnegScan {
    /// The first violation if any, otherwise the minimizer.
    pub fn witness(&self) -> (&[f64], f64) {
        match &self.first_violation {
            Some((x, v)) => (x, *v),
            None => (&self.argmin, self.min),
        }
    }
}

pub fn nonnegativity_scan(u: &TrigSeries, p: &ProblemSpec) -> Result<NonnegScan, VerifyError> {
    let v = &p.verification;
    let tol = p.tolerances.zero;
    let xn = xn_samples(v.periods, v.grid);
    let scan = scan_field(&v.xp_grid(), &xn, -tol, series_column(u, &xn))?;
    Ok(NonnegScan {
        min: scan.min,
        argmin: scan.argmin,
        passed: scan.first_below.is_none(),
        first_violation: scan.first_below,
        tol,
    })
}

/// `sup u` over the box × `[2πk, 2π(k+1)]`, for `k < K`.
pub fn strip_bounds(u: &TrigSeries, p: &ProblemSpec) -> Result<Vec<f64>, VerifyError> {
    let v = &p.verification;
    let per = v.grid.max(2);
    (0..v.periods.max(1))
        .map(|k| {
            let xn: Vec<f64> = xn_samples(1, per).into_iter().map(|t| t + 2.0 * PI * k as f64).collect();
            scan_field(&v.xp_grid(), &xn, f64::NEG_INFINITY, series_column(u, &xn)).map(|s| s.max)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::model::DiffusionMatrix;

    fn spec(g: TrigSeries) -> ProblemSpec {
        let mut p = ProblemSpec::with_identity(2, g).unwrap();
        p.verification.grid = 65;
        p
    }

    #[test]
    fn model_solution_has_exact_zero_residual() {
        let u = TrigSeries::from_values(&[(0, 2.0), (1, -1.0)], &[]);
        let p = spec(TrigSeries::from_values(&[(0, 2.0)], &[]));
        let r = residual(&u, &p).unwrap();
        assert_eq!(r.sup, 0.0);
        assert!(r.series.is_empty());
    }

    #[test]
    fn perturbed_candidate_residual_is_three_eps() {
        let eps = 1e-3;
        let u = TrigSeries::from_values(&[(0, 2.0), (1, -1.0)], &[(2, eps)]);
        let mut p = spec(TrigSeries::from_values(&[(0, 2.0)], &[]));
        p.verification.grid = 257;
        let r = residual(&u, &p).unwrap();
        // −u″ − u + 1 = 3ε sin 2x_N; the grid contains x_N = π/4.
        assert!((r.sup - 3.0 * eps).abs() < 1e-15, "{}", r.sup);
    }

    #[test]
    fn family_residual_vanishes() {
        let mut g = TrigSeries::new();
        g.set_affine(Some(Expr::one()));
        let p = spec(g.clone());
        for a in [-1.0, 0.0, 0.5, 1.0] {
            let mut u = TrigSeries::from_values(&[], &[(1, a)]);
            u.set_affine(Some(Expr::one()));
            assert_eq!(residual(&u, &p).unwrap().sup, 0.0);
        }
    }

    #[test]
    fn residual_in_divergence_form() {
        let a = DiffusionMatrix::scalar(parse_expr("1+0.5*sin(x1)", 1).unwrap()).unwrap();
        let mut p = ProblemSpec::new(2, a, TrigSeries::from_values(&[(0, 2.0)], &[])).unwrap();
        p.verification.grid = 33;
        let u = TrigSeries::from_values(&[(0, 2.0), (1, -1.0)], &[]);
        assert_eq!(residual(&u, &p).unwrap().sup, 0.0);
        // x′-dependent coefficient: −(a v′)′ + 3v with v = x1², a = 1 + x1²/2... checked by FD.
        let v = parse_expr("exp(-x1^2)", 1).unwrap();
        let u = TrigSeries::from_modes([(2, v.clone())], []).unwrap();
        let r = residual_series(&u, &p);
        let coef = |x: f64| (1.0 + 0.5 * x.sin()) * (-2.0 * x * (-x * x).exp());
        let h = 1e-5;
        for x in [-1.0, 0.2, 1.3] {
            let lv = (coef(x + h) - coef(x - h)) / (2.0 * h);
            let want = -lv + 3.0 * (-x * x as f64).exp();
            assert!((r.cos(2).eval(&[x]).unwrap() - want).abs() < 1e-6);
        }
    }

    #[test]
    fn traces() {
        let grid = BoxGrid::cube(1, -1.0, 1.0, 5).unwrap();
        let t = trace_check(&TrigSeries::from_values(&[(0, 2.0), (1, -1.0)], &[]), &grid).unwrap();
        assert_eq!(t, TraceReport { u_at_0: 0.0, un_at_0: t.un_at_0, u_at_2pi: t.u_at_2pi, un_at_2pi: t.un_at_2pi });
        assert!(t.un_at_0 < 1e-15 && t.u_at_2pi < 1e-15 && t.un_at_2pi < 1e-15);

        let mut fam = TrigSeries::from_values(&[], &[(1, 1.0)]);
        fam.set_affine(Some(Expr::one()));
        let t = trace_check(&fam, &grid).unwrap();
        assert!((t.u_at_2pi - 2.0 * PI).abs() < 1e-12);

        let s = TrigSeries::from_values(&[], &[(1, 1.0)]);
        let t = trace_check(&s, &grid).unwrap();
        assert_eq!(t.un_at_0, 1.0);
        assert!(!t.base_step_holds(1e-9));
        let ts = trace_check_sampler(|_, t| Ok(t.sin()), &grid, 1e-4).unwrap();
        assert!((ts.un_at_0 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn nonnegativity() {
        let p = spec(TrigSeries::new());
        let u = TrigSeries::from_values(&[(0, 2.0), (1, -1.0)], &[]);
        let s = nonnegativity_scan(&u, &p).unwrap();
        assert!(s.passed && s.min.abs() < 1e-15);
        assert_eq!(s.argmin[1], 0.0);

        let u = TrigSeries::from_values(&[], &[(1, 2.0 / 3.0), (2, -1.0 / 3.0)]);
        let s = nonnegativity_scan(&u, &p).unwrap();
        assert!(!s.passed && s.min < 0.0);
        let (x, v) = s.witness();
        assert!(x[1] > PI && x[1] < 2.0 * PI && v < 0.0);
    }

    #[test]
    fn first_violation_is_lowest_xn() {
        let mut p = spec(TrigSeries::new());
        p.verification.grid = 127;
        let mut u = TrigSeries::from_values(&[], &[(1, -1.5)]);
        u.set_affine(Some(Expr::one()));
        let s = nonnegativity_scan(&u, &p).unwrap();
        let (x, v) = s.witness();
        let t = 4.0 * PI / 126.0;
        assert_eq!(x[1], t);
        assert_eq!(v, t - 1.5 * t.sin());
        assert!(s.min < v);
    }

    #[test]
    fn strip_bound_per_period() {
        let p = spec(TrigSeries::new());
        let u = TrigSeries::from_values(&[(0, 2.0), (1, -1.0)], &[]);
        let b = strip_bounds(&u, &p).unwrap();
        assert_eq!(b.len(), 2);
        assert!(b.iter().all(|m| (m - 2.0).abs() < 1e-12));
    }
}
