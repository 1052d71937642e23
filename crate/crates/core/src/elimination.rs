//! Elimination for finite-mode sources with `c₁ = d₁ = 0` and vanishing traces.
//!
//! With `L = div′(Â∇′·)`, `μ_m = m² − 1` and the unknown coefficients
//! `a₀, a_{m_j}` (cos chain) and `b_{n_j}` (sin chain), the boundary conditions
//! give a linear relation
//!
//! ```text
//! Σ_{j∈S} w_j a_j = α a₁ + F          (S: remaining modes)
//! ```
//!
//! seeded by `u(·,0) = 0` (`w_j = m_j²`, `α = −1`, `F = −(c₀/2 + Σ c_j)`) or
//! `u_N(·,0) = 0` (`w_j = n_j`, `α = −1`, `F = 0`). Each round solves the relation
//! for the smallest remaining mode `p`, then applies `L`, substitutes the mode
//! equations and subtracts `μ_p` times the relation:
//!
//! ```text
//! w′_j = w_j (μ_j − μ_p),   α′ = −μ_p α,   F′ = L F − Σ_{j∈S} w_j c_j − μ_p F.
//! ```
//!
//! When `S` is empty the relation `0 = α a₁ + F` remains. Solving the recorded
//! relations backwards expresses every coefficient as `base(x′) + slope·a₁`.
//! The parameters then follow from the PDE residuals by least squares.

use serde::Serialize;
use thiserror::Error;

use crate::expr::{BoxGrid, EvalError, Expr};
use crate::fourier::Kind;
use crate::model::{DiffusionMatrix, ProblemSpec, TrigSeries};
use crate::system::{apply_div_form, strip_cos, strip_sin};

/// Expressions larger than this (as trees) are not passed through `collect`.
const COLLECT_LIMIT: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EliminationError {
    #[error("elimination needs c1 = d1 = 0; the source has a nonzero {0} coefficient")]
    ModeOne(&'static str),
    #[error("elimination needs a finite trigonometric source; the affine x_N term has infinitely many strip modes")]
    Affine,
    #[error("integer weights overflow at mode {0}")]
    Overflow(u32),
    #[error("residual evaluation failed at {point:?}: {source}")]
    Eval { point: Vec<f64>, source: EvalError },
}

fn tidy(e: Expr) -> Expr {
    if e.tree_size(COLLECT_LIMIT) < COLLECT_LIMIT {
        e.collect()
    } else {
        e
    }
}

/// `base + slope·p` for the chain parameter `p` (`a₁` or `b₁`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Affine {
    pub base: Expr,
    pub slope: f64,
}

impl Affine {
    pub fn eval(&self, x: &[f64], p: f64) -> Result<f64, EvalError> {
        Ok(self.base.eval(x)? + self.slope * p)
    }

    pub fn at(&self, p: f64) -> Expr {
        tidy(Expr::add(self.base.clone(), Expr::constant(self.slope * p)))
    }
}

/// One round of a chain: the relation `Σ w_j x_j = α p + F` before pivoting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Round {
    pub round: usize,
    /// Mode solved for in this round; `None` for the terminal relation.
    pub pivot: Option<u32>,
    pub weights: Vec<(u32, i128)>,
    pub alpha: i128,
    pub aggregate: Expr,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Chain {
    pub kind: Kind,
    pub modes: Vec<u32>,
    pub rounds: Vec<Round>,
    /// Closed forms of the chain coefficients, in ascending mode order
    /// (the cos chain includes `a₀` at mode 0).
    pub solved: Vec<(u32, Affine)>,
}

impl Chain {
    pub fn coefficient(&self, mode: u32) -> Option<&Affine> {
        self.solved.iter().find(|(m, _)| *m == mode).map(|(_, a)| a)
    }

    pub fn terminal(&self) -> &Round {
        self.rounds.last().expect("a chain always has a terminal round")
    }
}

fn mu(m: u32) -> i128 {
    i128::from(m) * i128::from(m) - 1
}

/// Runs one chain. `sources[j]` is the source coefficient of `modes[j]`;
/// `seed` is the initial relation; `offset` is the number of rounds
/// already spent (1 for the cos chain, whose first round eliminates `a₀`).
fn run_chain(
    a: &DiffusionMatrix,
    kind: Kind,
    modes: &[u32],
    sources: &[Expr],
    seed: (Vec<i128>, i128, Expr),
    offset: usize,
) -> Result<Chain, EliminationError> {
    let (mut w, mut alpha, mut f) = seed;
    let mut live: Vec<usize> = (0..modes.len()).collect();
    let mut rounds = Vec::new();
    while let Some(&p) = live.first() {
        rounds.push(Round {
            round: offset + rounds.len() + 1,
            pivot: Some(modes[p]),
            weights: live.iter().map(|&j| (modes[j], w[j])).collect(),
            alpha,
            aggregate: f.clone(),
        });
        let mu_p = mu(modes[p]);
        let mut next = apply_div_form(a, &f);
        for &j in &live {
            next = Expr::sub(next, sources[j].scale(w[j] as f64));
        }
        next = Expr::sub(next, f.scale(mu_p as f64));
        f = tidy(next);
        alpha = alpha.checked_mul(-mu_p).ok_or(EliminationError::Overflow(modes[p]))?;
        live.remove(0);
        for &j in &live {
            w[j] = w[j].checked_mul(mu(modes[j]) - mu_p).ok_or(EliminationError::Overflow(modes[j]))?;
        }
    }
    rounds.push(Round { round: offset + rounds.len() + 1, pivot: None, weights: Vec::new(), alpha, aggregate: f });

    // Back-substitution: the last pivot depends on nothing, earlier ones on later ones.
    let mut solved: Vec<Option<Affine>> = vec![None; modes.len()];
    for r in rounds.iter().rev().filter(|r| r.pivot.is_some()) {
        let p = modes.iter().position(|m| Some(*m) == r.pivot).expect("pivot is a chain mode");
        let wp = r.weights[0].1 as f64;
        let mut base = r.aggregate.clone();
        let mut slope = r.alpha as f64;
        for &(m, wj) in &r.weights[1..] {
            let j = modes.iter().position(|x| *x == m).expect("weight mode is a chain mode");
            let s = solved[j].as_ref().expect("later pivots are solved first");
            base = Expr::sub(base, s.base.scale(wj as f64));
            slope -= wj as f64 * s.slope;
        }
        solved[p] = Some(Affine { base: tidy(Expr::div(base, Expr::constant(wp))), slope: slope / wp });
    }
    let solved = modes.iter().copied().zip(solved.into_iter().map(|s| s.expect("every mode is a pivot"))).collect();
    Ok(Chain { kind, modes: modes.to_vec(), rounds, solved })
}

/// Index sets, chains and closed forms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EliminationState {
    /// `I₁`: cos modes ≥ 2 present in the source.
    pub cos_modes: Vec<u32>,
    /// `I₂`: sin modes ≥ 2 present in the source.
    pub sin_modes: Vec<u32>,
    pub cos_chain: Chain,
    pub sin_chain: Chain,
}

/// Runs both chains.
pub fn eliminate(p: &ProblemSpec) -> Result<EliminationState, EliminationError> {
    let g = &p.source;
    if g.affine().is_some() {
        return Err(EliminationError::Affine);
    }
    if !strip_cos(g, 1).is_zero() {
        return Err(EliminationError::ModeOne("c1"));
    }
    if !strip_sin(g, 1).is_zero() {
        return Err(EliminationError::ModeOne("d1"));
    }
    let a = &p.diffusion;
    let cos_modes: Vec<u32> = g.cos_modes().map(|(m, _)| m).filter(|m| *m >= 2).collect();
    let sin_modes: Vec<u32> = g.sin_modes().map(|(m, _)| m).filter(|m| *m >= 2).collect();

    let c: Vec<Expr> = cos_modes.iter().map(|m| g.cos(*m)).collect();
    let mut f = g.cos(0).scale(0.5);
    for cj in &c {
        f = Expr::add(f, cj.clone());
    }
    let w: Vec<i128> = cos_modes.iter().map(|m| i128::from(*m) * i128::from(*m)).collect();
    let mut cos_chain = run_chain(a, Kind::Cos, &cos_modes, &c, (w, -1, tidy(Expr::neg(f))), 1)?;
    // Round 1: a₀ = −2a₁ − 2 Σ a_{m_j}.
    let mut base = Expr::zero();
    let mut slope = -2.0;
    for (_, s) in &cos_chain.solved {
        base = Expr::sub(base, s.base.scale(2.0));
        slope -= 2.0 * s.slope;
    }
    cos_chain.solved.insert(0, (0, Affine { base: tidy(base), slope }));

    let d: Vec<Expr> = sin_modes.iter().map(|m| g.sin(*m)).collect();
    let w: Vec<i128> = sin_modes.iter().map(|m| i128::from(*m)).collect();
    let sin_chain = run_chain(a, Kind::Sin, &sin_modes, &d, (w, -1, Expr::zero()), 0)?;

    Ok(EliminationState { cos_modes, sin_modes, cos_chain, sin_chain })
}

/// One residual condition `R(x′) + slope·p = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualRow {
    pub label: String,
    pub kind: Kind,
    pub base: Expr,
    pub slope: f64,
}

/// Mode equations for every chain coefficient, plus the terminal relations.
pub fn residual_rows(p: &ProblemSpec, st: &EliminationState) -> Vec<ResidualRow> {
    let a = &p.diffusion;
    let mut rows = Vec::new();
    for chain in [&st.cos_chain, &st.sin_chain] {
        let name = if chain.kind == Kind::Cos { "a" } else { "b" };
        for (m, coeff) in &chain.solved {
            let lambda = mu(*m) as f64;
            let src = if chain.kind == Kind::Cos { strip_cos(&p.source, *m) } else { strip_sin(&p.source, *m) };
            let base = Expr::sub(apply_div_form(a, &coeff.base), Expr::add(coeff.base.scale(lambda), src));
            rows.push(ResidualRow {
                label: format!("equation for {name}{m}"),
                kind: chain.kind,
                base: tidy(base),
                slope: -lambda * coeff.slope,
            });
        }
        let t = chain.terminal();
        rows.push(ResidualRow {
            label: format!("terminal relation of the {name} chain (round {})", t.round),
            kind: chain.kind,
            base: t.aggregate.clone(),
            slope: t.alpha as f64,
        });
    }
    rows
}

/// Deterministic, well-spread points in the box (Kronecker sequence).
pub fn generic_points(bbox: &[(f64, f64)], count: usize, skip: usize) -> Vec<Vec<f64>> {
    const ALPHAS: [f64; 3] = [0.754_877_666_246_692_7, 0.569_840_290_998_053_3, 0.414_213_562_373_095_1];
    (skip..skip + count)
        .map(|k| {
            bbox.iter()
                .enumerate()
                .map(|(i, (lo, hi))| {
                    let t = (0.5 + (k as f64 + 1.0) * ALPHAS[i % 3]).fract();
                    lo + (hi - lo) * (0.05 + 0.9 * t)
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ParameterFit {
    Determined { value: f64 },
    /// Every sampled slope vanished, at the initial and at the retest points.
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub label: String,
    pub residual: String,
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ParameterOutcome {
    /// Every residual row vanishes within `τ_res` on the grid.
    Consistent { a1: f64, b1: f64, max_residual: f64, candidate: TrigSeries },
    /// Some row exceeds `10·τ_res` for every admissible parameter value.
    Inconsistent { a1: ParameterFit, b1: ParameterFit, witness: Witness },
    /// Residual between `τ_res` and `10·τ_res`, or a free parameter.
    Undetermined { a1: ParameterFit, b1: ParameterFit, max_residual: f64, reason: String },
}

fn eval_row(row: &ResidualRow, x: &[f64], param: f64) -> Result<f64, EliminationError> {
    row.base
        .eval(x)
        .map(|v| v + row.slope * param)
        .map_err(|source| EliminationError::Eval { point: x.to_vec(), source })
}

/// Fitted parameters this small are roundoff and are set to zero.
const SNAP: f64 = 1e-12;

/// Least-squares value of one parameter from sampled rows, or `Free`.
fn fit(rows: &[&ResidualRow], pts: &[Vec<f64>], retest: &[Vec<f64>]) -> Result<ParameterFit, EliminationError> {
    for sample in [pts, retest] {
        let (mut ss, mut sr) = (0.0, 0.0);
        for row in rows {
            for x in sample {
                let r = eval_row(row, x, 0.0)?;
                ss += row.slope * row.slope;
                sr += row.slope * r;
            }
        }
        if ss > 0.0 {
            let value = -sr / ss;
            return Ok(ParameterFit::Determined { value: if value.abs() <= SNAP { 0.0 } else { value } });
        }
    }
    Ok(ParameterFit::Free)
}

/// Chooses `a₁`, `b₁` and checks every residual row on `grid`.
pub fn determine_parameters(
    p: &ProblemSpec,
    st: &EliminationState,
    grid: &BoxGrid,
) -> Result<ParameterOutcome, EliminationError> {
    let rows = residual_rows(p, st);
    let pts = generic_points(&p.verification.bbox, 3, 0);
    let retest = generic_points(&p.verification.bbox, 10, 3);
    let cos_rows: Vec<&ResidualRow> = rows.iter().filter(|r| r.kind == Kind::Cos).collect();
    let sin_rows: Vec<&ResidualRow> = rows.iter().filter(|r| r.kind == Kind::Sin).collect();
    let a1 = fit(&cos_rows, &pts, &retest)?;
    let b1 = fit(&sin_rows, &pts, &retest)?;
    let value = |f: &ParameterFit| match f {
        ParameterFit::Determined { value } => *value,
        ParameterFit::Free => 0.0,
    };
    let (va, vb) = (value(&a1), value(&b1));

    let tol = p.tolerances.residual;
    let mut worst: Option<(usize, Vec<f64>, f64)> = None;
    for x in grid.points() {
        for (i, row) in rows.iter().enumerate() {
            let v = eval_row(row, &x, if row.kind == Kind::Cos { va } else { vb })?;
            if worst.as_ref().is_none_or(|w| v.abs() > w.2.abs()) {
                worst = Some((i, x.clone(), v));
            }
        }
    }
    let (wi, wx, wv) = worst.unwrap_or((0, vec![], 0.0));
    let max_residual = wv.abs();

    if max_residual > 10.0 * tol {
        let row = &rows[wi];
        return Ok(ParameterOutcome::Inconsistent {
            a1,
            b1,
            witness: Witness {
                label: row.label.clone(),
                residual: row.at_param(if row.kind == Kind::Cos { va } else { vb }).to_string(),
                point: wx,
                value: wv,
            },
        });
    }
    let free = matches!(a1, ParameterFit::Free) || matches!(b1, ParameterFit::Free);
    if max_residual > tol || free {
        let reason = if free {
            "a parameter is not determined by the residual equations".to_string()
        } else {
            format!("max residual {max_residual:e} is between tol_res and 10*tol_res")
        };
        return Ok(ParameterOutcome::Undetermined { a1, b1, max_residual, reason });
    }

    let mut u = TrigSeries::new();
    for (m, c) in &st.cos_chain.solved {
        u.set_cos(*m, c.at(va));
    }
    u.set_cos(1, Expr::constant(va));
    u.set_sin(1, Expr::constant(vb)).expect("mode 1");
    for (m, c) in &st.sin_chain.solved {
        u.set_sin(*m, c.at(vb)).expect("sine chain modes are >= 2");
    }
    Ok(ParameterOutcome::Consistent { a1: va, b1: vb, max_residual, candidate: u })
}

impl ResidualRow {
    fn at_param(&self, p: f64) -> Expr {
        let e = Expr::add(self.base.clone(), Expr::constant(self.slope * p));
        if e.tree_size(2000) < 2000 {
            e.collect()
        } else {
            e
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    fn p1(s: &str) -> Expr {
        parse_expr(s, 1).unwrap()
    }

    fn spec(g: TrigSeries) -> ProblemSpec {
        let mut p = ProblemSpec::with_identity(2, g).unwrap();
        p.verification.grid = 65;
        p
    }

    fn arctan_source() -> TrigSeries {
        let half_c0 = p1("2/(1+x1^2)^2 - 4*x1/(1+x1^2)^2*atan(x1) + atan(x1)^2");
        let c2 = p1("-2/(1+x1^2)^2 + 4*x1/(1+x1^2)^2*atan(x1) + 3*atan(x1)^2");
        TrigSeries::from_modes([(0, half_c0.scale(2.0)), (2, c2)], []).unwrap()
    }

    #[test]
    fn arctan_closed_forms() {
        let st = eliminate(&spec(arctan_source())).unwrap();
        assert_eq!(st.cos_modes, vec![2]);
        // k₁ = 1: a₀ round, one pivot, terminal.
        assert_eq!(st.cos_chain.rounds.len() + 1, 3);
        let a2 = st.cos_chain.coefficient(2).unwrap();
        let a0 = st.cos_chain.coefficient(0).unwrap();
        assert_eq!(a2.slope, -0.25);
        assert_eq!(a0.slope, -1.5);
        for x in [-3.0, -1.0, 0.0, 0.5, 2.0] {
            let t = (x as f64).atan().powi(2);
            assert!((a2.base.eval(&[x]).unwrap() + t).abs() < 1e-12);
            assert!((a0.base.eval(&[x]).unwrap() - 2.0 * t).abs() < 1e-12);
        }
        assert!(st.sin_chain.modes.is_empty());
    }

    #[test]
    fn arctan_parameters() {
        let p = spec(arctan_source());
        let st = eliminate(&p).unwrap();
        match determine_parameters(&p, &st, &p.verification.xp_grid()).unwrap() {
            ParameterOutcome::Consistent { a1, b1, candidate, .. } => {
                assert!(a1.abs() < 1e-12 && b1 == 0.0);
                for x in [-2.0, 0.3, 1.7] {
                    for y in [0.0, 1.0, 4.0] {
                        let want = (x as f64).atan().powi(2) * (1.0 - (2.0 * y as f64).cos());
                        assert!((candidate.synth(&[x], y).unwrap() - want).abs() < 1e-12);
                    }
                }
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn constant_source_through_elimination() {
        let p = spec(TrigSeries::from_values(&[(0, 2.0)], &[]));
        let st = eliminate(&p).unwrap();
        match determine_parameters(&p, &st, &p.verification.xp_grid()).unwrap() {
            ParameterOutcome::Consistent { a1, candidate, .. } => {
                assert_eq!(a1, -1.0);
                assert_eq!(candidate.cos(0).as_const(), Some(2.0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn one_dimensional_sources_match_series_formula() {
        // g = 1/3 + cos 2xN: a₂ = −1/3 − a₁/4, a₀ = 2/3 − 3a₁/2, then a₁ = 0.
        let p = spec(TrigSeries::from_values(&[(0, 2.0 / 3.0), (2, 1.0)], &[]));
        let st = eliminate(&p).unwrap();
        let a2 = st.cos_chain.coefficient(2).unwrap();
        assert!((a2.base.as_const().unwrap() + 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(a2.slope, -0.25);
        let a0 = st.cos_chain.coefficient(0).unwrap();
        assert!((a0.base.as_const().unwrap() - 2.0 / 3.0).abs() < 1e-15);
        match determine_parameters(&p, &st, &p.verification.xp_grid()).unwrap() {
            ParameterOutcome::Consistent { a1, candidate, .. } => {
                assert!(a1.abs() < 1e-14);
                assert!((candidate.cos(2).as_const().unwrap() + 1.0 / 3.0).abs() < 1e-14);
                assert!((candidate.cos(0).as_const().unwrap() - 2.0 / 3.0).abs() < 1e-14);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_sine_mode() {
        // d₂ = δ: b₂ = −b₁/2, then b₁ = 2δ/3 and b₂ = −δ/3.
        let delta = 0.6;
        let p = spec(TrigSeries::from_values(&[], &[(2, delta)]));
        let st = eliminate(&p).unwrap();
        assert_eq!(st.sin_chain.coefficient(2).unwrap().slope, -0.5);
        match determine_parameters(&p, &st, &p.verification.xp_grid()).unwrap() {
            ParameterOutcome::Consistent { b1, candidate, .. } => {
                assert!((b1 - 2.0 * delta / 3.0).abs() < 1e-14);
                assert!((candidate.sin(2).as_const().unwrap() + delta / 3.0).abs() < 1e-14);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_sine_chain_forces_b1_zero() {
        let p = spec(TrigSeries::from_values(&[(0, 2.0)], &[]));
        let st = eliminate(&p).unwrap();
        assert_eq!(st.sin_chain.rounds.len(), 1);
        assert_eq!(st.sin_chain.terminal().alpha, -1);
    }

    #[test]
    fn incompatible_source_is_inconsistent() {
        let c0 = p1("2*cos(2*x1)");
        let c2 = p1("sin(3*x1)");
        let p = spec(TrigSeries::from_modes([(0, c0), (2, c2)], []).unwrap());
        let st = eliminate(&p).unwrap();
        match determine_parameters(&p, &st, &p.verification.xp_grid()).unwrap() {
            ParameterOutcome::Inconsistent { witness, .. } => {
                assert!(witness.value.abs() > 1e-7);
                assert!(!witness.point.is_empty());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_constant_single_sine_mode_is_inconsistent() {
        let p = spec(TrigSeries::from_modes([], [(3, p1("exp(-x1^2)"))]).unwrap());
        let st = eliminate(&p).unwrap();
        assert!(matches!(
            determine_parameters(&p, &st, &p.verification.xp_grid()).unwrap(),
            ParameterOutcome::Inconsistent { .. }
        ));
    }

    #[test]
    fn round_count_is_k_plus_two() {
        let p = spec(TrigSeries::from_values(&[(0, 1.0), (2, 0.5), (3, -0.25), (5, 0.125)], &[(2, 1.0), (4, 0.5)]));
        let st = eliminate(&p).unwrap();
        // The a₀ round is not stored as a relation.
        assert_eq!(st.cos_chain.rounds.len() + 1, 3 + 2);
        assert_eq!(st.sin_chain.rounds.len(), 2 + 1);
        assert_eq!(st.cos_chain.rounds.last().unwrap().round, 5);
        // Divisor cascade in exact integers: w = m_j² ∏ (μ_j − μ_p).
        let r3 = &st.cos_chain.rounds[2];
        assert_eq!(r3.weights, vec![(5, 25 * (24 - 3) * (24 - 8))]);
    }

    #[test]
    fn rejects_mode_one_and_affine() {
        let p = spec(TrigSeries::from_values(&[(1, 1.0)], &[]));
        assert_eq!(eliminate(&p), Err(EliminationError::ModeOne("c1")));
        let mut g = TrigSeries::new();
        g.set_affine(Some(Expr::one()));
        assert_eq!(eliminate(&spec(g)), Err(EliminationError::Affine));
    }
}
