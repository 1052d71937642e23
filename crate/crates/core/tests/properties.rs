//! Invariants checked on generated inputs.

use proptest::prelude::*;

use halfspace::classify::construct_series_1d;
use halfspace::expr::{parse_expr, Expr, Func};
use halfspace::fourier::{analyze_spectrum, parseval_gap};
use halfspace::model::TrigSeries;
use halfspace::verify::residual;

const N: usize = 2;

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (-3i32..=3).prop_map(|k| Expr::constant(f64::from(k) / 2.0)),
        (0..N).prop_map(Expr::var),
    ]
}

/// Expressions whose values stay finite on `[-1, 1]²`.
fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::add(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::sub(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::mul(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::div(a, Expr::add(Expr::constant(2.0), Expr::mul(b.clone(), b)))),
            inner.clone().prop_map(Expr::neg),
            (inner.clone(), 0i32..=3).prop_map(|(a, n)| Expr::pow(a, n)),
            inner.clone().prop_map(|a| Expr::call(Func::Sin, a)),
            inner.clone().prop_map(|a| Expr::call(Func::Cos, a)),
            inner.clone().prop_map(|a| Expr::call(Func::Atan, a)),
            inner.prop_map(|a| Expr::call(Func::Exp, Expr::call(Func::Sin, a))),
        ]
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, N)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn print_parse_round_trip(e in expr(), x in point()) {
        let text = e.to_string();
        let back = parse_expr(&text, N).unwrap();
        prop_assert_eq!(back.to_string(), text.clone());
        prop_assert!(close(back.eval(&x).unwrap(), e.eval(&x).unwrap(), 1e-12), "{}", text);
    }

    #[test]
    fn derivative_matches_central_difference(e in expr(), x in point(), axis in 0..N) {
        let h = 1e-5;
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp[axis] += h;
        xm[axis] -= h;
        let fd = (e.eval(&xp).unwrap() - e.eval(&xm).unwrap()) / (2.0 * h);
        let d = e.differentiate(axis).eval(&x).unwrap();
        prop_assert!(close(d, fd, 1e-5), "d/dx{} of {}: {} vs {}", axis + 1, e, d, fd);
    }

    #[test]
    fn collect_preserves_values_and_is_linear(a in expr(), b in expr(), k in -3.0f64..3.0, x in point()) {
        let sum = Expr::add(a.clone(), b.clone());
        let va = a.eval(&x).unwrap();
        let vb = b.eval(&x).unwrap();
        prop_assert!(close(sum.collect().eval(&x).unwrap(), va + vb, 1e-9));
        let lhs = Expr::add(a.scale(k), b.clone()).collect().eval(&x).unwrap();
        let rhs = k * a.collect().eval(&x).unwrap() + b.collect().eval(&x).unwrap();
        prop_assert!(close(lhs, rhs, 1e-9));
    }

    #[test]
    fn fourier_round_trip(cos in prop::collection::vec(-2.0f64..2.0, 1..=9), sin in prop::collection::vec(-2.0f64..2.0, 0..=8)) {
        let degree = (cos.len() - 1).max(sin.len()) as u32;
        let f = |_: &[f64], t: f64| {
            let mut s = cos[0] / 2.0;
            for (m, c) in cos.iter().enumerate().skip(1) {
                s += c * (m as f64 * t).cos();
            }
            for (m, c) in sin.iter().enumerate() {
                s += c * ((m + 1) as f64 * t).sin();
            }
            Ok(s)
        };
        let spec = analyze_spectrum(f, degree, &[vec![0.0]], 64).unwrap();
        for (m, c) in cos.iter().enumerate() {
            prop_assert!((spec.a[0][m] - c).abs() <= 1e-12);
        }
        for (m, c) in sin.iter().enumerate() {
            prop_assert!((spec.b[0][m + 1] - c).abs() <= 1e-12);
        }
        prop_assert!(parseval_gap(f, degree, &[0.0], 64).unwrap().abs() <= 1e-10);
    }

    #[test]
    fn one_dimensional_solution_is_linear_in_the_source(
        g1 in prop::collection::vec(-2.0f64..2.0, 4),
        g2 in prop::collection::vec(-2.0f64..2.0, 4),
        l1 in -3.0f64..3.0,
        l2 in -3.0f64..3.0,
    ) {
        let src = |g: &[f64]| TrigSeries::from_values(&[(0, g[0]), (2, g[1]), (4, g[2])], &[(3, g[3])]);
        let (s1, s2) = (src(&g1), src(&g2));
        let u1 = construct_series_1d(&s1).unwrap();
        let u2 = construct_series_1d(&s2).unwrap();
        let combined = s1.scale(l1).add(&s2.scale(l2)).collected();
        let u = construct_series_1d(&combined).unwrap();
        let want = u1.scale(l1).add(&u2.scale(l2)).collected();
        for m in 0..=4 {
            let pairs = [(u.cos(m), want.cos(m)), (u.sin(m), want.sin(m))];
            for (got, exp) in pairs {
                prop_assert!((got.as_const().unwrap() - exp.as_const().unwrap()).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn one_dimensional_solution_solves_the_equation(g in prop::collection::vec(-2.0f64..2.0, 4)) {
        let src = TrigSeries::from_values(&[(0, g[0]), (2, g[1]), (5, g[2])], &[(2, g[3])]);
        let u = construct_series_1d(&src).unwrap();
        let mut p = halfspace::model::ProblemSpec::with_identity(2, src).unwrap();
        p.verification.grid = 17;
        prop_assert!(residual(&u, &p).unwrap().sup <= 1e-13);
        let s = u.at(&[0.0]).unwrap();
        prop_assert!(s.eval(0.0).abs() <= 1e-14 && s.eval_dxn(0.0).abs() <= 1e-14);
    }
}
