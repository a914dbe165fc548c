mod common;

use common::{arb_expr, close, eval, points};
use horndeski_core::dsl::{parse, Var};
use horndeski_core::expr::{canonicalize, total_derivative, Expr, Label};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn canonical_form_is_idempotent_and_sound(e in arb_expr()) {
        let c = canonicalize(&e).unwrap();
        prop_assert_eq!(&canonicalize(&c).unwrap(), &c);
        for jp in points() {
            let (want, got) = (eval(&e, jp), eval(&c, jp));
            prop_assert!(close(want, got, 1e-12), "{} vs {}", want, got);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn total_derivative_obeys_leibniz(f in arb_expr(), g in arb_expr(), tau in 0u8..4) {
        let t = Label::Val(tau);
        let lhs = total_derivative(&(f.clone() * g.clone()), t).unwrap();
        let rhs = total_derivative(&f, t).unwrap() * g.clone() + f.clone() * total_derivative(&g, t).unwrap();
        prop_assert!(canonicalize(&(lhs.clone() - rhs.clone())).unwrap().is_zero());
        for jp in points() {
            prop_assert!(close(eval(&lhs, jp), eval(&rhs, jp), 1e-10));
        }
    }

    #[test]
    fn total_derivative_is_linear(f in arb_expr(), g in arb_expr(), k in -4i64..5, tau in 0u8..4) {
        let t = Label::Val(tau);
        let kk = Expr::int(k);
        let lhs = total_derivative(&(kk.clone() * f.clone() + g.clone()), t).unwrap();
        let rhs = kk * total_derivative(&f, t).unwrap() + total_derivative(&g, t).unwrap();
        prop_assert!(canonicalize(&(lhs - rhs)).unwrap().is_zero());
    }
}

fn dsl_leaf() -> impl Strategy<Value = String> {
    prop_oneof![
        (1i64..7).prop_map(|n| n.to_string()),
        (1i64..5, 2i64..5).prop_map(|(p, q)| format!("({p}/{q})")),
        Just("phi".to_string()),
        Just("X".to_string()),
    ]
}

fn dsl_expr() -> impl Strategy<Value = String> {
    dsl_leaf().prop_recursive(3, 20, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone(), prop::sample::select(vec!["+", "-", "*"])).prop_map(|(a, b, op)| format!("({a} {op} {b})")),
            (inner.clone(), 0i32..4).prop_map(|(a, n)| format!("{a}^{n}")),
            (inner.clone(), prop::sample::select(vec!["exp", "sin", "cos"])).prop_map(|(a, f)| format!("{f}({a}/7)")),
            inner.prop_map(|a| format!("-{a}")),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 300, ..ProptestConfig::default() })]

    #[test]
    fn dsl_round_trips_through_display(src in dsl_expr(), phi in -1.0f64..1.0, x in -1.0f64..1.0) {
        let e = parse(&src).unwrap();
        let again = parse(&e.to_string()).unwrap();
        prop_assert!(close(e.eval_f64(phi, x), again.eval_f64(phi, x), 1e-12));
    }

    #[test]
    fn dsl_derivatives_match_central_differences(src in dsl_expr(), phi in -1.0f64..1.0, x in -1.0f64..1.0) {
        let e = parse(&src).unwrap();
        let h = 1e-5;
        let fd_phi = (e.eval_f64(phi + h, x) - e.eval_f64(phi - h, x)) / (2.0 * h);
        let fd_x = (e.eval_f64(phi, x + h) - e.eval_f64(phi, x - h)) / (2.0 * h);
        let scale = e.eval_f64(phi, x).abs().max(1.0);
        prop_assert!((e.diff(Var::Phi).eval_f64(phi, x) - fd_phi).abs() < 1e-6 * scale.max(fd_phi.abs()));
        prop_assert!((e.diff(Var::X).eval_f64(phi, x) - fd_x).abs() < 1e-6 * scale.max(fd_x.abs()));
        let a = e.diff(Var::Phi).diff(Var::X).eval_f64(phi, x);
        let b = e.diff(Var::X).diff(Var::Phi).eval_f64(phi, x);
        prop_assert!(close(a, b, 1e-10));
    }
}

#[test]
fn dsl_rejects_malformed_input() {
    for bad in ["", "phi +", "X^1.5", "tan(phi)", "phi)", "2**X", "Y"] {
        assert!(parse(bad).is_err(), "accepted `{bad}`");
    }
}
