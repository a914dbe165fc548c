//! Shared random-expression strategies.
#![allow(dead_code)]

use horndeski_core::chart::{jacobian_block, Block};
use horndeski_core::expr::symbol::multisets;
use horndeski_core::expr::{lv, Expr, FnName, JetSymbol, Rational};
use horndeski_core::numeric::oracle::fd_chart_derivative;
use horndeski_core::geometry::{inv_metric, kinetic_x, metric_d, phi_d, sqrt_g};
use horndeski_core::lagrangian::LagrangianSpec;
use horndeski_core::numeric::{random_point, Evaluator, JetPoint};
use proptest::prelude::*;
use std::sync::OnceLock;

pub fn spec() -> &'static LagrangianSpec {
    static SPEC: OnceLock<LagrangianSpec> = OnceLock::new();
    SPEC.get_or_init(|| LagrangianSpec::new("X*phi + phi^2/3", "exp(phi/2)*X - phi").unwrap())
}

pub fn points() -> &'static [JetPoint] {
    static PTS: OnceLock<Vec<JetPoint>> = OnceLock::new();
    PTS.get_or_init(|| (0..3).map(|s| random_point(100 + s).unwrap()).collect())
}

pub fn leaf() -> impl Strategy<Value = Expr> {
    let idx = 0usize..4;
    prop_oneof![
        (-5i64..6, 1i64..4).prop_map(|(p, q)| Expr::constant(Rational::new(p, q))),
        (idx.clone(), idx.clone()).prop_map(|(a, b)| metric_d(a.min(b), a.max(b), &[])),
        (idx.clone(), idx.clone(), idx.clone()).prop_map(|(a, b, m)| metric_d(a.min(b), a.max(b), &[m])),
        (idx.clone(), idx.clone()).prop_map(|(a, b)| inv_metric(a, b)),
        Just(sqrt_g()),
        Just(phi_d(&[])),
        idx.clone().prop_map(|m| phi_d(&[m])),
        (idx.clone(), idx).prop_map(|(m, n)| phi_d(&[m.min(n), m.max(n)])),
        (0u8..2, 0u8..2).prop_map(|(p, x)| spec().func(FnName::G2, p, x)),
        Just(spec().func(FnName::G3, 0, 0)),
        Just(kinetic_x()),
    ]
}

pub fn arb_expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 40, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 1..4).prop_map(Expr::add_all),
            prop::collection::vec(inner.clone(), 1..4).prop_map(Expr::mul_all),
            (inner.clone(), 0i32..4).prop_map(|(e, n)| e.pow(n)),
            (inner, -2i32..0).prop_map(|(e, n)| e * sqrt_g().pow(n)),
        ]
    })
}

pub fn eval(e: &Expr, jp: &JetPoint) -> f64 {
    Evaluator::new(jp, Some(spec())).eval(e).unwrap()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

pub fn sorted(v: &[usize]) -> Vec<usize> {
    let mut v = v.to_vec();
    v.sort_unstable();
    v
}

/// Index tuples of a block with the symmetric slots sorted.
pub fn entries(block: Block) -> Vec<(Vec<usize>, Vec<usize>)> {
    let (nt, ns) = block.arity();
    let targets = multisets(nt);
    let sources: Vec<Vec<usize>> = match block {
        Block::Cov2Phi1 | Block::Cov3Phi1 => multisets(1).to_vec(),
        Block::Cov3Phi2 => multisets(2).to_vec(),
        _ => {
            let pairs = multisets(2);
            let tails = multisets(ns - 2);
            pairs.iter().flat_map(|p| tails.iter().map(move |t| [p.clone(), t.clone()].concat())).collect()
        }
    };
    targets.iter().flat_map(|t| sources.iter().map(move |s| (sorted(t), s.clone()))).collect()
}

pub fn target_symbol(t: &[usize]) -> JetSymbol {
    let labels: Vec<_> = t.iter().map(|i| lv(*i)).collect();
    JetSymbol::phi_cov(&labels)
}

pub fn max_error(block: Block, jp: &JetPoint, h: f64) -> (f64, f64) {
    let mut ev = Evaluator::new(jp, None);
    let (mut err, mut scale) = (0.0f64, 0.0f64);
    for (t, s) in entries(block) {
        let exact = ev.eval(&jacobian_block(block, &t, &s).unwrap()).unwrap();
        let fd = fd_chart_derivative(jp, &target_symbol(&t), &block.source_symbol(&s), h).unwrap();
        err = err.max((exact - fd).abs());
        scale = scale.max(exact.abs());
    }
    (err, scale.max(1.0))
}
