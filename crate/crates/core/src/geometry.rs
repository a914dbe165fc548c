//! Christoffel symbols, Ricci curvature, `X` and `□φ` as memoized expressions.

use crate::expr::symbol::{lv, JetSymbol, Labels};
use crate::expr::{total_derivative, Expr, Rational};
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

pub use crate::expr::symbol::n_factor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Key {
    Christoffel(usize, usize, usize),
    Ricci(usize, usize),
    RicciScalar,
    KineticX,
    BoxPhi,
}

/// Memo table from geometric object to expression. Hits return the same
/// shared node.
fn cache() -> &'static Mutex<HashMap<Key, Expr>> {
    static C: OnceLock<Mutex<HashMap<Key, Expr>>> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached(key: Key, build: impl FnOnce() -> Expr) -> Expr {
    if let Some(e) = cache().lock().unwrap().get(&key) {
        return e.clone();
    }
    let e = build();
    cache().lock().unwrap().entry(key).or_insert(e).clone()
}

pub fn metric(a: usize, b: usize) -> Expr {
    Expr::sym(JetSymbol::metric(lv(a), lv(b), &[]))
}

pub fn metric_d(a: usize, b: usize, d: &[usize]) -> Expr {
    let d: Labels = d.iter().map(|x| lv(*x)).collect();
    Expr::sym(JetSymbol::metric(lv(a), lv(b), &d))
}

pub fn inv_metric(a: usize, b: usize) -> Expr {
    Expr::sym(JetSymbol::inv_metric(lv(a), lv(b)))
}

pub fn sqrt_g() -> Expr {
    Expr::sym(JetSymbol::MetricDetSqrt)
}

pub fn phi() -> Expr {
    Expr::sym(JetSymbol::phi(&[]))
}

pub fn phi_d(d: &[usize]) -> Expr {
    let d: Labels = d.iter().map(|x| lv(*x)).collect();
    Expr::sym(JetSymbol::phi(&d))
}

pub fn phi_cov(d: &[usize]) -> Expr {
    let d: Labels = d.iter().map(|x| lv(*x)).collect();
    Expr::sym(JetSymbol::phi_cov(&d))
}

/// `Γ^γ_{μν} = ½ g^{γρ}(g_{νρ,μ} + g_{ρμ,ν} − g_{μν,ρ})`.
pub fn christoffel(g: usize, m: usize, n: usize) -> Expr {
    let (m, n) = (m.min(n), m.max(n));
    cached(Key::Christoffel(g, m, n), || {
        let terms = (0..4).map(|r| inv_metric(g, r) * (metric_d(n, r, &[m]) + metric_d(r, m, &[n]) - metric_d(m, n, &[r])));
        Expr::add_all(terms.collect::<Vec<_>>()).scale(Rational::new(1, 2))
    })
}

/// `R_{αβ} = D_γΓ^γ_{αβ} − D_αΓ^γ_{γβ} + Γ^γ_{αβ}Γ^δ_{δγ} − Γ^γ_{δβ}Γ^δ_{αγ}`.
pub fn ricci_tensor(a: usize, b: usize) -> Expr {
    let (a, b) = (a.min(b), a.max(b));
    cached(Key::Ricci(a, b), || {
        let mut terms = Vec::new();
        for g in 0..4 {
            terms.push(total_derivative(&christoffel(g, a, b), lv(g)).expect("metric order 1"));
            terms.push(-total_derivative(&christoffel(g, g, b), lv(a)).expect("metric order 1"));
            for d in 0..4 {
                terms.push(christoffel(g, a, b) * christoffel(d, d, g));
                terms.push(-(christoffel(g, d, b) * christoffel(d, a, g)));
            }
        }
        Expr::add_all(terms)
    })
}

/// `R = g^{αβ} R_{αβ}`.
pub fn ricci_scalar() -> Expr {
    cached(Key::RicciScalar, || {
        let mut terms = Vec::new();
        for a in 0..4 {
            for b in 0..4 {
                terms.push(inv_metric(a, b) * ricci_tensor(a, b));
            }
        }
        Expr::add_all(terms)
    })
}

/// `X = −½ g^{μν} φ_{;μ} φ_{;ν}`.
pub fn kinetic_x() -> Expr {
    cached(Key::KineticX, || {
        let mut terms = Vec::new();
        for m in 0..4 {
            for n in 0..4 {
                terms.push(inv_metric(m, n) * phi_d(&[m]) * phi_d(&[n]));
            }
        }
        Expr::add_all(terms).scale(Rational::new(-1, 2))
    })
}

/// `□φ = g^{μν} φ_{;μν}` in covariant jets.
pub fn box_phi() -> Expr {
    cached(Key::BoxPhi, || {
        let mut terms = Vec::new();
        for m in 0..4 {
            for n in 0..4 {
                terms.push(inv_metric(m, n) * phi_cov(&[m, n]));
            }
        }
        Expr::add_all(terms)
    })
}

/// Einstein tensor with upper indices, `G^{αβ} = R^{αβ} − ½ R g^{αβ}`,
/// built from the same Ricci expressions.
pub fn einstein_upper(a: usize, b: usize) -> Expr {
    let mut terms = Vec::new();
    for c in 0..4 {
        for d in 0..4 {
            terms.push(inv_metric(a, c) * inv_metric(b, d) * ricci_tensor(c, d));
        }
    }
    Expr::add_all(terms) - (ricci_scalar() * inv_metric(a, b)).scale(Rational::new(1, 2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::canon::is_zero_structural;

    #[test]
    fn christoffel_is_symmetric_and_cached() {
        let a = christoffel(1, 0, 2);
        let b = christoffel(1, 2, 0);
        assert!(is_zero_structural(&(&a - &b)).unwrap());
        assert_eq!(a.ptr(), christoffel(1, 0, 2).ptr());
    }

    #[test]
    fn curvature_is_metric_only_and_second_order() {
        let r = ricci_scalar();
        assert_eq!(r.order(), 2);
        assert!(!r.contains_symbol(|s| s.is_scalar_jet()));
    }
}
