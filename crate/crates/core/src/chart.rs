//! The covariant-derivative chart for the scalar jets.
//!
//! Stored third-order coordinates are `φ̃_{;abc}` with `a ≤ b ≤ c`, meaning
//! `∇_c ∇_b ∇_a φ`. Other orderings differ from the stored one by a curvature
//! term linear in `φ_{;γ}`.

use crate::error::{Error, Result};
use crate::expr::calculus::{substitute_raw, Bindings};
use crate::expr::canon::canonicalize;
use crate::expr::symbol::{lv, multisets, JetSymbol, Labels};
use crate::expr::{partial, total_derivative, Expr, Kind};
use crate::geometry::{christoffel, phi_cov, phi_d};
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Key {
    Cov2Partial(usize, usize),
    Cov3Partial(usize, usize, usize),
    Cov3General(usize, usize, usize),
    Partial2Cov(usize, usize),
    Partial3Cov(usize, usize, usize),
}

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

fn sort3(a: usize, b: usize, c: usize) -> [usize; 3] {
    let mut v = [a, b, c];
    v.sort();
    v
}

/// Covariant second jet symbol `φ̃_{;μν}`.
pub fn phi_cov2(m: usize, n: usize) -> Expr {
    phi_cov(&[m, n])
}

/// `φ̃_{;μν} = φ_{,μν} − φ_{,γ}Γ^γ_{μν}` in partial jets.
pub fn cov2_in_partial(m: usize, n: usize) -> Expr {
    let (m, n) = (m.min(n), m.max(n));
    cached(Key::Cov2Partial(m, n), || {
        let corr: Vec<Expr> = (0..4).map(|g| phi_d(&[g]) * christoffel(g, m, n)).collect();
        phi_d(&[m, n]) - Expr::add_all(corr)
    })
}

/// `∇_λ∇_ν∇_μ φ` in partial jets, from the pair `(μ, ν)` and direction `λ`.
pub fn forward3(m: usize, n: usize, l: usize) -> Expr {
    let d = total_derivative(&cov2_in_partial(m, n), lv(l)).expect("order 2 input");
    let mut terms = vec![d];
    for g in 0..4 {
        terms.push(-(christoffel(g, l, m) * cov2_in_partial(g, n)));
        terms.push(-(christoffel(g, l, n) * cov2_in_partial(m, g)));
    }
    Expr::add_all(terms)
}

/// The stored coordinate `φ̃_{;abc}` (sorted) expressed in partial jets.
pub fn cov3_in_partial(a: usize, b: usize, c: usize) -> Expr {
    let [a, b, c] = sort3(a, b, c);
    cached(Key::Cov3Partial(a, b, c), || forward3(a, b, c))
}

/// `∇_λ∇_ν∇_μ φ` for arbitrary index order, in the covariant chart: the
/// sorted symbol plus the canonicalized commutator correction.
pub fn phi_cov3_general(m: usize, n: usize, l: usize) -> Expr {
    cached(Key::Cov3General(m, n, l), || {
        let [a, b, c] = sort3(m, n, l);
        let sym = phi_cov(&[a, b, c]);
        if (m.min(n), m.max(n), l) == (a, b, c) {
            return sym;
        }
        let diff = forward3(m, n, l) - cov3_in_partial(a, b, c);
        let corr = canonicalize(&diff).expect("commutator expansion");
        debug_assert!(!corr.contains_symbol(|s| s.is_scalar_jet() && s.order() >= 2));
        sym + corr
    })
}

/// `φ_{,μν}` in the covariant chart.
pub fn partial2_in_cov(m: usize, n: usize) -> Expr {
    let (m, n) = (m.min(n), m.max(n));
    cached(Key::Partial2Cov(m, n), || {
        let corr: Vec<Expr> = (0..4).map(|g| phi_d(&[g]) * christoffel(g, m, n)).collect();
        phi_cov2(m, n) + Expr::add_all(corr)
    })
}

/// `φ_{,abc}` in the covariant chart.
pub fn partial3_in_cov(a: usize, b: usize, c: usize) -> Expr {
    let [a, b, c] = sort3(a, b, c);
    cached(Key::Partial3Cov(a, b, c), || {
        let rest = cov3_in_partial(a, b, c) - phi_d(&[a, b, c]);
        let mut bind = Bindings::default();
        for m in multisets(2) {
            bind.symbols.insert(JetSymbol::phi(&[lv(m[0]), lv(m[1])]), partial2_in_cov(m[0], m[1]));
        }
        phi_cov(&[a, b, c]) - substitute_raw(&rest, &bind)
    })
}

fn scalar_orders(e: &Expr, covariant: bool) -> Vec<usize> {
    let mut out = Vec::new();
    e.for_each_symbol(&mut |s| match s {
        JetSymbol::ScalarPartial(d) if !covariant => out.push(d.len()),
        JetSymbol::ScalarCovariant(d) if covariant => out.push(d.len()),
        _ => {}
    });
    out
}

/// Replace partial scalar jets of order 2 and 3 by covariant ones.
pub fn to_covariant(e: &Expr) -> Result<Expr> {
    if scalar_orders(e, false).iter().any(|k| *k >= 4) {
        return Err(Error::UnsupportedOrder("order-4 scalar jets have no covariant image".into()));
    }
    let mut bind = Bindings::default();
    for k in [2, 3] {
        for m in multisets(k) {
            let labels: Labels = m.iter().map(|x| lv(*x)).collect();
            let v = if k == 2 { partial2_in_cov(m[0], m[1]) } else { partial3_in_cov(m[0], m[1], m[2]) };
            bind.symbols.insert(JetSymbol::phi(&labels), v);
        }
    }
    Ok(substitute_raw(e, &bind))
}

/// Replace covariant scalar jets by partial ones.
pub fn to_partial(e: &Expr) -> Expr {
    if scalar_orders(e, true).is_empty() {
        return e.clone();
    }
    let mut bind = Bindings::default();
    for m in multisets(2) {
        bind.symbols.insert(JetSymbol::phi_cov(&[lv(m[0]), lv(m[1])]), cov2_in_partial(m[0], m[1]));
    }
    for m in multisets(3) {
        bind.symbols.insert(JetSymbol::phi_cov(&[lv(m[0]), lv(m[1]), lv(m[2])]), cov3_in_partial(m[0], m[1], m[2]));
    }
    substitute_raw(e, &bind)
}

/// The eight Jacobian block families of the chart change.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Block {
    /// `∂φ̃_{;μ'ν'}/∂g_{αβ}`
    Cov2Metric,
    /// `∂φ̃_{;μ'ν'}/∂g_{αβ,μ}`
    Cov2Metric1,
    /// `∂φ̃_{;μ'ν'}/∂φ_{,μ}`
    Cov2Phi1,
    /// `∂φ̃_{;μ'ν'λ'}/∂φ_{,μ}`
    Cov3Phi1,
    /// `∂φ̃_{;μ'ν'λ'}/∂φ_{,μν}`
    Cov3Phi2,
    /// `∂φ̃_{;μ'ν'λ'}/∂g_{αβ}`
    Cov3Metric,
    /// `∂φ̃_{;μ'ν'λ'}/∂g_{αβ,μ}`
    Cov3Metric1,
    /// `∂φ̃_{;μ'ν'λ'}/∂g_{αβ,μν}`
    Cov3Metric2,
}

impl Block {
    pub const ALL: [Block; 8] = [
        Block::Cov2Metric,
        Block::Cov2Metric1,
        Block::Cov2Phi1,
        Block::Cov3Phi1,
        Block::Cov3Phi2,
        Block::Cov3Metric,
        Block::Cov3Metric1,
        Block::Cov3Metric2,
    ];

    pub fn parse(id: &str) -> Result<Block> {
        Ok(match id {
            "cov2/g" => Block::Cov2Metric,
            "cov2/g1" => Block::Cov2Metric1,
            "cov2/phi1" => Block::Cov2Phi1,
            "cov3/phi1" => Block::Cov3Phi1,
            "cov3/phi2" => Block::Cov3Phi2,
            "cov3/g" => Block::Cov3Metric,
            "cov3/g1" => Block::Cov3Metric1,
            "cov3/g2" => Block::Cov3Metric2,
            _ => return Err(Error::InvalidBlock(id.to_string())),
        })
    }

    pub fn id(&self) -> &'static str {
        match self {
            Block::Cov2Metric => "cov2/g",
            Block::Cov2Metric1 => "cov2/g1",
            Block::Cov2Phi1 => "cov2/phi1",
            Block::Cov3Phi1 => "cov3/phi1",
            Block::Cov3Phi2 => "cov3/phi2",
            Block::Cov3Metric => "cov3/g",
            Block::Cov3Metric1 => "cov3/g1",
            Block::Cov3Metric2 => "cov3/g2",
        }
    }

    /// Number of target and source indices.
    pub fn arity(&self) -> (usize, usize) {
        match self {
            Block::Cov2Metric => (2, 2),
            Block::Cov2Metric1 => (2, 3),
            Block::Cov2Phi1 => (2, 1),
            Block::Cov3Phi1 => (3, 1),
            Block::Cov3Phi2 => (3, 2),
            Block::Cov3Metric => (3, 2),
            Block::Cov3Metric1 => (3, 3),
            Block::Cov3Metric2 => (3, 4),
        }
    }

    pub fn source_symbol(&self, s: &[usize]) -> JetSymbol {
        let l = |i: usize| lv(s[i]);
        match self {
            Block::Cov2Metric | Block::Cov3Metric => JetSymbol::metric(l(0), l(1), &[]),
            Block::Cov2Metric1 | Block::Cov3Metric1 => JetSymbol::metric(l(0), l(1), &[l(2)]),
            Block::Cov3Metric2 => JetSymbol::metric(l(0), l(1), &[l(2), l(3)]),
            Block::Cov2Phi1 | Block::Cov3Phi1 => JetSymbol::phi(&[l(0)]),
            Block::Cov3Phi2 => JetSymbol::phi(&[l(0), l(1)]),
        }
    }
}

/// Forward map of a covariant coordinate, as a function of partial jets.
pub fn forward(target: &[usize]) -> Result<Expr> {
    match target.len() {
        2 => Ok(cov2_in_partial(target[0], target[1])),
        3 => Ok(cov3_in_partial(target[0], target[1], target[2])),
        k => Err(Error::UnsupportedOrder(format!("covariant jet of order {k}"))),
    }
}

/// One entry of a Jacobian block, derived by differentiating the forward map.
pub fn jacobian_block(which: Block, target: &[usize], source: &[usize]) -> Result<Expr> {
    let (nt, ns) = which.arity();
    if target.len() != nt || source.len() != ns || target.iter().chain(source).any(|i| *i > 3) {
        return Err(Error::InvalidBlock(format!("{} with indices {target:?} / {source:?}", which.id())));
    }
    partial(&forward(target)?, &which.source_symbol(source))
}

/// Basis vector fields of the partial chart.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Basis {
    Metric(usize, usize),
    Metric1(usize, usize, usize),
    Metric2(usize, usize, usize, usize),
    Phi,
    Phi1(usize),
    Phi2(usize, usize),
}

impl Basis {
    pub fn parse(id: &str) -> Result<Basis> {
        let bad = || Error::UnknownBasis(id.to_string());
        let (head, idx) = id.split_once(':').unwrap_or((id, ""));
        let v: Vec<usize> = idx
            .chars()
            .filter(|c| !c.is_whitespace() && *c != ',')
            .map(|c| c.to_digit(10).map(|d| d as usize).filter(|d| *d < 4).ok_or_else(bad))
            .collect::<Result<_>>()?;
        Ok(match (head, v.as_slice()) {
            ("g", [a, b]) => Basis::Metric(*a, *b),
            ("g1", [a, b, m]) => Basis::Metric1(*a, *b, *m),
            ("g2", [a, b, m, n]) => Basis::Metric2(*a, *b, *m, *n),
            ("phi", []) => Basis::Phi,
            ("phi1", [m]) => Basis::Phi1(*m),
            ("phi2", [m, n]) => Basis::Phi2(*m, *n),
            _ => return Err(bad()),
        })
    }

    pub fn symbol(&self) -> JetSymbol {
        match *self {
            Basis::Metric(a, b) => JetSymbol::metric(lv(a), lv(b), &[]),
            Basis::Metric1(a, b, m) => JetSymbol::metric(lv(a), lv(b), &[lv(m)]),
            Basis::Metric2(a, b, m, n) => JetSymbol::metric(lv(a), lv(b), &[lv(m), lv(n)]),
            Basis::Phi => JetSymbol::phi(&[]),
            Basis::Phi1(m) => JetSymbol::phi(&[lv(m)]),
            Basis::Phi2(m, n) => JetSymbol::phi(&[lv(m), lv(n)]),
        }
    }
}

/// `∂/∂u = ∂/∂ũ + Σ (∂φ̃_c/∂u) ∂/∂φ̃_c`, as `(covariant coordinate, coefficient)`
/// pairs with coefficients in the covariant chart.
pub fn pushforward_basis(v: &Basis) -> Result<Vec<(JetSymbol, Expr)>> {
    let src = v.symbol();
    let mut out = Vec::new();
    if !matches!(v, Basis::Phi2(..)) {
        out.push((src.clone(), Expr::one()));
    }
    for k in [2usize, 3] {
        for m in multisets(k) {
            let c = partial(&forward(m)?, &src)?;
            if c.is_zero() {
                continue;
            }
            let c = canonicalize(&to_covariant(&c)?)?;
            if !c.is_zero() {
                let labels: Labels = m.iter().map(|x| lv(*x)).collect();
                out.push((JetSymbol::phi_cov(&labels), c));
            }
        }
    }
    Ok(out)
}

/// Apply a pushed-forward basis vector to a covariant-chart expression.
pub fn apply_pushforward(v: &Basis, f: &Expr) -> Result<Expr> {
    let mut terms = Vec::new();
    for (c, coef) in pushforward_basis(v)? {
        let d = partial(f, &c)?;
        if !d.is_zero() {
            terms.push(coef * d);
        }
    }
    Ok(Expr::add_all(terms))
}

/// `true` when `e` has no partial scalar jets of order ≥ 2.
pub fn is_covariant(e: &Expr) -> bool {
    !e.contains_symbol(|s| matches!(s, JetSymbol::ScalarPartial(d) if d.len() >= 2))
}

/// `true` when `e` has no covariant scalar jets.
pub fn is_partial(e: &Expr) -> bool {
    !e.contains_symbol(|s| matches!(s, JetSymbol::ScalarCovariant(_)))
}

#[allow(dead_code)]
fn is_sym(e: &Expr) -> bool {
    matches!(e.kind(), Kind::Sym(_))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::canon::is_zero_structural;

    #[test]
    fn round_trip_second_order() {
        let e = phi_d(&[0, 1]) * phi_d(&[2]);
        let back = to_partial(&to_covariant(&e).unwrap());
        assert!(is_zero_structural(&(back - e)).unwrap());
    }

    #[test]
    fn commutator_has_no_higher_jets() {
        let e = phi_cov3_general(2, 1, 0);
        assert!(!e.contains_symbol(|s| matches!(s, JetSymbol::ScalarPartial(d) if d.len() >= 2)));
        // first pair is symmetric
        assert_eq!(phi_cov3_general(0, 1, 2), phi_cov3_general(1, 0, 2));
    }

    #[test]
    fn order_four_is_rejected() {
        assert!(to_covariant(&phi_d(&[0, 0, 0, 0])).is_err());
        assert!(Block::parse("cov4/g").is_err());
        assert!(Basis::parse("h:01").is_err());
    }

    #[test]
    fn phi_basis_has_no_corrections() {
        let v = pushforward_basis(&Basis::Phi).unwrap();
        assert_eq!(v.len(), 1);
    }
}
