//! Canonical form: expansion into a rational polynomial over atoms, index
//! contractions, dummy renaming and deterministic reconstruction.

use super::node::{Expr, FnNode, Kind, Rational};
use super::symbol::{Index, JetSymbol, Label, Pos};
use crate::error::{Error, Result};
use num_traits::{One, Zero};
use smallvec::SmallVec;
use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::Arc;

/// First label value used for canonical dummy names.
pub const DUMMY_BASE: u16 = 1000;
const TEMP_BASE: u16 = 30000;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Atom {
    Sym(JetSymbol),
    Fn(FnNode),
    /// Reciprocal of a canonical sum that does not reduce to a monomial.
    Inv(Expr),
}

impl Atom {
    fn rank(&self) -> u8 {
        match self {
            Atom::Sym(_) => 0,
            Atom::Fn(_) => 1,
            Atom::Inv(_) => 2,
        }
    }
}

impl Ord for Atom {
    fn cmp(&self, o: &Self) -> Ordering {
        match (self, o) {
            (Atom::Sym(a), Atom::Sym(b)) => a.cmp(b),
            (Atom::Fn(a), Atom::Fn(b)) => a
                .f
                .cmp(&b.f)
                .then_with(|| a.binding_source().cmp(&b.binding_source()))
                .then_with(|| {
                    let ha = a.x_arg.as_ref().map(|x| x.structural_hash());
                    let hb = b.x_arg.as_ref().map(|x| x.structural_hash());
                    ha.cmp(&hb)
                })
                .then_with(|| {
                    let sa = a.x_arg.as_ref().map(|x| x.to_string());
                    let sb = b.x_arg.as_ref().map(|x| x.to_string());
                    sa.cmp(&sb)
                }),
            (Atom::Inv(a), Atom::Inv(b)) => a
                .structural_hash()
                .cmp(&b.structural_hash())
                .then_with(|| a.to_string().cmp(&b.to_string())),
            _ => self.rank().cmp(&o.rank()),
        }
    }
}

impl PartialOrd for Atom {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

pub type Monomial = SmallVec<[(Atom, i32); 6]>;
pub type Poly = HashMap<Monomial, Rational>;

fn mono_mul(a: &Monomial, b: &Monomial) -> Monomial {
    let mut out: Monomial = SmallVec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let ord = if i == a.len() {
            Ordering::Greater
        } else if j == b.len() {
            Ordering::Less
        } else {
            a[i].0.cmp(&b[j].0)
        };
        match ord {
            Ordering::Less => {
                out.push(a[i].clone());
                i += 1;
            }
            Ordering::Greater => {
                out.push(b[j].clone());
                j += 1;
            }
            Ordering::Equal => {
                let e = a[i].1 + b[j].1;
                if e != 0 {
                    out.push((a[i].0.clone(), e));
                }
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn poly_mul(a: &Poly, b: &Poly, limit: usize) -> Result<Poly> {
    let mut out = Poly::with_capacity(a.len() * b.len());
    for (ma, ca) in a {
        for (mb, cb) in b {
            let m = mono_mul(ma, mb);
            *out.entry(m).or_insert_with(Rational::zero) += *ca * *cb;
        }
        if out.len() > limit {
            return Err(too_large(limit));
        }
    }
    out.retain(|_, c| !c.is_zero());
    Ok(out)
}

fn too_large(limit: usize) -> Error {
    Error::Unsupported(format!("expansion exceeds {limit} terms"))
}

fn single(atom: Atom, e: i32) -> Poly {
    let mut p = Poly::new();
    let mut m = Monomial::new();
    m.push((atom, e));
    p.insert(m, Rational::one());
    p
}

fn constant(r: Rational) -> Poly {
    let mut p = Poly::new();
    if !r.is_zero() {
        p.insert(Monomial::new(), r);
    }
    p
}

struct Expander {
    memo: HashMap<usize, (Expr, Arc<Poly>)>,
    limit: usize,
}

impl Expander {
    fn expand(&mut self, e: &Expr) -> Result<Arc<Poly>> {
        if let Some((_, p)) = self.memo.get(&e.ptr()) {
            return Ok(p.clone());
        }
        let p = match e.kind() {
            Kind::Const(r) => constant(*r),
            Kind::Sym(s) => single(Atom::Sym(s.clone()), 1),
            Kind::Fn(n) => {
                let mut n = n.clone();
                if let Some(x) = &n.x_arg {
                    n.x_arg = Some(canonicalize_limited(x, self.limit)?);
                }
                single(Atom::Fn(n), 1)
            }
            Kind::Sum(v) => {
                let mut acc = Poly::new();
                for t in v {
                    let p = self.expand(t)?;
                    for (m, c) in p.iter() {
                        *acc.entry(m.clone()).or_insert_with(Rational::zero) += *c;
                    }
                    if acc.len() > self.limit {
                        return Err(too_large(self.limit));
                    }
                }
                acc.retain(|_, c| !c.is_zero());
                acc
            }
            Kind::Prod(v) => {
                let mut acc = constant(Rational::one());
                for t in v {
                    let p = self.expand(t)?;
                    acc = poly_mul(&acc, &p, self.limit)?;
                    if acc.is_empty() {
                        break;
                    }
                }
                acc
            }
            Kind::Pow(b, n) => {
                let pb = self.expand(b)?;
                if *n > 0 {
                    let mut acc = constant(Rational::one());
                    for _ in 0..*n {
                        acc = poly_mul(&acc, &pb, self.limit)?;
                    }
                    acc
                } else if pb.is_empty() {
                    return Err(Error::Unsupported("division by zero".into()));
                } else if pb.len() == 1 {
                    let (m, c) = pb.iter().next().unwrap();
                    let m: Monomial = m.iter().map(|(a, k)| (a.clone(), k * n)).collect();
                    let mut p = Poly::new();
                    p.insert(m, num_traits::pow::Pow::pow(*c, *n));
                    p
                } else {
                    let base = rebuild(&pb);
                    single(Atom::Inv(base), -n)
                }
            }
        };
        let p = Arc::new(p);
        self.memo.insert(e.ptr(), (e.clone(), p.clone()));
        Ok(p)
    }
}

fn atom_indices(a: &Atom) -> Vec<Index> {
    match a {
        Atom::Sym(s) => s.indices(),
        _ => vec![],
    }
}

fn check_discipline(m: &Monomial) -> Result<()> {
    let mut seen: HashMap<Label, (usize, usize)> = HashMap::new();
    for (a, k) in m {
        for idx in atom_indices(a) {
            if !idx.label.is_abstract() {
                continue;
            }
            let entry = seen.entry(idx.label).or_default();
            let mult = k.unsigned_abs() as usize;
            match idx.pos {
                Pos::Up => entry.0 += mult,
                Pos::Lo => entry.1 += mult,
            }
        }
    }
    for (l, (up, lo)) in seen {
        if up + lo > 2 {
            return Err(Error::IndexDiscipline(format!("label {l} occurs {} times in one term", up + lo)));
        }
        if up + lo == 2 && up != 1 {
            return Err(Error::IndexDiscipline(format!("dummy {l} is not an upper/lower pair")));
        }
    }
    Ok(())
}

fn dummies(m: &Monomial) -> Vec<Label> {
    let mut count: HashMap<Label, usize> = HashMap::new();
    for (a, k) in m {
        for idx in atom_indices(a) {
            if idx.label.is_abstract() {
                *count.entry(idx.label).or_default() += k.unsigned_abs() as usize;
            }
        }
    }
    let mut d: Vec<Label> = count.into_iter().filter(|(_, c)| *c == 2).map(|(l, _)| l).collect();
    d.sort();
    d
}

fn relabel(m: &Monomial, f: &mut impl FnMut(Label) -> Label) -> Monomial {
    let mut out: Monomial = m
        .iter()
        .map(|(a, k)| {
            let a = match a {
                Atom::Sym(s) => Atom::Sym(s.map_labels(f)),
                other => other.clone(),
            };
            (a, *k)
        })
        .collect();
    out.sort_by(|x, y| x.0.cmp(&y.0));
    let mut merged = Monomial::new();
    for (a, k) in out {
        match merged.last_mut() {
            Some((b, j)) if *b == a => *j += k,
            _ => merged.push((a, k)),
        }
    }
    merged.retain(|(_, k)| *k != 0);
    merged
}

/// Apply `g^{aμ} g_{μb} → δ^a_b` and Kronecker contractions until stable.
/// Returns the rewritten monomial and an extra numeric factor.
fn contract(m: &Monomial) -> (Monomial, Rational) {
    let mut factors: Vec<JetSymbol> = Vec::new();
    let mut rest = Monomial::new();
    for (a, k) in m {
        match a {
            Atom::Sym(s) if *k > 0 && s.has_abstract() => {
                for _ in 0..*k {
                    factors.push(s.clone());
                }
            }
            _ => rest.push((a.clone(), *k)),
        }
    }
    let mut coeff = Rational::one();
    loop {
        let mut changed = false;
        // g^{..} g_{..} with a shared abstract label
        'outer: for i in 0..factors.len() {
            if let JetSymbol::InvMetric(p) = &factors[i] {
                for j in 0..factors.len() {
                    if let JetSymbol::Metric { pair: q, d } = &factors[j] {
                        if !d.is_empty() {
                            continue;
                        }
                        for pi in 0..2 {
                            for qi in 0..2 {
                                if p[pi] == q[qi] && p[pi].is_abstract() {
                                    let up = p[1 - pi];
                                    let lo = q[1 - qi];
                                    let (hi, lo_idx) = if i > j { (i, j) } else { (j, i) };
                                    factors.remove(hi);
                                    factors.remove(lo_idx);
                                    factors.push(JetSymbol::delta(up, lo));
                                    changed = true;
                                    break 'outer;
                                }
                            }
                        }
                    }
                }
            }
        }
        if changed {
            continue;
        }
        // Kronecker deltas
        'delta: for i in 0..factors.len() {
            if let JetSymbol::Delta { up, lo } = factors[i] {
                if up == lo {
                    factors.remove(i);
                    coeff *= Rational::from_integer(4);
                    changed = true;
                    break 'delta;
                }
                if let (Some(a), Some(b)) = (up.value(), lo.value()) {
                    factors.remove(i);
                    if a != b {
                        return (Monomial::new(), Rational::zero());
                    }
                    changed = true;
                    break 'delta;
                }
                for j in 0..factors.len() {
                    if j == i {
                        continue;
                    }
                    let idx = factors[j].indices();
                    // δ^a_m X^{..m..}: the lower m pairs with an upper m elsewhere
                    if lo.is_abstract() && idx.iter().any(|x| x.label == lo && x.pos == Pos::Up) {
                        factors[j] = factors[j].map_labels(&mut |l| if l == lo { up } else { l });
                        factors.remove(i);
                        changed = true;
                        break 'delta;
                    }
                    if up.is_abstract() && idx.iter().any(|x| x.label == up && x.pos == Pos::Lo) {
                        factors[j] = factors[j].map_labels(&mut |l| if l == up { lo } else { l });
                        factors.remove(i);
                        changed = true;
                        break 'delta;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut out = rest;
    for s in factors {
        // concrete deltas fold away
        if let JetSymbol::Delta { up: Label::Val(a), lo: Label::Val(b) } = s {
            if a != b {
                return (Monomial::new(), Rational::zero());
            }
            continue;
        }
        out.push((Atom::Sym(s), 1));
    }
    (relabel(&out, &mut |l| l), coeff)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn rename_dummies(m: &Monomial) -> Monomial {
    let d = dummies(m);
    if d.is_empty() {
        return m.clone();
    }
    // move dummies out of the way first so canonical names cannot collide
    let temp: Vec<Label> = (0..d.len()).map(|k| Label::Name(TEMP_BASE + k as u16)).collect();
    let m = relabel(m, &mut |l| d.iter().position(|x| *x == l).map(|k| temp[k]).unwrap_or(l));
    if d.len() <= 5 {
        let mut best: Option<Monomial> = None;
        for p in permutations(d.len()) {
            let cand = relabel(&m, &mut |l| match temp.iter().position(|x| *x == l) {
                Some(k) => Label::Name(DUMMY_BASE + p[k] as u16),
                None => l,
            });
            if best.as_ref().is_none_or(|b| mono_cmp(&cand, b) == Ordering::Less) {
                best = Some(cand);
            }
        }
        best.unwrap()
    } else {
        // order of first appearance in the sorted monomial
        let mut order: Vec<Label> = Vec::new();
        for (a, _) in &m {
            for idx in atom_indices(a) {
                if temp.contains(&idx.label) && !order.contains(&idx.label) {
                    order.push(idx.label);
                }
            }
        }
        relabel(&m, &mut |l| match order.iter().position(|x| *x == l) {
            Some(k) => Label::Name(DUMMY_BASE + k as u16),
            None => l,
        })
    }
}

fn mono_cmp(a: &Monomial, b: &Monomial) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let o = x.0.cmp(&y.0).then(x.1.cmp(&y.1));
        if o != Ordering::Equal {
            return o;
        }
    }
    a.len().cmp(&b.len())
}

fn has_abstract(m: &Monomial) -> bool {
    m.iter().any(|(a, _)| matches!(a, Atom::Sym(s) if s.has_abstract()))
}

fn process_abstract(p: Poly) -> Result<Poly> {
    if !p.keys().any(has_abstract) {
        return Ok(p);
    }
    let mut out = Poly::new();
    for (m, c) in p {
        if !has_abstract(&m) {
            *out.entry(m).or_insert_with(Rational::zero) += c;
            continue;
        }
        check_discipline(&m)?;
        let (m, k) = contract(&m);
        if k.is_zero() {
            continue;
        }
        let m = rename_dummies(&m);
        *out.entry(m).or_insert_with(Rational::zero) += c * k;
    }
    out.retain(|_, c| !c.is_zero());
    Ok(out)
}

fn atom_expr(a: &Atom, k: i32) -> Expr {
    match a {
        Atom::Sym(s) => Expr::sym(s.clone()).pow(k),
        Atom::Fn(n) => Expr::func(n.clone()).pow(k),
        Atom::Inv(e) => e.pow(-k),
    }
}

/// Rebuild an expression from a polynomial in deterministic order.
pub fn rebuild(p: &Poly) -> Expr {
    let mut terms: Vec<(&Monomial, &Rational)> = p.iter().collect();
    terms.sort_by(|x, y| mono_cmp(x.0, y.0));
    Expr::add_all(terms.into_iter().map(|(m, c)| {
        let mut f = vec![Expr::constant(*c)];
        f.extend(m.iter().map(|(a, k)| atom_expr(a, *k)));
        Expr::mul_all(f)
    }))
}

/// Expand into polynomial form, applying abstract-index processing.
pub fn expand(e: &Expr, limit: usize) -> Result<Poly> {
    let mut ex = Expander { memo: HashMap::new(), limit };
    let p = ex.expand(e)?;
    process_abstract((*p).clone())
}

pub const DEFAULT_LIMIT: usize = 2_000_000;

pub fn canonicalize_limited(e: &Expr, limit: usize) -> Result<Expr> {
    Ok(rebuild(&expand(e, limit)?))
}

/// Canonical form. Errors only on index-discipline violations or when the
/// expansion exceeds the default term budget.
pub fn canonicalize(e: &Expr) -> Result<Expr> {
    canonicalize_limited(e, DEFAULT_LIMIT)
}

/// `true` iff the canonical form is the constant 0.
pub fn is_zero_structural(e: &Expr) -> Result<bool> {
    if e.is_zero() {
        return Ok(true);
    }
    Ok(expand(e, DEFAULT_LIMIT)?.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::symbol::lv;

    fn n(k: u16) -> Label {
        Label::Name(k)
    }

    #[test]
    fn metric_symmetry() {
        let a = Expr::sym(JetSymbol::metric(lv(1), lv(0), &[]));
        let b = Expr::sym(JetSymbol::metric(lv(0), lv(1), &[]));
        assert_eq!(canonicalize(&(a - b)).unwrap(), Expr::zero());
    }

    #[test]
    fn inverse_contraction_gives_delta() {
        let e = Expr::sym(JetSymbol::inv_metric(n(2), n(0))) * Expr::sym(JetSymbol::metric(n(0), n(3), &[]));
        assert_eq!(canonicalize(&e).unwrap(), Expr::sym(JetSymbol::delta(n(2), n(3))));
    }

    #[test]
    fn dummy_renaming() {
        let x1 = Expr::sym(JetSymbol::inv_metric(n(0), n(1)))
            * Expr::sym(JetSymbol::phi(&[n(0)]))
            * Expr::sym(JetSymbol::phi(&[n(1)]));
        let x2 = Expr::sym(JetSymbol::inv_metric(n(7), n(8)))
            * Expr::sym(JetSymbol::phi(&[n(8)]))
            * Expr::sym(JetSymbol::phi(&[n(7)]));
        assert_eq!(canonicalize(&x1).unwrap(), canonicalize(&x2).unwrap());
    }

    #[test]
    fn triple_label_is_rejected() {
        let p = Expr::sym(JetSymbol::phi(&[n(0)]));
        let e = &p * &p * &p;
        assert!(matches!(canonicalize(&e), Err(Error::IndexDiscipline(_))));
    }

    #[test]
    fn delta_trace_and_substitution() {
        let d = Expr::sym(JetSymbol::delta(n(0), n(0)));
        assert_eq!(canonicalize(&d).unwrap(), Expr::int(4));
        let e = Expr::sym(JetSymbol::delta(n(1), n(0))) * Expr::sym(JetSymbol::pphi_first(n(0)));
        assert_eq!(canonicalize(&e).unwrap(), Expr::sym(JetSymbol::pphi_first(n(1))));
    }

    #[test]
    fn reciprocal_of_sum_is_atomic() {
        let g = Expr::sym(JetSymbol::metric(lv(0), lv(0), &[]));
        let s = &g + Expr::one();
        let e = s.recip() * Expr::int(2) - s.recip() - s.pow(-1);
        assert_eq!(canonicalize(&e).unwrap(), Expr::zero());
        assert_eq!(canonicalize(&canonicalize(&s.recip()).unwrap()).unwrap(), canonicalize(&s.recip()).unwrap());
    }
}
