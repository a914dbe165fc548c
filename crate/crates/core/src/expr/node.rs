//! Hash-consed-by-value expression DAG with dependency bitsets.

use super::symbol::{JetSymbol, Label, METRIC_BASE, NCOORD, PHI_BASE};
use crate::dsl::Binding;
use num_rational::Rational64;
use num_traits::{One, Signed, Zero};
use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

pub type Rational = Rational64;

const WORDS: usize = NCOORD.div_ceil(64);

/// Set of chart coordinate ids an expression may depend on.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct DepSet([u64; WORDS]);

impl DepSet {
    pub fn single(id: usize) -> Self {
        let mut d = DepSet::default();
        d.insert(id);
        d
    }

    pub fn full() -> Self {
        let mut d = DepSet([u64::MAX; WORDS]);
        for id in NCOORD..WORDS * 64 {
            d.0[id / 64] &= !(1 << (id % 64));
        }
        d
    }

    pub fn insert(&mut self, id: usize) {
        self.0[id / 64] |= 1 << (id % 64);
    }

    pub fn contains(&self, id: usize) -> bool {
        self.0[id / 64] >> (id % 64) & 1 == 1
    }

    pub fn union(&mut self, o: &DepSet) {
        for (a, b) in self.0.iter_mut().zip(o.0.iter()) {
            *a |= b;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|w| *w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..NCOORD).filter(move |i| self.contains(*i))
    }
}

impl fmt::Debug for DepSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

fn metric_deps() -> DepSet {
    let mut d = DepSet::default();
    for p in 0..10 {
        d.insert(METRIC_BASE + p * 70);
    }
    d
}

fn kinetic_deps() -> DepSet {
    let mut d = metric_deps();
    for mu in 0..4 {
        d.insert(PHI_BASE + 1 + mu);
    }
    d
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FnName {
    G2,
    G3,
}

/// `∂^{d_phi + d_x} G / ∂φ^{d_phi} ∂X^{d_x}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScalarFn {
    pub name: FnName,
    pub d_phi: u8,
    pub d_x: u8,
}

/// A scalar-function factor. `x_arg` replaces the default kinetic argument
/// `X = -½ g^{μν} φ_{;μ} φ_{;ν}` when velocities have been substituted.
#[derive(Clone, Debug)]
pub struct FnNode {
    pub f: ScalarFn,
    pub binding: Option<Arc<Binding>>,
    pub x_arg: Option<Expr>,
}

impl FnNode {
    pub fn binding_source(&self) -> Option<&str> {
        self.binding.as_ref().map(|b| b.source())
    }

    /// True when the bound function makes this derivative vanish identically.
    pub fn vanishes(&self) -> bool {
        self.binding.as_ref().is_some_and(|b| b.vanishes(self.f.d_phi, self.f.d_x))
    }

    pub fn with_derivative(&self, d_phi: u8, d_x: u8) -> FnNode {
        FnNode {
            f: ScalarFn { name: self.f.name, d_phi: self.f.d_phi + d_phi, d_x: self.f.d_x + d_x },
            binding: self.binding.clone(),
            x_arg: self.x_arg.clone(),
        }
    }
}

impl PartialEq for FnNode {
    fn eq(&self, o: &Self) -> bool {
        self.f == o.f && self.binding_source() == o.binding_source() && self.x_arg == o.x_arg
    }
}

impl Eq for FnNode {}

impl Hash for FnNode {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.f.hash(state);
        self.binding_source().hash(state);
        self.x_arg.hash(state);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    Const(Rational),
    Sym(JetSymbol),
    Fn(FnNode),
    Sum(Vec<Expr>),
    Prod(Vec<Expr>),
    Pow(Expr, i32),
}

#[derive(Debug)]
pub struct Node {
    pub kind: Kind,
    pub deps: DepSet,
    pub order: u8,
    hash: u64,
}

/// Immutable expression handle; clones share structure.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

impl PartialEq for Expr {
    fn eq(&self, o: &Self) -> bool {
        Arc::ptr_eq(&self.0, &o.0) || (self.0.hash == o.0.hash && self.0.kind == o.0.kind)
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

fn symbol_deps(s: &JetSymbol) -> DepSet {
    if s.has_abstract() {
        return match s {
            JetSymbol::Delta { .. } | JetSymbol::Mv { .. } => DepSet::default(),
            _ => DepSet::full(),
        };
    }
    match s {
        JetSymbol::InvMetric(_) | JetSymbol::MetricDetSqrt => metric_deps(),
        _ => s.coord_id().map(DepSet::single).unwrap_or_default(),
    }
}

impl Expr {
    fn build(kind: Kind) -> Expr {
        let mut deps = DepSet::default();
        let mut order = 0u8;
        match &kind {
            Kind::Const(_) => {}
            Kind::Sym(s) => {
                deps = symbol_deps(s);
                order = s.order() as u8;
            }
            Kind::Fn(n) => {
                deps.insert(PHI_BASE);
                match &n.x_arg {
                    Some(x) => {
                        deps.union(&x.0.deps);
                        order = x.0.order;
                    }
                    None => {
                        deps.union(&kinetic_deps());
                        order = 1;
                    }
                }
            }
            Kind::Sum(v) | Kind::Prod(v) => {
                for e in v {
                    deps.union(&e.0.deps);
                    order = order.max(e.0.order);
                }
            }
            Kind::Pow(b, _) => {
                deps = b.0.deps;
                order = b.0.order;
            }
        }
        let mut h = DefaultHasher::new();
        kind.hash(&mut h);
        Expr(Arc::new(Node { kind, deps, order, hash: h.finish() }))
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    pub fn deps(&self) -> &DepSet {
        &self.0.deps
    }

    /// Highest jet order of any symbol occurring in the expression.
    pub fn order(&self) -> usize {
        self.0.order as usize
    }

    pub fn ptr(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn structural_hash(&self) -> u64 {
        self.0.hash
    }

    pub fn constant(r: Rational) -> Expr {
        Expr::build(Kind::Const(r))
    }

    pub fn int(v: i64) -> Expr {
        Expr::constant(Rational::from_integer(v))
    }

    pub fn rat(p: i64, q: i64) -> Expr {
        Expr::constant(Rational::new(p, q))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    /// Symbol leaf; concrete Kronecker deltas fold to 0 or 1.
    pub fn sym(s: JetSymbol) -> Expr {
        if let JetSymbol::Delta { up: Label::Val(a), lo: Label::Val(b) } = s {
            return Expr::int((a == b) as i64);
        }
        if let JetSymbol::ScalarCovariant(d) = &s {
            if d.len() < 2 {
                return Expr::sym(JetSymbol::ScalarPartial(d.clone()));
            }
        }
        Expr::build(Kind::Sym(s))
    }

    pub fn func(n: FnNode) -> Expr {
        if n.vanishes() {
            return Expr::zero();
        }
        Expr::build(Kind::Fn(n))
    }

    pub fn as_const(&self) -> Option<Rational> {
        match self.kind() {
            Kind::Const(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_sym(&self) -> Option<&JetSymbol> {
        match self.kind() {
            Kind::Sym(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const().is_some_and(|r| r.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.as_const().is_some_and(|r| r.is_one())
    }

    /// Flattening sum with constant folding.
    pub fn add_all(terms: impl IntoIterator<Item = Expr>) -> Expr {
        let mut c = Rational::zero();
        let mut out = Vec::new();
        for t in terms {
            match t.kind() {
                Kind::Const(r) => c += r,
                Kind::Sum(v) => {
                    for s in v {
                        match s.as_const() {
                            Some(r) => c += r,
                            None => out.push(s.clone()),
                        }
                    }
                }
                _ => out.push(t),
            }
        }
        if !c.is_zero() {
            out.insert(0, Expr::constant(c));
        }
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => Expr::build(Kind::Sum(out)),
        }
    }

    /// Flattening product with constant folding.
    pub fn mul_all(factors: impl IntoIterator<Item = Expr>) -> Expr {
        let mut c = Rational::one();
        let mut out = Vec::new();
        for f in factors {
            match f.kind() {
                Kind::Const(r) => {
                    if r.is_zero() {
                        return Expr::zero();
                    }
                    c *= r;
                }
                Kind::Prod(v) => {
                    for s in v {
                        match s.as_const() {
                            Some(r) => c *= r,
                            None => out.push(s.clone()),
                        }
                    }
                }
                _ => out.push(f),
            }
        }
        if !c.is_one() {
            out.insert(0, Expr::constant(c));
        }
        match out.len() {
            0 => Expr::one(),
            1 => out.pop().unwrap(),
            _ => Expr::build(Kind::Prod(out)),
        }
    }

    pub fn pow(&self, n: i32) -> Expr {
        if n == 0 {
            return Expr::one();
        }
        if n == 1 {
            return self.clone();
        }
        match self.kind() {
            Kind::Const(r) => {
                if r.is_zero() {
                    assert!(n > 0, "zero raised to a negative power");
                    return Expr::zero();
                }
                Expr::constant(num_traits::pow::Pow::pow(*r, n))
            }
            Kind::Pow(b, m) => b.pow(m * n),
            _ => Expr::build(Kind::Pow(self.clone(), n)),
        }
    }

    pub fn recip(&self) -> Expr {
        self.pow(-1)
    }

    pub fn scale(&self, r: Rational) -> Expr {
        Expr::mul_all([Expr::constant(r), self.clone()])
    }

    pub fn children(&self) -> &[Expr] {
        match self.kind() {
            Kind::Sum(v) | Kind::Prod(v) => v,
            Kind::Pow(b, _) => std::slice::from_ref(b),
            _ => &[],
        }
    }

    /// Number of distinct DAG nodes.
    pub fn dag_size(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if seen.insert(e.ptr()) {
                stack.extend(e.children().iter().cloned());
                if let Kind::Fn(FnNode { x_arg: Some(x), .. }) = e.kind() {
                    stack.push(x.clone());
                }
            }
        }
        seen.len()
    }

    /// Visit every symbol leaf (including those inside `x_arg`).
    pub fn for_each_symbol(&self, f: &mut impl FnMut(&JetSymbol)) {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.ptr()) {
                continue;
            }
            match e.kind() {
                Kind::Sym(s) => f(s),
                Kind::Fn(n) => {
                    if let Some(x) = &n.x_arg {
                        stack.push(x.clone());
                    }
                }
                _ => stack.extend(e.children().iter().cloned()),
            }
        }
    }

    pub fn contains_symbol(&self, pred: impl Fn(&JetSymbol) -> bool) -> bool {
        let mut hit = false;
        self.for_each_symbol(&mut |s| hit |= pred(s));
        hit
    }

    pub fn contains_momentum(&self) -> bool {
        self.contains_symbol(|s| s.is_momentum())
    }
}

impl From<i64> for Expr {
    fn from(v: i64) -> Expr {
        Expr::int(v)
    }
}

impl From<JetSymbol> for Expr {
    fn from(s: JetSymbol) -> Expr {
        Expr::sym(s)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr<Expr> for Expr {
            type Output = Expr;
            fn $m(self, o: Expr) -> Expr {
                $body(self, o)
            }
        }
        impl $tr<&Expr> for Expr {
            type Output = Expr;
            fn $m(self, o: &Expr) -> Expr {
                $body(self, o.clone())
            }
        }
        impl $tr<Expr> for &Expr {
            type Output = Expr;
            fn $m(self, o: Expr) -> Expr {
                $body(self.clone(), o)
            }
        }
        impl $tr<&Expr> for &Expr {
            type Output = Expr;
            fn $m(self, o: &Expr) -> Expr {
                $body(self.clone(), o.clone())
            }
        }
    };
}

binop!(Add, add, |a: Expr, b: Expr| Expr::add_all([a, b]));
binop!(Sub, sub, |a: Expr, b: Expr| Expr::add_all([a, -b]));
binop!(Mul, mul, |a: Expr, b: Expr| Expr::mul_all([a, b]));
binop!(Div, div, |a: Expr, b: Expr| Expr::mul_all([a, b.recip()]));

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.scale(-Rational::one())
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.scale(-Rational::one())
    }
}

impl fmt::Display for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.name {
            FnName::G2 => "G2",
            FnName::G3 => "G3",
        };
        write!(f, "{name}")?;
        if self.d_phi + self.d_x > 0 {
            write!(f, "_{{{}{}}}", "phi".repeat(self.d_phi as usize), "X".repeat(self.d_x as usize))?;
        }
        Ok(())
    }
}

fn write_rational(f: &mut fmt::Formatter<'_>, r: &Rational) -> fmt::Result {
    if r.is_integer() {
        write!(f, "{}", r.numer())
    } else {
        write!(f, "{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            Kind::Const(r) => write_rational(f, r),
            Kind::Sym(s) => write!(f, "{s}"),
            Kind::Fn(n) => match &n.x_arg {
                None => write!(f, "{}", n.f),
                Some(x) => write!(f, "{}[X={}]", n.f, x),
            },
            Kind::Sum(v) => {
                write!(f, "(")?;
                for (i, t) in v.iter().enumerate() {
                    match t.kind() {
                        Kind::Const(r) if i > 0 && r.is_negative() => {
                            write!(f, " - ")?;
                            write_rational(f, &-r)?;
                        }
                        Kind::Prod(p) if i > 0 && p[0].as_const().is_some_and(|r| r.is_negative()) => {
                            write!(f, " - ")?;
                            write!(f, "{}", Expr::mul_all(p.iter().cloned()).scale(-Rational::one()))?;
                        }
                        _ => {
                            if i > 0 {
                                write!(f, " + ")?;
                            }
                            write!(f, "{t}")?;
                        }
                    }
                }
                write!(f, ")")
            }
            Kind::Prod(v) => {
                for (i, t) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, "*")?;
                    }
                    match t.as_const() {
                        Some(r) if !r.is_integer() || r.is_negative() => {
                            write!(f, "(")?;
                            write_rational(f, &r)?;
                            write!(f, ")")?;
                        }
                        _ => write!(f, "{t}")?,
                    }
                }
                Ok(())
            }
            Kind::Pow(b, n) => match b.kind() {
                Kind::Sym(_) | Kind::Fn(_) | Kind::Sum(_) => write!(f, "{b}^{n}"),
                _ => write!(f, "({b})^{n}"),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::symbol::lv;

    #[test]
    fn constructors_fold() {
        let g = Expr::sym(JetSymbol::metric(lv(0), lv(1), &[]));
        assert_eq!(&g + Expr::zero(), g);
        assert_eq!(&g * Expr::one(), g);
        assert!((&g * Expr::zero()).is_zero());
        assert_eq!(Expr::int(2) + Expr::rat(1, 2), Expr::rat(5, 2));
        assert_eq!(g.pow(2).pow(3), g.pow(6));
        assert!(Expr::sym(JetSymbol::delta(lv(1), lv(2))).is_zero());
        assert!(Expr::sym(JetSymbol::delta(lv(2), lv(2))).is_one());
    }

    #[test]
    fn deps_track_symbols() {
        let g = Expr::sym(JetSymbol::metric(lv(0), lv(1), &[lv(2)]));
        let id = JetSymbol::metric(lv(0), lv(1), &[lv(2)]).coord_id().unwrap();
        assert!(g.deps().contains(id));
        let ginv = Expr::sym(JetSymbol::inv_metric(lv(0), lv(0)));
        assert!(ginv.deps().contains(METRIC_BASE));
        assert_eq!((&g * &ginv).order(), 1);
    }
}
