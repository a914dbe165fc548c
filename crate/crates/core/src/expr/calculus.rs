//! Formal partial derivatives, the total derivative and substitution.

use super::canon::{canonicalize, expand};
use super::node::{Expr, FnName, FnNode, Kind, Rational};
use super::symbol::{lv, n_factor, JetSymbol, Label, MAX_ORDER};
use crate::dsl::{Binding, Func, ScalarExpr, Var};
use crate::error::{Error, Result};
use crate::{chart, geometry};
use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

fn sym(s: JetSymbol) -> Expr {
    Expr::sym(s)
}

fn ginv(a: usize, b: usize) -> Expr {
    sym(JetSymbol::inv_metric(lv(a), lv(b)))
}

#[cfg(test)]
fn g_d(a: usize, b: usize, d: &[usize]) -> Expr {
    let d: super::symbol::Labels = d.iter().map(|x| lv(*x)).collect();
    sym(JetSymbol::metric(lv(a), lv(b), &d))
}

/// The kinetic argument of a scalar-function node.
pub fn fn_x_arg(n: &FnNode) -> Expr {
    n.x_arg.clone().unwrap_or_else(geometry::kinetic_x)
}

fn symbol_partial(s: &JetSymbol, c: &JetSymbol) -> Result<Expr> {
    if s == c {
        return Ok(Expr::one());
    }
    if c.has_abstract() {
        return abstract_symbol_partial(s, c);
    }
    match (s, c) {
        (JetSymbol::InvMetric(p), JetSymbol::Metric { pair, d }) if d.is_empty() => {
            let (a, b) = (p[0], p[1]);
            let (gm, dl) = (pair[0], pair[1]);
            let half_n = Rational::new(n_factor(gm.value().unwrap() as usize, dl.value().unwrap() as usize), 2);
            let inv = |x: Label, y: Label| sym(JetSymbol::inv_metric(x, y));
            let t = inv(a, gm) * inv(dl, b) + inv(a, dl) * inv(gm, b);
            Ok(-t.scale(half_n))
        }
        (JetSymbol::MetricDetSqrt, JetSymbol::Metric { pair, d }) if d.is_empty() => {
            let n = n_factor(pair[0].value().unwrap() as usize, pair[1].value().unwrap() as usize);
            Ok((sym(JetSymbol::MetricDetSqrt) * sym(JetSymbol::InvMetric(*pair))).scale(Rational::new(n, 2)))
        }
        _ => Ok(Expr::zero()),
    }
}

fn abstract_symbol_partial(s: &JetSymbol, c: &JetSymbol) -> Result<Expr> {
    match (s, c) {
        (JetSymbol::ScalarPartial(d), JetSymbol::ScalarPartial(e)) if d.len() == 1 && e.len() == 1 => {
            Ok(sym(JetSymbol::delta(e[0], d[0])))
        }
        (_, JetSymbol::ScalarPartial(e)) if e.len() == 1 => Ok(Expr::zero()),
        (JetSymbol::Coord(a), JetSymbol::Coord(b)) => Ok(sym(JetSymbol::delta(*a, *b))),
        (_, JetSymbol::Coord(_)) => Ok(Expr::zero()),
        (JetSymbol::PphiFirst(a), JetSymbol::PphiFirst(b)) => Ok(sym(JetSymbol::delta(*a, *b))),
        (_, JetSymbol::PphiFirst(_)) => Ok(Expr::zero()),
        _ => Err(Error::Unsupported(format!("partial derivative with respect to abstract symbol {c}"))),
    }
}

struct Partial<'a> {
    c: &'a JetSymbol,
    id: Option<usize>,
    memo: HashMap<usize, (Expr, Expr)>,
}

impl Partial<'_> {
    fn run(&mut self, e: &Expr) -> Result<Expr> {
        if let Some(id) = self.id {
            if !e.deps().contains(id) {
                return Ok(Expr::zero());
            }
        }
        if let Some((_, r)) = self.memo.get(&e.ptr()) {
            return Ok(r.clone());
        }
        let r = match e.kind() {
            Kind::Const(_) => Expr::zero(),
            Kind::Sym(s) => symbol_partial(s, self.c)?,
            Kind::Fn(n) => {
                let phi = sym(JetSymbol::phi(&[]));
                let dphi = self.run(&phi)?;
                let x = fn_x_arg(n);
                let dx = self.run(&x)?;
                let mut terms = Vec::new();
                if !dphi.is_zero() {
                    terms.push(Expr::func(n.with_derivative(1, 0)) * dphi);
                }
                if !dx.is_zero() {
                    terms.push(Expr::func(n.with_derivative(0, 1)) * dx);
                }
                Expr::add_all(terms)
            }
            Kind::Sum(v) => {
                let mut terms = Vec::with_capacity(v.len());
                for t in v {
                    terms.push(self.run(t)?);
                }
                Expr::add_all(terms)
            }
            Kind::Prod(v) => {
                let mut terms = Vec::new();
                for (i, f) in v.iter().enumerate() {
                    let df = self.run(f)?;
                    if df.is_zero() {
                        continue;
                    }
                    let mut fs: Vec<Expr> = v.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, x)| x.clone()).collect();
                    fs.push(df);
                    terms.push(Expr::mul_all(fs));
                }
                Expr::add_all(terms)
            }
            Kind::Pow(b, n) => {
                let db = self.run(b)?;
                Expr::mul_all([Expr::int(*n as i64), b.pow(n - 1), db])
            }
        };
        self.memo.insert(e.ptr(), (e.clone(), r.clone()));
        Ok(r)
    }
}

/// Formal partial derivative with respect to an ordered chart coordinate.
pub fn partial(e: &Expr, c: &JetSymbol) -> Result<Expr> {
    if !c.has_abstract() && c.coord_id().is_none() {
        return Err(Error::Unsupported(format!("{c} is not an independent chart coordinate")));
    }
    Partial { c, id: c.coord_id(), memo: HashMap::new() }.run(e)
}

/// Partials with respect to several coordinates sharing no memo.
pub fn partials(e: &Expr, cs: &[JetSymbol]) -> Result<Vec<Expr>> {
    cs.iter().map(|c| partial(e, c)).collect()
}

struct Total {
    tau: Label,
    memo: HashMap<usize, (Expr, Expr)>,
    by_symbol: HashMap<JetSymbol, Expr>,
    dx_default: Option<Expr>,
}

fn overflow(s: &JetSymbol) -> Error {
    Error::OrderOverflow(format!("{s}"))
}

impl Total {
    fn symbol(&mut self, s: &JetSymbol) -> Result<Expr> {
        let tau = self.tau;
        let t = tau.value().map(|v| v as usize);
        match s {
            JetSymbol::Coord(m) => Ok(sym(JetSymbol::delta(*m, tau))),
            JetSymbol::Metric { pair, d } => {
                if d.len() >= MAX_ORDER {
                    return Err(overflow(s));
                }
                let mut d2 = d.clone();
                d2.push(tau);
                Ok(sym(JetSymbol::metric(pair[0], pair[1], &d2)))
            }
            JetSymbol::InvMetric(p) => {
                let mut terms = Vec::new();
                for c in 0..4 {
                    for d in 0..4 {
                        let gd = sym(JetSymbol::metric(lv(c), lv(d), &[tau]));
                        terms.push(sym(JetSymbol::inv_metric(p[0], lv(c))) * sym(JetSymbol::inv_metric(p[1], lv(d))) * gd);
                    }
                }
                Ok(-Expr::add_all(terms))
            }
            JetSymbol::MetricDetSqrt => {
                let mut terms = Vec::new();
                for c in 0..4 {
                    for d in 0..4 {
                        terms.push(ginv(c, d) * sym(JetSymbol::metric(lv(c), lv(d), &[tau])));
                    }
                }
                Ok((sym(JetSymbol::MetricDetSqrt) * Expr::add_all(terms)).scale(Rational::new(1, 2)))
            }
            JetSymbol::ScalarPartial(d) => {
                if d.len() >= MAX_ORDER {
                    return Err(overflow(s));
                }
                let mut d2 = d.clone();
                d2.push(tau);
                Ok(sym(JetSymbol::phi(&d2)))
            }
            JetSymbol::ScalarCovariant(d) => {
                let t = t.ok_or_else(|| Error::Unsupported("total derivative of a covariant jet along an abstract direction".into()))?;
                let d: Vec<usize> = d
                    .iter()
                    .map(|l| l.value().map(|v| v as usize))
                    .collect::<Option<_>>()
                    .ok_or_else(|| Error::Unsupported(format!("abstract covariant jet {s}")))?;
                match d.len() {
                    2 => {
                        let (m, n) = (d[0], d[1]);
                        let mut terms = vec![chart::phi_cov3_general(m, n, t)];
                        for g in 0..4 {
                            terms.push(geometry::christoffel(g, t, m) * chart::phi_cov2(g, n));
                            terms.push(geometry::christoffel(g, t, n) * chart::phi_cov2(m, g));
                        }
                        Ok(Expr::add_all(terms))
                    }
                    3 => {
                        let p = chart::cov3_in_partial(d[0], d[1], d[2]);
                        self.run(&p)
                    }
                    _ => Err(overflow(s)),
                }
            }
            JetSymbol::P
            | JetSymbol::PgFirst { .. }
            | JetSymbol::PgSecond { .. }
            | JetSymbol::PphiFirst(_)
            | JetSymbol::PphiSecond(_) => Ok(sym(JetSymbol::mv(s.clone(), tau))),
            JetSymbol::Delta { .. } => Ok(Expr::zero()),
            JetSymbol::Mv { .. } => Err(Error::Unsupported(format!("total derivative of section derivative {s}"))),
        }
    }

    fn run(&mut self, e: &Expr) -> Result<Expr> {
        if let Some((_, r)) = self.memo.get(&e.ptr()) {
            return Ok(r.clone());
        }
        let r = match e.kind() {
            Kind::Const(_) => Expr::zero(),
            Kind::Sym(s) => match self.by_symbol.get(s) {
                Some(r) => r.clone(),
                None => {
                    let r = self.symbol(s)?;
                    self.by_symbol.insert(s.clone(), r.clone());
                    r
                }
            },
            Kind::Fn(n) => {
                let phi_t = self.symbol(&JetSymbol::phi(&[]))?;
                let dx = match (&n.x_arg, &self.dx_default) {
                    (None, Some(d)) => d.clone(),
                    (None, None) => {
                        let d = self.run(&geometry::kinetic_x())?;
                        self.dx_default = Some(d.clone());
                        d
                    }
                    (Some(x), _) => self.run(x)?,
                };
                Expr::add_all([Expr::func(n.with_derivative(1, 0)) * phi_t, Expr::func(n.with_derivative(0, 1)) * dx])
            }
            Kind::Sum(v) => {
                let mut terms = Vec::with_capacity(v.len());
                for t in v {
                    terms.push(self.run(t)?);
                }
                Expr::add_all(terms)
            }
            Kind::Prod(v) => {
                let mut terms = Vec::new();
                for (i, f) in v.iter().enumerate() {
                    let df = self.run(f)?;
                    if df.is_zero() {
                        continue;
                    }
                    let mut fs: Vec<Expr> = v.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, x)| x.clone()).collect();
                    fs.push(df);
                    terms.push(Expr::mul_all(fs));
                }
                Expr::add_all(terms)
            }
            Kind::Pow(b, n) => {
                let db = self.run(b)?;
                Expr::mul_all([Expr::int(*n as i64), b.pow(n - 1), db])
            }
        };
        self.memo.insert(e.ptr(), (e.clone(), r.clone()));
        Ok(r)
    }
}

/// The total derivative `D_τ`.
pub fn total_derivative(e: &Expr, tau: Label) -> Result<Expr> {
    Total { tau, memo: HashMap::new(), by_symbol: HashMap::new(), dx_default: None }.run(e)
}

/// `D_τ` of several expressions with one shared memo, so common
/// subexpressions are differentiated once.
pub fn total_derivative_many(es: &[Expr], tau: Label) -> Result<Vec<Expr>> {
    let mut t = Total { tau, memo: HashMap::new(), by_symbol: HashMap::new(), dx_default: None };
    es.iter().map(|e| t.run(e)).collect()
}

/// Total derivatives along all four directions sharing nothing.
pub fn total_derivatives(e: &Expr) -> Result<[Expr; 4]> {
    Ok([
        total_derivative(e, lv(0))?,
        total_derivative(e, lv(1))?,
        total_derivative(e, lv(2))?,
        total_derivative(e, lv(3))?,
    ])
}

/// Bindings for [`substitute`]: symbol replacements and concrete scalar
/// functions.
#[derive(Clone, Default)]
pub struct Bindings {
    pub symbols: HashMap<JetSymbol, Expr>,
    pub functions: HashMap<FnName, Arc<Binding>>,
}

impl Bindings {
    pub fn symbol(mut self, s: JetSymbol, e: Expr) -> Self {
        self.symbols.insert(s, e);
        self
    }

    pub fn function(mut self, name: FnName, b: Arc<Binding>) -> Self {
        self.functions.insert(name, b);
        self
    }
}

/// Convert a DSL expression to an [`Expr`] when it uses no transcendental
/// calls.
pub fn scalar_to_expr(s: &ScalarExpr, x: &Expr) -> Option<Expr> {
    Some(match s {
        ScalarExpr::Num(r) => Expr::constant(*r),
        ScalarExpr::Var(Var::Phi) => sym(JetSymbol::phi(&[])),
        ScalarExpr::Var(Var::X) => x.clone(),
        ScalarExpr::Add(a, b) => scalar_to_expr(a, x)? + scalar_to_expr(b, x)?,
        ScalarExpr::Sub(a, b) => scalar_to_expr(a, x)? - scalar_to_expr(b, x)?,
        ScalarExpr::Mul(a, b) => scalar_to_expr(a, x)? * scalar_to_expr(b, x)?,
        ScalarExpr::Div(a, b) => scalar_to_expr(a, x)? / scalar_to_expr(b, x)?,
        ScalarExpr::Neg(a) => -scalar_to_expr(a, x)?,
        ScalarExpr::Pow(a, n) => scalar_to_expr(a, x)?.pow(*n),
        ScalarExpr::Call(Func::Exp | Func::Sin | Func::Cos | Func::Log, _) => return None,
    })
}

fn free_labels(e: &Expr) -> Result<Option<BTreeSet<Label>>> {
    let p = expand(e, super::canon::DEFAULT_LIMIT)?;
    let mut result: Option<BTreeSet<Label>> = None;
    for m in p.keys() {
        let mut count: HashMap<Label, usize> = HashMap::new();
        for (a, k) in m {
            if let super::canon::Atom::Sym(s) = a {
                for i in s.indices() {
                    if i.label.is_abstract() {
                        *count.entry(i.label).or_default() += k.unsigned_abs() as usize;
                    }
                }
            }
        }
        let free: BTreeSet<Label> = count.into_iter().filter(|(_, c)| *c == 1).map(|(l, _)| l).collect();
        match &result {
            None => result = Some(free),
            Some(r) if *r != free => {
                return Err(Error::Substitution(format!("terms of {e} carry different free indices")));
            }
            _ => {}
        }
    }
    Ok(result)
}

fn check_binding(s: &JetSymbol, v: &Expr) -> Result<()> {
    let key: BTreeSet<Label> = s.indices().into_iter().map(|i| i.label).filter(|l| l.is_abstract()).collect();
    if let Some(free) = free_labels(v)? {
        if free != key {
            return Err(Error::Substitution(format!("{s} has free indices {key:?} but its replacement has {free:?}")));
        }
    }
    Ok(())
}

struct Subst<'a> {
    b: &'a Bindings,
    memo: HashMap<usize, (Expr, Expr)>,
}

impl Subst<'_> {
    fn run(&mut self, e: &Expr) -> Expr {
        if let Some((_, r)) = self.memo.get(&e.ptr()) {
            return r.clone();
        }
        let r = match e.kind() {
            Kind::Const(_) => e.clone(),
            Kind::Sym(s) => self.b.symbols.get(s).cloned().unwrap_or_else(|| e.clone()),
            Kind::Fn(n) => {
                let x_arg = n.x_arg.as_ref().map(|x| self.run(x));
                let x_sub = match &x_arg {
                    Some(x) => x.clone(),
                    None => self.run(&geometry::kinetic_x()),
                };
                match self.b.functions.get(&n.f.name) {
                    Some(bind) => {
                        let d = bind.derivative(n.f.d_phi, n.f.d_x);
                        let phi = self.run(&sym(JetSymbol::phi(&[])));
                        match scalar_to_expr(&d, &x_sub) {
                            Some(v) if phi == sym(JetSymbol::phi(&[])) => v,
                            _ => {
                                let x_arg = if x_sub == geometry::kinetic_x() { None } else { Some(x_sub) };
                                Expr::func(FnNode { f: n.f, binding: Some(bind.clone()), x_arg })
                            }
                        }
                    }
                    None => {
                        let x_arg = if x_sub == geometry::kinetic_x() { None } else { Some(x_sub) };
                        Expr::func(FnNode { f: n.f, binding: n.binding.clone(), x_arg })
                    }
                }
            }
            Kind::Sum(v) => Expr::add_all(v.iter().map(|t| self.run(t)).collect::<Vec<_>>()),
            Kind::Prod(v) => Expr::mul_all(v.iter().map(|t| self.run(t)).collect::<Vec<_>>()),
            Kind::Pow(b, n) => self.run(b).pow(*n),
        };
        self.memo.insert(e.ptr(), (e.clone(), r.clone()));
        r
    }
}

/// Simultaneous substitution without canonicalization.
pub fn substitute_raw(e: &Expr, b: &Bindings) -> Expr {
    Subst { b, memo: HashMap::new() }.run(e)
}

/// Simultaneous substitution followed by canonicalization.
pub fn substitute(e: &Expr, b: &Bindings) -> Result<Expr> {
    for (s, v) in &b.symbols {
        check_binding(s, v)?;
    }
    canonicalize(&substitute_raw(e, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::canon::is_zero_structural;

    #[test]
    fn partial_of_coordinate() {
        let s = JetSymbol::metric(lv(0), lv(1), &[lv(2)]);
        assert!(partial(&sym(s.clone()), &s).unwrap().is_one());
        let other = JetSymbol::metric(lv(0), lv(2), &[lv(1)]);
        assert!(partial(&sym(s), &other).unwrap().is_zero());
    }

    #[test]
    fn d_tau_of_metric() {
        let g = g_d(0, 1, &[]);
        assert_eq!(total_derivative(&g, lv(2)).unwrap(), g_d(0, 1, &[2]));
        assert!(total_derivative(&Expr::int(3), lv(0)).unwrap().is_zero());
        let g4 = g_d(0, 1, &[0, 1, 2, 3]);
        assert!(matches!(total_derivative(&g4, lv(0)), Err(Error::OrderOverflow(_))));
    }

    #[test]
    fn leibniz_on_simple_product() {
        let a = ginv(0, 1) * sym(JetSymbol::phi(&[lv(2)]));
        let b = g_d(1, 1, &[0]) + sym(JetSymbol::MetricDetSqrt);
        let lhs = total_derivative(&(&a * &b), lv(3)).unwrap();
        let rhs = total_derivative(&a, lv(3)).unwrap() * &b + &a * total_derivative(&b, lv(3)).unwrap();
        assert!(is_zero_structural(&(lhs - rhs)).unwrap());
    }

    #[test]
    fn substitution_replaces_functions() {
        let g3 = Expr::func(FnNode {
            f: crate::expr::ScalarFn { name: FnName::G3, d_phi: 0, d_x: 1 },
            binding: None,
            x_arg: None,
        });
        let b = Bindings::default().function(FnName::G3, Arc::new(Binding::parse("X^2").unwrap()));
        let out = substitute(&g3, &b).unwrap();
        let expect = canonicalize(&geometry::kinetic_x().scale(Rational::from_integer(2))).unwrap();
        assert_eq!(out, expect);
    }

    #[test]
    fn substitution_checks_indices() {
        let a = JetSymbol::phi(&[Label::Name(0)]);
        let v = sym(JetSymbol::phi(&[Label::Name(1)]));
        let b = Bindings::default().symbol(a.clone(), v);
        assert!(matches!(substitute(&sym(a), &b), Err(Error::Substitution(_))));
    }
}
