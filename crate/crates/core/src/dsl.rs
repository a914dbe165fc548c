//! The scalar-function DSL for `G2(phi, X)` and `G3(phi, X)`.
//!
//! Grammar (precedence from loosest to tightest):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' exponent)*
//! exponent:= ['-'] INT | '(' ['-'] INT ')'
//! atom    := NUMBER | 'phi' | 'X' | FUNC '(' expr ')' | '(' expr ')'
//! FUNC    := exp | sin | cos | log
//! ```

use crate::ad::Num;
use crate::error::{Error, Result};
use num_rational::Rational64;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Mutex;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    Phi,
    X,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Log,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Log => "log",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ScalarExpr {
    Num(Rational64),
    Var(Var),
    Add(Box<ScalarExpr>, Box<ScalarExpr>),
    Sub(Box<ScalarExpr>, Box<ScalarExpr>),
    Mul(Box<ScalarExpr>, Box<ScalarExpr>),
    Div(Box<ScalarExpr>, Box<ScalarExpr>),
    Neg(Box<ScalarExpr>),
    Pow(Box<ScalarExpr>, i32),
    Call(Func, Box<ScalarExpr>),
}

use ScalarExpr as S;

fn b(e: ScalarExpr) -> Box<ScalarExpr> {
    Box::new(e)
}

impl ScalarExpr {
    pub fn int(v: i64) -> Self {
        S::Num(Rational64::from_integer(v))
    }

    pub fn as_num(&self) -> Option<Rational64> {
        match self {
            S::Num(r) => Some(*r),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_num().is_some_and(|r| r.is_zero())
    }

    pub fn contains(&self, v: Var) -> bool {
        match self {
            S::Num(_) => false,
            S::Var(w) => *w == v,
            S::Add(a, c) | S::Sub(a, c) | S::Mul(a, c) | S::Div(a, c) => a.contains(v) || c.contains(v),
            S::Neg(a) | S::Pow(a, _) | S::Call(_, a) => a.contains(v),
        }
    }

    /// Constant folding plus collection of like terms: the expression is
    /// expanded into a rational combination of monomials over `phi`, `X`,
    /// function calls and non-monomial reciprocals, then rebuilt in a fixed order.
    pub fn simplify(&self) -> ScalarExpr {
        to_expr(&poly(self))
    }

    /// Exact first derivative, simplified.
    pub fn diff(&self, v: Var) -> ScalarExpr {
        match self {
            S::Num(_) => S::int(0),
            S::Var(w) => S::int(if *w == v { 1 } else { 0 }),
            S::Add(a, c) => add(a.diff(v), c.diff(v)),
            S::Sub(a, c) => sub(a.diff(v), c.diff(v)),
            S::Mul(a, c) => add(mul(a.diff(v), (**c).clone()), mul((**a).clone(), c.diff(v))),
            S::Div(a, c) => {
                let num = sub(mul(a.diff(v), (**c).clone()), mul((**a).clone(), c.diff(v)));
                div(num, pow((**c).clone(), 2))
            }
            S::Neg(a) => neg(a.diff(v)),
            S::Pow(a, n) => mul(mul(S::int(*n as i64), pow((**a).clone(), n - 1)), a.diff(v)),
            S::Call(f, a) => {
                let inner = (**a).clone();
                let outer = match f {
                    Func::Exp => call(Func::Exp, inner),
                    Func::Sin => call(Func::Cos, inner),
                    Func::Cos => neg(call(Func::Sin, inner)),
                    Func::Log => pow(inner, -1),
                };
                mul(outer, a.diff(v))
            }
        }
    }

    pub fn differentiate(&self, v: Var, order: usize) -> ScalarExpr {
        let mut e = self.simplify();
        for _ in 0..order {
            e = e.diff(v).simplify();
        }
        e
    }

    /// Mixed partial `∂^{dphi+dx} / ∂phi^dphi ∂X^dx`.
    pub fn mixed(&self, dphi: usize, dx: usize) -> ScalarExpr {
        self.differentiate(Var::Phi, dphi).differentiate(Var::X, dx)
    }

    pub fn eval<T: Num>(&self, phi: &T, x: &T) -> T {
        match self {
            S::Num(r) => T::from_f64(r.to_f64().unwrap_or(f64::NAN)),
            S::Var(Var::Phi) => phi.clone(),
            S::Var(Var::X) => x.clone(),
            S::Add(a, c) => a.eval(phi, x) + c.eval(phi, x),
            S::Sub(a, c) => a.eval(phi, x) - c.eval(phi, x),
            S::Mul(a, c) => a.eval(phi, x) * c.eval(phi, x),
            S::Div(a, c) => a.eval(phi, x) / c.eval(phi, x),
            S::Neg(a) => -a.eval(phi, x),
            S::Pow(a, n) => a.eval(phi, x).powi(*n),
            S::Call(f, a) => {
                let v = a.eval(phi, x);
                match f {
                    Func::Exp => v.exp(),
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Log => v.ln(),
                }
            }
        }
    }

    pub fn eval_f64(&self, phi: f64, x: f64) -> f64 {
        self.eval(&phi, &x)
    }

    fn prec(&self) -> u8 {
        match self {
            S::Add(..) | S::Sub(..) => 1,
            S::Mul(..) | S::Div(..) => 2,
            S::Neg(_) => 3,
            S::Pow(..) => 4,
            S::Num(r) if r.is_negative() || !r.is_integer() => 2,
            _ => 5,
        }
    }

    fn write_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let p = self.prec();
        if p < min {
            write!(f, "(")?;
        }
        match self {
            S::Num(r) if r.is_negative() => {
                write!(f, "-")?;
                S::Num(-r).write_prec(f, 3)?;
            }
            S::Num(r) if r.is_integer() => write!(f, "{}", r.numer())?,
            S::Num(r) => write!(f, "{}/{}", r.numer(), r.denom())?,
            S::Var(Var::Phi) => write!(f, "phi")?,
            S::Var(Var::X) => write!(f, "X")?,
            S::Add(a, c) => {
                a.write_prec(f, 1)?;
                write!(f, " + ")?;
                c.write_prec(f, 2)?;
            }
            S::Sub(a, c) => {
                a.write_prec(f, 1)?;
                write!(f, " - ")?;
                c.write_prec(f, 2)?;
            }
            S::Mul(a, c) => {
                a.write_prec(f, 2)?;
                write!(f, "*")?;
                c.write_prec(f, 3)?;
            }
            S::Div(a, c) => {
                a.write_prec(f, 2)?;
                write!(f, "/")?;
                c.write_prec(f, 3)?;
            }
            S::Neg(a) => {
                write!(f, "-")?;
                a.write_prec(f, 3)?;
            }
            S::Pow(a, n) => {
                a.write_prec(f, 5)?;
                write!(f, "^{n}")?;
            }
            S::Call(func, a) => write!(f, "{}({a})", func.name())?,
        }
        if p < min {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prec(f, 0)
    }
}

fn add(a: S, c: S) -> S {
    match (a.as_num(), c.as_num()) {
        (Some(x), Some(y)) => S::Num(x + y),
        (Some(x), _) if x.is_zero() => c,
        (_, Some(y)) if y.is_zero() => a,
        _ => S::Add(b(a), b(c)),
    }
}

fn sub(a: S, c: S) -> S {
    match (a.as_num(), c.as_num()) {
        (Some(x), Some(y)) => S::Num(x - y),
        (Some(x), _) if x.is_zero() => neg(c),
        (_, Some(y)) if y.is_zero() => a,
        _ => S::Sub(b(a), b(c)),
    }
}

fn mul(a: S, c: S) -> S {
    match (a.as_num(), c.as_num()) {
        (Some(x), Some(y)) => S::Num(x * y),
        (Some(x), _) if x.is_zero() => S::int(0),
        (_, Some(y)) if y.is_zero() => S::int(0),
        (Some(x), _) if x.is_one() => c,
        (_, Some(y)) if y.is_one() => a,
        _ => S::Mul(b(a), b(c)),
    }
}

fn div(a: S, c: S) -> S {
    match (a.as_num(), c.as_num()) {
        (Some(x), Some(y)) if !y.is_zero() => S::Num(x / y),
        (Some(x), _) if x.is_zero() => S::int(0),
        (_, Some(y)) if y.is_one() => a,
        _ => S::Div(b(a), b(c)),
    }
}

fn neg(a: S) -> S {
    match a {
        S::Num(x) => S::Num(-x),
        S::Neg(inner) => *inner,
        _ => S::Neg(b(a)),
    }
}

fn pow(a: S, n: i32) -> S {
    if n == 0 {
        return S::int(1);
    }
    if n == 1 {
        return a;
    }
    match &a {
        S::Num(x) if !(x.is_zero() && n < 0) => S::Num(num_traits::pow::Pow::pow(*x, n)),
        S::Pow(inner, m) => pow((**inner).clone(), m * n),
        _ => S::Pow(b(a), n),
    }
}

fn call(f: Func, a: S) -> S {
    match (f, a.as_num()) {
        (Func::Exp, Some(x)) if x.is_zero() => S::int(1),
        (Func::Sin, Some(x)) if x.is_zero() => S::int(0),
        (Func::Cos, Some(x)) if x.is_zero() => S::int(1),
        (Func::Log, Some(x)) if x.is_one() => S::int(0),
        _ => S::Call(f, b(a)),
    }
}

type Mono = BTreeMap<String, (ScalarExpr, i32)>;
type Poly = BTreeMap<Vec<(String, i32)>, (Mono, Rational64)>;

const MAX_EXPAND: i32 = 8;

fn mono_key(m: &Mono) -> Vec<(String, i32)> {
    m.iter().map(|(k, (_, e))| (k.clone(), *e)).collect()
}

fn poly_const(r: Rational64) -> Poly {
    let mut p = Poly::new();
    if !r.is_zero() {
        p.insert(vec![], (Mono::new(), r));
    }
    p
}

fn poly_atom(e: ScalarExpr, exp: i32) -> Poly {
    let mut m = Mono::new();
    m.insert(e.to_string(), (e, exp));
    let mut p = Poly::new();
    p.insert(mono_key(&m), (m, Rational64::one()));
    p
}

fn poly_add_into(acc: &mut Poly, other: Poly, scale: Rational64) {
    for (k, (m, c)) in other {
        let entry = acc.entry(k).or_insert((m, Rational64::zero()));
        entry.1 += c * scale;
    }
    acc.retain(|_, (_, c)| !c.is_zero());
}

fn poly_mul(a: &Poly, c: &Poly) -> Poly {
    let mut out = Poly::new();
    for (ma, ca) in a.values() {
        for (mc, cc) in c.values() {
            let mut m = ma.clone();
            for (k, (e, x)) in mc {
                let entry = m.entry(k.clone()).or_insert((e.clone(), 0));
                entry.1 += x;
            }
            m.retain(|_, (_, x)| *x != 0);
            let mut term = Poly::new();
            term.insert(mono_key(&m), (m, *ca * *cc));
            poly_add_into(&mut out, term, Rational64::one());
        }
    }
    out
}

fn poly(e: &ScalarExpr) -> Poly {
    match e {
        S::Num(r) => poly_const(*r),
        S::Var(_) => poly_atom(e.clone(), 1),
        S::Add(a, c) => {
            let mut p = poly(a);
            poly_add_into(&mut p, poly(c), Rational64::one());
            p
        }
        S::Sub(a, c) => {
            let mut p = poly(a);
            poly_add_into(&mut p, poly(c), -Rational64::one());
            p
        }
        S::Neg(a) => {
            let mut p = Poly::new();
            poly_add_into(&mut p, poly(a), -Rational64::one());
            p
        }
        S::Mul(a, c) => poly_mul(&poly(a), &poly(c)),
        S::Div(a, c) => poly_mul(&poly(a), &poly_pow(poly(c), -1)),
        S::Pow(a, n) => poly_pow(poly(a), *n),
        S::Call(f, a) => {
            let arg = to_expr(&poly(a));
            match call(*f, arg) {
                S::Num(r) => poly_const(r),
                other => poly_atom(other, 1),
            }
        }
    }
}

fn poly_pow(p: Poly, n: i32) -> Poly {
    if n == 0 {
        return poly_const(Rational64::one());
    }
    if p.is_empty() {
        return if n > 0 { Poly::new() } else { poly_atom(S::int(0), n) };
    }
    if p.len() == 1 {
        let (m, c) = p.into_values().next().unwrap();
        let ok = c.numer().unsigned_abs().checked_pow(n.unsigned_abs()).is_some()
            && c.denom().unsigned_abs().checked_pow(n.unsigned_abs()).is_some();
        if ok {
            let m: Mono = m.into_iter().map(|(k, (e, x))| (k, (e, x * n))).collect();
            let mut out = Poly::new();
            out.insert(mono_key(&m), (m, num_traits::pow::Pow::pow(c, n)));
            return out;
        }
        let mut single = Poly::new();
        single.insert(mono_key(&m), (m, c));
        return poly_atom(to_expr(&single), n);
    }
    if (1..=MAX_EXPAND).contains(&n) {
        let mut acc = p.clone();
        for _ in 1..n {
            acc = poly_mul(&acc, &p);
        }
        return acc;
    }
    poly_atom(to_expr(&p), n)
}

fn to_expr(p: &Poly) -> ScalarExpr {
    let mut sum: Option<S> = None;
    for (m, c) in p.values() {
        let mut prod: Option<S> = None;
        for (e, x) in m.values() {
            let f = if *x == 1 { e.clone() } else { S::Pow(b(e.clone()), *x) };
            prod = Some(match prod {
                None => f,
                Some(q) => S::Mul(b(q), b(f)),
            });
        }
        let term = match prod {
            None => S::Num(*c),
            Some(q) if c.is_one() => q,
            Some(q) if *c == -Rational64::one() => S::Neg(b(q)),
            Some(q) => S::Mul(b(S::Num(*c)), b(q)),
        };
        sum = Some(match sum {
            None => term,
            Some(s) => S::Add(b(s), b(term)),
        });
    }
    sum.unwrap_or_else(|| S::int(0))
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(Rational64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            out.push((Tok::Num(parse_decimal(&src[start..i], start)?), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Op(c), i));
            i += 1;
        } else {
            return Err(Error::Syntax { offset: i, message: format!("unexpected character `{c}`") });
        }
    }
    Ok(out)
}

fn parse_decimal(s: &str, offset: usize) -> Result<Rational64> {
    let bad = || Error::Syntax { offset, message: format!("malformed number `{s}`") };
    let (int, frac) = match s.split_once('.') {
        Some((a, c)) => (a, c),
        None => (s, ""),
    };
    if (int.is_empty() && frac.is_empty()) || frac.contains('.') || frac.len() > 15 {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    let n: i64 = digits.parse().map_err(|_| bad())?;
    Ok(Rational64::new(n, 10i64.pow(frac.len() as u32)))
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.1).unwrap_or(self.src.len())
    }

    fn err(&self, message: &str) -> Error {
        Error::Syntax { offset: self.offset(), message: message.to_string() }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<S> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = S::Add(b(lhs), b(self.term()?));
            } else if self.eat('-') {
                lhs = S::Sub(b(lhs), b(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<S> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = S::Mul(b(lhs), b(self.unary()?));
            } else if self.eat('/') {
                lhs = S::Div(b(lhs), b(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<S> {
        if self.eat('-') {
            Ok(S::Neg(b(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<S> {
        let mut base = self.atom()?;
        while self.eat('^') {
            base = S::Pow(b(base), self.exponent()?);
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<i32> {
        let paren = self.eat('(');
        let negative = self.eat('-');
        let off = self.offset();
        let n = match self.peek() {
            Some(Tok::Num(r)) if r.is_integer() => {
                let v = r.to_integer();
                self.pos += 1;
                i32::try_from(v).map_err(|_| Error::Syntax { offset: off, message: "exponent too large".into() })?
            }
            _ => return Err(self.err("exponent must be an integer literal")),
        };
        if paren {
            self.expect(')')?;
        }
        Ok(if negative { -n } else { n })
    }

    fn atom(&mut self) -> Result<S> {
        let off = self.offset();
        match self.peek().cloned() {
            Some(Tok::Num(r)) => {
                self.pos += 1;
                Ok(S::Num(r))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                let func = match name.as_str() {
                    "phi" => return Ok(S::Var(Var::Phi)),
                    "X" => return Ok(S::Var(Var::X)),
                    "exp" => Func::Exp,
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "log" => Func::Log,
                    _ => return Err(Error::UnknownIdentifier { offset: off, name }),
                };
                self.expect('(')?;
                let arg = self.expr()?;
                self.expect(')')?;
                Ok(S::Call(func, b(arg)))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(_) => Err(self.err("expected a number, variable, function call or `(`")),
            None => Err(self.err("unexpected end of input")),
        }
    }
}

/// Parse DSL text into an unsimplified expression tree.
pub fn parse(src: &str) -> Result<ScalarExpr> {
    let toks = tokenize(src)?;
    if toks.is_empty() {
        return Err(Error::Syntax { offset: 0, message: "empty expression".into() });
    }
    let mut p = Parser { toks, pos: 0, src };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

/// A concrete `G2` or `G3` with memoized mixed partials.
#[derive(Debug)]
pub struct Binding {
    pub expr: ScalarExpr,
    source: String,
    cache: Mutex<HashMap<(u8, u8), ScalarExpr>>,
}

impl Binding {
    pub fn new(expr: ScalarExpr) -> Self {
        let expr = expr.simplify();
        Binding { source: expr.to_string(), expr, cache: Mutex::new(HashMap::new()) }
    }

    pub fn parse(src: &str) -> Result<Self> {
        Ok(Self::new(parse(src)?))
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn derivative(&self, dphi: u8, dx: u8) -> ScalarExpr {
        let mut cache = self.cache.lock().expect("binding cache poisoned");
        cache.entry((dphi, dx)).or_insert_with(|| self.expr.mixed(dphi as usize, dx as usize)).clone()
    }

    pub fn vanishes(&self, dphi: u8, dx: u8) -> bool {
        self.derivative(dphi, dx).is_zero()
    }

    /// Structural `∂G/∂X ≡ 0` after constant folding.
    pub fn is_x_free(&self) -> bool {
        !self.expr.contains(Var::X)
    }
}

impl PartialEq for Binding {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let e = parse("-2^2").unwrap();
        assert_eq!(e.eval_f64(0.0, 0.0), -4.0);
        let e = parse("8/4/2").unwrap();
        assert_eq!(e.eval_f64(0.0, 0.0), 1.0);
        let e = parse("1 - 2 - 3").unwrap();
        assert_eq!(e.eval_f64(0.0, 0.0), -4.0);
        let e = parse("phi*X - X^2/2").unwrap();
        assert!((e.eval_f64(2.0, 3.0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_offsets() {
        assert_eq!(parse("phi + Y"), Err(Error::UnknownIdentifier { offset: 6, name: "Y".into() }));
        match parse("phi + ") {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 6),
            other => panic!("{other:?}"),
        }
        match parse("phi $ 2") {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("{other:?}"),
        }
        assert!(parse("").is_err());
        assert!(parse("X^phi").is_err());
    }

    #[test]
    fn derivatives() {
        let e = parse("phi*X").unwrap();
        assert_eq!(e.differentiate(Var::X, 1), S::Var(Var::Phi));
        let e = parse("X^3").unwrap();
        assert_eq!(e.differentiate(Var::X, 2).eval_f64(0.0, 2.0), 12.0);
        let e = parse("phi^2 + 3").unwrap();
        assert!(e.differentiate(Var::X, 1).is_zero());
        let e = parse("2*X - X - X + phi").unwrap().simplify();
        assert!(!e.contains(Var::X));
        assert!(e.differentiate(Var::X, 1).is_zero());
    }

    #[test]
    fn round_trip_examples() {
        for src in ["phi^2 + 3*X", "-X^(-2)*exp(phi)", "1/3 - phi/(X - 2)", "(-2)^3*sin(X)*cos(phi)", "log(1 + X^2)"] {
            let e = parse(src).unwrap();
            let printed = e.to_string();
            let back = parse(&printed).unwrap();
            let (p, x) = (0.37, 1.21);
            assert!((e.eval_f64(p, x) - back.eval_f64(p, x)).abs() < 1e-12, "{src} -> {printed}");
        }
    }
}
