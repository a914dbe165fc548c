//! Small forward-mode AD layer: a `Num` trait over `f64`, first-order duals
//! and truncated multivariate Taylor series in the four spacetime variables.

use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::OnceLock;

pub trait Num:
    Clone
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    /// Real part of the leading coefficient.
    fn re(&self) -> f64;
    fn exp(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn recip(&self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }

    fn scale(&self, s: f64) -> Self {
        self.clone() * Self::from_f64(s)
    }

    fn powi(&self, n: i32) -> Self {
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut acc = Self::one();
        let mut base = self.clone();
        let mut k = n as u32;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base.clone();
            }
            base = base.clone() * base;
            k >>= 1;
        }
        acc
    }
}

impl Num for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn re(&self) -> f64 {
        *self
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn recip(&self) -> Self {
        1.0 / *self
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
}

/// `a + b ε` with `ε² = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual {
    pub a: f64,
    pub b: f64,
}

impl Dual {
    pub fn new(a: f64, b: f64) -> Self {
        Dual { a, b }
    }

    pub fn var(a: f64) -> Self {
        Dual { a, b: 1.0 }
    }

    fn chain(&self, f: f64, df: f64) -> Self {
        Dual { a: f, b: df * self.b }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual { a: self.a + o.a, b: self.b + o.b }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual { a: self.a - o.a, b: self.b - o.b }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual { a: self.a * o.a, b: self.a * o.b + self.b * o.a }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        self * o.recip()
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual { a: -self.a, b: -self.b }
    }
}

impl Num for Dual {
    fn from_f64(v: f64) -> Self {
        Dual { a: v, b: 0.0 }
    }
    fn re(&self) -> f64 {
        self.a
    }
    fn exp(&self) -> Self {
        let e = self.a.exp();
        self.chain(e, e)
    }
    fn sin(&self) -> Self {
        self.chain(self.a.sin(), self.a.cos())
    }
    fn cos(&self) -> Self {
        self.chain(self.a.cos(), -self.a.sin())
    }
    fn ln(&self) -> Self {
        self.chain(self.a.ln(), 1.0 / self.a)
    }
    fn sqrt(&self) -> Self {
        let s = self.a.sqrt();
        self.chain(s, 0.5 / s)
    }
    fn recip(&self) -> Self {
        self.chain(1.0 / self.a, -1.0 / (self.a * self.a))
    }
}

/// Monomial bookkeeping for `Taylor` at a given degree.
pub struct MonomialTable {
    pub exps: Vec<[u8; 4]>,
    /// `(i, j, k)` with `exps[i] + exps[j] = exps[k]`.
    pub products: Vec<(u16, u16, u16)>,
}

const MAX_TAYLOR_DEGREE: usize = 8;

pub fn monomial_table(degree: usize) -> &'static MonomialTable {
    static TABLES: [OnceLock<MonomialTable>; MAX_TAYLOR_DEGREE + 1] = [const { OnceLock::new() }; MAX_TAYLOR_DEGREE + 1];
    assert!(degree <= MAX_TAYLOR_DEGREE, "Taylor degree {degree} too large");
    TABLES[degree].get_or_init(|| {
        let mut exps = Vec::new();
        for total in 0..=degree {
            for a in (0..=total).rev() {
                for b in (0..=total - a).rev() {
                    for c in (0..=total - a - b).rev() {
                        let d = total - a - b - c;
                        exps.push([a as u8, b as u8, c as u8, d as u8]);
                    }
                }
            }
        }
        let index = |e: [u8; 4]| exps.iter().position(|x| *x == e);
        let mut products = Vec::new();
        for (i, ei) in exps.iter().enumerate() {
            for (j, ej) in exps.iter().enumerate() {
                let s = [ei[0] + ej[0], ei[1] + ej[1], ei[2] + ej[2], ei[3] + ej[3]];
                if s.iter().map(|x| *x as usize).sum::<usize>() <= degree {
                    products.push((i as u16, j as u16, index(s).unwrap() as u16));
                }
            }
        }
        MonomialTable { exps, products }
    })
}

/// Truncated Taylor series in `(x⁰,x¹,x²,x³)` about an implicit origin.
/// Coefficient `k` multiplies `Π (xᵢ)^{eᵢ}` with no factorials.
#[derive(Clone, Debug)]
pub struct Taylor<C> {
    pub degree: usize,
    pub c: Vec<C>,
}

impl<C: Num> Taylor<C> {
    pub fn constant(degree: usize, v: C) -> Self {
        let n = monomial_table(degree).exps.len();
        let mut c = vec![C::zero(); n];
        c[0] = v;
        Taylor { degree, c }
    }

    /// The coordinate `x^mu` shifted by `x0`.
    pub fn variable(degree: usize, mu: usize, x0: f64) -> Self {
        let mut t = Self::constant(degree, C::from_f64(x0));
        if degree >= 1 {
            let mut e = [0u8; 4];
            e[mu] = 1;
            let k = monomial_table(degree).exps.iter().position(|x| *x == e).unwrap();
            t.c[k] = C::one();
        }
        t
    }

    /// Build from a polynomial given as `(exponents, coefficient)` pairs.
    pub fn from_terms(degree: usize, terms: &[([u8; 4], C)]) -> Self {
        let table = monomial_table(degree);
        let mut t = Self::constant(degree, C::zero());
        for (e, v) in terms {
            if let Some(k) = table.exps.iter().position(|x| x == e) {
                t.c[k] = t.c[k].clone() + v.clone();
            }
        }
        t
    }

    pub fn coeff(&self, e: [u8; 4]) -> C {
        monomial_table(self.degree)
            .exps
            .iter()
            .position(|x| *x == e)
            .map(|k| self.c[k].clone())
            .unwrap_or_else(C::zero)
    }

    /// Partial derivative `∂^e` at the origin (coefficient times `e!`).
    pub fn derivative_at_origin(&self, e: [u8; 4]) -> C {
        let fact: f64 = e.iter().map(|k| (1..=*k as u32).product::<u32>() as f64).product();
        self.coeff(e).scale(fact)
    }

    /// Partial derivative as a series of degree `degree - 1`.
    pub fn partial(&self, mu: usize) -> Self {
        let table = monomial_table(self.degree);
        let out_deg = self.degree.saturating_sub(1);
        let out_table = monomial_table(out_deg);
        let mut out = Self::constant(out_deg, C::zero());
        for (k, e) in table.exps.iter().enumerate() {
            if e[mu] == 0 {
                continue;
            }
            let mut f = *e;
            f[mu] -= 1;
            if let Some(j) = out_table.exps.iter().position(|x| *x == f) {
                out.c[j] = self.c[k].scale(e[mu] as f64);
            }
        }
        out
    }

    pub fn truncate(&self, degree: usize) -> Self {
        let n = monomial_table(degree).exps.len();
        Taylor { degree, c: self.c[..n.min(self.c.len())].to_vec() }
    }

    /// Apply `f(a0 + h) = Σ f^{(k)}(a0) hᵏ/k!` given the derivative list.
    fn compose(&self, derivs: Vec<C>) -> Self {
        let mut h = self.clone();
        h.c[0] = C::zero();
        let mut out = Self::constant(self.degree, derivs[0].clone());
        let mut hk = Self::constant(self.degree, C::one());
        let mut fact = 1.0;
        for (k, d) in derivs.iter().enumerate().skip(1) {
            hk = hk * h.clone();
            fact *= k as f64;
            for (o, v) in out.c.iter_mut().zip(hk.c.iter()) {
                *o = o.clone() + v.clone() * d.scale(1.0 / fact);
            }
        }
        out
    }

    fn lead(&self) -> C {
        self.c[0].clone()
    }
}

impl<C: Num> Add for Taylor<C> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let (mut a, b) = if self.degree <= o.degree { (self, o) } else { (o, self) };
        for (x, y) in a.c.iter_mut().zip(b.c) {
            *x = x.clone() + y;
        }
        a
    }
}

impl<C: Num> Sub for Taylor<C> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl<C: Num> Neg for Taylor<C> {
    type Output = Self;
    fn neg(self) -> Self {
        Taylor { degree: self.degree, c: self.c.into_iter().map(|x| -x).collect() }
    }
}

impl<C: Num> Mul for Taylor<C> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let degree = self.degree.min(o.degree);
        let table = monomial_table(degree);
        let n = table.exps.len();
        let mut c = vec![C::zero(); n];
        for &(i, j, k) in &table.products {
            let (i, j, k) = (i as usize, j as usize, k as usize);
            c[k] = c[k].clone() + self.c[i].clone() * o.c[j].clone();
        }
        Taylor { degree, c }
    }
}

impl<C: Num> Div for Taylor<C> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl<C: Num> Num for Taylor<C> {
    fn from_f64(v: f64) -> Self {
        Taylor::constant(MAX_TAYLOR_DEGREE, C::from_f64(v))
    }

    fn re(&self) -> f64 {
        self.c[0].re()
    }

    fn scale(&self, s: f64) -> Self {
        Taylor { degree: self.degree, c: self.c.iter().map(|x| x.scale(s)).collect() }
    }

    fn exp(&self) -> Self {
        let e = self.lead().exp();
        self.compose(vec![e; self.degree + 1])
    }

    fn sin(&self) -> Self {
        let (s, c) = (self.lead().sin(), self.lead().cos());
        let cycle = [s.clone(), c.clone(), -s, -c];
        self.compose((0..=self.degree).map(|k| cycle[k % 4].clone()).collect())
    }

    fn cos(&self) -> Self {
        let (s, c) = (self.lead().sin(), self.lead().cos());
        let cycle = [c.clone(), -s.clone(), -c, s];
        self.compose((0..=self.degree).map(|k| cycle[k % 4].clone()).collect())
    }

    fn ln(&self) -> Self {
        let a = self.lead();
        let r = a.recip();
        let mut d = vec![a.ln()];
        let mut rk = C::one();
        let mut f = 1.0;
        for k in 1..=self.degree {
            rk = rk * r.clone();
            d.push(rk.scale(if k % 2 == 1 { f } else { -f }));
            f *= k as f64;
        }
        self.compose(d)
    }

    fn sqrt(&self) -> Self {
        let a = self.lead();
        let s = a.sqrt();
        let r = a.recip();
        let mut d = Vec::new();
        let mut coef = 1.0;
        let mut rk = C::one();
        for k in 0..=self.degree {
            d.push((s.clone() * rk.clone()).scale(coef));
            coef *= 0.5 - k as f64;
            rk = rk * r.clone();
        }
        self.compose(d)
    }

    fn recip(&self) -> Self {
        let r = self.lead().recip();
        let mut d = Vec::new();
        let mut rk = r.clone();
        let mut f = 1.0;
        for k in 0..=self.degree {
            d.push(rk.scale(if k % 2 == 0 { f } else { -f }));
            rk = rk * r.clone();
            f *= (k + 1) as f64;
        }
        self.compose(d)
    }
}

/// Centered five-point first derivative.
pub fn five_point(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

/// Centered three-point first derivative.
pub fn central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_derivatives() {
        let x = Dual::var(0.7);
        let y = (x * x).sin() / x.exp();
        let expect = (2.0 * 0.7 * (0.49f64).cos() - (0.49f64).sin()) / 0.7f64.exp();
        assert!((y.b - expect).abs() < 1e-14);
    }

    #[test]
    fn taylor_exp_matches_series() {
        let t: Taylor<f64> = Taylor::variable(4, 0, 0.3);
        let e = t.exp();
        for k in 0..=4u8 {
            let expect = 0.3f64.exp();
            let got = e.derivative_at_origin([k, 0, 0, 0]);
            assert!((got - expect).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn taylor_mixed_partial() {
        let x: Taylor<f64> = Taylor::variable(3, 0, 1.0);
        let y: Taylor<f64> = Taylor::variable(3, 1, 2.0);
        let f = (x.clone() * y.clone()).recip();
        // ∂x∂y (1/(xy)) = 1/(x²y²)
        assert!((f.derivative_at_origin([1, 1, 0, 0]) - 0.25).abs() < 1e-12);
        let g = (x * y).sqrt();
        // ∂x (xy)^{1/2} = y/(2 sqrt(xy))
        assert!((g.derivative_at_origin([1, 0, 0, 0]) - 2.0 / (2.0 * 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn taylor_log_and_cos() {
        let x: Taylor<f64> = Taylor::variable(4, 2, 1.5);
        let l = x.ln();
        assert!((l.derivative_at_origin([0, 0, 3, 0]) - 2.0 / 1.5f64.powi(3)).abs() < 1e-12);
        let c = x.cos();
        assert!((c.derivative_at_origin([0, 0, 2, 0]) + 1.5f64.cos()).abs() < 1e-12);
    }
}
