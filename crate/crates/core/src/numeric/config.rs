//! Closed-form field configurations and their jet prolongation.

use super::{check_signature, exps_of, Jet4, JetPoint};
use crate::ad::{Num, Taylor};
use crate::error::{Error, Result};
use crate::expr::symbol::{multisets, PAIRS};
use nalgebra::Matrix4;

#[derive(Clone, Debug, PartialEq)]
pub enum ScaleFactor {
    /// `a(t) = e^{Ht}`
    Exp { h: f64 },
    /// `a(t) = Σ cₖ tᵏ`
    Poly(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum MetricKind {
    Minkowski,
    /// Spatially flat FLRW, `diag(−1, a², a², a²)`.
    Flrw(ScaleFactor),
    /// Schwarzschild in coordinates `(t, r, θ, ϕ)`.
    Schwarzschild { mass: f64 },
    /// `η + ε h(x)` with fixed smooth `h`.
    PerturbedFlat { eps: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScalarKind {
    Zero,
    Constant(f64),
    /// `A sin(k·x)`
    Wave { amp: f64, k: [f64; 4] },
    /// `Σ cₖ tᵏ`
    TimePoly(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Prolongation {
    Analytic,
    FiniteDifference { h: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldConfiguration {
    pub metric: MetricKind,
    pub scalar: ScalarKind,
    pub mode: Prolongation,
}

fn poly<T: Num>(c: &[f64], t: &T) -> T {
    let mut acc = T::zero();
    for k in c.iter().rev() {
        acc = acc * t.clone() + T::from_f64(*k);
    }
    acc
}

const PERTURB: [([f64; 4], f64); 10] = [
    ([0.3, 0.1, -0.2, 0.4], 0.1),
    ([-0.2, 0.5, 0.1, 0.0], 0.7),
    ([0.1, -0.3, 0.4, 0.2], -0.4),
    ([0.4, 0.2, 0.0, -0.1], 1.1),
    ([0.0, 0.3, 0.3, 0.1], 0.3),
    ([0.2, -0.1, 0.5, 0.3], -0.8),
    ([-0.4, 0.0, 0.2, 0.5], 0.5),
    ([0.1, 0.4, -0.3, 0.2], 0.9),
    ([0.3, 0.3, 0.1, -0.4], -0.2),
    ([-0.1, 0.2, 0.4, 0.3], 0.6),
];

impl FieldConfiguration {
    pub fn new(metric: MetricKind, scalar: ScalarKind) -> Self {
        FieldConfiguration { metric, scalar, mode: Prolongation::Analytic }
    }

    pub fn minkowski() -> Self {
        Self::new(MetricKind::Minkowski, ScalarKind::Zero)
    }

    pub fn with_mode(mut self, mode: Prolongation) -> Self {
        self.mode = mode;
        self
    }

    pub fn metric_at<T: Num>(&self, x: &[T; 4]) -> [[T; 4]; 4] {
        let z = T::zero;
        let mut g: [[T; 4]; 4] = std::array::from_fn(|_| std::array::from_fn(|_| z()));
        match &self.metric {
            MetricKind::Minkowski => {
                g[0][0] = T::from_f64(-1.0);
                for i in 1..4 {
                    g[i][i] = T::one();
                }
            }
            MetricKind::Flrw(a) => {
                let a = match a {
                    ScaleFactor::Exp { h } => x[0].scale(*h).exp(),
                    ScaleFactor::Poly(c) => poly(c, &x[0]),
                };
                g[0][0] = T::from_f64(-1.0);
                for i in 1..4 {
                    g[i][i] = a.clone() * a.clone();
                }
            }
            MetricKind::Schwarzschild { mass } => {
                let r = x[1].clone();
                let f = T::one() - r.recip().scale(2.0 * mass);
                g[0][0] = -f.clone();
                g[1][1] = f.recip();
                g[2][2] = r.clone() * r.clone();
                let s = x[2].sin();
                g[3][3] = r.clone() * r * s.clone() * s;
            }
            MetricKind::PerturbedFlat { eps } => {
                for (p, &(a, b)) in PAIRS.iter().enumerate() {
                    let (k, c) = PERTURB[p];
                    let mut arg = T::from_f64(c);
                    for mu in 0..4 {
                        arg = arg + x[mu].scale(k[mu]);
                    }
                    let eta = if a == b { if a == 0 { -1.0 } else { 1.0 } } else { 0.0 };
                    let v = T::from_f64(eta) + arg.sin().scale(*eps);
                    g[a][b] = v.clone();
                    g[b][a] = v;
                }
            }
        }
        g
    }

    pub fn scalar_at<T: Num>(&self, x: &[T; 4]) -> T {
        match &self.scalar {
            ScalarKind::Zero => T::zero(),
            ScalarKind::Constant(c) => T::from_f64(*c),
            ScalarKind::Wave { amp, k } => {
                let mut arg = T::zero();
                for mu in 0..4 {
                    arg = arg + x[mu].scale(k[mu]);
                }
                arg.sin().scale(*amp)
            }
            ScalarKind::TimePoly(c) => poly(c, &x[0]),
        }
    }

    /// Fourth-order jets at `x`, analytic or by central differences.
    pub fn jet4(&self, x: [f64; 4], order: usize) -> Result<Jet4> {
        let g0 = self.metric_at(&x);
        check_signature(&Matrix4::from_fn(|a, b| g0[a][b]))?;
        let order = order.min(4);
        match self.mode {
            Prolongation::Analytic => {
                let xs: [Taylor<f64>; 4] = std::array::from_fn(|mu| Taylor::variable(4, mu, x[mu]));
                let g = self.metric_at(&xs);
                let phi = self.scalar_at(&xs);
                Ok(Jet4::from_derivatives(
                    x,
                    |p, d| if d.len() > order { 0.0 } else { g[PAIRS[p].0][PAIRS[p].1].derivative_at_origin(exps_of(d)) },
                    |d| if d.len() > order { 0.0 } else { phi.derivative_at_origin(exps_of(d)) },
                ))
            }
            Prolongation::FiniteDifference { h } => {
                if !(h > 0.0) || h < 1e-7 {
                    return Err(Error::StepUnderflow(format!("h = {h:e}")));
                }
                let gf = |p: usize, d: &[usize]| {
                    if d.len() > order {
                        return 0.0;
                    }
                    let (a, b) = PAIRS[p];
                    stencil(&|y: &[f64; 4]| self.metric_at(y)[a][b], x, d, h)
                };
                let pf = |d: &[usize]| if d.len() > order { 0.0 } else { stencil(&|y: &[f64; 4]| self.scalar_at(y), x, d, h) };
                Ok(Jet4::from_derivatives(x, gf, pf))
            }
        }
    }

    /// Jet point at `x` with jets through `order` (higher ones zero) and all
    /// momenta zero.
    pub fn prolong(&self, x: [f64; 4], order: usize) -> Result<JetPoint> {
        JetPoint::from_jet4(&self.jet4(x, order)?)
    }
}

/// Tensor-product central difference `∂^d f(x)`, accurate to O(h²).
pub fn stencil(f: &dyn Fn(&[f64; 4]) -> f64, x: [f64; 4], d: &[usize], h: f64) -> f64 {
    let e = exps_of(d);
    let mut weights: Vec<([f64; 4], f64)> = vec![([0.0; 4], 1.0)];
    for mu in 0..4 {
        let k = e[mu] as usize;
        if k == 0 {
            continue;
        }
        let one_d = central_weights(k);
        let mut next = Vec::new();
        for (off, w) in &weights {
            for (s, c) in &one_d {
                let mut o = *off;
                o[mu] += s * h;
                next.push((o, w * c / h.powi(k as i32)));
            }
        }
        weights = next;
    }
    weights
        .iter()
        .map(|(off, w)| {
            let y = std::array::from_fn(|i| x[i] + off[i]);
            w * f(&y)
        })
        .sum()
}

/// Offsets (in units of h) and weights of the second-order central stencil
/// for the k-th derivative.
fn central_weights(k: usize) -> Vec<(f64, f64)> {
    match k {
        1 => vec![(-1.0, -0.5), (1.0, 0.5)],
        2 => vec![(-1.0, 1.0), (0.0, -2.0), (1.0, 1.0)],
        3 => vec![(-2.0, -0.5), (-1.0, 1.0), (1.0, -1.0), (2.0, 0.5)],
        4 => vec![(-2.0, 1.0), (-1.0, -4.0), (0.0, 6.0), (1.0, -4.0), (2.0, 1.0)],
        _ => unreachable!("derivative order above 4"),
    }
}

/// All ordered multisets of size ≤ `k`.
pub fn multisets_upto(k: usize) -> Vec<Vec<usize>> {
    (0..=k).flat_map(|j| multisets(j).iter().cloned()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::symbol::lv;
    use crate::expr::JetSymbol;

    #[test]
    fn minkowski_jets_vanish() {
        let jp = FieldConfiguration::minkowski().prolong([0.1, 0.2, 0.3, 0.4], 3).unwrap();
        let s = JetSymbol::metric(lv(1), lv(1), &[lv(0)]);
        assert_eq!(jp.get(&s), Some(0.0));
        assert_eq!(jp.get(&JetSymbol::phi(&[lv(2)])), Some(0.0));
    }

    #[test]
    fn flrw_metric_derivative() {
        let h = 0.7;
        let t = 0.3;
        let c = FieldConfiguration::new(MetricKind::Flrw(ScaleFactor::Exp { h }), ScalarKind::Zero);
        let jp = c.prolong([t, 0.0, 0.0, 0.0], 3).unwrap();
        let v = jp.get(&JetSymbol::metric(lv(1), lv(1), &[lv(0)])).unwrap();
        assert!((v - 2.0 * h * (2.0 * h * t).exp()).abs() < 1e-12);
    }

    #[test]
    fn finite_difference_converges() {
        let c = FieldConfiguration::new(MetricKind::PerturbedFlat { eps: 0.1 }, ScalarKind::Wave { amp: 0.5, k: [0.3, 0.2, 0.1, 0.4] });
        let x = [0.2, -0.1, 0.3, 0.5];
        let exact = c.jet4(x, 3).unwrap();
        let err = |h: f64| {
            let fd = c.clone().with_mode(Prolongation::FiniteDifference { h }).jet4(x, 3).unwrap();
            let mut e: f64 = 0.0;
            for d in multisets_upto(3) {
                e = e.max((fd.phi_derivative(&d) - exact.phi_derivative(&d)).abs());
                e = e.max((fd.metric_derivative(0, 1, &d) - exact.metric_derivative(0, 1, &d)).abs());
            }
            e
        };
        let (e1, e2) = (err(2e-2), err(1e-2));
        assert!((e1 / e2).log2() >= 1.9, "rate {}", (e1 / e2).log2());
    }
}
