//! Numeric evaluation: jet points, field configurations and oracles.

pub mod config;
pub mod oracle;
pub mod solution;

use crate::ad::Taylor;
use crate::chart::{cov2_in_partial, cov3_in_partial};
use crate::error::{Error, Result};
use crate::expr::calculus::fn_x_arg;
use crate::expr::symbol::{lv, multisets, pair_rank, JetSymbol, Labels, NCOORD, PAIRS};
use crate::expr::{Expr, Kind};
use crate::lagrangian::LagrangianSpec;
use nalgebra::{Matrix4, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

/// Exponent vector of a sorted derivative multiset.
pub fn exps_of(d: &[usize]) -> [u8; 4] {
    let mut e = [0u8; 4];
    for &i in d {
        e[i] += 1;
    }
    e
}

fn factorial(e: [u8; 4]) -> f64 {
    e.iter().map(|k| (1..=*k as u32).product::<u32>() as f64).product()
}

/// Fourth-order jet of the fields at `x0`, stored as Taylor polynomials in
/// `x − x0`.
#[derive(Clone, Debug)]
pub struct Jet4 {
    pub x0: [f64; 4],
    /// Indexed by ordered pair rank.
    pub g: Vec<Taylor<f64>>,
    pub phi: Taylor<f64>,
}

impl Jet4 {
    /// Build from derivative values `∂^J u(x0)` for every multiset `J`, `|J| ≤ 4`.
    pub fn from_derivatives(x0: [f64; 4], g: impl Fn(usize, &[usize]) -> f64, phi: impl Fn(&[usize]) -> f64) -> Self {
        let poly = |f: &dyn Fn(&[usize]) -> f64| {
            let mut terms = Vec::new();
            for k in 0..=4 {
                for m in multisets(k) {
                    let e = exps_of(m);
                    terms.push((e, f(m) / factorial(e)));
                }
            }
            Taylor::from_terms(4, &terms)
        };
        let g = (0..10).map(|p| poly(&|d: &[usize]| g(p, d))).collect();
        Jet4 { x0, g, phi: poly(&phi) }
    }

    pub fn metric_derivative(&self, a: usize, b: usize, d: &[usize]) -> f64 {
        self.g[pair_rank(a, b)].derivative_at_origin(exps_of(d))
    }

    pub fn phi_derivative(&self, d: &[usize]) -> f64 {
        self.phi.derivative_at_origin(exps_of(d))
    }

    /// Random jet with metric `η + 0.1·S` and O(0.1) derivatives.
    pub fn random(rng: &mut ChaCha8Rng, scales: &JetScales) -> Self {
        let mut gv: HashMap<(usize, Vec<usize>), f64> = HashMap::new();
        let mut pv: HashMap<Vec<usize>, f64> = HashMap::new();
        for (p, &(a, b)) in PAIRS.iter().enumerate() {
            for k in 0..=4 {
                for m in multisets(k) {
                    let r: f64 = rng.gen_range(-1.0..1.0);
                    let v = if k == 0 {
                        let eta = if a == b { if a == 0 { -1.0 } else { 1.0 } } else { 0.0 };
                        eta + scales.metric0 * r
                    } else {
                        scales.metric_d * r
                    };
                    gv.insert((p, m.clone()), v);
                }
            }
        }
        for k in 0..=4 {
            for m in multisets(k) {
                let r: f64 = rng.gen_range(-1.0..1.0);
                pv.insert(m.clone(), if k == 0 { scales.phi0 * r } else { scales.phi_d * r });
            }
        }
        let x0 = [0.0; 4];
        Jet4::from_derivatives(x0, |p, d| gv[&(p, d.to_vec())], |d| pv[&d.to_vec()])
    }
}

/// Magnitudes used for random jets.
#[derive(Clone, Debug)]
pub struct JetScales {
    pub metric0: f64,
    pub metric_d: f64,
    pub phi0: f64,
    pub phi_d: f64,
}

impl Default for JetScales {
    fn default() -> Self {
        JetScales { metric0: 0.1, metric_d: 0.1, phi0: 0.5, phi_d: 0.3 }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Numeric values of every chart coordinate at one point, plus the derived
/// inverse metric and `√(−det g)`.
#[derive(Clone, Debug)]
pub struct JetPoint {
    pub x: [f64; 4],
    pub vals: Vec<f64>,
    pub ginv: [[f64; 4]; 4],
    pub sqrtg: f64,
    /// Values of section-derivative symbols.
    pub mv: HashMap<JetSymbol, f64>,
}

/// Reject non-Lorentzian or degenerate metrics.
pub fn check_signature(g: &Matrix4<f64>) -> Result<()> {
    let det = g.determinant();
    if det.abs() < 1e-14 || !det.is_finite() {
        return Err(Error::DegenerateMetric(format!("det g = {det:e}")));
    }
    let eig = SymmetricEigen::new(*g);
    let neg = eig.eigenvalues.iter().filter(|v| **v < 0.0).count();
    if neg != 1 {
        return Err(Error::Signature(format!("{neg} negative eigenvalues")));
    }
    Ok(())
}

impl JetPoint {
    pub fn from_jet4(j: &Jet4) -> Result<Self> {
        let mut vals = vec![0.0; NCOORD];
        for (p, &(a, b)) in PAIRS.iter().enumerate() {
            let _ = p;
            for k in 0..=4 {
                for m in multisets(k) {
                    let labels: Labels = m.iter().map(|x| lv(*x)).collect();
                    let id = JetSymbol::metric(lv(a), lv(b), &labels).coord_id().unwrap();
                    vals[id] = j.metric_derivative(a, b, m);
                }
            }
        }
        for k in 0..=4 {
            for m in multisets(k) {
                let labels: Labels = m.iter().map(|x| lv(*x)).collect();
                vals[JetSymbol::phi(&labels).coord_id().unwrap()] = j.phi_derivative(m);
            }
        }
        Self::from_values(j.x0, vals)
    }

    /// Complete a value vector whose metric and partial scalar jets are set:
    /// derives `g⁻¹`, `√(−g)` and the covariant scalar jets.
    pub fn from_values(x: [f64; 4], mut vals: Vec<f64>) -> Result<Self> {
        let g = Matrix4::from_fn(|a, b| vals[JetSymbol::metric(lv(a), lv(b), &[]).coord_id().unwrap()]);
        check_signature(&g)?;
        let inv = g.try_inverse().ok_or_else(|| Error::DegenerateMetric("singular".into()))?;
        let mut ginv = [[0.0; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                ginv[a][b] = 0.5 * (inv[(a, b)] + inv[(b, a)]);
            }
        }
        let sqrtg = (-g.determinant()).sqrt();
        let mut jp = JetPoint { x, vals: vals.clone(), ginv, sqrtg, mv: HashMap::new() };
        {
            let mut ev = Evaluator::new(&jp, None);
            for m in multisets(2) {
                let id = JetSymbol::phi_cov(&[lv(m[0]), lv(m[1])]).coord_id().unwrap();
                vals[id] = ev.eval(&cov2_in_partial(m[0], m[1]))?;
            }
            for m in multisets(3) {
                let id = JetSymbol::phi_cov(&[lv(m[0]), lv(m[1]), lv(m[2])]).coord_id().unwrap();
                vals[id] = ev.eval(&cov3_in_partial(m[0], m[1], m[2]))?;
            }
        }
        jp.vals = vals;
        Ok(jp)
    }

    pub fn get(&self, s: &JetSymbol) -> Option<f64> {
        s.coord_id().map(|id| self.vals[id])
    }

    pub fn set(&mut self, s: &JetSymbol, v: f64) {
        let id = s.coord_id().expect("chart coordinate");
        self.vals[id] = v;
    }

    pub fn metric(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|a, b| self.vals[JetSymbol::metric(lv(a), lv(b), &[]).coord_id().unwrap()])
    }
}

/// Memoized numeric evaluation of an expression DAG.
pub struct Evaluator<'a> {
    jp: &'a JetPoint,
    spec: Option<&'a LagrangianSpec>,
    memo: HashMap<usize, (Expr, f64)>,
}

impl<'a> Evaluator<'a> {
    pub fn new(jp: &'a JetPoint, spec: Option<&'a LagrangianSpec>) -> Self {
        Evaluator { jp, spec, memo: HashMap::new() }
    }

    fn symbol(&self, s: &JetSymbol) -> Result<f64> {
        match s {
            JetSymbol::Coord(m) => m.value().map(|v| self.jp.x[v as usize]).ok_or_else(|| Error::MissingSymbol(s.to_string())),
            JetSymbol::InvMetric(p) => match (p[0].value(), p[1].value()) {
                (Some(a), Some(b)) => Ok(self.jp.ginv[a as usize][b as usize]),
                _ => Err(Error::MissingSymbol(s.to_string())),
            },
            JetSymbol::MetricDetSqrt => Ok(self.jp.sqrtg),
            JetSymbol::Mv { .. } => self.jp.mv.get(s).copied().ok_or_else(|| Error::MissingSymbol(s.to_string())),
            _ => self.jp.get(s).ok_or_else(|| Error::MissingSymbol(s.to_string())),
        }
    }

    pub fn eval(&mut self, e: &Expr) -> Result<f64> {
        if let Some((_, v)) = self.memo.get(&e.ptr()) {
            return Ok(*v);
        }
        let v = match e.kind() {
            Kind::Const(r) => *r.numer() as f64 / *r.denom() as f64,
            Kind::Sym(s) => self.symbol(s)?,
            Kind::Fn(n) => {
                let binding = match (&n.binding, self.spec) {
                    (Some(b), _) => b.clone(),
                    (None, Some(spec)) => spec.binding(n.f.name).clone(),
                    (None, None) => return Err(Error::MissingSymbol(n.f.to_string())),
                };
                let phi = self.jp.vals[JetSymbol::phi(&[]).coord_id().unwrap()];
                let x = self.eval(&fn_x_arg(n))?;
                binding.derivative(n.f.d_phi, n.f.d_x).eval_f64(phi, x)
            }
            Kind::Sum(v) => {
                let mut acc = 0.0;
                for t in v {
                    acc += self.eval(t)?;
                }
                acc
            }
            Kind::Prod(v) => {
                let mut acc = 1.0;
                for t in v {
                    acc *= self.eval(t)?;
                }
                acc
            }
            Kind::Pow(b, n) => self.eval(b)?.powi(*n),
        };
        self.memo.insert(e.ptr(), (e.clone(), v));
        Ok(v)
    }
}

/// One-shot evaluation.
pub fn evaluate(e: &Expr, jp: &JetPoint, spec: Option<&LagrangianSpec>) -> Result<f64> {
    Evaluator::new(jp, spec).eval(e)
}

/// `|a − b| ≤ tol·max(1, |a|, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

/// Random jet point with fixed seed.
pub fn random_point(seed: u64) -> Result<JetPoint> {
    let mut r = rng(seed);
    JetPoint::from_jet4(&Jet4::random(&mut r, &JetScales::default()))
}
