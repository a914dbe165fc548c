//! Independent numeric oracles: a hand-coded Lagrangian density, a
//! variational Euler-Lagrange operator, an Einstein tensor, nested covariant
//! derivatives and a numeric rank.
//!
//! Nothing here goes through the symbolic `Expr` machinery.

use super::{exps_of, Jet4, JetPoint};
use crate::ad::{monomial_table, Dual, Num, Taylor};
use crate::error::{Error, Result};
use crate::expr::symbol::{pair_rank, JetSymbol};
use crate::lagrangian::LagrangianSpec;
use nalgebra::DMatrix;

/// Field index: metric pair ranks `0..10`, then `φ` at 10.
pub const NFIELD: usize = 11;
pub const PHI_FIELD: usize = 10;
/// Jets `∂^J u` with `|J| ≤ 2`: `[]`, four first and ten second derivatives.
pub const NJET: usize = 15;

/// Position of a sorted multiset `J`, `|J| ≤ 2`, in the jet list.
pub fn jet_index(d: &[usize]) -> usize {
    match d.len() {
        0 => 0,
        1 => 1 + d[0],
        2 => 5 + pair_rank(d[0], d[1]),
        _ => panic!("jet order above 2"),
    }
}

pub fn jet_multiset(k: usize) -> Vec<usize> {
    match k {
        0 => vec![],
        1..=4 => vec![k - 1],
        _ => {
            let (a, b) = crate::expr::PAIRS[k - 5];
            vec![a, b]
        }
    }
}

/// Curvature data computed from second-order metric jets.
pub struct Curvature<T> {
    pub g: [[T; 4]; 4],
    pub ginv: [[T; 4]; 4],
    pub sqrtg: T,
    pub gamma: [[[T; 4]; 4]; 4],
    pub ricci: [[T; 4]; 4],
    pub scalar: T,
}

fn arr4<T: Num>() -> [[T; 4]; 4] {
    std::array::from_fn(|_| std::array::from_fn(|_| T::zero()))
}

fn det3<T: Num>(m: &[[T; 4]; 4], rows: [usize; 3], cols: [usize; 3]) -> T {
    let e = |i: usize, j: usize| m[rows[i]][cols[j]].clone();
    e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1)) - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
        + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0))
}

fn others(i: usize) -> [usize; 3] {
    let mut o = [0; 3];
    let mut k = 0;
    for j in 0..4 {
        if j != i {
            o[k] = j;
            k += 1;
        }
    }
    o
}

/// Determinant and inverse by cofactors.
pub fn adjugate_inverse<T: Num>(m: &[[T; 4]; 4]) -> (T, [[T; 4]; 4]) {
    let mut cof = arr4::<T>();
    for i in 0..4 {
        for j in 0..4 {
            let c = det3(m, others(i), others(j));
            cof[i][j] = if (i + j) % 2 == 0 { c } else { -c };
        }
    }
    let mut det = T::zero();
    for j in 0..4 {
        det = det + m[0][j].clone() * cof[0][j].clone();
    }
    let r = det.recip();
    let mut inv = arr4::<T>();
    for i in 0..4 {
        for j in 0..4 {
            inv[i][j] = cof[j][i].clone() * r.clone();
        }
    }
    (det, inv)
}

/// Curvature of the metric encoded in `u[0..10]`.
pub fn curvature<T: Num>(u: &[Vec<T>]) -> Curvature<T> {
    let gj = |a: usize, b: usize, d: &[usize]| {
        let mut d = d.to_vec();
        d.sort_unstable();
        u[pair_rank(a, b)][jet_index(&d)].clone()
    };
    let g: [[T; 4]; 4] = std::array::from_fn(|a| std::array::from_fn(|b| gj(a, b, &[])));
    let (det, ginv) = adjugate_inverse(&g);
    let sqrtg = (-det).sqrt();
    // dginv[c][a][b] = −g^{ae} ∂_c g_{ef} g^{fb}
    let mut dginv: [[[T; 4]; 4]; 4] = std::array::from_fn(|_| arr4());
    for c in 0..4 {
        for a in 0..4 {
            for b in a..4 {
                let mut s = T::zero();
                for e in 0..4 {
                    for f in 0..4 {
                        s = s + ginv[a][e].clone() * gj(e, f, &[c]) * ginv[f][b].clone();
                    }
                }
                dginv[c][a][b] = -s.clone();
                dginv[c][b][a] = -s;
            }
        }
    }
    // lowered Christoffel [mn, s] and its derivative
    let low = |m: usize, n: usize, s: usize| gj(n, s, &[m]) + gj(m, s, &[n]) - gj(m, n, &[s]);
    let dlow = |c: usize, m: usize, n: usize, s: usize| gj(n, s, &[m, c]) + gj(m, s, &[n, c]) - gj(m, n, &[s, c]);
    let mut gamma: [[[T; 4]; 4]; 4] = std::array::from_fn(|_| arr4());
    let mut dgamma: Vec<[[[T; 4]; 4]; 4]> = (0..4).map(|_| std::array::from_fn(|_| arr4())).collect();
    for m in 0..4 {
        for n in m..4 {
            let l: Vec<T> = (0..4).map(|s| low(m, n, s)).collect();
            for c in 0..4 {
                let dl: Vec<T> = (0..4).map(|s| dlow(c, m, n, s)).collect();
                for r in 0..4 {
                    let mut v = T::zero();
                    for s in 0..4 {
                        v = v + dginv[c][r][s].clone() * l[s].clone() + ginv[r][s].clone() * dl[s].clone();
                    }
                    let v = v.scale(0.5);
                    dgamma[c][r][m][n] = v.clone();
                    dgamma[c][r][n][m] = v;
                }
            }
            for r in 0..4 {
                let mut v = T::zero();
                for s in 0..4 {
                    v = v + ginv[r][s].clone() * l[s].clone();
                }
                let v = v.scale(0.5);
                gamma[r][m][n] = v.clone();
                gamma[r][n][m] = v;
            }
        }
    }
    // R^ρ_{σμν} = ∂_μΓ^ρ_{νσ} − ∂_νΓ^ρ_{μσ} + Γ^ρ_{μλ}Γ^λ_{νσ} − Γ^ρ_{νλ}Γ^λ_{μσ}, R_{σν} = R^ρ_{σρν}
    let mut ricci = arr4::<T>();
    for s in 0..4 {
        for n in s..4 {
            let mut v = T::zero();
            for r in 0..4 {
                v = v + dgamma[r][r][n][s].clone() - dgamma[n][r][r][s].clone();
                for l in 0..4 {
                    v = v + gamma[r][r][l].clone() * gamma[l][n][s].clone() - gamma[r][n][l].clone() * gamma[l][r][s].clone();
                }
            }
            ricci[s][n] = v.clone();
            ricci[n][s] = v;
        }
    }
    let mut scalar = T::zero();
    for a in 0..4 {
        for b in 0..4 {
            scalar = scalar + ginv[a][b].clone() * ricci[a][b].clone();
        }
    }
    Curvature { g, ginv, sqrtg, gamma, ricci, scalar }
}

/// `κ√|g|(R + X + G2 + G3□φ)` from raw jets.
pub fn oracle_lagrangian<T: Num>(u: &[Vec<T>], spec: &LagrangianSpec) -> T {
    let cv = curvature(u);
    let p = &u[PHI_FIELD];
    let phi = p[0].clone();
    let d1: Vec<T> = (0..4).map(|m| p[1 + m].clone()).collect();
    let mut x = T::zero();
    let mut boxp = T::zero();
    for m in 0..4 {
        for n in 0..4 {
            let gi = cv.ginv[m][n].clone();
            x = x + gi.clone() * d1[m].clone() * d1[n].clone();
            let mut hess = p[5 + pair_rank(m, n)].clone();
            for r in 0..4 {
                hess = hess - cv.gamma[r][m][n].clone() * d1[r].clone();
            }
            boxp = boxp + gi * hess;
        }
    }
    let x = x.scale(-0.5);
    let g2 = spec.g2.derivative(0, 0).eval(&phi, &x);
    let g3 = spec.g3.derivative(0, 0).eval(&phi, &x);
    let k = *spec.kappa.numer() as f64 / *spec.kappa.denom() as f64;
    (cv.sqrtg * (cv.scalar + x + g2 + g3 * boxp)).scale(k)
}

/// Jets `∂^J u` as Taylor series in `x − x0` truncated to `degree`.
fn jet_series(j: &Jet4, degree: usize) -> Vec<Vec<Taylor<f64>>> {
    (0..NFIELD)
        .map(|f| {
            let base = if f == PHI_FIELD { &j.phi } else { &j.g[f] };
            (0..NJET)
                .map(|k| {
                    let mut t = base.clone();
                    for mu in jet_multiset(k) {
                        t = t.partial(mu);
                    }
                    t.truncate(degree)
                })
                .collect()
        })
        .collect()
}

/// Evaluate a Taylor polynomial at offset `dx`.
pub fn taylor_at(t: &Taylor<f64>, dx: &[f64; 4]) -> f64 {
    let exps = &monomial_table(t.degree).exps;
    exps.iter().zip(&t.c).map(|(e, c)| c * (0..4).map(|i| dx[i].powi(e[i] as i32)).product::<f64>()).sum()
}

/// `∂L/∂u_J` along the section for every field and `|J| ≤ 2`, as degree-2
/// Taylor series, from Taylor series over duals.
pub fn jet_partials(spec: &LagrangianSpec, j: &Jet4) -> Vec<Vec<Taylor<f64>>> {
    let base = jet_series(j, 2);
    let lift = |t: &Taylor<f64>| Taylor { degree: t.degree, c: t.c.iter().map(|v| Dual::new(*v, 0.0)).collect::<Vec<_>>() };
    let lifted: Vec<Vec<Taylor<Dual>>> = base.iter().map(|row| row.iter().map(lift).collect()).collect();
    (0..NFIELD)
        .map(|f| {
            (0..NJET)
                .map(|k| {
                    let mut u = lifted.clone();
                    u[f][k].c[0].b = 1.0;
                    let l = oracle_lagrangian(&u, spec);
                    Taylor { degree: l.degree, c: l.c.iter().map(|v| v.b).collect::<Vec<f64>>() }
                })
                .collect()
        })
        .collect()
}

/// Euler-Lagrange expressions of the oracle density at `x0`:
/// `∂L/∂u − D_μ ∂L/∂u_μ + Σ_{μ≤ν} D_μD_ν ∂L/∂u_{μν}`.
/// Entries `0..10` are per metric pair coordinate, entry 10 is for `φ`.
pub fn euler_lagrange_analytic(spec: &LagrangianSpec, j: &Jet4) -> [f64; NFIELD] {
    let d = jet_partials(spec, j);
    let mut out = [0.0; NFIELD];
    for (f, o) in out.iter_mut().enumerate() {
        for k in 0..NJET {
            let m = jet_multiset(k);
            let sign = if m.len() == 1 { -1.0 } else { 1.0 };
            *o += sign * d[f][k].derivative_at_origin(exps_of(&m));
        }
    }
    out
}

/// Oracle momenta at `x0` in the partial chart: first momenta
/// `∂L/∂u_μ − Σ_ν D_ν(∂L/∂u_{μν})/n(μν)` as `[field][μ]`, second momenta
/// `∂L/∂u_{μν}` as `[field][μν]`.
pub fn momenta_analytic(spec: &LagrangianSpec, j: &Jet4) -> (Vec<[f64; 4]>, Vec<[f64; 10]>) {
    let d = jet_partials(spec, j);
    let mut first = vec![[0.0; 4]; NFIELD];
    let mut second = vec![[0.0; 10]; NFIELD];
    for f in 0..NFIELD {
        for k in 0..10 {
            second[f][k] = d[f][5 + k].c[0];
        }
        for mu in 0..4 {
            let mut v = d[f][1 + mu].c[0];
            for nu in 0..4 {
                let (a, b) = (mu.min(nu), mu.max(nu));
                let mut e = [0u8; 4];
                e[nu] = 1;
                let w = if a == b { 1.0 } else { 0.5 };
                v -= w * d[f][5 + pair_rank(a, b)].derivative_at_origin(e);
            }
            first[f][mu] = v;
        }
    }
    (first, second)
}

/// Same operator by finite differences: five-point in the jet coordinate,
/// second-order central differences in `x`.
pub fn euler_lagrange_fd(spec: &LagrangianSpec, j: &Jet4, h_jet: f64, h_x: f64) -> Result<[f64; NFIELD]> {
    if h_jet < 1e-8 || h_x < 1e-6 {
        return Err(Error::StepUnderflow(format!("h_jet = {h_jet:e}, h_x = {h_x:e}")));
    }
    let series = jet_series(j, 4);
    let jets_at = |dx: &[f64; 4]| -> Vec<Vec<f64>> { series.iter().map(|row| row.iter().map(|t| taylor_at(t, dx)).collect()).collect() };
    let dl = |f: usize, k: usize, dx: &[f64; 4]| {
        let u0 = jets_at(dx);
        crate::ad::five_point(
            |e| {
                let mut u = u0.clone();
                u[f][k] += e;
                oracle_lagrangian(&u, spec)
            },
            0.0,
            h_jet,
        )
    };
    let mut out = [0.0; NFIELD];
    for (f, o) in out.iter_mut().enumerate() {
        let mut acc = dl(f, 0, &[0.0; 4]);
        for k in 1..NJET {
            let m = jet_multiset(k);
            let v = super::config::stencil(&|y: &[f64; 4]| dl(f, k, y), [0.0; 4], &m, h_x);
            acc += if m.len() == 1 { -v } else { v };
        }
        *o = acc;
    }
    Ok(out)
}

/// `u[f][k]` at `x0` from a jet point.
pub fn raw_jets(jp: &JetPoint) -> Vec<Vec<f64>> {
    (0..NFIELD)
        .map(|f| {
            (0..NJET)
                .map(|k| {
                    let d: Vec<_> = jet_multiset(k).into_iter().map(crate::expr::lv).collect();
                    let s = if f == PHI_FIELD {
                        JetSymbol::phi(&d)
                    } else {
                        let (a, b) = crate::expr::PAIRS[f];
                        JetSymbol::metric(crate::expr::lv(a), crate::expr::lv(b), &d)
                    };
                    jp.get(&s).expect("chart coordinate")
                })
                .collect()
        })
        .collect()
}

/// `G^{ab} = g^{ac}g^{bd}(R_{cd} − ½g_{cd}R)` at a jet point.
pub fn einstein_upper(jp: &JetPoint) -> [[f64; 4]; 4] {
    let cv = curvature(&raw_jets(jp));
    let mut low = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            low[a][b] = cv.ricci[a][b] - 0.5 * cv.g[a][b] * cv.scalar;
        }
    }
    let mut up = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    up[a][b] += cv.ginv[a][c] * cv.ginv[b][d] * low[c][d];
                }
            }
        }
    }
    up
}

/// `∇_c∇_b∇_a φ` at `x0` for all index orderings, built by nesting covariant
/// derivatives of Taylor series.
pub fn nested_covariant3(j: &Jet4) -> [[[f64; 4]; 4]; 4] {
    let series: Vec<Vec<Taylor<f64>>> = jet_series(j, 4).into_iter().map(|r| r.into_iter().map(|t| t.truncate(2)).collect()).collect();
    let cv = curvature(&series);
    let grad: Vec<Taylor<f64>> = (0..4).map(|a| j.phi.partial(a).truncate(2)).collect();
    // T_{ab} = ∂_b φ_a − Γ^r_{ba} φ_r
    let t2: Vec<Vec<Taylor<f64>>> = (0..4)
        .map(|a| {
            (0..4)
                .map(|b| {
                    let mut v = grad[a].partial(b);
                    for r in 0..4 {
                        v = v - cv.gamma[r][b][a].clone() * grad[r].truncate(1);
                    }
                    v
                })
                .collect()
        })
        .collect();
    let mut out = [[[0.0; 4]; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                let mut v = t2[a][b].partial(c).c[0];
                for r in 0..4 {
                    v -= cv.gamma[r][c][a].c[0] * t2[r][b].c[0] + cv.gamma[r][c][b].c[0] * t2[a][r].c[0];
                }
                out[a][b][c] = v;
            }
        }
    }
    out
}

/// Numeric rank with threshold `rel·σ_max`, plus the singular values.
pub fn numeric_rank(m: &DMatrix<f64>, rel: f64) -> (usize, Vec<f64>) {
    let sv = m.clone().singular_values();
    let mut s: Vec<f64> = sv.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let max = s.first().copied().unwrap_or(0.0);
    let rank = s.iter().filter(|v| **v > rel * max).count();
    (rank, s)
}

/// Central-difference derivative of a covariant-chart value with respect to a
/// partial-chart coordinate, recomputing the forward map each time.
pub fn fd_chart_derivative(jp: &JetPoint, target: &JetSymbol, source: &JetSymbol, h: f64) -> Result<f64> {
    let id = source.coord_id().ok_or_else(|| Error::MissingSymbol(source.to_string()))?;
    let eval = |e: f64| -> Result<f64> {
        let mut v = jp.vals.clone();
        v[id] += e;
        let p = JetPoint::from_values(jp.x, v)?;
        p.get(target).ok_or_else(|| Error::MissingSymbol(target.to_string()))
    };
    Ok((eval(h)? - eval(-h)?) / (2.0 * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::lv;
    use crate::geometry::ricci_scalar;
    use crate::numeric::{evaluate, random_point, rng, JetScales};

    #[test]
    fn adjugate_matches_nalgebra() {
        let jp = random_point(1).unwrap();
        let g = jp.metric();
        let arr: [[f64; 4]; 4] = std::array::from_fn(|a| std::array::from_fn(|b| g[(a, b)]));
        let (det, inv) = adjugate_inverse(&arr);
        assert!((det - g.determinant()).abs() < 1e-13);
        for a in 0..4 {
            for b in 0..4 {
                assert!((inv[a][b] - jp.ginv[a][b]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ricci_scalar_agrees_with_symbolic() {
        for seed in 0..3 {
            let jp = random_point(seed).unwrap();
            let r = curvature(&raw_jets(&jp)).scalar;
            let s = evaluate(&ricci_scalar(), &jp, None).unwrap();
            assert!((r - s).abs() < 1e-11, "{r} vs {s}");
        }
    }

    #[test]
    fn nested_derivatives_match_chart() {
        let j = Jet4::random(&mut rng(11), &JetScales::default());
        let jp = JetPoint::from_jet4(&j).unwrap();
        let n = nested_covariant3(&j);
        // φ̃_{;abc} with a ≤ b ≤ c is ∇_c∇_b∇_a φ
        for (a, b, c) in [(0, 0, 0), (0, 1, 2), (1, 1, 3), (2, 3, 3)] {
            let s = JetSymbol::phi_cov(&[lv(a), lv(b), lv(c)]);
            assert!((jp.get(&s).unwrap() - n[a][b][c]).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_and_fd_euler_lagrange_agree() {
        let spec = LagrangianSpec::new("X^2", "phi*X").unwrap();
        let j = Jet4::random(&mut rng(5), &JetScales::default());
        let a = euler_lagrange_analytic(&spec, &j);
        let f = euler_lagrange_fd(&spec, &j, 1e-3, 2e-3).unwrap();
        for k in 0..NFIELD {
            assert!((a[k] - f[k]).abs() < 1e-4 * a[k].abs().max(1.0), "{k}: {} vs {}", a[k], f[k]);
        }
    }

    #[test]
    fn free_scalar_wave_equation() {
        // flat space, G2 = G3 = 0: E_φ = □φ
        let j = Jet4::from_derivatives(
            [0.0; 4],
            |p, d| if d.is_empty() { [-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0][p] } else { 0.0 },
            |d| match d {
                [0, 0] => 0.7,
                [1, 1] => 0.2,
                [2, 3] => 0.4,
                _ => 0.0,
            },
        );
        let spec = LagrangianSpec::new("0", "0").unwrap();
        let e = euler_lagrange_analytic(&spec, &j);
        assert!((e[PHI_FIELD] - (-0.7 + 0.2)).abs() < 1e-13);
    }
}
