//! Restricted and extended Legendre maps, the rank of their differential and
//! the projectability test.

use crate::chart::{jacobian_block, to_covariant, to_partial, Block};
use crate::error::{Error, Result};
use crate::expr::calculus::{substitute_raw, Bindings};
use crate::expr::symbol::{lv, multisets, pair_rank, JetSymbol, NCOORD, P_BASE, PAIRS};
use crate::expr::{canonicalize, partial, total_derivative, Expr, Rational};
use crate::geometry::{metric_d, phi_cov, phi_d};
use crate::lagrangian::{build_lagrangian, phi2_velocity, LagrangianSpec};
use crate::numeric::oracle::numeric_rank;
use crate::numeric::{Evaluator, JetPoint};
use nalgebra::DMatrix;

/// Singular values below `RANK_TOL·σ_max` count as zero.
pub const RANK_TOL: f64 = 1e-8;

/// Momentum tables indexed by ordered pair rank and derivative rank.
#[derive(Clone, Debug)]
pub struct LegendreMap {
    /// `[pair][μν]`
    pub pg_second: Vec<Vec<Expr>>,
    /// `[μν]`
    pub pphi_second: Vec<Expr>,
    /// `[pair][μ]`
    pub pg_first: Vec<Vec<Expr>>,
    /// `[μ]`
    pub pphi_first: Vec<Expr>,
    pub p_extended: Option<Expr>,
}

fn inv_n(m: usize, n: usize) -> Rational {
    Rational::new(1, crate::expr::n_factor(m, n))
}

fn sorted(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

fn canon(e: Expr) -> Expr {
    canonicalize(&e).expect("momentum tables respect index discipline")
}

/// Covariant-chart canonical form; total derivatives of `X` bring in
/// partial scalar jets.
fn canon_cov(e: Expr) -> Result<Expr> {
    Ok(canon(to_covariant(&e)?))
}

/// `Σ_ν (1/n(μν)) D_ν T[sorted(μ,ν)]`.
fn divergence(table: &[Expr], mu: usize) -> Result<Expr> {
    let mut terms = Vec::new();
    for nu in 0..4 {
        let (a, b) = sorted(mu, nu);
        let t = &table[pair_rank(a, b)];
        if t.is_zero() {
            continue;
        }
        terms.push(total_derivative(t, lv(nu))?.scale(inv_n(mu, nu)));
    }
    Ok(Expr::add_all(terms))
}

fn restricted_from(l: &Expr) -> Result<LegendreMap> {
    let cov2: Vec<JetSymbol> = multisets(2).iter().map(|m| JetSymbol::phi_cov(&[lv(m[0]), lv(m[1])])).collect();
    let pphi_second: Vec<Expr> = cov2.iter().map(|s| partial(l, s).map(canon)).collect::<Result<_>>()?;
    let mut pg_second = Vec::new();
    for &(a, b) in &PAIRS {
        let row: Vec<Expr> = multisets(2)
            .iter()
            .map(|m| partial(l, &JetSymbol::metric(lv(a), lv(b), &[lv(m[0]), lv(m[1])])).map(canon))
            .collect::<Result<_>>()?;
        pg_second.push(row);
    }
    // chain-rule correction: Σ_{ρ≤σ} ∂L̂/∂φ̃_{;ρσ} · ∂φ̃_{;ρσ}/∂(source)
    let correction = |block: Block, source: &[usize]| -> Result<Expr> {
        let mut terms = Vec::new();
        for (k, m) in multisets(2).iter().enumerate() {
            if pphi_second[k].is_zero() {
                continue;
            }
            terms.push(pphi_second[k].clone() * jacobian_block(block, m, source)?);
        }
        Ok(Expr::add_all(terms))
    };
    let mut pg_first = Vec::new();
    for (p, &(a, b)) in PAIRS.iter().enumerate() {
        let mut row = Vec::new();
        for mu in 0..4 {
            let d = partial(l, &JetSymbol::metric(lv(a), lv(b), &[lv(mu)]))?;
            let e = d + correction(Block::Cov2Metric1, &[a, b, mu])? - divergence(&pg_second[p], mu)?;
            row.push(canon_cov(e)?);
        }
        pg_first.push(row);
    }
    let mut pphi_first = Vec::new();
    for mu in 0..4 {
        let d = partial(l, &JetSymbol::phi(&[lv(mu)]))?;
        let e = d + correction(Block::Cov2Phi1, &[mu])? - divergence(&pphi_second, mu)?;
        pphi_first.push(canon_cov(e)?);
    }
    Ok(LegendreMap { pg_second, pphi_second, pg_first, pphi_first, p_extended: None })
}

/// The restricted Legendre map `FL`.
pub fn restricted_legendre(spec: &LagrangianSpec) -> Result<LegendreMap> {
    restricted_from(&build_lagrangian(spec))
}

/// The extended Legendre map, adding `p = L̂ − Σ p·v`.
pub fn extended_legendre(spec: &LagrangianSpec) -> Result<LegendreMap> {
    let l = build_lagrangian(spec);
    let mut m = restricted_from(&l)?;
    let mut pairing = Vec::new();
    for (p, &(a, b)) in PAIRS.iter().enumerate() {
        for (k, mn) in multisets(2).iter().enumerate() {
            pairing.push(metric_d(a, b, mn) * m.pg_second[p][k].clone());
        }
        for mu in 0..4 {
            pairing.push(metric_d(a, b, &[mu]) * m.pg_first[p][mu].clone());
        }
    }
    for (k, mn) in multisets(2).iter().enumerate() {
        pairing.push(phi2_velocity(mn[0], mn[1]) * m.pphi_second[k].clone());
    }
    for mu in 0..4 {
        pairing.push(phi_d(&[mu]) * m.pphi_first[mu].clone());
    }
    m.p_extended = Some(l - Expr::add_all(pairing));
    Ok(m)
}

impl LegendreMap {
    /// `(momentum coordinate, value)` in coordinate-id order; `p` last when
    /// present.
    pub fn entries(&self) -> Vec<(JetSymbol, Expr)> {
        let mut out = Vec::new();
        for (p, &(a, b)) in PAIRS.iter().enumerate() {
            for mu in 0..4 {
                out.push((JetSymbol::pg_first(lv(a), lv(b), lv(mu)), self.pg_first[p][mu].clone()));
            }
        }
        for (p, &(a, b)) in PAIRS.iter().enumerate() {
            for (k, m) in multisets(2).iter().enumerate() {
                out.push((JetSymbol::pg_second(lv(a), lv(b), lv(m[0]), lv(m[1])), self.pg_second[p][k].clone()));
            }
        }
        for mu in 0..4 {
            out.push((JetSymbol::pphi_first(lv(mu)), self.pphi_first[mu].clone()));
        }
        for (k, m) in multisets(2).iter().enumerate() {
            out.push((JetSymbol::pphi_second(lv(m[0]), lv(m[1])), self.pphi_second[k].clone()));
        }
        if let Some(p) = &self.p_extended {
            out.push((JetSymbol::P, p.clone()));
        }
        out
    }

    /// Bindings replacing every momentum coordinate by its Legendre image.
    pub fn bindings(&self) -> Bindings {
        let mut b = Bindings::default();
        for (s, e) in self.entries() {
            b.symbols.insert(s, e);
        }
        b
    }

    /// Drop the extended component.
    pub fn restrict(&self) -> LegendreMap {
        LegendreMap { p_extended: None, ..self.clone() }
    }

    /// Set every momentum of a jet point to its Legendre image.
    pub fn apply(&self, jp: &mut JetPoint, spec: &LagrangianSpec) -> Result<()> {
        let vals: Vec<(JetSymbol, f64)> = {
            let mut ev = Evaluator::new(jp, Some(spec));
            self.entries().into_iter().map(|(s, e)| ev.eval(&e).map(|v| (s, v))).collect::<Result<_>>()?
        };
        for (s, v) in vals {
            jp.set(&s, v);
        }
        Ok(())
    }
}

/// Columns of the differential: the covariant chart of `J³π`.
pub fn jet3_columns() -> Vec<JetSymbol> {
    (0..P_BASE)
        .filter_map(JetSymbol::from_coord_id)
        .filter(|s| match s {
            JetSymbol::Metric { d, .. } => d.len() <= 3,
            JetSymbol::ScalarPartial(d) => d.len() <= 1,
            _ => true,
        })
        .collect()
}

/// `J¹π` coordinates, which the Legendre map carries along unchanged.
pub fn jet1_coordinates() -> Vec<JetSymbol> {
    jet3_columns().into_iter().filter(|s| s.order() <= 1 && !matches!(s, JetSymbol::ScalarCovariant(_))).collect()
}

/// Sparse symbolic differential of a Legendre map.
#[derive(Clone, Debug)]
pub struct Differential {
    pub columns: Vec<JetSymbol>,
    pub base_rows: Vec<JetSymbol>,
    pub momenta: Vec<JetSymbol>,
    /// `(momentum row, column, ∂row/∂column)`, structurally nonzero only.
    pub entries: Vec<(usize, usize, Expr)>,
}

impl Differential {
    pub fn new(map: &LegendreMap) -> Result<Differential> {
        let columns = jet3_columns();
        let base_rows = jet1_coordinates();
        let mut momenta = Vec::new();
        let mut entries = Vec::new();
        for (r, (s, e)) in map.entries().into_iter().enumerate() {
            momenta.push(s);
            if e.contains_symbol(|x| matches!(x, JetSymbol::ScalarPartial(d) if d.len() >= 2)) {
                return Err(Error::Unsupported("momentum table contains partial scalar jets of order ≥ 2".into()));
            }
            for (c, col) in columns.iter().enumerate() {
                if !e.deps().contains(col.coord_id().unwrap()) {
                    continue;
                }
                let d = partial(&e, col)?;
                if !d.is_zero() {
                    entries.push((r, c, d));
                }
            }
        }
        Ok(Differential { columns, base_rows, momenta, entries })
    }

    /// Dense numeric matrix: identity rows for `J¹π`, then momentum rows.
    pub fn evaluate(&self, jp: &JetPoint, spec: &LagrangianSpec) -> Result<DMatrix<f64>> {
        let nb = self.base_rows.len();
        let mut m = DMatrix::zeros(nb + self.momenta.len(), self.columns.len());
        for (i, s) in self.base_rows.iter().enumerate() {
            let c = self.columns.iter().position(|x| x == s).expect("base coordinate is a column");
            m[(i, c)] = 1.0;
        }
        let mut ev = Evaluator::new(jp, Some(spec));
        for (r, c, e) in &self.entries {
            m[(nb + r, *c)] = ev.eval(e)?;
        }
        Ok(m)
    }

    /// Largest entry among the listed kernel columns.
    pub fn kernel_max(&self, jp: &JetPoint, spec: &LagrangianSpec) -> Result<f64> {
        let mut ev = Evaluator::new(jp, Some(spec));
        let mut worst: f64 = 0.0;
        for (_, c, e) in &self.entries {
            if is_gauge_direction(&self.columns[*c]) {
                worst = worst.max(ev.eval(e)?.abs());
            }
        }
        Ok(worst)
    }
}

/// `∂/∂g_{αβ,μν}`, `∂/∂g_{αβ,μνλ}` and `∂/∂φ_{;μνλ}`.
pub fn is_gauge_direction(s: &JetSymbol) -> bool {
    match s {
        JetSymbol::Metric { d, .. } => d.len() >= 2,
        JetSymbol::ScalarCovariant(d) => d.len() == 3,
        _ => false,
    }
}

/// Numeric rank of the Legendre differential at `jp`.
pub fn legendre_rank_numeric(spec: &LagrangianSpec, jp: &JetPoint) -> Result<usize> {
    let d = Differential::new(&restricted_legendre(spec)?)?;
    Ok(numeric_rank(&d.evaluate(jp, spec)?, RANK_TOL).0)
}

/// Codimension of the graph of `FL` inside `W_r`, from the numeric rank of
/// the graph embedding.
pub fn graph_codimension(d: &Differential, jp: &JetPoint, spec: &LagrangianSpec) -> Result<usize> {
    let fl = d.evaluate(jp, spec)?;
    let nb = d.base_rows.len();
    let ncol = d.columns.len();
    let mut g = DMatrix::zeros(ncol + d.momenta.len(), ncol);
    for i in 0..ncol {
        g[(i, i)] = 1.0;
    }
    for r in 0..d.momenta.len() {
        for c in 0..ncol {
            g[(ncol + r, c)] = fl[(nb + r, c)];
        }
    }
    let dim_wr = ncol + d.momenta.len();
    Ok(dim_wr - numeric_rank(&g, RANK_TOL).0)
}

/// Chart dimension of `W_r` without the extended momentum.
pub fn wr_dimension() -> usize {
    jet3_columns().len() + (NCOORD - P_BASE - 1)
}

/// One projectability condition `2∂L_β^{hi}/∂y^α_a − ∂L_α^{ai}/∂y^β_h − ∂L_α^{ah}/∂y^β_i`.
#[derive(Clone, Debug)]
pub struct ProjectabilityResidual {
    pub alpha: usize,
    pub beta: usize,
    pub a: usize,
    pub h: usize,
    pub i: usize,
    pub expr: Expr,
}

#[derive(Clone, Debug)]
pub struct AffineDecomposition {
    pub l0: Expr,
    /// `[pair][μν]`, coefficient of the ordered coordinate `g_{αβ,μν}`.
    pub lg: Vec<Vec<Expr>>,
    /// `[μν]`, coefficient of the ordered coordinate `φ_{,μν}`.
    pub lphi: Vec<Expr>,
}

#[derive(Clone, Debug)]
pub struct ProjectabilityReport {
    pub projects: bool,
    /// Sum of squared nonvanishing projectability residuals; zero when projectable.
    pub obstruction: Expr,
    pub residuals: Vec<ProjectabilityResidual>,
    pub affine: AffineDecomposition,
    /// Structural `∂G3/∂X ≡ 0` from the DSL.
    pub g3_x_free: bool,
}

/// Field `f`: metric pair ranks `0..10`, `φ` at 10.
fn first_jet(f: usize, a: usize) -> JetSymbol {
    if f == 10 {
        JetSymbol::phi(&[lv(a)])
    } else {
        let (x, y) = PAIRS[f];
        JetSymbol::metric(lv(x), lv(y), &[lv(a)])
    }
}

fn second_jet(f: usize, m: usize, n: usize) -> JetSymbol {
    let (m, n) = sorted(m, n);
    if f == 10 {
        JetSymbol::phi(&[lv(m), lv(n)])
    } else {
        let (x, y) = PAIRS[f];
        JetSymbol::metric(lv(x), lv(y), &[lv(m), lv(n)])
    }
}

/// Affine decomposition of `L` in the partial chart over `J¹π`.
pub fn affine_decomposition(spec: &LagrangianSpec) -> Result<AffineDecomposition> {
    let l = to_partial(&build_lagrangian(spec));
    let seconds: Vec<JetSymbol> = (0..11).flat_map(|f| multisets(2).iter().map(move |m| second_jet(f, m[0], m[1]))).collect();
    let mut coeffs = Vec::new();
    for s in &seconds {
        let c = canon(partial(&l, s)?);
        for t in &seconds {
            if c.deps().contains(t.coord_id().unwrap()) && !canon(partial(&c, t)?).is_zero() {
                return Err(Error::NonAffine(format!("coefficient of {s} depends on {t}")));
            }
        }
        coeffs.push(c);
    }
    if l.contains_symbol(|s| s.order() >= 3) {
        return Err(Error::NonAffine("Lagrangian depends on third-order jets".into()));
    }
    let mut zero = Bindings::default();
    for s in &seconds {
        zero.symbols.insert(s.clone(), Expr::zero());
    }
    let l0 = substitute_raw(&l, &zero);
    let lg = (0..10).map(|p| coeffs[p * 10..p * 10 + 10].to_vec()).collect();
    let lphi = coeffs[100..110].to_vec();
    Ok(AffineDecomposition { l0, lg, lphi })
}

impl AffineDecomposition {
    /// Symmetric full-sum coefficient `L_f^{mn}` with `L = Σ_{m,n} L^{mn} y_{mn} + L0`.
    fn sym_coeff(&self, f: usize, m: usize, n: usize) -> Expr {
        let (a, b) = sorted(m, n);
        let c = if f == 10 { &self.lphi[pair_rank(a, b)] } else { &self.lg[f][pair_rank(a, b)] };
        c.scale(inv_n(a, b))
    }
}

/// Projectability of the Poincaré-Cartan form to `J¹π`.
pub fn projectability(spec: &LagrangianSpec) -> Result<ProjectabilityReport> {
    let affine = affine_decomposition(spec)?;
    let mut residuals = Vec::new();
    let d = |f: usize, m: usize, n: usize, wrt: &JetSymbol| -> Result<Expr> { partial(&affine.sym_coeff(f, m, n), wrt) };
    for alpha in 0..11 {
        for beta in 0..11 {
            for a in 0..4 {
                for h in 0..4 {
                    for i in h..4 {
                        let e = d(beta, h, i, &first_jet(alpha, a))?.scale(Rational::from_integer(2))
                            - d(alpha, a, i, &first_jet(beta, h))?
                            - d(alpha, a, h, &first_jet(beta, i))?;
                        if e.is_zero() {
                            continue;
                        }
                        let e = canon(e);
                        if !e.is_zero() {
                            residuals.push(ProjectabilityResidual { alpha, beta, a, h, i, expr: e });
                        }
                    }
                }
            }
        }
    }
    let obstruction = Expr::add_all(residuals.iter().map(|r| r.expr.clone() * r.expr.clone()).collect::<Vec<_>>());
    Ok(ProjectabilityReport { projects: residuals.is_empty(), obstruction, residuals, affine, g3_x_free: spec.g3_is_x_free() })
}

impl ProjectabilityReport {
    /// `√(Σ r²)` at a point.
    pub fn obstruction_norm(&self, jp: &JetPoint, spec: &LagrangianSpec) -> Result<f64> {
        let mut ev = Evaluator::new(jp, Some(spec));
        Ok(ev.eval(&self.obstruction)?.max(0.0).sqrt())
    }
}

/// `p_φ^{,μ}` in closed form: `−√g g^{μν}[φ_ν(1 + G2_X + G3_φ + □φ G3_X) − G3_X φ^β φ_{;βν}]`,
/// times `κ`.
pub fn pphi_first_closed(spec: &LagrangianSpec, mu: usize) -> Expr {
    use crate::expr::FnName::{G2, G3};
    use crate::geometry::{box_phi, inv_metric, sqrt_g};
    let g3x = spec.func(G3, 0, 1);
    let bracket = Expr::add_all([Expr::one(), spec.func(G2, 0, 1), spec.func(G3, 1, 0), box_phi() * g3x.clone()]);
    let mut terms = Vec::new();
    for nu in 0..4 {
        let mut hess = Vec::new();
        for a in 0..4 {
            for b in 0..4 {
                let (x, y) = sorted(a, nu);
                hess.push(inv_metric(a, b) * phi_d(&[b]) * phi_cov(&[x, y]));
            }
        }
        terms.push(inv_metric(mu, nu) * (phi_d(&[nu]) * bracket.clone() - g3x.clone() * Expr::add_all(hess)));
    }
    -(spec.kappa_expr() * sqrt_g() * Expr::add_all(terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::is_zero_structural;
    use crate::geometry::{inv_metric, sqrt_g};
    use crate::numeric::{evaluate, random_point};

    #[test]
    fn second_momenta_closed_forms() {
        let spec = LagrangianSpec::new("X", "phi*X").unwrap();
        let m = restricted_legendre(&spec).unwrap();
        for (k, mn) in multisets(2).iter().enumerate() {
            let n = Rational::from_integer(crate::expr::n_factor(mn[0], mn[1]));
            let want = (spec.kappa_expr() * sqrt_g() * inv_metric(mn[0], mn[1]) * spec.func(crate::expr::FnName::G3, 0, 0)).scale(n);
            assert!(is_zero_structural(&(m.pphi_second[k].clone() - want)).unwrap());
        }
        for row in m.pg_second.iter().chain([&m.pphi_second]) {
            for e in row {
                assert!(!e.contains_momentum());
                assert!(!e.contains_symbol(|s| s.order() >= 3));
            }
        }
    }

    #[test]
    fn free_scalar_first_momentum() {
        let spec = LagrangianSpec::new("0", "0").unwrap();
        let m = restricted_legendre(&spec).unwrap();
        let jp = random_point(4).unwrap();
        for mu in 0..4 {
            let v = evaluate(&m.pphi_first[mu], &jp, Some(&spec)).unwrap();
            let want: f64 = (0..4).map(|n| -jp.sqrtg * jp.ginv[mu][n] * jp.get(&JetSymbol::phi(&[lv(n)])).unwrap()).sum();
            assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn projectability_decisions() {
        for (g3, want) in [("phi", true), ("phi^2 + 3", true), ("X", false)] {
            let spec = LagrangianSpec::new("0", g3).unwrap();
            let r = projectability(&spec).unwrap();
            assert_eq!(r.projects, want, "{g3}");
            assert_eq!(r.projects, r.g3_x_free);
        }
    }

    #[test]
    fn extended_restricts_to_restricted() {
        let spec = LagrangianSpec::new("X^2", "phi").unwrap();
        let e = extended_legendre(&spec).unwrap();
        let r = restricted_legendre(&spec).unwrap();
        for ((s1, a), (s2, b)) in e.restrict().entries().iter().zip(r.entries().iter()) {
            assert_eq!(s1, s2);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn momenta_match_variational_oracle() {
        use crate::numeric::oracle::{momenta_analytic, PHI_FIELD};
        use crate::numeric::{rng, Jet4, JetScales};
        for (g2, g3, seed) in [("X^2", "phi*X", 1), ("0", "phi", 2), ("phi*X", "X", 3)] {
            let spec = LagrangianSpec::new(g2, g3).unwrap();
            let m = restricted_legendre(&spec).unwrap();
            let j = Jet4::random(&mut rng(seed), &JetScales::default());
            let jp = JetPoint::from_jet4(&j).unwrap();
            let (first, second) = momenta_analytic(&spec, &j);
            let mut ev = Evaluator::new(&jp, Some(&spec));
            for p in 0..10 {
                for mu in 0..4 {
                    let v = ev.eval(&m.pg_first[p][mu]).unwrap();
                    assert!((v - first[p][mu]).abs() < 1e-10, "pg1 {p} {mu}: {v} vs {}", first[p][mu]);
                }
                for k in 0..10 {
                    assert!((ev.eval(&m.pg_second[p][k]).unwrap() - second[p][k]).abs() < 1e-10);
                }
            }
            for mu in 0..4 {
                let v = ev.eval(&m.pphi_first[mu]).unwrap();
                assert!((v - first[PHI_FIELD][mu]).abs() < 1e-10, "pphi1 {mu}: {v} vs {}", first[PHI_FIELD][mu]);
                let c = ev.eval(&pphi_first_closed(&spec, mu)).unwrap();
                assert!((v - c).abs() < 1e-10, "closed form {mu}: {v} vs {c}");
            }
            for k in 0..10 {
                assert!((ev.eval(&m.pphi_second[k]).unwrap() - second[PHI_FIELD][k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rank_and_kernel() {
        let spec = LagrangianSpec::new("X^2", "phi").unwrap();
        let d = Differential::new(&restricted_legendre(&spec).unwrap()).unwrap();
        let jp = random_point(7).unwrap();
        let (rank, _) = numeric_rank(&d.evaluate(&jp, &spec).unwrap(), RANK_TOL);
        assert_eq!(rank, 59);
        assert!(d.kernel_max(&jp, &spec).unwrap() < 1e-12);
        assert_eq!(graph_codimension(&d, &jp, &spec).unwrap(), 154);
        assert_eq!(wr_dimension(), 543);
        let spec = LagrangianSpec::new("0", "X").unwrap();
        let d = Differential::new(&restricted_legendre(&spec).unwrap()).unwrap();
        let (rank, _) = numeric_rank(&d.evaluate(&jp, &spec).unwrap(), RANK_TOL);
        assert!(rank >= 59, "{rank}");
        assert!(d.kernel_max(&jp, &spec).unwrap() < 1e-12);
    }

    #[test]
    fn l0_matches_closed_form() {
        use crate::numeric::oracle::{curvature, raw_jets};
        let spec = LagrangianSpec::new("X^2", "phi^2").unwrap();
        let aff = affine_decomposition(&spec).unwrap();
        let jp = random_point(9).unwrap();
        let cv = curvature(&raw_jets(&jp));
        let (gi, gm) = (&cv.ginv, &cv.gamma);
        let g1 = |a: usize, b: usize, c: usize| jp.get(&JetSymbol::metric(lv(a), lv(b), &[lv(c)])).unwrap();
        let phi1: Vec<f64> = (0..4).map(|m| jp.get(&JetSymbol::phi(&[lv(m)])).unwrap()).collect();
        let mut geo = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                let mut inner = 0.0;
                for c in 0..4 {
                    for d in 0..4 {
                        for m in 0..4 {
                            inner += gi[c][d] * (g1(d, m, b) * gm[m][a][c] - g1(d, m, c) * gm[m][a][b]);
                        }
                        inner += gm[d][a][b] * gm[c][c][d] - gm[d][a][c] * gm[c][b][d];
                    }
                }
                geo += gi[a][b] * inner;
            }
        }
        let x: f64 = (0..4).flat_map(|m| (0..4).map(move |n| (m, n))).map(|(m, n)| -0.5 * gi[m][n] * phi1[m] * phi1[n]).sum();
        let phi0 = jp.get(&JetSymbol::phi(&[])).unwrap();
        let mut gterm = 0.0;
        for g in 0..4 {
            for m in 0..4 {
                for n in 0..4 {
                    gterm += phi1[g] * gm[g][n][m] * gi[m][n];
                }
            }
        }
        let want = jp.sqrtg * (geo + x + x * x - gterm * phi0 * phi0);
        let got = evaluate(&aff.l0, &jp, Some(&spec)).unwrap();
        assert!((got - want).abs() < 1e-11, "{got} vs {want}");
        // closed form L_g^{αβ,μν} = n(αβ)/2 √g (g^{αμ}g^{βν} + g^{αν}g^{βμ} − 2g^{αβ}g^{μν}), per unordered (μν)
        for (p, &(a, b)) in PAIRS.iter().enumerate() {
            for (k, mn) in multisets(2).iter().enumerate() {
                let (m, n) = (mn[0], mn[1]);
                let disp = crate::expr::n_factor(a, b) as f64 / 2.0 * jp.sqrtg * (gi[a][m] * gi[b][n] + gi[a][n] * gi[b][m] - 2.0 * gi[a][b] * gi[m][n]);
                let got = evaluate(&aff.lg[p][k], &jp, Some(&spec)).unwrap() / crate::expr::n_factor(m, n) as f64;
                assert!((got - disp).abs() < 1e-11, "{a}{b},{m}{n}: {got} vs {disp}");
            }
        }
    }
}
