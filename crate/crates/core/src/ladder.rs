//! The constraint algorithm on `W_r`: contraction equations, the four
//! constraint stages, the cubic Euler-Lagrange expressions and the field
//! equations for sections.

use crate::chart::{jacobian_block, to_partial, Block};
use crate::error::Result;
use crate::expr::calculus::{substitute_raw, total_derivative_many, Bindings};
use crate::expr::symbol::{lv, multisets, pair_rank, JetSymbol, PAIRS};
use crate::expr::{canonicalize, n_factor, partial, Expr, FnName, Rational};
use crate::geometry::{box_phi, christoffel, inv_metric, kinetic_x, metric_d, phi_cov, phi_d, ricci_scalar, ricci_tensor, sqrt_g};
use crate::lagrangian::{build_lagrangian, pg_first, pg_second, pphi_first, pphi_second, LagrangianSpec};
use crate::legendre::{restricted_legendre, LegendreMap};
use std::fmt;

/// A labelled expression that must vanish.
#[derive(Clone, Debug)]
pub struct Equation {
    pub family: &'static str,
    pub label: String,
    pub expr: Expr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StageName {
    Wc,
    WL,
    W1,
    Wf,
}

impl fmt::Display for StageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StageName::Wc => "Wc",
            StageName::WL => "WL",
            StageName::W1 => "W1",
            StageName::Wf => "Wf",
        })
    }
}

#[derive(Clone, Debug)]
pub struct ConstraintStage {
    pub name: StageName,
    pub constraints: Vec<Equation>,
    /// Multivector components fixed at this stage, as `(F[coord]_τ, value)`.
    pub determined: Vec<(JetSymbol, Expr)>,
    /// Whether the constraints are stored canonicalized or as shared DAGs.
    pub canonical: bool,
    pub notes: Vec<String>,
}

fn rat(p: i64, q: i64) -> Rational {
    Rational::new(p, q)
}

fn canon(e: &Expr) -> Expr {
    canonicalize(e).expect("ladder expressions respect index discipline")
}

fn mv(coord: JetSymbol, dir: usize) -> Expr {
    Expr::sym(JetSymbol::mv(coord, lv(dir)))
}

fn sorted(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

fn g1_sym(a: usize, b: usize, m: usize) -> JetSymbol {
    JetSymbol::metric(lv(a), lv(b), &[lv(m)])
}

fn g2_sym(a: usize, b: usize, m: usize, n: usize) -> JetSymbol {
    JetSymbol::metric(lv(a), lv(b), &[lv(m), lv(n)])
}

fn cov2_sym(m: usize, n: usize) -> JetSymbol {
    JetSymbol::phi_cov(&[lv(m), lv(n)])
}

/// `Σ_{ρ≤σ} p_φ^{,ρσ} ∂φ̃_{;ρσ}/∂(source)`, with `p` either the momentum
/// coordinates or given values.
fn chain_term(pphi2: &[Expr], block: Block, source: &[usize]) -> Result<Expr> {
    let mut terms = Vec::new();
    for (k, m) in multisets(2).iter().enumerate() {
        if pphi2[k].is_zero() {
            continue;
        }
        terms.push(pphi2[k].clone() * jacobian_block(block, m, source)?);
    }
    Ok(Expr::add_all(terms))
}

fn momentum_pphi2() -> Vec<Expr> {
    multisets(2).iter().map(|m| pphi_second(m[0], m[1])).collect()
}

/// The six families obtained from contracting a semiholonomic multivector
/// with `Ω_r`, written with multivector components `F[p]_τ` and momentum
/// coordinates.
pub fn contraction_equations(spec: &LagrangianSpec) -> Result<Vec<Equation>> {
    let l = build_lagrangian(spec);
    let p2 = momentum_pphi2();
    let mut out = Vec::new();
    for &(a, b) in &PAIRS {
        let div = Expr::add_all((0..4).map(|m| mv(JetSymbol::pg_first(lv(a), lv(b), lv(m)), m)).collect::<Vec<_>>());
        let e = div - partial(&l, &JetSymbol::metric(lv(a), lv(b), &[]))? - chain_term(&p2, Block::Cov2Metric, &[a, b])?;
        out.push(Equation { family: "UniVec1", label: format!("g{a}{b}"), expr: e });
    }
    let div = Expr::add_all((0..4).map(|m| mv(JetSymbol::pphi_first(lv(m)), m)).collect::<Vec<_>>());
    out.push(Equation { family: "UniVec2", label: "phi".into(), expr: div - partial(&l, &JetSymbol::phi(&[]))? });
    for &(a, b) in &PAIRS {
        for mu in 0..4 {
            let div = Expr::add_all(
                (0..4)
                    .map(|nu| {
                        let (x, y) = sorted(mu, nu);
                        mv(JetSymbol::pg_second(lv(a), lv(b), lv(x), lv(y)), nu).scale(rat(1, n_factor(mu, nu)))
                    })
                    .collect::<Vec<_>>(),
            );
            let e = div - partial(&l, &g1_sym(a, b, mu))? + pg_first(a, b, mu) - chain_term(&p2, Block::Cov2Metric1, &[a, b, mu])?;
            out.push(Equation { family: "UniVec3", label: format!("g{a}{b},{mu}"), expr: e });
        }
    }
    for mu in 0..4 {
        let div = Expr::add_all(
            (0..4)
                .map(|nu| {
                    let (x, y) = sorted(mu, nu);
                    mv(JetSymbol::pphi_second(lv(x), lv(y)), nu).scale(rat(1, n_factor(mu, nu)))
                })
                .collect::<Vec<_>>(),
        );
        let e = div - partial(&l, &JetSymbol::phi(&[lv(mu)]))? + pphi_first(mu) - chain_term(&p2, Block::Cov2Phi1, &[mu])?;
        out.push(Equation { family: "UniVec4", label: format!("phi,{mu}"), expr: e });
    }
    for &(a, b) in &PAIRS {
        for m in multisets(2) {
            let e = pg_second(a, b, m[0], m[1]) - partial(&l, &g2_sym(a, b, m[0], m[1]))?;
            out.push(Equation { family: "UniVec5", label: format!("g{a}{b},{}{}", m[0], m[1]), expr: canon(&e) });
        }
    }
    for m in multisets(2) {
        let e = pphi_second(m[0], m[1]) - partial(&l, &cov2_sym(m[0], m[1]))?;
        out.push(Equation { family: "UniVec6", label: format!("phi,{}{}", m[0], m[1]), expr: canon(&e) });
    }
    Ok(out)
}

/// Result of the constraint algorithm.
#[derive(Clone, Debug)]
pub struct Ladder {
    pub stages: Vec<ConstraintStage>,
    pub legendre: LegendreMap,
}

impl Ladder {
    pub fn stage(&self, name: StageName) -> &ConstraintStage {
        self.try_stage(name).expect("stage was produced")
    }

    pub fn try_stage(&self, name: StageName) -> Option<&ConstraintStage> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn census(&self) -> [usize; 4] {
        [StageName::Wc, StageName::WL, StageName::W1, StageName::Wf].map(|n| self.try_stage(n).map_or(0, |s| s.constraints.len()))
    }

    /// Bindings realizing the Wc stage: second momenta and their
    /// multivector components.
    pub fn on_wc(&self) -> Bindings {
        let mut b = Bindings::default();
        for (s, e) in &self.stage(StageName::Wc).determined {
            b.symbols.insert(s.clone(), e.clone());
        }
        for (s, e) in self.legendre.entries() {
            if matches!(s, JetSymbol::PgSecond { .. } | JetSymbol::PphiSecond(_)) {
                b.symbols.insert(s, e);
            }
        }
        b
    }

    /// `(ELg[pair], ELphi)` from the W1 stage.
    pub fn euler_lagrange(&self) -> (Vec<Expr>, Expr) {
        let w1 = &self.stage(StageName::W1).constraints;
        (w1[..10].iter().map(|e| e.expr.clone()).collect(), w1[10].expr.clone())
    }
}

/// `F[p]_τ = D_τ(value)` for each momentum and direction.
fn determined(values: &[(JetSymbol, Expr)]) -> Result<Vec<(JetSymbol, Expr)>> {
    let exprs: Vec<Expr> = values.iter().map(|(_, e)| e.clone()).collect();
    let by_dir = (0..4).map(|t| total_derivative_many(&exprs, lv(t))).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for (i, (s, _)) in values.iter().enumerate() {
        for (tau, d) in by_dir.iter().enumerate() {
            out.push((JetSymbol::mv(s.clone(), lv(tau)), d[i].clone()));
        }
    }
    Ok(out)
}

/// Run the constraint algorithm through the final stage.
pub fn run_ladder(spec: &LagrangianSpec) -> Result<Ladder> {
    run_ladder_until(spec, StageName::Wf)
}

/// Run the constraint algorithm, stopping after `last`.
pub fn run_ladder_until(spec: &LagrangianSpec, last: StageName) -> Result<Ladder> {
    let eqs = contraction_equations(spec)?;
    let fam = |f: &str| eqs.iter().filter(|e| e.family == f).cloned().collect::<Vec<_>>();
    let map = restricted_legendre(spec)?;

    // Wc and the G^{..,μν} coefficients
    let mut wc = fam("UniVec5");
    wc.extend(fam("UniVec6"));
    let mut seconds = Vec::new();
    for (p, &(a, b)) in PAIRS.iter().enumerate() {
        for (k, m) in multisets(2).iter().enumerate() {
            seconds.push((JetSymbol::pg_second(lv(a), lv(b), lv(m[0]), lv(m[1])), map.pg_second[p][k].clone()));
        }
    }
    for (k, m) in multisets(2).iter().enumerate() {
        seconds.push((JetSymbol::pphi_second(lv(m[0]), lv(m[1])), map.pphi_second[k].clone()));
    }
    let det_c = determined(&seconds)?;
    let stage_c = ConstraintStage { name: StageName::Wc, constraints: wc, determined: det_c, canonical: true, notes: vec![] };

    // WL: first-momentum constraints p − L̂_g, p − L̂_φ
    // Substituting the Wc data into UniVec3/4 leaves p minus the first
    // Legendre momenta; the canonical form is built from the map directly.
    let mut wl = Vec::new();
    let firsts = map.entries().into_iter().filter(|(s, _)| matches!(s, JetSymbol::PgFirst { .. } | JetSymbol::PphiFirst(_)));
    for (e, (s, m)) in fam("UniVec3").into_iter().chain(fam("UniVec4")).zip(firsts) {
        wl.push(Equation { family: "WL", label: e.label, expr: canon(&(Expr::sym(s) - m)) });
    }
    let mut firsts = Vec::new();
    for (p, &(a, b)) in PAIRS.iter().enumerate() {
        for mu in 0..4 {
            firsts.push((JetSymbol::pg_first(lv(a), lv(b), lv(mu)), map.pg_first[p][mu].clone()));
        }
    }
    for mu in 0..4 {
        firsts.push((JetSymbol::pphi_first(lv(mu)), map.pphi_first[mu].clone()));
    }
    let det_l = determined(&firsts)?;
    let stage_l = ConstraintStage { name: StageName::WL, constraints: wl, determined: det_l.clone(), canonical: true, notes: vec![] };

    // W1: Euler-Lagrange constraints, momentum-free
    let mut on_wl = map.bindings();
    for (s, e) in &det_l {
        on_wl.symbols.insert(s.clone(), e.clone());
    }
    let mut w1 = Vec::new();
    for e in fam("UniVec1").into_iter().chain(fam("UniVec2")) {
        w1.push(Equation { family: "W1", label: e.label, expr: -substitute_raw(&e.expr, &on_wl) });
    }
    let stage_1 = ConstraintStage {
        name: StageName::W1,
        constraints: w1.clone(),
        determined: vec![],
        canonical: false,
        notes: vec!["momentum-free; projects to J2".into()],
    };

    if last != StageName::Wf {
        return Ok(Ladder { stages: vec![stage_c, stage_l, stage_1], legendre: map });
    }

    // Wf: one total derivative of each W1 constraint
    let w1_exprs: Vec<Expr> = w1.iter().map(|e| e.expr.clone()).collect();
    let mut by_dir = Vec::new();
    for tau in 0..4 {
        by_dir.push(total_derivative_many(&w1_exprs, lv(tau))?);
    }
    let mut wf = Vec::new();
    for (i, e) in w1.iter().enumerate() {
        for (tau, d) in by_dir.iter().enumerate() {
            wf.push(Equation { family: "Wf", label: format!("D{tau}({})", e.label), expr: d[i].clone() });
        }
    }
    let stage_f = ConstraintStage {
        name: StageName::Wf,
        constraints: wf,
        determined: vec![],
        canonical: false,
        notes: vec![
            "second tangency D_σ D_τ(W1) = 0 fixes the order-4 components F_{g αβ,μνλτ}, F_{φ,μνλτ} and adds no constraint".into(),
            "integrability of the resulting multivector fields is not checked; particular G2, G3 may add constraints".into(),
        ],
    };
    Ok(Ladder { stages: vec![stage_c, stage_l, stage_1, stage_f], legendre: map })
}

/// Highest jet order on which `e` genuinely depends: symbols of the top
/// structural order are tested by canonicalizing the partial derivative.
pub fn effective_order(e: &Expr) -> Result<usize> {
    let e = to_partial(e);
    let mut by_order: Vec<Vec<JetSymbol>> = vec![Vec::new(); 6];
    e.for_each_symbol(&mut |s| {
        if matches!(s, JetSymbol::Metric { .. } | JetSymbol::ScalarPartial(_)) && s.coord_id().is_some() {
            let k = s.order();
            if !by_order[k].contains(s) {
                by_order[k].push(s.clone());
            }
        }
    });
    for k in (1..by_order.len()).rev() {
        for s in &by_order[k] {
            if !canonicalize(&partial(&e, s)?)?.is_zero() {
                return Ok(k);
            }
        }
    }
    Ok(0)
}

/// Closed-form cubic Euler-Lagrange expressions `(ELg[pair], ELphi)`,
/// matching the W1 constraints.
pub fn euler_lagrange_cubic(spec: &LagrangianSpec) -> (Vec<Expr>, Expr) {
    let f = |n, dp, dx| spec.func(n, dp, dx);
    let (g2, g2x, g2p, g2xx, g2xp) = (f(FnName::G2, 0, 0), f(FnName::G2, 0, 1), f(FnName::G2, 1, 0), f(FnName::G2, 0, 2), f(FnName::G2, 1, 1));
    let (g3x, g3p, g3xx, g3xp, g3pp) = (f(FnName::G3, 0, 1), f(FnName::G3, 1, 0), f(FnName::G3, 0, 2), f(FnName::G3, 1, 1), f(FnName::G3, 2, 0));
    let x = kinetic_x();
    let bx = box_phi();
    let h = |a: usize, b: usize| {
        let (a, b) = sorted(a, b);
        phi_cov(&[a, b])
    };
    let up = |a: usize| Expr::add_all((0..4).map(|b| inv_metric(a, b) * phi_d(&[b])).collect::<Vec<_>>());
    let phi_up: Vec<Expr> = (0..4).map(up).collect();
    // H^a_b φ^b and Q = φ^a φ^b H_ab
    let hphi_low: Vec<Expr> = (0..4).map(|a| Expr::add_all((0..4).map(|b| h(a, b) * phi_up[b].clone()).collect::<Vec<_>>())).collect();
    let hphi_up: Vec<Expr> = (0..4).map(|a| Expr::add_all((0..4).map(|b| inv_metric(a, b) * hphi_low[b].clone()).collect::<Vec<_>>())).collect();
    let q = Expr::add_all((0..4).map(|a| phi_up[a].clone() * hphi_low[a].clone()).collect::<Vec<_>>());
    let s = Expr::add_all((0..4).map(|a| hphi_up[a].clone() * hphi_low[a].clone()).collect::<Vec<_>>());
    let mut hh = Vec::new();
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    hh.push(inv_metric(a, c) * inv_metric(b, d) * h(a, b) * h(c, d));
                }
            }
        }
    }
    let hh = Expr::add_all(hh);
    let mut rphiphi = Vec::new();
    for a in 0..4 {
        for b in 0..4 {
            rphiphi.push(ricci_tensor(a, b) * phi_up[a].clone() * phi_up[b].clone());
        }
    }
    let rphiphi = Expr::add_all(rphiphi);
    let two = Expr::int(2);
    let r = ricci_scalar();
    let half = rat(1, 2);
    let k = spec.kappa_expr();

    let mut elg = Vec::new();
    for &(a, b) in &PAIRS {
        let mut ricci_up = Vec::new();
        for c in 0..4 {
            for d in 0..4 {
                ricci_up.push(inv_metric(a, c) * inv_metric(b, d) * ricci_tensor(c, d));
            }
        }
        let gab = inv_metric(a, b);
        let pp = phi_up[a].clone() * phi_up[b].clone();
        let inner = Expr::add_all([
            Expr::add_all(ricci_up),
            -(Expr::add_all([r.clone(), x.clone(), g2.clone(), two.clone() * x.clone() * g3p.clone()]) * gab.clone()).scale(half),
            -(Expr::add_all([Expr::one(), g2x.clone(), two.clone() * g3p.clone()]) * pp.clone()).scale(half),
            -(g3x.clone() * bx.clone() * pp).scale(half),
            -(g3x.clone() * q.clone() * gab).scale(half),
            (g3x.clone() * (phi_up[a].clone() * hphi_up[b].clone() + phi_up[b].clone() * hphi_up[a].clone())).scale(half),
        ]);
        elg.push(-(k.clone() * sqrt_g() * inner).scale(Rational::from_integer(n_factor(a, b))));
    }
    let elphi = k
        * sqrt_g()
        * Expr::add_all([
            g2p,
            -(two.clone() * x.clone() * g2xp),
            -(two.clone() * x.clone() * g3pp),
            Expr::add_all([Expr::one(), g2x, two.clone() * g3p, -(two.clone() * x * g3xp.clone())]) * bx.clone(),
            -((g2xx + two * g3xp) * q.clone()),
            -(g3xx * (q * bx.clone() - s)),
            g3x * (bx.clone() * bx - hh - rphiphi),
        ]);
    (elg, elphi)
}

/// Left side of a section equation.
#[derive(Clone, Debug)]
pub enum SectionLhs {
    /// `Σ c·∂ψ_coord/∂x^dir`
    Derivative(Vec<(Rational, JetSymbol, usize)>),
    /// `ψ_coord`
    Value(JetSymbol),
}

/// One field equation for sections: `lhs = rhs`.
#[derive(Clone, Debug)]
pub struct SectionEquation {
    pub family: &'static str,
    pub label: String,
    pub lhs: SectionLhs,
    pub rhs: Expr,
}

impl SectionEquation {
    /// `lhs − rhs` with derivatives written as `F[coord]_dir`.
    pub fn residual(&self) -> Expr {
        let lhs = match &self.lhs {
            SectionLhs::Derivative(ts) => Expr::add_all(ts.iter().map(|(c, s, d)| mv(s.clone(), *d).scale(*c)).collect::<Vec<_>>()),
            SectionLhs::Value(s) => Expr::sym(s.clone()),
        };
        lhs - self.rhs.clone()
    }
}

/// The ten families of field equations for sections.
pub fn section_equations(spec: &LagrangianSpec) -> Result<Vec<SectionEquation>> {
    let l = build_lagrangian(spec);
    let p2 = momentum_pphi2();
    let one = Rational::from_integer(1);
    let d = |s: JetSymbol, dir: usize| SectionLhs::Derivative(vec![(one, s, dir)]);
    let mut out = Vec::new();
    for &(a, b) in &PAIRS {
        for mu in 0..4 {
            out.push(SectionEquation { family: "holonomy1", label: format!("g{a}{b};{mu}"), lhs: d(JetSymbol::metric(lv(a), lv(b), &[]), mu), rhs: metric_d(a, b, &[mu]) });
        }
    }
    for &(a, b) in &PAIRS {
        for mu in 0..4 {
            for nu in 0..4 {
                out.push(SectionEquation { family: "holonomy2", label: format!("g{a}{b},{mu};{nu}"), lhs: d(g1_sym(a, b, mu), nu), rhs: metric_d(a, b, &[mu, nu]) });
            }
        }
    }
    for mu in 0..4 {
        out.push(SectionEquation { family: "holonomy3", label: format!("phi;{mu}"), lhs: d(JetSymbol::phi(&[]), mu), rhs: phi_d(&[mu]) });
    }
    for mu in 0..4 {
        for nu in 0..4 {
            let gam = Expr::add_all((0..4).map(|g| christoffel(g, nu, mu) * phi_d(&[g])).collect::<Vec<_>>());
            let (x, y) = sorted(mu, nu);
            out.push(SectionEquation {
                family: "holonomy4",
                label: format!("phi,{mu};{nu}"),
                lhs: d(JetSymbol::phi(&[lv(mu)]), nu),
                rhs: phi_cov(&[x, y]) + gam,
            });
        }
    }
    for &(a, b) in &PAIRS {
        let lhs = SectionLhs::Derivative((0..4).map(|m| (one, JetSymbol::pg_first(lv(a), lv(b), lv(m)), m)).collect());
        let rhs = partial(&l, &JetSymbol::metric(lv(a), lv(b), &[]))? + chain_term(&p2, Block::Cov2Metric, &[a, b])?;
        out.push(SectionEquation { family: "divergence-g", label: format!("g{a}{b}"), lhs, rhs });
    }
    let lhs = SectionLhs::Derivative((0..4).map(|m| (one, JetSymbol::pphi_first(lv(m)), m)).collect());
    out.push(SectionEquation { family: "divergence-phi", label: "phi".into(), lhs, rhs: partial(&l, &JetSymbol::phi(&[]))? });
    for &(a, b) in &PAIRS {
        for mu in 0..4 {
            let lhs = SectionLhs::Derivative(
                (0..4)
                    .map(|nu| {
                        let (x, y) = sorted(mu, nu);
                        (rat(1, n_factor(mu, nu)), JetSymbol::pg_second(lv(a), lv(b), lv(x), lv(y)), nu)
                    })
                    .collect(),
            );
            let rhs = partial(&l, &g1_sym(a, b, mu))? - pg_first(a, b, mu) + chain_term(&p2, Block::Cov2Metric1, &[a, b, mu])?;
            out.push(SectionEquation { family: "legendre-g1", label: format!("g{a}{b},{mu}"), lhs, rhs });
        }
    }
    for mu in 0..4 {
        let lhs = SectionLhs::Derivative(
            (0..4)
                .map(|nu| {
                    let (x, y) = sorted(mu, nu);
                    (rat(1, n_factor(mu, nu)), JetSymbol::pphi_second(lv(x), lv(y)), nu)
                })
                .collect(),
        );
        let rhs = partial(&l, &JetSymbol::phi(&[lv(mu)]))? - pphi_first(mu) + chain_term(&p2, Block::Cov2Phi1, &[mu])?;
        out.push(SectionEquation { family: "legendre-phi1", label: format!("phi,{mu}"), lhs, rhs });
    }
    for &(a, b) in &PAIRS {
        for m in multisets(2) {
            out.push(SectionEquation {
                family: "legendre-g2",
                label: format!("g{a}{b},{}{}", m[0], m[1]),
                lhs: SectionLhs::Value(JetSymbol::pg_second(lv(a), lv(b), lv(m[0]), lv(m[1]))),
                rhs: canon(&partial(&l, &g2_sym(a, b, m[0], m[1]))?),
            });
        }
    }
    for m in multisets(2) {
        out.push(SectionEquation {
            family: "legendre-phi2",
            label: format!("phi,{}{}", m[0], m[1]),
            lhs: SectionLhs::Value(JetSymbol::pphi_second(lv(m[0]), lv(m[1]))),
            rhs: canon(&partial(&l, &cov2_sym(m[0], m[1]))?),
        });
    }
    Ok(out)
}

/// Index of a W1 metric constraint.
pub fn w1_index(a: usize, b: usize) -> usize {
    pair_rank(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::is_zero_structural;
    use crate::lagrangian::build_unified_hamiltonian;
    use crate::numeric::oracle::euler_lagrange_analytic;
    use crate::numeric::{random_point, rng, Evaluator, Jet4, JetPoint, JetScales};

    #[test]
    fn contraction_equations_follow_from_hamiltonian() {
        // UniVec_k = (multivector divergence) + ∂Ĥ/∂(coordinate)
        let spec = LagrangianSpec::new("X", "phi*X").unwrap();
        let h = build_unified_hamiltonian(&spec);
        let eqs = contraction_equations(&spec).unwrap();
        let drop_mv = |e: &Expr| {
            let mut b = Bindings::default();
            e.for_each_symbol(&mut |s| {
                if matches!(s, JetSymbol::Mv { .. }) {
                    b.symbols.insert(s.clone(), Expr::zero());
                }
            });
            substitute_raw(e, &b)
        };
        let pick = |fam: &str, label: &str| eqs.iter().find(|e| e.family == fam && e.label == label).unwrap().expr.clone();
        let cases = [
            ("UniVec1", "g01", JetSymbol::metric(lv(0), lv(1), &[])),
            ("UniVec2", "phi", JetSymbol::phi(&[])),
            ("UniVec3", "g12,3", g1_sym(1, 2, 3)),
            ("UniVec4", "phi,2", JetSymbol::phi(&[lv(2)])),
            ("UniVec5", "g00,01", g2_sym(0, 0, 0, 1)),
            ("UniVec6", "phi,23", cov2_sym(2, 3)),
        ];
        for (fam, label, c) in cases {
            let want = partial(&h, &c).unwrap();
            assert!(is_zero_structural(&(drop_mv(&pick(fam, label)) - want)).unwrap(), "{fam} {label}");
        }
        let count = |f: &str| eqs.iter().filter(|e| e.family == f).count();
        assert_eq!([count("UniVec1"), count("UniVec2"), count("UniVec3"), count("UniVec4"), count("UniVec5"), count("UniVec6")], [10, 1, 40, 4, 100, 10]);
    }

    #[test]
    fn census_and_first_momentum_stage() {
        let spec = LagrangianSpec::new("X^2", "phi").unwrap();
        let ladder = run_ladder(&spec).unwrap();
        assert_eq!(ladder.census(), [110, 44, 11, 44]);
        let wl = &ladder.stage(StageName::WL).constraints;
        for (i, (s, e)) in ladder.legendre.entries().iter().filter(|(s, _)| matches!(s, JetSymbol::PgFirst { .. } | JetSymbol::PphiFirst(_))).enumerate() {
            let want = Expr::sym(s.clone()) - e.clone();
            assert!(is_zero_structural(&(wl[i].expr.clone() - want)).unwrap(), "{}", wl[i].label);
        }
        let eqs = contraction_equations(&spec).unwrap();
        let on_wc = ladder.on_wc();
        let jp = random_point(31).unwrap();
        let mut ev = Evaluator::new(&jp, Some(&spec));
        let subs: Vec<_> = eqs.iter().filter(|e| e.family == "UniVec3" || e.family == "UniVec4").collect();
        for (e, w) in subs.iter().zip(wl) {
            let a = ev.eval(&substitute_raw(&e.expr, &on_wc)).unwrap();
            let b = ev.eval(&w.expr).unwrap();
            assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "{}: {a} vs {b}", w.label);
        }
        for e in &ladder.stage(StageName::W1).constraints {
            assert!(!e.expr.contains_momentum());
            assert!(!e.expr.contains_symbol(|s| matches!(s, JetSymbol::Mv { .. })));
        }
    }

    #[test]
    fn w1_and_closed_forms_match_oracle() {
        for (g2, g3, seed) in [("X^2", "phi*X", 21), ("X", "X", 22), ("0", "phi", 23), ("phi*X", "X^2", 24)] {
            let spec = LagrangianSpec::new(g2, g3).unwrap();
            let ladder = run_ladder_until(&spec, StageName::W1).unwrap();
            let (elg, elphi) = ladder.euler_lagrange();
            let (cg, cphi) = euler_lagrange_cubic(&spec);
            let j = Jet4::random(&mut rng(seed), &JetScales::default());
            let jp = JetPoint::from_jet4(&j).unwrap();
            let want = euler_lagrange_analytic(&spec, &j);
            let mut ev = Evaluator::new(&jp, Some(&spec));
            for p in 0..10 {
                let v = ev.eval(&elg[p]).unwrap();
                assert!((v - want[p]).abs() < 1e-9 * want[p].abs().max(1.0), "{g3} ELg {p}: {v} vs {}", want[p]);
                let c = ev.eval(&cg[p]).unwrap();
                assert!((c - want[p]).abs() < 1e-9 * want[p].abs().max(1.0), "{g3} closed ELg {p}: {c} vs {}", want[p]);
            }
            let v = ev.eval(&elphi).unwrap();
            assert!((v - want[10]).abs() < 1e-9 * want[10].abs().max(1.0), "{g3} ELphi: {v} vs {}", want[10]);
            let c = ev.eval(&cphi).unwrap();
            assert!((c - want[10]).abs() < 1e-9 * want[10].abs().max(1.0), "{g2},{g3} closed ELphi: {c} vs {}", want[10]);
        }
    }

    #[test]
    fn section_equation_families() {
        let spec = LagrangianSpec::new("X", "phi").unwrap();
        let eqs = section_equations(&spec).unwrap();
        let fams = ["holonomy1", "holonomy2", "holonomy3", "holonomy4", "divergence-g", "divergence-phi", "legendre-g1", "legendre-phi1", "legendre-g2", "legendre-phi2"];
        for f in fams {
            assert!(eqs.iter().any(|e| e.family == f), "{f}");
        }
        assert_eq!(eqs.iter().filter(|e| e.family == "legendre-g2").count(), 100);
    }

    #[test]
    fn general_relativity_reduction() {
        use crate::numeric::config::{FieldConfiguration, MetricKind, ScalarKind};
        use crate::numeric::oracle::einstein_upper;
        let spec = LagrangianSpec::new("0", "0").unwrap().with_kappa(rat(1, 2));
        let ladder = run_ladder_until(&spec, StageName::W1).unwrap();
        let (elg, elphi) = ladder.euler_lagrange();
        let schw = FieldConfiguration::new(MetricKind::Schwarzschild { mass: 1.0 }, ScalarKind::Zero).prolong([0.0, 5.0, 1.1, 0.3], 2).unwrap();
        let mut ev = Evaluator::new(&schw, Some(&spec));
        for e in elg.iter().chain([&elphi]) {
            assert!(ev.eval(e).unwrap().abs() < 1e-10);
        }
        let pert = FieldConfiguration::new(MetricKind::PerturbedFlat { eps: 0.05 }, ScalarKind::Zero).prolong([0.1, 0.2, -0.3, 0.4], 2).unwrap();
        let g = einstein_upper(&pert);
        let mut ev = Evaluator::new(&pert, Some(&spec));
        for (p, &(a, b)) in PAIRS.iter().enumerate() {
            let want = -(n_factor(a, b) as f64) * 0.5 * pert.sqrtg * g[a][b];
            let got = ev.eval(&elg[p]).unwrap();
            assert!((got - want).abs() < 1e-10, "{a}{b}: {got} vs {want}");
        }
    }

    #[test]
    fn constraint_orders() {
        let spec = LagrangianSpec::new("X", "phi*X").unwrap();
        let ladder = run_ladder(&spec).unwrap();
        let w1 = &ladder.stage(StageName::W1).constraints;
        let wf = &ladder.stage(StageName::Wf).constraints;
        assert_eq!(effective_order(&w1[0].expr).unwrap(), 2);
        assert_eq!(effective_order(&w1[10].expr).unwrap(), 2);
        assert_eq!(effective_order(&wf[1].expr).unwrap(), 3);
        assert_eq!(effective_order(&wf[40].expr).unwrap(), 3);
    }
}
