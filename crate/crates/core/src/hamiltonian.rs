//! Covariant Hamiltonian formalism on the image of the Legendre map.
//!
//! In the particular case (`G3 = G3(φ)`, `∂²G2/∂X² = 0`) the first-order
//! velocities are isolated in terms of positions and multimomenta and the
//! Hamilton equations involve multimomenta only. The general case keeps the
//! velocities as coordinates.

use crate::error::{Error, Result};
use crate::expr::calculus::{substitute_raw, Bindings};
use crate::expr::symbol::{lv, multisets, JetSymbol, PAIRS};
use crate::expr::{canonicalize, n_factor, partial, Expr, FnName, FnNode, Rational, ScalarFn};
use crate::geometry::{inv_metric, metric_d, phi_d, sqrt_g};
use crate::lagrangian::{build_unified_hamiltonian, LagrangianSpec};
use crate::legendre::{restricted_legendre, LegendreMap};
use crate::numeric::{Evaluator, JetPoint};

/// Below this magnitude `1 + ∂G2/∂X + ∂G3/∂φ` is treated as zero.
pub const SINGULAR_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HamiltonCase {
    Particular,
    General,
}

impl HamiltonCase {
    pub fn as_str(&self) -> &'static str {
        match self {
            HamiltonCase::Particular => "particular",
            HamiltonCase::General => "general",
        }
    }
}

/// `φ_{;ν} = U_ν(g, φ, p_φ)` and `g_{αβ,μ} = V_{αβ,μ}(g, φ, p_g, p_φ)`.
#[derive(Clone, Debug)]
pub struct VelocityInversion {
    pub u: Vec<Expr>,
    /// Indexed `[pair][μ]`.
    pub v: Vec<Vec<Expr>>,
    /// `1 + ∂G2/∂X + ∂G3/∂φ`, which must not vanish at evaluation points.
    pub guard: Expr,
}

fn fn_at_zero_x(spec: &LagrangianSpec, name: FnName, d_phi: u8, d_x: u8) -> Expr {
    Expr::func(FnNode { f: ScalarFn { name, d_phi, d_x }, binding: Some(spec.binding(name).clone()), x_arg: Some(Expr::zero()) })
}

fn g1(a: usize, b: usize, m: usize) -> JetSymbol {
    JetSymbol::metric(lv(a), lv(b), &[lv(m)])
}

/// Perfect matchings of the index slots `(ρ, λ, σ, α, β, μ)` and their
/// weights in the inverse of the metric part of the first Legendre map.
const INVERSE_TERMS: [([(usize, usize); 3], (i64, i64)); 8] = [
    ([(0, 2), (1, 3), (4, 5)], (-1, 3)),
    ([(0, 2), (1, 4), (3, 5)], (-1, 3)),
    ([(0, 2), (1, 5), (3, 4)], (1, 3)),
    ([(0, 3), (1, 2), (4, 5)], (-1, 3)),
    ([(0, 3), (1, 4), (2, 5)], (1, 1)),
    ([(0, 4), (1, 2), (3, 5)], (-1, 3)),
    ([(0, 4), (1, 3), (2, 5)], (1, 1)),
    ([(0, 5), (1, 2), (3, 4)], (1, 3)),
];

/// `∂g_{ρλ,σ}/∂p_g^{αβ,μ}` times `κ√|g|`, symmetrized in `ρλ` and `αβ`.
fn inverse_kernel(r: usize, l: usize, s: usize, a: usize, b: usize, m: usize) -> Expr {
    let mut terms = Vec::new();
    for (x, y) in [(r, l), (l, r)] {
        for (u, w) in [(a, b), (b, a)] {
            let ix = [x, y, s, u, w, m];
            for (matching, (p, q)) in INVERSE_TERMS {
                let f = matching.iter().map(|&(i, j)| metric_d(ix[i], ix[j], &[])).collect::<Vec<_>>();
                terms.push(Expr::mul_all(f).scale(Rational::new(p, 4 * q)));
            }
        }
    }
    Expr::add_all(terms)
}

/// Isolate the velocities in the particular case.
pub fn invert_velocities(spec: &LagrangianSpec) -> Result<VelocityInversion> {
    if !spec.g3_is_x_free() {
        return Err(Error::Inapplicable("G3 depends on X, so the Legendre image does not project onto J1 and the velocities cannot be isolated".into()));
    }
    if !spec.g2.vanishes(0, 2) {
        return Err(Error::Inapplicable("∂²G2/∂X² is not identically zero".into()));
    }
    let map = restricted_legendre(spec)?;
    let guard = Expr::add_all([Expr::one(), fn_at_zero_x(spec, FnName::G2, 0, 1), fn_at_zero_x(spec, FnName::G3, 1, 0)]);
    let k = spec.kappa_expr();
    let denom = k.clone() * sqrt_g() * guard.clone();
    let u: Vec<Expr> = (0..4)
        .map(|nu| {
            let s = Expr::add_all((0..4).map(|m| Expr::sym(JetSymbol::pphi_first(lv(m))) * metric_d(m, nu, &[])).collect::<Vec<_>>());
            -(s / denom.clone())
        })
        .collect();
    // p_g = A(g)·g₁ + B(g, φ)·φ₁ exactly; B·φ₁ is p_g at g₁ = 0.
    let mut at_zero = Bindings::default();
    for &(a, b) in &PAIRS {
        for m in 0..4 {
            at_zero.symbols.insert(g1(a, b, m), Expr::zero());
        }
    }
    for m in 0..4 {
        at_zero.symbols.insert(JetSymbol::phi(&[lv(m)]), u[m].clone());
    }
    let mut shifted = Vec::new();
    for (p, &(a, b)) in PAIRS.iter().enumerate() {
        for m in 0..4 {
            let rest = substitute_raw(&map.pg_first[p][m], &at_zero);
            shifted.push(((a, b, m), Expr::sym(JetSymbol::pg_first(lv(a), lv(b), lv(m))) - rest));
        }
    }
    let scale = (k * sqrt_g()).pow(-1);
    let mut v = Vec::new();
    for &(r, l) in &PAIRS {
        let mut row = Vec::new();
        for s in 0..4 {
            let terms = shifted.iter().map(|((a, b, m), q)| inverse_kernel(r, l, s, *a, *b, *m) * q.clone()).collect::<Vec<_>>();
            row.push(scale.clone() * Expr::add_all(terms));
        }
        v.push(row);
    }
    let inv = VelocityInversion { u, v, guard };
    // A guard vanishing at every sample is treated as identically zero.
    let mut last = None;
    for seed in 0..4 {
        match inv.check_guard(&crate::numeric::random_point(seed)?, spec) {
            Ok(_) => return Ok(inv),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one sample"))
}

impl VelocityInversion {
    /// Bindings `φ_μ ↦ U_μ`, `g_{αβ,μ} ↦ V_{αβ,μ}`.
    pub fn bindings(&self) -> Bindings {
        let mut b = Bindings::default();
        for m in 0..4 {
            b.symbols.insert(JetSymbol::phi(&[lv(m)]), self.u[m].clone());
        }
        for (p, &(a, c)) in PAIRS.iter().enumerate() {
            for m in 0..4 {
                b.symbols.insert(g1(a, c, m), self.v[p][m].clone());
            }
        }
        b
    }

    /// Evaluate the pointwise guard.
    pub fn check_guard(&self, jp: &JetPoint, spec: &LagrangianSpec) -> Result<f64> {
        let g = Evaluator::new(jp, Some(spec)).eval(&self.guard)?;
        if g.abs() < SINGULAR_TOL {
            return Err(Error::SingularInversion(format!("1 + ∂G2/∂X + ∂G3/∂φ = {g:e}; p_φ cannot replace φ_;μ as a coordinate")));
        }
        Ok(g)
    }

    /// `(U, V)` at a point whose positions and first momenta are set.
    pub fn evaluate(&self, jp: &JetPoint, spec: &LagrangianSpec) -> Result<([f64; 4], Vec<[f64; 4]>)> {
        self.check_guard(jp, spec)?;
        let mut ev = Evaluator::new(jp, Some(spec));
        let mut u = [0.0; 4];
        for m in 0..4 {
            u[m] = ev.eval(&self.u[m])?;
        }
        let mut v = Vec::new();
        for row in &self.v {
            let mut r = [0.0; 4];
            for m in 0..4 {
                r[m] = ev.eval(&row[m])?;
            }
            v.push(r);
        }
        Ok((u, v))
    }
}

/// One Hamilton equation `∂H/∂y = rhs`, with section derivatives written as
/// multivector components `F[y]_ν`.
#[derive(Clone, Debug)]
pub struct HamiltonEquation {
    pub family: &'static str,
    pub coordinate: JetSymbol,
    pub lhs: Expr,
    pub rhs: Expr,
}

impl HamiltonEquation {
    pub fn residual(&self) -> Expr {
        self.lhs.clone() - self.rhs.clone()
    }
}

#[derive(Clone, Debug)]
pub struct ConstraintClass {
    pub name: String,
    pub is_constraint: bool,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct HamiltonEquations {
    pub case: HamiltonCase,
    pub coordinates: Vec<JetSymbol>,
    pub equations: Vec<HamiltonEquation>,
    /// `F[p_g^{αβ,μ}]_τ − D_τ(L_g^{αβ,μ})`, general case only.
    pub tangency: Vec<Expr>,
    pub classification: Vec<ConstraintClass>,
}

#[derive(Clone, Debug)]
pub struct HamiltonianSystem {
    pub h: Expr,
    pub eqs: HamiltonEquations,
    pub legendre: LegendreMap,
    pub inversion: Option<VelocityInversion>,
}

/// One `−dA^ν ∧ dB ∧ d³x_ν` term of the Hamilton-Cartan form.
struct Pairing {
    a: [Expr; 4],
    b: Expr,
}

/// `Σ_D ∂f/∂y^D F[y^D]_ν` for every direction.
fn directional(f: &Expr, grad: &[Expr], coords: &[JetSymbol]) -> [Expr; 4] {
    let _ = f;
    std::array::from_fn(|nu| {
        Expr::add_all(
            coords
                .iter()
                .zip(grad)
                .filter(|(_, g)| !g.is_zero())
                .map(|(c, g)| g.clone() * Expr::sym(JetSymbol::mv(c.clone(), lv(nu))))
                .collect::<Vec<_>>(),
        )
    })
}

fn gradient(f: &Expr, coords: &[JetSymbol]) -> Result<Vec<Expr>> {
    coords.iter().map(|c| partial(f, c)).collect()
}

/// Contract a semiholonomic multivector with
/// `dH∧d⁴x − Σ dA^ν∧dB∧d³x_ν` and collect `∂H/∂y^C` equations.
fn hamilton_from_form(
    h: &Expr,
    coords: &[JetSymbol],
    pairings: &[Pairing],
    family: impl Fn(&JetSymbol) -> &'static str,
) -> Result<Vec<HamiltonEquation>> {
    let n = coords.len();
    let mut rhs: Vec<Vec<Expr>> = vec![Vec::new(); n];
    for p in pairings {
        let gb = gradient(&p.b, coords)?;
        let db = directional(&p.b, &gb, coords);
        for nu in 0..4 {
            if p.a[nu].is_zero() {
                continue;
            }
            let ga = gradient(&p.a[nu], coords)?;
            let da = directional(&p.a[nu], &ga, coords)[nu].clone();
            for c in 0..n {
                if !ga[c].is_zero() {
                    rhs[c].push(ga[c].clone() * db[nu].clone());
                }
                if !gb[c].is_zero() {
                    rhs[c].push(-(gb[c].clone() * da.clone()));
                }
            }
        }
    }
    coords
        .iter()
        .zip(rhs)
        .map(|(c, r)| Ok(HamiltonEquation { family: family(c), coordinate: c.clone(), lhs: partial(h, c)?, rhs: Expr::add_all(r) }))
        .collect()
}

fn second_order_symbols() -> Vec<JetSymbol> {
    let mut out = Vec::new();
    for &(a, b) in &PAIRS {
        for m in multisets(2) {
            out.push(JetSymbol::metric(lv(a), lv(b), &[lv(m[0]), lv(m[1])]));
        }
    }
    for m in multisets(2) {
        out.push(JetSymbol::phi_cov(&[lv(m[0]), lv(m[1])]));
    }
    out
}

/// `Ĥ` on the Legendre image, before the second-order jets are dropped.
pub fn hamiltonian_on_image(map: &LegendreMap, spec: &LagrangianSpec) -> Expr {
    let mut b = Bindings::default();
    for (s, e) in map.entries() {
        if matches!(s, JetSymbol::PgSecond { .. } | JetSymbol::PphiSecond(_)) {
            b.symbols.insert(s, e);
        }
    }
    substitute_raw(&build_unified_hamiltonian(spec), &b)
}

/// Whether `H` is independent of second-order jets, checked by
/// canonicalizing each partial.
pub fn free_of_second_order(h: &Expr) -> Result<bool> {
    for s in second_order_symbols() {
        if !canonicalize(&partial(h, &s)?)?.is_zero() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The Hamiltonian in mixed coordinates: `Ĥ` on the Legendre image with the
/// (cancelling) second-order jets removed.
fn mixed_hamiltonian(map: &LegendreMap, spec: &LagrangianSpec) -> Expr {
    let mut b = Bindings::default();
    for s in second_order_symbols() {
        b.symbols.insert(s, Expr::zero());
    }
    substitute_raw(&hamiltonian_on_image(map, spec), &b)
}

fn positions() -> Vec<JetSymbol> {
    let mut out: Vec<JetSymbol> = PAIRS.iter().map(|&(a, b)| JetSymbol::metric(lv(a), lv(b), &[])).collect();
    out.push(JetSymbol::phi(&[]));
    out
}

fn first_momenta() -> Vec<JetSymbol> {
    let mut out = Vec::new();
    for &(a, b) in &PAIRS {
        for m in 0..4 {
            out.push(JetSymbol::pg_first(lv(a), lv(b), lv(m)));
        }
    }
    for m in 0..4 {
        out.push(JetSymbol::pphi_first(lv(m)));
    }
    out
}

fn velocities() -> Vec<JetSymbol> {
    let mut out = Vec::new();
    for &(a, b) in &PAIRS {
        for m in 0..4 {
            out.push(g1(a, b, m));
        }
    }
    for m in 0..4 {
        out.push(JetSymbol::phi(&[lv(m)]));
    }
    out
}

fn family_of(s: &JetSymbol) -> &'static str {
    match s {
        JetSymbol::Metric { d, .. } if d.is_empty() => "dH/dg",
        JetSymbol::Metric { .. } => "dH/dg1",
        JetSymbol::ScalarPartial(d) if d.is_empty() => "dH/dphi",
        JetSymbol::ScalarPartial(_) => "dH/dphi1",
        JetSymbol::PgFirst { .. } => "dH/dp_g",
        JetSymbol::PphiFirst(_) => "dH/dp_phi",
        _ => "other",
    }
}

/// The second-order pairings `(1/n(μν)) L^{..,μν}` against `B_μ`, where
/// `B` is the metric and scalar velocity (or its inversion).
fn second_order_pairings(map: &LegendreMap, gvel: &[Vec<Expr>], svel: &[Expr], sub: &Bindings) -> Vec<Pairing> {
    let mut out = Vec::new();
    let ms = multisets(2);
    let k_of = |m: usize, n: usize| ms.iter().position(|x| x[0] == m.min(n) && x[1] == m.max(n)).expect("pair");
    for p in 0..PAIRS.len() {
        for mu in 0..4 {
            let a = std::array::from_fn(|nu| substitute_raw(&map.pg_second[p][k_of(mu, nu)], sub).scale(Rational::new(1, n_factor(mu, nu))));
            out.push(Pairing { a, b: gvel[p][mu].clone() });
        }
    }
    for mu in 0..4 {
        let a = std::array::from_fn(|nu| substitute_raw(&map.pphi_second[k_of(mu, nu)], sub).scale(Rational::new(1, n_factor(mu, nu))));
        out.push(Pairing { a, b: svel[mu].clone() });
    }
    out
}

fn first_order_pairings() -> Vec<Pairing> {
    let mut out = Vec::new();
    for &(a, b) in &PAIRS {
        out.push(Pairing { a: std::array::from_fn(|nu| Expr::sym(JetSymbol::pg_first(lv(a), lv(b), lv(nu)))), b: metric_d(a, b, &[]) });
    }
    out.push(Pairing { a: std::array::from_fn(|nu| Expr::sym(JetSymbol::pphi_first(lv(nu)))), b: phi_d(&[]) });
    out
}

/// Particular case: `H(g, φ, p_g, p_φ)` and its four equation families.
pub fn hamiltonian_particular(spec: &LagrangianSpec) -> Result<HamiltonianSystem> {
    let inv = invert_velocities(spec)?;
    let map = restricted_legendre(spec)?;
    let sub = inv.bindings();
    let h = substitute_raw(&mixed_hamiltonian(&map, spec), &sub);
    let mut coords = positions();
    coords.extend(first_momenta());
    let mut pairings = first_order_pairings();
    pairings.extend(second_order_pairings(&map, &inv.v, &inv.u, &sub));
    let equations = hamilton_from_form(&h, &coords, &pairings, family_of)?;
    let eqs = HamiltonEquations { case: HamiltonCase::Particular, coordinates: coords, equations, tangency: Vec::new(), classification: classify(&map)? };
    Ok(HamiltonianSystem { h, eqs, legendre: map, inversion: Some(inv) })
}

/// General case in mixed coordinates `(g, φ, g₁, φ₁, p_g, p_φ)`: six equation
/// families plus tangency to the metric-momentum constraint.
pub fn hamiltonian_general(spec: &LagrangianSpec) -> Result<HamiltonianSystem> {
    let map = restricted_legendre(spec)?;
    let h = mixed_hamiltonian(&map, spec);
    let mut coords = positions();
    coords.extend(velocities());
    coords.extend(first_momenta());
    let gvel: Vec<Vec<Expr>> = PAIRS.iter().map(|&(a, b)| (0..4).map(|m| metric_d(a, b, &[m])).collect()).collect();
    let svel: Vec<Expr> = (0..4).map(|m| phi_d(&[m])).collect();
    let mut pairings = first_order_pairings();
    pairings.extend(second_order_pairings(&map, &gvel, &svel, &Bindings::default()));
    let equations = hamilton_from_form(&h, &coords, &pairings, family_of)?;
    // L(X_τ)(p_g − L_g) with the tangent components F[y]_τ.
    let mut tangency = Vec::new();
    for (p, &(a, b)) in PAIRS.iter().enumerate() {
        for mu in 0..4 {
            let grad = gradient(&map.pg_first[p][mu], &coords)?;
            let d = directional(&map.pg_first[p][mu], &grad, &coords);
            for (tau, dt) in d.into_iter().enumerate() {
                tangency.push(Expr::sym(JetSymbol::mv(JetSymbol::pg_first(lv(a), lv(b), lv(mu)), lv(tau))) - dt);
            }
        }
    }
    let eqs = HamiltonEquations { case: HamiltonCase::General, coordinates: coords, equations, tangency, classification: classify(&map)? };
    Ok(HamiltonianSystem { h, eqs, legendre: map, inversion: None })
}

/// A first momentum is a constraint in mixed coordinates when it does not
/// depend on second-order jets.
pub fn classify(map: &LegendreMap) -> Result<Vec<ConstraintClass>> {
    let seconds = second_order_symbols();
    let depends = |e: &Expr| -> Result<Option<JetSymbol>> {
        for s in &seconds {
            if !canonicalize(&partial(e, s)?)?.is_zero() {
                return Ok(Some(s.clone()));
            }
        }
        Ok(None)
    };
    let mut pg_dep = None;
    'outer: for row in &map.pg_first {
        for e in row {
            if let Some(s) = depends(e)? {
                pg_dep = Some(s);
                break 'outer;
            }
        }
    }
    let mut pphi_dep = None;
    for e in &map.pphi_first {
        if let Some(s) = depends(e)? {
            pphi_dep = Some(s);
            break;
        }
    }
    let class = |name: &str, dep: Option<JetSymbol>| ConstraintClass {
        name: name.into(),
        is_constraint: dep.is_none(),
        reason: match dep {
            None => "independent of all second-order jets".into(),
            Some(s) => format!("depends on {s}"),
        },
    };
    Ok(vec![class("p_g^{ab,mu}", pg_dep), class("p_phi^{,mu}", pphi_dep)])
}

/// `M^{ρλσαβμ}` for the given index values.
pub fn m_tensor(r: usize, l: usize, s: usize, a: usize, b: usize, m: usize) -> Expr {
    let g = inv_metric;
    // X^{(α}Y^{β)} with X, Y built from the remaining slots
    let sym = |f: &dyn Fn(usize, usize) -> Expr| (f(a, b) + f(b, a)).scale(Rational::new(1, 2));
    let sym_rl = |f: &dyn Fn(usize, usize) -> Expr| (f(r, l) + f(l, r)).scale(Rational::new(1, 2));
    let int = |k: i64| Expr::int(k);
    Expr::add_all([
        int(-3) * g(r, s) * sym(&|x, y| g(m, x) * g(y, l)),
        int(2) * g(r, l) * sym(&|x, y| g(m, x) * g(y, s)),
        int(2) * g(a, b) * g(r, s) * g(m, l),
        int(3) * g(m, s) * sym(&|x, y| g(l, x) * g(y, r)),
        int(-2) * g(r, m) * sym(&|x, y| g(l, x) * g(y, s)),
        -(g(a, b) * g(r, l) * g(m, s)),
        (g(r, l) * g(m, s) * g(a, b)).scale(Rational::new(-1, 2)),
        sym_rl(&|x, y| g(m, x) * g(y, s)) * g(a, b),
        g(m, s) * sym_rl(&|x, y| g(a, x) * g(y, b)),
    ])
}

/// `N^{αβμ} = G3 φ_{;γ}(g^{γβ}g^{αμ} + g^{γα}g^{βμ} − g^{γμ}g^{αβ}) − g_{ρλ,σ} M^{ρλσαβμ}`.
pub fn n_tensor(spec: &LagrangianSpec, a: usize, b: usize, m: usize) -> Expr {
    let g = inv_metric;
    let g3 = spec.func(FnName::G3, 0, 0);
    let first = Expr::add_all((0..4).map(|c| phi_d(&[c]) * (g(c, b) * g(a, m) + g(c, a) * g(b, m) - g(c, m) * g(a, b))).collect::<Vec<_>>());
    let mut second = Vec::new();
    for r in 0..4 {
        for l in 0..4 {
            for s in 0..4 {
                second.push(metric_d(r, l, &[s]) * m_tensor(r, l, s, a, b, m));
            }
        }
    }
    g3 * first - Expr::add_all(second)
}

/// Velocity kernel of the computed metric momentum, which replaces the
/// compact `M` form (which does not reproduce the first momenta).
pub fn momentum_kernel(r: usize, l: usize, s: usize, a: usize, b: usize, m: usize) -> Expr {
    let g = inv_metric;
    let mut terms = Vec::new();
    for (x, y) in [(r, l), (l, r)] {
        for (u, w) in [(a, b), (b, a)] {
            terms.push(Expr::add_all([
                g(x, y) * g(s, u) * g(w, m),
                g(x, y) * g(s, w) * g(u, m),
                -(g(x, s) * g(y, u) * g(w, m)),
                -(g(x, s) * g(y, w) * g(u, m)),
                -(g(x, u) * g(y, s) * g(w, m)),
                g(x, u) * g(y, w) * g(s, m),
                -(g(x, w) * g(y, s) * g(u, m)),
                g(x, w) * g(y, u) * g(s, m),
            ]));
        }
    }
    Expr::add_all(terms).scale(Rational::new(1, 16))
}

/// `p_g^{αβ,μ} = κ√|g| n(αβ)[−½G3 φ_{;γ}(g^{γβ}g^{αμ} + g^{γα}g^{βμ} − g^{γμ}g^{αβ}) + g_{ρλ,σ}K^{ρλσαβμ}]`.
pub fn metric_momentum_closed(spec: &LagrangianSpec, a: usize, b: usize, m: usize) -> Expr {
    let g = inv_metric;
    let g3 = spec.func(FnName::G3, 0, 0);
    let first = Expr::add_all((0..4).map(|c| phi_d(&[c]) * (g(c, b) * g(a, m) + g(c, a) * g(b, m) - g(c, m) * g(a, b))).collect::<Vec<_>>());
    let mut second = Vec::new();
    for r in 0..4 {
        for l in 0..4 {
            for s in 0..4 {
                second.push(metric_d(r, l, &[s]) * momentum_kernel(r, l, s, a, b, m));
            }
        }
    }
    let inner = (g3 * first).scale(Rational::new(-1, 2)) + Expr::add_all(second);
    (spec.kappa_expr() * sqrt_g() * inner).scale(Rational::from_integer(n_factor(a, b)))
}

/// Fill the multivector values `F[y]_ν` at a holonomic point whose momenta
/// are set: jets for positions and velocities, `D_ν` of the Legendre entries
/// for momenta.
pub fn fill_tangent(jp: &mut JetPoint, coords: &[JetSymbol], map: &LegendreMap, spec: &LagrangianSpec) -> Result<()> {
    let entries = map.entries();
    let mut vals = Vec::new();
    {
        let mut ev = Evaluator::new(jp, Some(spec));
        for c in coords {
            for nu in 0..4 {
                let v = match c {
                    JetSymbol::Metric { pair, d } => {
                        let mut d2 = d.clone();
                        d2.push(lv(nu));
                        ev.eval(&Expr::sym(JetSymbol::metric(pair[0], pair[1], &d2)))?
                    }
                    JetSymbol::ScalarPartial(d) => {
                        let idx: Vec<usize> = d.iter().map(|l| l.value().expect("concrete") as usize).chain([nu]).collect();
                        ev.eval(&phi_d(&idx))?
                    }
                    _ => {
                        let e = &entries.iter().find(|(s, _)| s == c).ok_or_else(|| Error::MissingSymbol(c.to_string()))?.1;
                        ev.eval(&crate::expr::total_derivative(e, lv(nu))?)?
                    }
                };
                vals.push((JetSymbol::mv(c.clone(), lv(nu)), v));
            }
        }
    }
    jp.mv.extend(vals);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{random_point, rng, Jet4, JetScales};

    fn admissible(seed: u64) -> JetPoint {
        let scales = JetScales { phi_d: 0.3, ..JetScales::default() };
        JetPoint::from_jet4(&Jet4::random(&mut rng(seed), &scales)).unwrap()
    }

    #[test]
    fn velocity_round_trip() {
        let spec = LagrangianSpec::new("2*X + phi", "phi").unwrap();
        let inv = invert_velocities(&spec).unwrap();
        let map = restricted_legendre(&spec).unwrap();
        for seed in 0..10 {
            let mut jp = admissible(100 + seed);
            map.apply(&mut jp, &spec).unwrap();
            let (u, v) = inv.evaluate(&jp, &spec).unwrap();
            for m in 0..4 {
                let want = jp.get(&JetSymbol::phi(&[lv(m)])).unwrap();
                assert!((u[m] - want).abs() < 1e-8 * want.abs().max(1.0));
            }
            for (p, &(a, b)) in PAIRS.iter().enumerate() {
                for m in 0..4 {
                    let want = jp.get(&g1(a, b, m)).unwrap();
                    assert!((v[p][m] - want).abs() < 1e-8 * want.abs().max(1.0), "{a}{b},{m}: {} vs {want}", v[p][m]);
                }
            }
        }
    }

    #[test]
    fn guards() {
        assert!(matches!(invert_velocities(&LagrangianSpec::new("X", "X").unwrap()), Err(Error::Inapplicable(_))));
        assert!(matches!(invert_velocities(&LagrangianSpec::new("X^2", "0").unwrap()), Err(Error::Inapplicable(_))));
        // 1 + ∂G2/∂X + ∂G3/∂φ = 1 − 2 + 1 = 0
        let spec = LagrangianSpec::new("-2*X", "phi").unwrap();
        assert!(matches!(invert_velocities(&spec), Err(Error::SingularInversion(_))));
        // 1 + ∂G3/∂φ = 1 − φ/φ0 vanishes only on the slice φ = φ0.
        let spec = LagrangianSpec::new("0", "-phi^2/2").unwrap();
        let inv = invert_velocities(&spec).unwrap();
        let mut jp = random_point(3).unwrap();
        jp.set(&JetSymbol::phi(&[]), 1.0);
        assert!(matches!(inv.evaluate(&jp, &spec), Err(Error::SingularInversion(_))));
    }

    #[test]
    fn hamiltonian_drops_second_order_jets() {
        let spec = LagrangianSpec::new("X*phi", "phi").unwrap();
        let map = restricted_legendre(&spec).unwrap();
        assert!(free_of_second_order(&hamiltonian_on_image(&map, &spec)).unwrap());
        let sys = hamiltonian_particular(&spec).unwrap();
        assert!(!sys.h.contains_symbol(|s| s.order() >= 1 && matches!(s, JetSymbol::Metric { .. } | JetSymbol::ScalarPartial(_) | JetSymbol::ScalarCovariant(_))));
        assert_eq!(sys.eqs.equations.len(), 55);
    }

    #[test]
    fn classification() {
        let map = restricted_legendre(&LagrangianSpec::new("0", "X").unwrap()).unwrap();
        let c = classify(&map).unwrap();
        assert!(c[0].is_constraint);
        assert!(!c[1].is_constraint);
        let map = restricted_legendre(&LagrangianSpec::new("X", "phi").unwrap()).unwrap();
        assert!(classify(&map).unwrap()[0].is_constraint);
    }

    #[test]
    fn m_tensor_symmetry_and_flat_n() {
        let jp = random_point(8).unwrap();
        let mut ev = Evaluator::new(&jp, None);
        for (r, l, s, a, b, m) in [(0, 1, 2, 3, 1, 0), (2, 2, 1, 0, 3, 3), (1, 3, 0, 2, 0, 1)] {
            let x = ev.eval(&m_tensor(r, l, s, a, b, m)).unwrap();
            let y = ev.eval(&m_tensor(r, l, s, b, a, m)).unwrap();
            assert!((x - y).abs() < 1e-12);
        }
        let spec = LagrangianSpec::new("0", "phi").unwrap();
        let flat = crate::numeric::config::FieldConfiguration::minkowski().prolong([0.0; 4], 2).unwrap();
        let mut ev = Evaluator::new(&flat, Some(&spec));
        assert_eq!(ev.eval(&n_tensor(&spec, 0, 1, 2)).unwrap(), 0.0);
    }

    fn residuals(sys: &HamiltonianSystem, spec: &LagrangianSpec, jp: &mut JetPoint) -> Vec<(&'static str, f64)> {
        sys.legendre.apply(jp, spec).unwrap();
        fill_tangent(jp, &sys.eqs.coordinates, &sys.legendre, spec).unwrap();
        let mut ev = Evaluator::new(jp, Some(spec));
        sys.eqs.equations.iter().map(|e| (e.family, ev.eval(&e.residual()).unwrap())).collect()
    }

    #[test]
    fn hamilton_equations_on_solution_jet() {
        use crate::numeric::solution::{flrw_solution, FlrwData};
        let spec = LagrangianSpec::new("X*phi", "phi").unwrap();
        let conf = flrw_solution(&spec, &FlrwData::default()).unwrap();
        for sys in [hamiltonian_particular(&spec).unwrap(), hamiltonian_general(&spec).unwrap()] {
            let mut jp = conf.prolong([0.0; 4], 4).unwrap();
            for (fam, r) in residuals(&sys, &spec, &mut jp) {
                assert!(r.abs() < 1e-8, "{:?} {fam}: {r}", sys.eqs.case);
            }
        }
    }

    #[test]
    fn momentum_families_hold_off_shell() {
        let spec = LagrangianSpec::new("X*phi", "phi").unwrap();
        let sys = hamiltonian_particular(&spec).unwrap();
        let mut jp = admissible(77);
        let res = residuals(&sys, &spec, &mut jp);
        let off: Vec<_> = res.iter().filter(|(f, _)| *f == "dH/dp_g" || *f == "dH/dp_phi").collect();
        assert_eq!(off.len(), 44);
        assert!(off.iter().all(|(_, r)| r.abs() < 1e-9), "{off:?}");
        assert!(res.iter().any(|(f, r)| *f == "dH/dg" && r.abs() > 1e-6));
    }

    #[test]
    fn metric_momentum_closed_form() {
        for (g2, g3) in [("0", "0"), ("X", "X*phi")] {
            let spec = LagrangianSpec::new(g2, g3).unwrap().with_kappa(Rational::new(3, 2));
            let map = restricted_legendre(&spec).unwrap();
            let jp = random_point(12).unwrap();
            let mut ev = Evaluator::new(&jp, Some(&spec));
            for (p, &(a, b)) in PAIRS.iter().enumerate() {
                for m in 0..4 {
                    let want = ev.eval(&map.pg_first[p][m]).unwrap();
                    let got = ev.eval(&metric_momentum_closed(&spec, a, b, m)).unwrap();
                    assert!((got - want).abs() < 1e-12, "{g3} {a}{b},{m}: {got} vs {want}");
                }
            }
        }
    }
}
