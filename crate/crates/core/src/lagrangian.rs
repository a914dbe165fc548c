//! The cubic Horndeski Lagrangian and the unified Hamiltonian function.

use crate::dsl::Binding;
use crate::error::{Error, Result};
use crate::expr::symbol::{lv, multisets, JetSymbol, PAIRS};
use crate::expr::{Expr, FnName, FnNode, Rational, ScalarFn};
use crate::geometry::{box_phi, christoffel, kinetic_x, metric_d, phi_cov, phi_d, ricci_scalar, sqrt_g};
use std::sync::Arc;

/// Model choice: `G2`, `G3` and the overall coupling `κ` standing for `1/16πG`.
#[derive(Clone, Debug)]
pub struct LagrangianSpec {
    pub g2: Arc<Binding>,
    pub g3: Arc<Binding>,
    pub kappa: Rational,
}

impl LagrangianSpec {
    pub fn new(g2: &str, g3: &str) -> Result<Self> {
        Ok(LagrangianSpec { g2: Arc::new(Binding::parse(g2)?), g3: Arc::new(Binding::parse(g3)?), kappa: Rational::from_integer(1) })
    }

    pub fn with_kappa(mut self, kappa: Rational) -> Self {
        self.kappa = kappa;
        self
    }

    /// Parse `p/q` or an integer.
    pub fn parse_kappa(s: &str) -> Result<Rational> {
        let bad = || Error::Config(format!("kappa must be a rational `p/q`, got `{s}`"));
        let r = match s.trim().split_once('/') {
            Some((p, q)) => {
                let p: i64 = p.trim().parse().map_err(|_| bad())?;
                let q: i64 = q.trim().parse().map_err(|_| bad())?;
                if q == 0 {
                    return Err(bad());
                }
                Rational::new(p, q)
            }
            None => Rational::from_integer(s.trim().parse().map_err(|_| bad())?),
        };
        Ok(r)
    }

    pub fn binding(&self, name: FnName) -> &Arc<Binding> {
        match name {
            FnName::G2 => &self.g2,
            FnName::G3 => &self.g3,
        }
    }

    /// `G(φ, X)` or one of its partials as an expression node.
    pub fn func(&self, name: FnName, d_phi: u8, d_x: u8) -> Expr {
        Expr::func(FnNode { f: ScalarFn { name, d_phi, d_x }, binding: Some(self.binding(name).clone()), x_arg: None })
    }

    pub fn kappa_expr(&self) -> Expr {
        Expr::constant(self.kappa)
    }

    /// `∂G3/∂X ≡ 0` decided on the DSL tree.
    pub fn g3_is_x_free(&self) -> bool {
        self.g3.vanishes(0, 1)
    }

    pub fn label(&self) -> String {
        format!("G2={}, G3={}, kappa={}", self.g2.source(), self.g3.source(), self.kappa)
    }
}

/// `L̂ = κ√|g|(R + X + G2 + G3 □φ)` in the covariant chart.
pub fn build_lagrangian(spec: &LagrangianSpec) -> Expr {
    let g2 = spec.func(FnName::G2, 0, 0);
    let g3 = spec.func(FnName::G3, 0, 0);
    let inner = Expr::add_all([ricci_scalar(), kinetic_x(), g2, g3 * box_phi()]);
    spec.kappa_expr() * sqrt_g() * inner
}

/// `L̂` with `R` dropped: the scalar-sector part used by checks that separate
/// gravity from matter.
pub fn scalar_sector(spec: &LagrangianSpec) -> Expr {
    let inner = Expr::add_all([kinetic_x(), spec.func(FnName::G2, 0, 0), spec.func(FnName::G3, 0, 0) * box_phi()]);
    spec.kappa_expr() * sqrt_g() * inner
}

pub fn pg_first(a: usize, b: usize, m: usize) -> Expr {
    Expr::sym(JetSymbol::pg_first(lv(a), lv(b), lv(m)))
}

pub fn pg_second(a: usize, b: usize, m: usize, n: usize) -> Expr {
    Expr::sym(JetSymbol::pg_second(lv(a), lv(b), lv(m), lv(n)))
}

pub fn pphi_first(m: usize) -> Expr {
    Expr::sym(JetSymbol::pphi_first(lv(m)))
}

pub fn pphi_second(m: usize, n: usize) -> Expr {
    Expr::sym(JetSymbol::pphi_second(lv(m), lv(n)))
}

/// `φ_{;μν} + φ_{;γ}Γ^γ_{μν}`: the velocity paired with `p_φ^{,μν}`.
pub fn phi2_velocity(m: usize, n: usize) -> Expr {
    let corr: Vec<Expr> = (0..4).map(|g| phi_d(&[g]) * christoffel(g, m, n)).collect();
    phi_cov(&[m, n]) + Expr::add_all(corr)
}

/// `Σ p·v` over all ordered momentum coordinates.
pub fn pairing_sum() -> Expr {
    let mut terms = Vec::new();
    for &(a, b) in &PAIRS {
        for m in 0..4 {
            terms.push(pg_first(a, b, m) * metric_d(a, b, &[m]));
        }
        for mn in multisets(2) {
            terms.push(pg_second(a, b, mn[0], mn[1]) * metric_d(a, b, &[mn[0], mn[1]]));
        }
    }
    for m in 0..4 {
        terms.push(pphi_first(m) * phi_d(&[m]));
    }
    for mn in multisets(2) {
        terms.push(pphi_second(mn[0], mn[1]) * phi2_velocity(mn[0], mn[1]));
    }
    Expr::add_all(terms)
}

/// `Ĥ = Σ p·v − L̂` on the reduced bundle.
pub fn build_unified_hamiltonian(spec: &LagrangianSpec) -> Expr {
    pairing_sum() - build_lagrangian(spec)
}

pub fn half() -> Rational {
    Rational::new(1, 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::canon::is_zero_structural;
    use crate::expr::partial;

    #[test]
    fn lagrangian_structure() {
        let spec = LagrangianSpec::new("0", "0").unwrap();
        let l = build_lagrangian(&spec);
        assert!(!l.contains_momentum());
        assert!(l.order() <= 2);
        assert!(!l.contains_symbol(|s| s.order() >= 3));
    }

    #[test]
    fn hamiltonian_momentum_derivatives() {
        let spec = LagrangianSpec::new("X", "phi").unwrap();
        let h = build_unified_hamiltonian(&spec);
        let d = partial(&h, &JetSymbol::pg_first(lv(0), lv(1), lv(2))).unwrap();
        assert!(is_zero_structural(&(d - metric_d(0, 1, &[2]))).unwrap());
        let d = partial(&h, &JetSymbol::pphi_second(lv(1), lv(3))).unwrap();
        assert!(is_zero_structural(&(d - phi2_velocity(1, 3))).unwrap());
    }

    #[test]
    fn kappa_parsing() {
        assert_eq!(LagrangianSpec::parse_kappa("3/4").unwrap(), Rational::new(3, 4));
        assert_eq!(LagrangianSpec::parse_kappa("2").unwrap(), Rational::from_integer(2));
        assert!(LagrangianSpec::parse_kappa("1/0").is_err());
        assert!(LagrangianSpec::parse_kappa("x").is_err());
    }
}
