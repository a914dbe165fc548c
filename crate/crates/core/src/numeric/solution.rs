//! Jets of exact solutions of the Euler-Lagrange equations at a point.

use super::config::{FieldConfiguration, MetricKind, ScalarKind, ScaleFactor};
use super::oracle::{euler_lagrange_analytic, PHI_FIELD};
use crate::error::{Error, Result};
use crate::expr::symbol::pair_rank;
use crate::lagrangian::LagrangianSpec;
use nalgebra::{Matrix3, Vector3};

/// Newton stopping tolerance on the Euler-Lagrange residual.
pub const SOLVE_TOL: f64 = 1e-12;

/// Spatially flat FLRW data at `t = 0`: `a = 1`, `φ = φ₀`, `φ̇ = φ̇₀`.
#[derive(Clone, Copy, Debug)]
pub struct FlrwData {
    pub phi0: f64,
    pub phi_dot: f64,
}

impl Default for FlrwData {
    fn default() -> Self {
        FlrwData { phi0: 0.3, phi_dot: 0.4 }
    }
}

fn configuration(d: &FlrwData, u: &Vector3<f64>) -> FieldConfiguration {
    FieldConfiguration::new(
        MetricKind::Flrw(ScaleFactor::Poly(vec![1.0, u[0], u[1]])),
        ScalarKind::TimePoly(vec![d.phi0, d.phi_dot, u[2]]),
    )
}

fn residual(spec: &LagrangianSpec, d: &FlrwData, u: &Vector3<f64>) -> Result<Vector3<f64>> {
    let j = configuration(d, u).jet4([0.0; 4], 4)?;
    let el = euler_lagrange_analytic(spec, &j);
    Ok(Vector3::new(el[pair_rank(0, 0)], el[pair_rank(1, 1)], el[PHI_FIELD]))
}

/// Solve the `tt`, `xx` and scalar equations at `t = 0` for `ȧ`, `ä/2` and
/// `φ̈/2`; the other components vanish by isotropy. Returns a configuration
/// whose jet at the origin satisfies all Euler-Lagrange equations.
pub fn flrw_solution(spec: &LagrangianSpec, d: &FlrwData) -> Result<FieldConfiguration> {
    let mut u = Vector3::new(d.phi_dot.abs() / 12f64.sqrt(), 0.0, 0.0);
    for _ in 0..60 {
        let r = residual(spec, d, &u)?;
        if r.amax() < SOLVE_TOL {
            return Ok(configuration(d, &u));
        }
        let h = 1e-7;
        let mut jac = Matrix3::zeros();
        for k in 0..3 {
            let mut up = u;
            up[k] += h;
            let mut dn = u;
            dn[k] -= h;
            jac.set_column(k, &((residual(spec, d, &up)? - residual(spec, d, &dn)?) / (2.0 * h)));
        }
        let step = jac.lu().solve(&r).ok_or_else(|| Error::SingularInversion("FLRW Newton Jacobian".into()))?;
        u -= step;
    }
    Err(Error::Unsupported(format!("FLRW Newton iteration did not converge for {}", spec.label())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solution_satisfies_all_equations() {
        let spec = LagrangianSpec::new("X*phi", "phi").unwrap();
        let c = flrw_solution(&spec, &FlrwData::default()).unwrap();
        let el = euler_lagrange_analytic(&spec, &c.jet4([0.0; 4], 4).unwrap());
        assert!(el.iter().all(|v| v.abs() < 1e-10), "{el:?}");
    }
}
