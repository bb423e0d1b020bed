//! Nonlinearity, charge density and the closed-form constant machinery.

mod charge;
pub mod constants;
mod nonlinearity;

pub use charge::{ChargeProfile, ProfileShape};
pub use constants::{
    coercivity_floor, compute_d0, d0_closed_form, f_d, f_d_prime, grid_minimum, m_rho, m_rho_value, s0,
    stationary_residual, CoercivityFloor, Degeneracy,
};
pub use nonlinearity::{
    fit_cubic_bound, fit_dual_cubic_bound, fit_growth_bound, FTable, NonlinearityKind, NonlinearityModel,
};

use serde::Serialize;

use crate::error::Result;

/// One named condition with its verdict and the numbers it compared.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub name: &'static str,
    pub holds: bool,
    pub detail: String,
}

/// Outcome of [`validate_conditions`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub rho_min: f64,
    pub rho_at_origin: f64,
    pub rho_inf: f64,
    pub d0: f64,
    pub sqrt_lambda: f64,
    pub conditions: Vec<Condition>,
}

impl ConditionReport {
    pub fn holds(&self, name: &str) -> bool {
        self.conditions.iter().any(|c| c.name == name && c.holds)
    }
}

/// Tolerance defining where the profile counts as settled at `ρ∞`.
pub const SETTLE_TOL: f64 = 1e-8;

/// Checks positivity/decay (D1), the threshold sandwich (D2), radial
/// symmetry (D4) and the origin/infinity sandwich (D5).
pub fn validate_conditions(
    profile: &ChargeProfile,
    model: &NonlinearityModel,
    lambda: f64,
) -> Result<ConditionReport> {
    let d0 = if model.c0 > 0.0 {
        compute_d0(model.c0, model.p)?
    } else {
        0.0
    };
    let (rho_min, rho_inf) = (profile.rho_min(), profile.rho_inf());
    let rho0 = profile.at([0.0; 3]);
    let sl = lambda.max(0.0).sqrt();
    let settle = profile.settle_radius(SETTLE_TOL);
    let conditions = vec![
        Condition {
            name: "D1",
            holds: rho_min > 0.0 && settle.is_finite(),
            detail: format!("rho_min = {rho_min:e}, |rho - rho_inf| < {SETTLE_TOL:e} beyond r = {settle:e}"),
        },
        Condition {
            name: "D2",
            holds: 0.0 < rho_min && rho_min < d0 && d0 < rho_inf,
            detail: format!("rho_min = {rho_min:e} < d0 = {d0:e} < rho_inf = {rho_inf:e}"),
        },
        Condition {
            name: "D4",
            holds: profile.is_radial(),
            detail: format!("radial = {}", profile.is_radial()),
        },
        Condition {
            name: "D5",
            holds: 0.0 < rho0 && rho0 < d0.min(sl) && d0.max(sl) < rho_inf,
            detail: format!(
                "rho(0) = {rho0:e} < min(d0, sqrt(lambda)) = {:e}, max = {:e} < rho_inf = {rho_inf:e}",
                d0.min(sl),
                d0.max(sl)
            ),
        },
    ];
    Ok(ConditionReport {
        rho_min,
        rho_at_origin: rho0,
        rho_inf,
        d0,
        sqrt_lambda: sl,
        conditions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_power() -> NonlinearityModel {
        NonlinearityModel::pure_power(2.5, 1.0, 2.5).unwrap()
    }

    #[test]
    fn constant_profile_fails_threshold_sandwich() {
        let r = validate_conditions(&ChargeProfile::constant(1.0).unwrap(), &unit_power(), 1.0).unwrap();
        assert!((r.d0 - 0.905_097).abs() < 1e-6);
        assert!(!r.holds("D2"));
        assert!(r.holds("D1") && r.holds("D4"));
    }

    #[test]
    fn well_profile_passes_origin_sandwich() {
        let p = ChargeProfile::new(
            ProfileShape::Rational {
                rho0: 0.3,
                rho_inf: 2.0,
                width: 1.0,
            },
            1.0,
        )
        .unwrap();
        let r = validate_conditions(&p, &unit_power(), 1.0).unwrap();
        assert!(r.holds("D5") && r.holds("D2"));
    }

    #[test]
    fn shifted_profile_fails_radial_symmetry() {
        let p = ChargeProfile::new(
            ProfileShape::Shifted {
                base: Box::new(ProfileShape::Rational {
                    rho0: 0.3,
                    rho_inf: 2.0,
                    width: 1.0,
                }),
                shift: [0.5, 0.0, 0.0],
            },
            1.0,
        )
        .unwrap();
        assert!(!validate_conditions(&p, &unit_power(), 1.0).unwrap().holds("D4"));
    }
}
