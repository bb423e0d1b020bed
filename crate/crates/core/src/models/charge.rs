use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Shape of the charge density before the `ε` scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum ProfileShape {
    Constant { value: f64 },
    /// `ρ0 + (ρ∞ − ρ0)·s²/(1 + s²)` with `s = r / width`.
    Rational { rho0: f64, rho_inf: f64, width: f64 },
    /// Equal to `ρ0` on `r ≤ r0`, to `ρ∞` on `r ≥ r1`, C¹ smoothstep between.
    Ramp { rho0: f64, rho_inf: f64, r0: f64, r1: f64 },
    /// Radial table `(r_i, ρ_i)`, linear in between, constant `ρ_last` beyond.
    Table { r: Vec<f64>, rho: Vec<f64> },
    /// `base(x − shift)`; not radial unless `shift = 0`.
    Shifted { base: Box<ProfileShape>, shift: [f64; 3] },
}

impl ProfileShape {
    fn validate(&self) -> Result<()> {
        match self {
            ProfileShape::Constant { value } if !(*value > 0.0) => {
                Err(invalid("rho", format!("constant {value} must be positive")))
            }
            ProfileShape::Rational { rho0, rho_inf, width } | ProfileShape::Ramp { rho0, rho_inf, r1: width, .. }
                if !(*rho0 > 0.0 && *rho_inf > 0.0 && *width > 0.0) =>
            {
                Err(invalid("rho", "levels and widths must be positive"))
            }
            ProfileShape::Ramp { r0, r1, .. } if !(*r0 >= 0.0 && r1 > r0) => {
                Err(invalid("rho", format!("ramp needs 0 <= r0 < r1, got {r0}, {r1}")))
            }
            ProfileShape::Table { r, rho } => {
                if r.len() != rho.len() || r.len() < 2 {
                    return Err(invalid("rho", "table needs two or more matching rows"));
                }
                if r[0] != 0.0 || r.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid("rho", "table radii must start at 0 and increase"));
                }
                if rho.iter().any(|v| !(*v > 0.0)) {
                    return Err(invalid("rho", "table values must be positive"));
                }
                Ok(())
            }
            ProfileShape::Shifted { base, .. } => base.validate(),
            _ => Ok(()),
        }
    }

    fn at_radius(&self, r: f64) -> f64 {
        match self {
            ProfileShape::Constant { value } => *value,
            ProfileShape::Rational { rho0, rho_inf, width } => {
                let s2 = (r / width).powi(2);
                rho0 + (rho_inf - rho0) * s2 / (1.0 + s2)
            }
            ProfileShape::Ramp { rho0, rho_inf, r0, r1 } => {
                let t = ((r - r0) / (r1 - r0)).clamp(0.0, 1.0);
                rho0 + (rho_inf - rho0) * t * t * (3.0 - 2.0 * t)
            }
            ProfileShape::Table { r: rs, rho } => {
                let last = rs.len() - 1;
                if r >= rs[last] {
                    return rho[last];
                }
                let i = rs.partition_point(|&v| v <= r) - 1;
                let t = (r - rs[i]) / (rs[i + 1] - rs[i]);
                rho[i] + t * (rho[i + 1] - rho[i])
            }
            ProfileShape::Shifted { base, shift } => {
                // only meaningful along the shift axis; callers use `at`
                base.at([r - shift[0], -shift[1], -shift[2]])
            }
        }
    }

    fn at(&self, x: [f64; 3]) -> f64 {
        match self {
            ProfileShape::Shifted { base, shift } => {
                base.at([x[0] - shift[0], x[1] - shift[1], x[2] - shift[2]])
            }
            _ => self.at_radius((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()),
        }
    }

    fn is_radial(&self) -> bool {
        match self {
            ProfileShape::Shifted { base, shift } => shift.iter().all(|&s| s == 0.0) && base.is_radial(),
            _ => true,
        }
    }

    fn rho_min(&self) -> f64 {
        match self {
            ProfileShape::Constant { value } => *value,
            ProfileShape::Rational { rho0, rho_inf, .. } | ProfileShape::Ramp { rho0, rho_inf, .. } => {
                rho0.min(*rho_inf)
            }
            ProfileShape::Table { rho, .. } => rho.iter().copied().fold(f64::INFINITY, f64::min),
            ProfileShape::Shifted { base, .. } => base.rho_min(),
        }
    }

    fn rho_inf(&self) -> f64 {
        match self {
            ProfileShape::Constant { value } => *value,
            ProfileShape::Rational { rho_inf, .. } | ProfileShape::Ramp { rho_inf, .. } => *rho_inf,
            ProfileShape::Table { rho, .. } => rho[rho.len() - 1],
            ProfileShape::Shifted { base, .. } => base.rho_inf(),
        }
    }

    fn settle_radius(&self, tol: f64) -> f64 {
        match self {
            ProfileShape::Constant { .. } => 0.0,
            ProfileShape::Rational { rho0, rho_inf, width } => {
                let gap = (rho_inf - rho0).abs();
                if gap <= tol {
                    0.0
                } else {
                    width * (gap / tol - 1.0).sqrt()
                }
            }
            ProfileShape::Ramp { r1, .. } => *r1,
            ProfileShape::Table { r, .. } => r[r.len() - 1],
            ProfileShape::Shifted { base, shift } => {
                base.settle_radius(tol) + shift.iter().map(|s| s * s).sum::<f64>().sqrt()
            }
        }
    }
}

/// Charge density `ρ_ε(x) = shape(ε x)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChargeProfile {
    pub shape: ProfileShape,
    pub eps: f64,
}

impl ChargeProfile {
    pub fn new(shape: ProfileShape, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(invalid("eps", format!("{eps} must be positive")));
        }
        shape.validate()?;
        Ok(ChargeProfile { shape, eps })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(ProfileShape::Constant { value }, 1.0)
    }

    /// Same shape, rescaled to `ρ(eps·x)`.
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.shape.clone(), eps)
    }

    pub fn at(&self, x: [f64; 3]) -> f64 {
        self.shape.at([self.eps * x[0], self.eps * x[1], self.eps * x[2]])
    }

    /// `ρ_ε` at radius `r` for radial profiles.
    ///
    /// # Panics
    /// When the profile is not radial.
    pub fn at_radius(&self, r: f64) -> f64 {
        assert!(self.is_radial(), "radial evaluation of a non-radial profile");
        self.shape.at_radius(self.eps * r)
    }

    pub fn is_radial(&self) -> bool {
        self.shape.is_radial()
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.shape, ProfileShape::Constant { .. })
    }

    pub fn rho_min(&self) -> f64 {
        self.shape.rho_min()
    }

    pub fn rho_inf(&self) -> f64 {
        self.shape.rho_inf()
    }

    /// Radius beyond which `|ρ_ε − ρ∞| < tol`.
    pub fn settle_radius(&self, tol: f64) -> f64 {
        self.shape.settle_radius(tol) / self.eps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_is_exact() {
        let base = ChargeProfile::new(
            ProfileShape::Rational {
                rho0: 0.1,
                rho_inf: 2.0,
                width: 1.0,
            },
            1.0,
        )
        .unwrap();
        let scaled = base.with_eps(0.25).unwrap();
        for &x in &[[0.3, -1.0, 2.0], [7.0, 0.0, 0.0]] {
            let ex = [0.25 * x[0], 0.25 * x[1], 0.25 * x[2]];
            assert_eq!(scaled.at(x), base.at(ex));
        }
    }

    #[test]
    fn settles_to_limit() {
        let p = ChargeProfile::new(
            ProfileShape::Rational {
                rho0: 0.1,
                rho_inf: 2.0,
                width: 1.0,
            },
            0.5,
        )
        .unwrap();
        let r = p.settle_radius(1e-6);
        assert!((p.at_radius(1.01 * r) - 2.0).abs() < 1e-6);
        assert!((p.at_radius(0.9 * r) - 2.0).abs() > 1e-6);
    }

    #[test]
    fn ramp_is_flat_then_limit() {
        let p = ChargeProfile::new(
            ProfileShape::Ramp {
                rho0: 0.05,
                rho_inf: 1.0,
                r0: 1.0,
                r1: 2.0,
            },
            1.0,
        )
        .unwrap();
        assert_eq!(p.at_radius(0.99), 0.05);
        assert_eq!(p.at_radius(2.0), 1.0);
        assert!((p.at_radius(1.5) - 0.525).abs() < 1e-15);
    }

    #[test]
    fn shifted_is_not_radial() {
        let p = ChargeProfile::new(
            ProfileShape::Shifted {
                base: Box::new(ProfileShape::Rational {
                    rho0: 0.3,
                    rho_inf: 2.0,
                    width: 1.0,
                }),
                shift: [1.0, 0.0, 0.0],
            },
            1.0,
        )
        .unwrap();
        assert!(!p.is_radial());
        assert_eq!(p.at([1.0, 0.0, 0.0]), 0.3);
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(ChargeProfile::constant(0.0).is_err());
        assert!(ChargeProfile::new(ProfileShape::Constant { value: 1.0 }, 0.0).is_err());
    }
}
