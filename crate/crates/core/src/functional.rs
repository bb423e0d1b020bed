//! Common interface of the discretized energies.

use serde::Serialize;

use crate::numerics::dot;

/// Energy, dual gradient and Coulomb potential at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub energy: f64,
    /// `G` with `dJ(u)[v] = G·v`; constrained entries are zero.
    pub dual: Vec<f64>,
    /// `φ_{ρ,u}` at the nodes.
    pub potential: Vec<f64>,
}

/// A discretized energy on `R^dim` together with its H¹ metric.
///
/// The dual gradient `G` satisfies `dJ(u)[v] = G·v` exactly for the discrete
/// energy; the Sobolev gradient is `K⁻¹G` for the SPD Gram matrix `K`.
pub trait Functional: Sync {
    fn dim(&self) -> usize;

    fn evaluate(&self, u: &[f64]) -> Evaluation;

    /// `J(v) − J(u)` from two cached evaluations. Implementations sum the
    /// change term by term, so decreases far below `ε·|J|` stay resolvable.
    fn energy_change(&self, u: &[f64], at_u: &Evaluation, v: &[f64], at_v: &Evaluation) -> f64 {
        let _ = (u, v);
        at_v.energy - at_u.energy
    }

    fn energy(&self, u: &[f64]) -> f64 {
        self.evaluate(u).energy
    }

    fn energy_and_dual(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let e = self.evaluate(u);
        (e.energy, e.dual)
    }

    /// Applies `K⁻¹`.
    fn riesz(&self, dual: &[f64]) -> Vec<f64>;

    /// Applies `K`.
    fn gram(&self, v: &[f64]) -> Vec<f64>;

    /// `‖u‖²_{H¹}` in the quadratic form of the energy.
    fn h1_norm_sq(&self, u: &[f64]) -> f64;

    /// Zeroes entries pinned by boundary conditions.
    fn constrain(&self, _v: &mut [f64]) {}

    /// `‖v‖_K`.
    fn metric_norm(&self, v: &[f64]) -> f64 {
        dot(v, &self.gram(v)).max(0.0).sqrt()
    }

    /// `J′(u)[u] / ‖u‖²_{H¹}`, or the raw value when `u = 0`.
    fn nehari(&self, u: &[f64]) -> (f64, f64) {
        let (_, g) = self.energy_and_dual(u);
        let raw = dot(&g, u);
        let norm = self.h1_norm_sq(u);
        (raw, if norm > 0.0 { raw / norm } else { raw })
    }
}

/// `sqrt(G·K⁻¹G)`, the dual norm of the derivative.
pub fn dual_norm(dual: &[f64], riesz: &[f64]) -> f64 {
    dot(dual, riesz).abs().sqrt()
}

/// Breakdown of the discrete energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct EnergyParts {
    /// `∫|∇u|²`
    pub kinetic: f64,
    /// `∫u²`
    pub mass: f64,
    /// `∫ρφ_{ρ,u}u²`
    pub coulomb: f64,
    /// `∫F(u)`
    pub potential: f64,
    /// `∫f(u)u`
    pub work: f64,
}

impl EnergyParts {
    pub fn h1_sq(&self) -> f64 {
        self.kinetic + self.mass
    }

    pub fn energy(&self) -> f64 {
        0.5 * self.h1_sq() + 0.25 * self.coulomb - self.potential
    }
}
