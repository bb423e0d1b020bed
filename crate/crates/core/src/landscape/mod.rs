//! Coupling thresholds, cutoff and multibump constructions.
//!
//! `Λ₀ = sup_{A₀} (∫F(u) − ½‖u‖²)/∫φ_u u²` and
//! `Λ̄₀ = sup_{Ā₀} (∫f(u)u − ‖u‖²)/∫φ_u u²` (with `ρ ≡ 1`) are bracketed
//! from below by a trial family and from above by the cubic constants:
//! `Λ₀ ≤ C₁²/2` and `Λ̄₀ ≤ C̄²/2`.

#[cfg(test)]
mod tests;

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::field3d::{embed_radial_sum, FreeSpacePoisson, Grid3D, Problem3D};
use crate::functional::Functional;
use crate::models::{ChargeProfile, NonlinearityModel};
use crate::numerics::{log_grid, psum_by};
use crate::radial::{RadialField, RadialGrid, RadialProblem};

/// `(∫F(u) − ½‖u‖², ∫f(u)u − ‖u‖², ∫φ_u u²)` with `ρ ≡ 1`.
fn threshold_parts(u: &RadialField, model: &NonlinearityModel) -> (f64, f64, f64) {
    let p = RadialProblem::autonomous(u.grid.clone(), 1.0, model.clone()).expect("valid grid");
    let parts = p.parts(&u.values);
    (
        parts.potential - 0.5 * parts.h1_sq(),
        parts.work - parts.h1_sq(),
        parts.coulomb,
    )
}

/// `(∫F(u) − ½‖u‖², u ∈ A₀)`.
pub fn membership_a0(u: &RadialField, model: &NonlinearityModel) -> (f64, bool) {
    let (v, _, _) = threshold_parts(u, model);
    (v, v > 0.0)
}

/// `(∫f(u)u − ‖u‖², u ∈ Ā₀)`.
pub fn membership_abar0(u: &RadialField, model: &NonlinearityModel) -> (f64, bool) {
    let (_, v, _) = threshold_parts(u, model);
    (v, v > 0.0)
}

/// `(∫F(u) − ½‖u‖²)/∫φ_u u²` and `(∫f(u)u − ‖u‖²)/∫φ_u u²`; `None` off the set.
pub fn threshold_ratios(u: &RadialField, model: &NonlinearityModel) -> (Option<f64>, Option<f64>) {
    let (a, b, d) = threshold_parts(u, model);
    let ratio = |v: f64| (v > 0.0 && d > 0.0).then(|| v / d);
    (ratio(a), ratio(b))
}

/// Two-parameter family `t·exp(−r²/2σ²)` on a radial grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialFamily {
    pub r_max: f64,
    pub n: usize,
    pub sigmas: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

impl Default for TrialFamily {
    fn default() -> Self {
        TrialFamily {
            r_max: 40.0,
            n: 4000,
            sigmas: log_grid(0.3, 10.0, 60),
            amplitudes: log_grid(0.5, 1e3, 120),
        }
    }
}

impl TrialFamily {
    pub fn grid(&self) -> Result<Arc<RadialGrid>> {
        RadialGrid::new(self.r_max, self.n)
    }

    pub fn member(&self, grid: &Arc<RadialGrid>, sigma: f64, t: f64) -> RadialField {
        let mut u = RadialField::from_fn(grid.clone(), |r| t * (-r * r / (2.0 * sigma * sigma)).exp());
        u.values[grid.n] = 0.0;
        u
    }
}

/// Best family member for one of the two ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub sigma: f64,
    pub amplitude: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaBounds {
    pub lambda0_lower: Option<f64>,
    pub lambda0_upper: f64,
    pub lambdabar0_lower: Option<f64>,
    pub lambdabar0_upper: f64,
    pub c1: f64,
    pub c_bar: f64,
    pub witness: Option<Witness>,
    pub witness_bar: Option<Witness>,
}

/// Lower bounds from the family, upper bounds `C₁²/2` and `C̄²/2`.
pub fn estimate_lambda_bounds(model: &NonlinearityModel, family: &TrialFamily) -> Result<LambdaBounds> {
    let grid = family.grid()?;
    let per_sigma: Vec<(Option<Witness>, Option<Witness>)> = family
        .sigmas
        .par_iter()
        .map(|&sigma| {
            let mut best: (Option<Witness>, Option<Witness>) = (None, None);
            for &t in &family.amplitudes {
                let (a, b) = threshold_ratios(&family.member(&grid, sigma, t), model);
                let keep = |slot: &mut Option<Witness>, r: Option<f64>| {
                    if let Some(ratio) = r {
                        if slot.map_or(true, |w| ratio > w.ratio) {
                            *slot = Some(Witness {
                                sigma,
                                amplitude: t,
                                ratio,
                            });
                        }
                    }
                };
                keep(&mut best.0, a);
                keep(&mut best.1, b);
            }
            best
        })
        .collect();
    // first maximum in family order, independent of scheduling
    let pick = |sel: fn(&(Option<Witness>, Option<Witness>)) -> Option<Witness>| {
        per_sigma.iter().filter_map(sel).fold(None, |acc: Option<Witness>, w| match acc {
            Some(a) if a.ratio >= w.ratio => Some(a),
            _ => Some(w),
        })
    };
    let witness = pick(|p| p.0);
    let witness_bar = pick(|p| p.1);
    Ok(LambdaBounds {
        lambda0_lower: witness.map(|w| w.ratio),
        lambda0_upper: 0.5 * model.c1 * model.c1,
        lambdabar0_lower: witness_bar.map(|w| w.ratio),
        lambdabar0_upper: 0.5 * model.c_bar * model.c_bar,
        c1: model.c1,
        c_bar: model.c_bar,
        witness,
        witness_bar,
    })
}

/// `C¹` cubic smoothstep: 1 on `[0, R/2]`, 0 on `[R, ∞)`, slope at most `3/R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cutoff {
    pub radius: f64,
}

pub fn cutoff_psi(radius: f64) -> Result<Cutoff> {
    if !(radius >= 6.0 && radius.is_finite()) {
        return Err(invalid("R", format!("{radius} < 6 puts the slope bound at risk")));
    }
    Ok(Cutoff { radius })
}

impl Cutoff {
    pub fn eval(&self, r: f64) -> f64 {
        let half = 0.5 * self.radius;
        if r <= half {
            1.0
        } else if r >= self.radius {
            0.0
        } else {
            let x = (r - half) / half;
            1.0 - x * x * (3.0 - 2.0 * x)
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let half = 0.5 * self.radius;
        if r <= half || r >= self.radius {
            0.0
        } else {
            let x = (r - half) / half;
            -6.0 * x * (1.0 - x) / half
        }
    }
}

/// One radius of the truncation sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub radius: f64,
    pub energy: f64,
    pub h1_norm_sq: f64,
    pub potential: f64,
    pub coulomb: f64,
}

#[derive(Debug, Clone)]
pub struct Truncation {
    pub r0: f64,
    pub field: RadialField,
    /// Untruncated reference `(J, ‖v‖², ∫F(v), ∫φ_v v²)`.
    pub reference: SweepRow,
    pub sweep: Vec<SweepRow>,
    /// `|J(u_R) − J(v)|` is nonincreasing along the sweep.
    pub energy_gap_monotone: bool,
    /// `‖u_R‖²`, `∫F(u_R)`, `∫φ u_R²` approach the reference monotonically.
    pub parts_monotone: bool,
}

fn sweep_row(p: &RadialProblem, radius: f64, u: &[f64]) -> SweepRow {
    let parts = p.parts(u);
    SweepRow {
        radius,
        energy: parts.energy(),
        h1_norm_sq: parts.h1_sq(),
        potential: parts.potential,
        coulomb: parts.coulomb,
    }
}

fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-300)
}

/// Doubles `R` from 6 until `J_λ^∞(v ψ_R) < 0`, then continues the sweep to
/// the grid radius to check convergence of the truncated quantities.
pub fn truncate_and_tune(v: &RadialField, lambda: f64, model: &NonlinearityModel) -> Result<Truncation> {
    let grid = v.grid.clone();
    let p = RadialProblem::autonomous(grid.clone(), lambda, model.clone())?;
    let reference = sweep_row(&p, f64::INFINITY, &v.values);
    if !(reference.energy < 0.0) {
        return Err(Error::Precondition(format!(
            "truncation needs J(v) < 0, got {}",
            reference.energy
        )));
    }
    let mut sweep = Vec::new();
    let mut found: Option<(f64, RadialField)> = None;
    let mut radius = 6.0;
    while radius <= grid.r_max {
        let psi = cutoff_psi(radius)?;
        let u = RadialField::new(
            grid.clone(),
            grid.nodes.iter().zip(&v.values).map(|(&r, &x)| x * psi.eval(r)).collect(),
        )?;
        let row = sweep_row(&p, radius, &u.values);
        if found.is_none() && row.energy < 0.0 {
            found = Some((radius, u));
        }
        sweep.push(row);
        radius *= 2.0;
    }
    let Some((r0, field)) = found else {
        return Err(Error::TruncationOutsideGrid {
            radius,
            r_max: grid.r_max,
        });
    };
    let gaps: Vec<f64> = sweep.iter().map(|s| (s.energy - reference.energy).abs()).collect();
    let dist = |f: fn(&SweepRow) -> f64| -> Vec<f64> { sweep.iter().map(|s| (f(s) - f(&reference)).abs()).collect() };
    let parts_monotone = nonincreasing(&dist(|s| s.h1_norm_sq))
        && nonincreasing(&dist(|s| s.potential))
        && nonincreasing(&dist(|s| s.coulomb));
    Ok(Truncation {
        r0,
        field,
        reference,
        energy_gap_monotone: nonincreasing(&gaps),
        parts_monotone,
        sweep,
    })
}

/// `N` translated copies of a truncated bump at `i N³ e`, `i = 1..N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultibumpSpec {
    pub r0: f64,
    pub n_bumps: usize,
    pub direction: [f64; 3],
}

impl MultibumpSpec {
    pub fn new(r0: f64, n_bumps: usize, direction: [f64; 3]) -> Result<Self> {
        if !(r0 > 0.0) || n_bumps == 0 {
            return Err(invalid("multibump", "need R0 > 0 and N >= 1"));
        }
        let len = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(len > 0.0) {
            return Err(invalid("direction", "must be nonzero"));
        }
        Ok(MultibumpSpec {
            r0,
            n_bumps,
            direction: direction.map(|x| x / len),
        })
    }

    /// `N³`, the spacing between neighbouring centres.
    pub fn spacing(&self) -> f64 {
        (self.n_bumps as f64).powi(3)
    }

    /// `N = 1` or `N³ > 2R₀`.
    pub fn disjoint(&self) -> bool {
        self.n_bumps == 1 || self.spacing() > 2.0 * self.r0
    }

    /// `ε_N = 1/(N⁴ + R₀)`.
    pub fn eps(&self) -> f64 {
        1.0 / ((self.n_bumps as f64).powi(4) + self.r0)
    }

    pub fn centers(&self) -> Vec<[f64; 3]> {
        (1..=self.n_bumps)
            .map(|i| self.direction.map(|e| e * i as f64 * self.spacing()))
            .collect()
    }

    /// Printed cross-term bound `(N² − N)/(N³ − 2R₀)·(∫u²)²`.
    pub fn cross_bound(&self, mass: f64) -> Option<f64> {
        let n = self.n_bumps as f64;
        let denom = self.spacing() - 2.0 * self.r0;
        (denom > 0.0).then(|| (n * n - n) / denom * mass * mass)
    }
}

/// How the energy of one multibump configuration was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MultibumpPath {
    /// Disjoint supports: diagonal radial terms plus exact monopole cross terms.
    Analytic,
    /// Overlapping supports: full 3-D evaluation.
    Grid3D,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultibumpRow {
    pub n_bumps: usize,
    pub eps: f64,
    pub energy: f64,
    pub path: MultibumpPath,
    /// `Σ_{i≠j} ∫φ_{u_i} u_j²` (charge `ρ ≡ 1`); `None` on the 3-D path.
    pub cross_sum: Option<f64>,
    pub cross_bound: Option<f64>,
    /// `cross_bound / 4π`, the bound with the Newton kernel's constant.
    pub cross_bound_sharp: Option<f64>,
    /// `N · J_λ^∞(u_{R₀})`.
    pub n_times_single: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultibumpReport {
    pub r0: f64,
    pub lambda: f64,
    /// `J_λ^∞(u_{R₀})`.
    pub single_energy: f64,
    /// `λ/4 · max_N cross_bound(N)` over the disjoint configurations.
    pub c_apriori: f64,
    pub rows: Vec<MultibumpRow>,
    pub strictly_decreasing: bool,
    pub lemma_bound_holds: bool,
    pub cross_bounds_hold: bool,
}

/// Settings for the 3-D evaluation of overlapping configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultibumpGrid {
    pub half_width: f64,
    pub n: usize,
}

impl Default for MultibumpGrid {
    fn default() -> Self {
        MultibumpGrid { half_width: 12.0, n: 128 }
    }
}

/// Single-bump integrals `(½‖u‖², ∫F(u), ∫φ_u u², ∫u²)` with `ρ ≡ 1`.
fn bump_parts(u: &RadialField, model: &NonlinearityModel) -> (f64, f64, f64, f64) {
    let p = RadialProblem::autonomous(u.grid.clone(), 1.0, model.clone()).expect("valid grid");
    let parts = p.parts(&u.values);
    (0.5 * parts.h1_sq(), parts.potential, parts.coulomb, parts.mass)
}

/// `J_{ρ_{ε_N}}(w_{R₀,N})` for `N = 1..=n_max`.
///
/// Charges must satisfy `ρ(ε_N x) ≤ √λ` on `B(0, 1/ε_N)`. On the analytic
/// path the charge is read at each bump centre and must be constant across
/// the bump; this is checked on a shell of sample points.
pub fn multibump_energy(
    u_r0: &RadialField,
    r0: f64,
    n_max: usize,
    direction: [f64; 3],
    profile: &ChargeProfile,
    model: &NonlinearityModel,
    lambda: f64,
    grid3d: MultibumpGrid,
) -> Result<MultibumpReport> {
    if !profile.is_radial() {
        return Err(invalid("profile", "multibump energies need a radial charge"));
    }
    let support = u_r0.support_radius(0.0);
    if support > r0 + u_r0.grid.h {
        return Err(invalid("u_r0", format!("support {support} exceeds R0 = {r0}")));
    }
    let single = RadialProblem::autonomous(u_r0.grid.clone(), lambda, model.clone())?.energy(&u_r0.values);
    let (half_norm, big_f, coulomb1, mass) = bump_parts(u_r0, model);
    let specs: Vec<MultibumpSpec> = (1..=n_max)
        .map(|n| MultibumpSpec::new(r0, n, direction))
        .collect::<Result<_>>()?;
    let c_apriori = specs
        .iter()
        .filter(|s| s.disjoint())
        .filter_map(|s| s.cross_bound(mass))
        .fold(0.0f64, f64::max)
        * lambda
        / 4.0;
    let mut rows = Vec::with_capacity(n_max);
    for spec in &specs {
        let eps = spec.eps();
        let scaled = profile.with_eps(eps)?;
        let ball = 1.0 / eps;
        let centers = spec.centers();
        for c in &centers {
            let rc = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            if rc + r0 > ball * (1.0 + 1e-12) {
                return Err(invalid("multibump", format!("bump at {rc} leaves B(0, 1/eps) = {ball}")));
            }
        }
        let max_rho = (0..=256)
            .map(|k| scaled.at_radius(ball * k as f64 / 256.0))
            .fold(0.0f64, f64::max);
        if max_rho > lambda.sqrt() * (1.0 + 1e-12) {
            return Err(Error::Precondition(format!(
                "rho_eps reaches {max_rho} > sqrt(lambda) = {} on B(0, 1/eps)",
                lambda.sqrt()
            )));
        }
        let n = spec.n_bumps as f64;
        if spec.disjoint() {
            let rho = scaled.at_radius(0.0);
            for c in &centers {
                for dir in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-1.0, 0.0, 0.0]] {
                    let x = [c[0] + r0 * dir[0], c[1] + r0 * dir[1], c[2] + r0 * dir[2]];
                    if (scaled.at(x) - rho).abs() > 1e-12 * rho.max(1.0) || (scaled.at(*c) - rho).abs() > 1e-12 * rho.max(1.0) {
                        return Err(Error::Precondition(
                            "charge varies across a bump; use the 3-D path".to_string(),
                        ));
                    }
                }
            }
            let mut cross = 0.0;
            for i in 0..spec.n_bumps {
                for j in 0..spec.n_bumps {
                    if i != j {
                        cross += mass * mass / (4.0 * PI * (i as f64 - j as f64).abs() * spec.spacing());
                    }
                }
            }
            // disjoint supports: local terms add, cross Coulomb terms are monopole-exact
            let energy = n * (half_norm - big_f) + 0.25 * rho * rho * (n * coulomb1 + cross);
            let bound = spec.cross_bound(mass);
            rows.push(MultibumpRow {
                n_bumps: spec.n_bumps,
                eps,
                energy,
                path: MultibumpPath::Analytic,
                cross_sum: Some(cross),
                cross_bound: bound,
                cross_bound_sharp: bound.map(|b| b / (4.0 * PI)),
                n_times_single: n * single,
            });
        } else {
            let mid = (1.0 + n) / 2.0 * spec.spacing();
            let center = spec.direction.map(|e| e * mid);
            let grid = Grid3D::with_center(grid3d.half_width, grid3d.n, center)?;
            let w = embed_radial_sum(u_r0, &grid, &centers)?;
            let poisson = Arc::new(FreeSpacePoisson::new(grid)?);
            let p = Problem3D::with_profile(poisson, &scaled, model.clone())?;
            rows.push(MultibumpRow {
                n_bumps: spec.n_bumps,
                eps,
                energy: p.energy(&w.values),
                path: MultibumpPath::Grid3D,
                cross_sum: None,
                cross_bound: None,
                cross_bound_sharp: None,
                n_times_single: n * single,
            });
        }
    }
    let strictly_decreasing = rows.windows(2).all(|w| w[1].energy < w[0].energy);
    let lemma_bound_holds = rows.iter().all(|r| r.energy <= r.n_times_single + c_apriori);
    let cross_bounds_hold = rows
        .iter()
        .all(|r| match (r.cross_sum, r.cross_bound) {
            (Some(c), Some(b)) => c <= b,
            (Some(c), None) => c == 0.0,
            _ => true,
        });
    Ok(MultibumpReport {
        r0,
        lambda,
        single_energy: single,
        c_apriori,
        rows,
        strictly_decreasing,
        lemma_bound_holds,
        cross_bounds_hold,
    })
}

/// Assembles `N` copies of `u` on a 3-D lattice whose spacing divides `N³`
/// and compares `‖w‖²_{H¹}` and `∫F(w)` with `N×` the single-copy values.
/// Returns the larger relative deviation.
pub fn lattice_additivity(u: &RadialField, spec: &MultibumpSpec, model: &NonlinearityModel, cells_per_spacing: usize) -> Result<f64> {
    if !spec.disjoint() {
        return Err(Error::OverlappingBumps {
            spacing: spec.spacing(),
            diameter: 2.0 * spec.r0,
        });
    }
    let h = spec.spacing() / cells_per_spacing as f64;
    let support = u.support_radius(0.0);
    let n_bumps = spec.n_bumps as f64;
    let span = (n_bumps - 1.0) * spec.spacing() + 2.0 * support + 4.0 * h;
    let mut n = ((span / h).ceil() as usize).max(8);
    while n % 2 != 0 || !crate::field3d::fft_friendly(n) {
        n += 1;
    }
    let half_width = 0.5 * n as f64 * h;
    let mid = (1.0 + n_bumps) / 2.0 * spec.spacing();
    // put the middle of the chain on a cell centre so every copy is too
    let offset = if spec.n_bumps % 2 == 1 { 0.5 * h } else { 0.0 };
    let center = spec.direction.map(|e| e * mid + offset);
    let grid = Grid3D::with_center(half_width, n, center)?;
    let w = embed_radial_sum(u, &grid, &spec.centers())?;
    let one = embed_radial_sum(u, &grid, &spec.centers()[..1])?;
    let vol = grid.cell_volume();
    let f_sum = |v: &[f64]| vol * psum_by(v.len(), &|c| model.big_f(v[c]));
    let (hw, h1) = (w.h1_norm_sq(), one.h1_norm_sq());
    let (fw, f1) = (f_sum(&w.values), f_sum(&one.values));
    Ok(((hw - n_bumps * h1) / (n_bumps * h1)).abs().max(((fw - n_bumps * f1) / (n_bumps * f1)).abs()))
}
