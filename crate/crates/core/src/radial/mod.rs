//! Radial discretization of `H¹_r(ℝ³)`.
//!
//! Nodes `r_i = i·h`, `i = 0..=n`. The scheme is P1 finite elements with a
//! lumped mass: volume weights `W_i = ∫ hat_i 4πr² dr` (exact for piecewise
//! linear integrands, so `ΣW_i = 4πR³/3`), edge stiffness
//! `c_e = ∫_e 4πr² dr / h²`, homogeneous Dirichlet data at `r = R`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::functional::{dual_norm, Evaluation, Functional};
pub use crate::functional::EnergyParts;
use crate::models::{ChargeProfile, NonlinearityModel};
use crate::numerics::{dot, psum_by};

/// Uniform radial grid with its quadrature and stiffness weights.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub r_max: f64,
    /// Number of intervals; there are `n + 1` nodes.
    pub n: usize,
    pub h: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub stiffness: Vec<f64>,
}

impl RadialGrid {
    pub fn new(r_max: f64, n: usize) -> Result<Arc<Self>> {
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(invalid("r_max", format!("{r_max} must be positive")));
        }
        if n < 4 {
            return Err(invalid("n", format!("{n} intervals is too coarse")));
        }
        let h = r_max / n as f64;
        let nodes: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        let mut weights = vec![0.0; n + 1];
        weights[0] = 4.0 * PI * h * h * h / 12.0;
        for (i, w) in weights.iter_mut().enumerate().take(n).skip(1) {
            let r = nodes[i];
            *w = 4.0 * PI * h * (r * r + h * h / 6.0);
        }
        weights[n] = 4.0 * PI * (r_max * r_max * h / 2.0 - r_max * h * h / 3.0 + h * h * h / 12.0);
        let stiffness = (0..n)
            .map(|e| {
                let (a, b) = (nodes[e], nodes[e + 1]);
                4.0 * PI * (a * a + a * b + b * b) / (3.0 * h)
            })
            .collect();
        Ok(Arc::new(RadialGrid {
            r_max,
            n,
            h,
            nodes,
            weights,
            stiffness,
        }))
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `∫ g · 4πr² dr`.
    pub fn integrate(&self, g: &[f64]) -> f64 {
        psum_by(g.len(), &|i| self.weights[i] * g[i])
    }

    /// `∫ |∇u|² = Σ_e c_e (u_{e+1} − u_e)²`.
    pub fn dirichlet_form(&self, u: &[f64]) -> f64 {
        psum_by(self.n, &|e| {
            let d = u[e + 1] - u[e];
            self.stiffness[e] * d * d
        })
    }

    /// `Σ_e c_e (Δa)_e (Δb)_e`, the polarization of [`Self::dirichlet_form`].
    pub fn dirichlet_bilinear(&self, a: &[f64], b: &[f64]) -> f64 {
        psum_by(self.n, &|e| self.stiffness[e] * (a[e + 1] - a[e]) * (b[e + 1] - b[e]))
    }

    /// Samples `f(r_i)`.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&r| f(r)).collect()
    }
}

/// Samples of a radial function on a [`RadialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    pub grid: Arc<RadialGrid>,
    pub values: Vec<f64>,
}

/// Relative size of `|u(R)|` above which the truncation is suspect.
pub const DECAY_GUARD: f64 = 1e-6;

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("values", "non-finite sample"));
        }
        Ok(RadialField { grid, values })
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.sample(f);
        RadialField { grid, values }
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let values = vec![0.0; grid.len()];
        RadialField { grid, values }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `|u(R)| < 1e−6 · max|u|`.
    pub fn decay_ok(&self) -> bool {
        let last = self.values[self.grid.n].abs();
        last <= DECAY_GUARD * self.max_abs()
    }

    /// Linear interpolation at radius `r`; zero beyond the grid.
    pub fn interpolate(&self, r: f64) -> f64 {
        let g = &self.grid;
        if r >= g.r_max {
            return if r == g.r_max { self.values[g.n] } else { 0.0 };
        }
        let x = r / g.h;
        let i = (x.floor() as usize).min(g.n - 1);
        let t = x - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    /// Smallest radius beyond which `|u| ≤ rel · max|u|`.
    pub fn support_radius(&self, rel: f64) -> f64 {
        let cut = rel * self.max_abs();
        match self.values.iter().rposition(|v| v.abs() > cut) {
            Some(i) if i < self.grid.n => self.grid.nodes[i + 1],
            Some(_) => self.grid.r_max,
            None => 0.0,
        }
    }

    /// Two-column CSV `r,u`; shortest round-trip formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,u\n");
        for (r, u) in self.grid.nodes.iter().zip(&self.values) {
            let _ = writeln!(out, "{r},{u}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = Vec::new();
        let mut u = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (k == 0 && line.starts_with('r')) {
                continue;
            }
            let mut it = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Table(format!("line {k}: malformed `{line}`")))
            };
            r.push(parse(it.next())?);
            u.push(parse(it.next())?);
        }
        if r.len() < 5 {
            return Err(Error::Table("too few rows".into()));
        }
        let grid = RadialGrid::new(r[r.len() - 1], r.len() - 1)?;
        if grid.nodes.iter().zip(&r).any(|(a, b)| (a - b).abs() > 1e-9 * grid.r_max) {
            return Err(Error::Table("radii are not uniform".into()));
        }
        RadialField::new(grid, u)
    }
}

/// Solution of `−Δφ = g` on the radial grid plus the exterior Coulomb tail.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonPotential {
    pub grid: Arc<RadialGrid>,
    pub values: Vec<f64>,
    /// `Q = ∫ g`.
    pub charge: f64,
}

impl PoissonPotential {
    /// `∫_{ℝ³}|∇φ|²`: grid part plus `Q²/(4πR)` from `r > R`.
    pub fn gradient_energy(&self) -> f64 {
        self.grid.dirichlet_form(&self.values) + self.charge * self.charge / (4.0 * PI * self.grid.r_max)
    }

    /// `φ(r) = Q/(4πr)` beyond the grid.
    pub fn far_field(&self, r: f64) -> f64 {
        self.charge / (4.0 * PI * r)
    }
}

/// `φ_i = Σ_j a_j g_j / max(r_i, r_j)` with `a_j = W_j/4π`, in O(n).
///
/// The kernel matrix is symmetric; the self term at the origin uses the
/// hat-weighted mean of `1/r`, i.e. `2/h`.
fn potential_unchecked(grid: &RadialGrid, g: &[f64]) -> (Vec<f64>, f64) {
    let n = grid.n;
    let a = |j: usize| grid.weights[j] / (4.0 * PI) * g[j];
    let mut phi = vec![0.0; n + 1];
    let mut outer = 0.0;
    for i in (0..=n).rev() {
        phi[i] = outer;
        if i > 0 {
            outer += a(i) / grid.nodes[i];
        }
    }
    let mut inner = 0.0;
    for (i, p) in phi.iter_mut().enumerate() {
        inner += a(i);
        *p += if i == 0 { a(0) * 2.0 / grid.h } else { inner / grid.nodes[i] };
    }
    let charge = grid.integrate(g);
    (phi, charge)
}

/// Free-space radial potential of a nonnegative source.
pub fn poisson_radial(source: &RadialField) -> Result<PoissonPotential> {
    if let Some((index, &value)) = source.values.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::NegativeSource { index, value });
    }
    let (values, charge) = potential_unchecked(&source.grid, &source.values);
    Ok(PoissonPotential {
        grid: source.grid.clone(),
        values,
        charge,
    })
}

/// The radial energy for fixed charge samples and nonlinearity.
#[derive(Debug, Clone)]
pub struct RadialProblem {
    pub grid: Arc<RadialGrid>,
    pub rho: Vec<f64>,
    pub model: NonlinearityModel,
    factor: TriFactor,
}

/// LU factors of the Gram matrix on the free nodes `0..n`.
#[derive(Debug, Clone)]
struct TriFactor {
    lower: Vec<f64>,
    inv_pivot: Vec<f64>,
    upper_scaled: Vec<f64>,
}

impl TriFactor {
    fn new(grid: &RadialGrid) -> Result<Self> {
        let m = grid.n;
        let c = &grid.stiffness;
        let diag: Vec<f64> = (0..m)
            .map(|i| grid.weights[i] + c[i] + if i > 0 { c[i - 1] } else { 0.0 })
            .collect();
        let lower: Vec<f64> = (0..m - 1).map(|i| -c[i]).collect();
        let mut inv_pivot = vec![0.0; m];
        let mut upper_scaled = vec![0.0; m];
        let mut beta = diag[0];
        for i in 0..m {
            if i > 0 {
                beta = diag[i] - lower[i - 1] * upper_scaled[i];
            }
            if !(beta > 0.0) {
                return Err(Error::SingularSystem(i));
            }
            inv_pivot[i] = 1.0 / beta;
            if i + 1 < m {
                upper_scaled[i + 1] = -c[i] / beta;
            }
        }
        Ok(TriFactor {
            lower,
            inv_pivot,
            upper_scaled,
        })
    }

    fn solve(&self, rhs: &mut [f64]) {
        let m = self.inv_pivot.len();
        rhs[0] *= self.inv_pivot[0];
        for i in 1..m {
            rhs[i] = (rhs[i] - self.lower[i - 1] * rhs[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..m - 1).rev() {
            rhs[i] -= self.upper_scaled[i + 1] * rhs[i + 1];
        }
    }
}

impl RadialProblem {
    pub fn new(grid: Arc<RadialGrid>, rho: Vec<f64>, model: NonlinearityModel) -> Result<Self> {
        if rho.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: rho.len(),
            });
        }
        if rho.iter().any(|v| !(*v >= 0.0)) {
            return Err(invalid("rho", "charge samples must be nonnegative"));
        }
        let factor = TriFactor::new(&grid)?;
        Ok(RadialProblem {
            grid,
            rho,
            model,
            factor,
        })
    }

    /// Samples a radial charge profile on the grid.
    pub fn with_profile(grid: Arc<RadialGrid>, profile: &ChargeProfile, model: NonlinearityModel) -> Result<Self> {
        if !profile.is_radial() {
            return Err(invalid("profile", "radial problems need a radial charge"));
        }
        let rho = grid.sample(|r| profile.at_radius(r));
        Self::new(grid, rho, model)
    }

    /// Autonomous problem: `ρ ≡ √λ`, so `ρφ_{ρ,u} = λφ_u`.
    pub fn autonomous(grid: Arc<RadialGrid>, lambda: f64, model: NonlinearityModel) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(invalid("lambda", format!("{lambda} must be nonnegative")));
        }
        let rho = vec![lambda.sqrt(); grid.len()];
        Self::new(grid, rho, model)
    }

    pub fn field(&self, values: Vec<f64>) -> Result<RadialField> {
        RadialField::new(self.grid.clone(), values)
    }

    /// Potential of `ρu²`.
    pub fn potential(&self, u: &[f64]) -> PoissonPotential {
        let g: Vec<f64> = u.iter().zip(&self.rho).map(|(u, r)| r * u * u).collect();
        let (values, charge) = potential_unchecked(&self.grid, &g);
        PoissonPotential {
            grid: self.grid.clone(),
            values,
            charge,
        }
    }

    pub fn parts(&self, u: &[f64]) -> EnergyParts {
        let g = &self.grid;
        let phi = self.potential(u);
        EnergyParts {
            kinetic: g.dirichlet_form(u),
            mass: psum_by(u.len(), &|i| g.weights[i] * u[i] * u[i]),
            coulomb: psum_by(u.len(), &|i| g.weights[i] * self.rho[i] * phi.values[i] * u[i] * u[i]),
            potential: psum_by(u.len(), &|i| g.weights[i] * self.model.big_f(u[i])),
            work: psum_by(u.len(), &|i| g.weights[i] * self.model.f(u[i]) * u[i]),
        }
    }

    /// Sobolev gradient `K⁻¹G` and its dual norm.
    pub fn sobolev_gradient(&self, u: &[f64]) -> (Vec<f64>, f64) {
        let (_, dual) = self.energy_and_dual(u);
        let g = self.riesz(&dual);
        let norm = dual_norm(&dual, &g);
        (g, norm)
    }
}

impl Functional for RadialProblem {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn energy(&self, u: &[f64]) -> f64 {
        self.parts(u).energy()
    }

    fn evaluate(&self, u: &[f64]) -> Evaluation {
        let g = &self.grid;
        let n = g.n;
        let c = &g.stiffness;
        let phi = self.potential(u);
        let mut dual = vec![0.0; n + 1];
        for i in 0..n {
            let left = if i > 0 { c[i - 1] * (u[i] - u[i - 1]) } else { 0.0 };
            let right = c[i] * (u[i] - u[i + 1]);
            let w = g.weights[i];
            dual[i] = w * u[i] + left + right + w * (self.rho[i] * phi.values[i] * u[i] - self.model.f(u[i]));
        }
        let parts = EnergyParts {
            kinetic: g.dirichlet_form(u),
            mass: psum_by(u.len(), &|i| g.weights[i] * u[i] * u[i]),
            coulomb: psum_by(u.len(), &|i| g.weights[i] * self.rho[i] * phi.values[i] * u[i] * u[i]),
            potential: psum_by(u.len(), &|i| g.weights[i] * self.model.big_f(u[i])),
            work: 0.0,
        };
        Evaluation {
            energy: parts.energy(),
            dual,
            potential: phi.values,
        }
    }

    fn energy_change(&self, u: &[f64], at_u: &Evaluation, v: &[f64], at_v: &Evaluation) -> f64 {
        let g = &self.grid;
        let diff: Vec<f64> = v.iter().zip(u).map(|(b, a)| b - a).collect();
        let sum: Vec<f64> = v.iter().zip(u).map(|(b, a)| b + a).collect();
        let kinetic = g.dirichlet_bilinear(&diff, &sum);
        let mass = psum_by(u.len(), &|i| g.weights[i] * diff[i] * sum[i]);
        // ΔΣWρφu² = ΣWρ(v² − u²)(φ_u + φ_v) by symmetry of the kernel
        let coulomb = psum_by(u.len(), &|i| {
            g.weights[i] * self.rho[i] * diff[i] * sum[i] * (at_u.potential[i] + at_v.potential[i])
        });
        let potential = psum_by(u.len(), &|i| g.weights[i] * self.model.big_f_change(u[i], v[i]));
        0.5 * (kinetic + mass) + 0.25 * coulomb - potential
    }

    fn riesz(&self, dual: &[f64]) -> Vec<f64> {
        let n = self.grid.n;
        let mut out = dual.to_vec();
        out[n] = 0.0;
        self.factor.solve(&mut out[..n]);
        out
    }

    fn gram(&self, v: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let n = g.n;
        let c = &g.stiffness;
        let mut out = vec![0.0; n + 1];
        for i in 0..n {
            let left = if i > 0 { c[i - 1] * (v[i] - v[i - 1]) } else { 0.0 };
            out[i] = g.weights[i] * v[i] + left + c[i] * (v[i] - v[i + 1]);
        }
        out
    }

    fn h1_norm_sq(&self, u: &[f64]) -> f64 {
        self.grid.dirichlet_form(u) + psum_by(u.len(), &|i| self.grid.weights[i] * u[i] * u[i])
    }

    fn constrain(&self, v: &mut [f64]) {
        v[self.grid.n] = 0.0;
    }
}

/// `∫(|u′|² + u²)·4πr² dr`.
pub fn h1_norm_sq(u: &RadialField) -> f64 {
    let g = &u.grid;
    g.dirichlet_form(&u.values) + psum_by(u.values.len(), &|i| g.weights[i] * u.values[i] * u.values[i])
}

fn sampled_rho(grid: &RadialGrid, profile: &ChargeProfile) -> Result<Vec<f64>> {
    if !profile.is_radial() {
        return Err(invalid("profile", "radial quantities need a radial charge"));
    }
    Ok(grid.sample(|r| profile.at_radius(r)))
}

/// `∫ρφ_{ρ,u}u²`.
pub fn nonlocal_term(u: &RadialField, profile: &ChargeProfile) -> Result<f64> {
    let grid = &u.grid;
    let rho = sampled_rho(grid, profile)?;
    let g: Vec<f64> = u.values.iter().zip(&rho).map(|(u, r)| r * u * u).collect();
    let (phi, _) = potential_unchecked(grid, &g);
    Ok(psum_by(g.len(), &|i| grid.weights[i] * g[i] * phi[i]))
}

/// `J_ρ(u)`.
pub fn energy_radial(u: &RadialField, profile: &ChargeProfile, model: &NonlinearityModel) -> Result<f64> {
    let p = RadialProblem::with_profile(u.grid.clone(), profile, model.clone())?;
    Ok(p.energy(&u.values))
}

/// H¹-Riesz representative of `J′(u)`.
pub fn sobolev_gradient_radial(
    u: &RadialField,
    profile: &ChargeProfile,
    model: &NonlinearityModel,
) -> Result<RadialField> {
    let p = RadialProblem::with_profile(u.grid.clone(), profile, model.clone())?;
    let (g, _) = p.sobolev_gradient(&u.values);
    RadialField::new(u.grid.clone(), g)
}

/// Both sides of `(1/√8)∫ρ|u|³ ≤ ¼∫|∇u|² + ⅛∫ρφ_{ρ,u}u²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StraussCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn strauss_check(u: &RadialField, profile: &ChargeProfile) -> Result<StraussCheck> {
    let grid = &u.grid;
    let rho = sampled_rho(grid, profile)?;
    let v = &u.values;
    let lhs = psum_by(v.len(), &|i| grid.weights[i] * rho[i] * v[i].abs().powi(3)) / 8f64.sqrt();
    let rhs = 0.25 * grid.dirichlet_form(v) + 0.125 * nonlocal_term(u, profile)?;
    Ok(StraussCheck {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + 1e-6),
    })
}

/// `‖u‖² + ∫ρφu² − ∫f(u)u`, absolute and relative to `‖u‖²`.
pub fn nehari_residual(u: &RadialField, profile: &ChargeProfile, model: &NonlinearityModel) -> Result<(f64, f64)> {
    let p = RadialProblem::with_profile(u.grid.clone(), profile, model.clone())?;
    let parts = p.parts(&u.values);
    let raw = parts.h1_sq() + parts.coulomb - parts.work;
    let norm = parts.h1_sq();
    Ok((raw, if norm > 0.0 { raw / norm } else { raw }))
}

/// Random smooth radial field: a Gaussian envelope times a short cosine
/// series, scaled by a log-uniform amplitude; vanishes at `r = R`.
pub fn random_band_limited(grid: &Arc<RadialGrid>, rng: &mut impl Rng, modes: usize) -> RadialField {
    let sigma = rng.random_range(1.0..4.0);
    let amp = 10f64.powf(rng.random_range(-1.0..2.0));
    let coeffs: Vec<f64> = (0..modes).map(|_| rng.random_range(-1.0..1.0)).collect();
    let period = 3.0 * sigma;
    let mut f = RadialField::from_fn(grid.clone(), |r| {
        let series: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| a * (k as f64 * PI * r / period).cos())
            .sum();
        amp * series * (-(r / sigma).powi(2)).exp()
    });
    let n = grid.n;
    f.values[n] = 0.0;
    f
}

/// Random direction with the Dirichlet node pinned.
pub fn random_direction(grid: &Arc<RadialGrid>, rng: &mut impl Rng) -> Vec<f64> {
    let mut v = random_band_limited(grid, rng, 6).values;
    let norm = dot(&v, &v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

#[cfg(test)]
mod tests;
