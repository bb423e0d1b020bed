//! Critical-point search: Sobolev-gradient descent to minimizers and a
//! two-phase path method for mountain-pass points.
//!
//! Every solver works through [`Functional`], so the radial and the 3-D
//! energies share one implementation. Convergence is always certified by
//! the dual norm `sqrt(G·K⁻¹G)` of the raw derivative.

mod mountain;
#[cfg(test)]
mod tests;

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::functional::{dual_norm, Evaluation, Functional};
use crate::numerics::dot;

pub use mountain::{mountain_pass, MountainPass, MountainPassOptions};

/// Stopping rule on the dual gradient norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum GradTol {
    /// Fraction of the norm at the initial point.
    Relative(f64),
    Absolute(f64),
}

impl GradTol {
    pub fn threshold(&self, initial: f64) -> f64 {
        match *self {
            GradTol::Relative(r) => r * initial,
            GradTol::Absolute(a) => a,
        }
    }

    fn value(&self) -> f64 {
        match *self {
            GradTol::Relative(v) | GradTol::Absolute(v) => v,
        }
    }
}

impl Default for GradTol {
    fn default() -> Self {
        GradTol::Relative(1e-6)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub tol_grad: GradTol,
    pub max_iter: usize,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo_c: f64,
    /// Step reduction factor on a rejected trial.
    pub backtrack: f64,
    pub seed: u64,
    /// Project onto `u ≥ 0` after every step.
    pub clamp: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol_grad: GradTol::default(),
            max_iter: 10_000,
            armijo_c: 1e-4,
            backtrack: 0.5,
            seed: 0,
            clamp: true,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_grad.value() > 0.0) {
            return Err(invalid("tol_grad", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter", "must be at least 1"));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(invalid("armijo_c", "must lie in (0, 1)"));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(invalid("backtrack", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Minimizer,
    MountainPass,
    Zero,
    NonConverged,
}

/// Which critical level a result approximates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Level {
    /// Global minimum over the full space.
    Alpha,
    /// Minimum over radial fields.
    Theta,
    /// Mountain-pass level.
    Beta,
    #[default]
    Unlabeled,
}

/// One accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub energy: f64,
    /// Termwise `ΔJ` of the accepted step, 0 on the first row; strictly
    /// negative for descent even once it is below the ulp of `energy`.
    pub change: f64,
    /// `J(u_0) + Σ ΔJ`; non-increasing for descent.
    pub accumulated: f64,
    pub gradient_norm: f64,
    pub step: f64,
    pub h1_norm_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    #[serde(skip)]
    pub values: Vec<f64>,
    pub energy: f64,
    pub gradient_norm: f64,
    pub initial_gradient_norm: f64,
    /// `J′(u)[u] / ‖u‖²`, or the raw value at `u = 0`.
    pub nehari_residual: f64,
    pub h1_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub classification: Classification,
    pub level: Level,
    /// Whether the last step hit the `u ≥ 0` projection.
    pub clamp_active: bool,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

/// Below this H¹ norm a field counts as the zero solution.
pub const ZERO_NORM: f64 = 1e-6;
/// Rayleigh quotients at or above this value count as nonnegative curvature.
pub const CURVATURE_TOL: f64 = -1e-4;
pub const PROBE_DIRECTIONS: usize = 20;
const MIN_STEP: f64 = 1e-14;

impl SolveResult {
    /// `iteration,energy,change,accumulated,gradient_norm,step,h1_norm_sq` rows.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,energy,change,accumulated,gradient_norm,step,h1_norm_sq\n");
        for r in &self.trace {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.iteration, r.energy, r.change, r.accumulated, r.gradient_norm, r.step, r.h1_norm_sq
            );
        }
        out
    }

    pub fn with_level(mut self, level: Level) -> Self {
        self.level = level;
        self
    }
}

fn project(p: &impl Functional, v: &mut [f64], clamp: bool) -> bool {
    p.constrain(v);
    let mut hit = false;
    if clamp {
        for x in v.iter_mut() {
            if *x < 0.0 {
                *x = 0.0;
                hit = true;
            }
        }
    }
    hit
}

/// Sobolev-gradient descent with Barzilai–Borwein steps in the H¹ metric
/// and Armijo backtracking. Each accepted step strictly lowers `J`;
/// non-convergence is reported in the result, not as an error.
pub fn minimize<P: Functional>(p: &P, init: &[f64], opts: &SolveOptions) -> Result<SolveResult> {
    opts.validate()?;
    if init.len() != p.dim() {
        return Err(crate::Error::DimensionMismatch {
            expected: p.dim(),
            got: init.len(),
        });
    }
    let mut u = init.to_vec();
    project(p, &mut u, opts.clamp);
    let mut cur = p.evaluate(&u);
    let mut g = p.riesz(&cur.dual);
    let mut gn = dual_norm(&cur.dual, &g);
    let g0 = gn;
    let target = opts.tol_grad.threshold(g0);
    let mut accumulated = cur.energy;
    let mut trace = vec![TraceRow {
        iteration: 0,
        energy: cur.energy,
        change: 0.0,
        accumulated,
        gradient_norm: gn,
        step: 0.0,
        h1_norm_sq: p.h1_norm_sq(&u),
    }];
    let mut t = 1.0;
    let mut clamp_active = false;
    let mut iterations = 0;
    let mut converged = gn <= target;
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let mut accepted: Option<(Vec<f64>, Evaluation, f64, bool)> = None;
        let mut step = t;
        while step >= MIN_STEP {
            let mut trial: Vec<f64> = u.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            let hit = project(p, &mut trial, opts.clamp);
            let predicted: f64 = cur.dual.iter().zip(trial.iter().zip(&u)).map(|(g, (a, b))| g * (a - b)).sum();
            if predicted < 0.0 {
                let ev = p.evaluate(&trial);
                let change = p.energy_change(&u, &cur, &trial, &ev);
                if change < 0.0 && change <= opts.armijo_c * predicted {
                    accepted = Some((trial, ev, change, hit));
                    break;
                }
            }
            step *= opts.backtrack;
        }
        let Some((next, ev, change, hit)) = accepted else {
            log::debug!("line search stalled at iteration {iterations}, |g| = {gn:e}");
            break;
        };
        let s: Vec<f64> = next.iter().zip(&u).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = ev.dual.iter().zip(&cur.dual).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        // BB1 step in the K metric: ⟨s,s⟩_K / ⟨s, K⁻¹y⟩_K = s·Ks / s·y
        t = if sy > 0.0 { dot(&s, &p.gram(&s)) / sy } else { step };
        u = next;
        cur = ev;
        accumulated += change;
        clamp_active = hit;
        g = p.riesz(&cur.dual);
        gn = dual_norm(&cur.dual, &g);
        trace.push(TraceRow {
            iteration: iterations,
            energy: cur.energy,
            change,
            accumulated,
            gradient_norm: gn,
            step,
            h1_norm_sq: p.h1_norm_sq(&u),
        });
        converged = gn <= target;
    }
    Ok(finish(p, u, cur, gn, g0, iterations, converged, clamp_active, trace, opts))
}

#[allow(clippy::too_many_arguments)]
fn finish<P: Functional>(
    p: &P,
    u: Vec<f64>,
    cur: Evaluation,
    gn: f64,
    g0: f64,
    iterations: usize,
    converged: bool,
    clamp_active: bool,
    trace: Vec<TraceRow>,
    opts: &SolveOptions,
) -> SolveResult {
    let norm_sq = p.h1_norm_sq(&u);
    let raw = dot(&cur.dual, &u);
    let mut result = SolveResult {
        energy: cur.energy,
        gradient_norm: gn,
        initial_gradient_norm: g0,
        nehari_residual: if norm_sq > 0.0 { raw / norm_sq } else { raw },
        h1_norm: norm_sq.sqrt(),
        iterations,
        converged,
        classification: Classification::NonConverged,
        level: Level::Unlabeled,
        clamp_active,
        trace,
        values: u,
    };
    result.classification = classify(p, &result, &[], opts.seed);
    result
}

/// Curvature `v·H v / v·Kv` from a central difference of the dual gradient.
pub fn rayleigh_quotient<P: Functional>(p: &P, u: &[f64], v: &[f64]) -> f64 {
    let vk = p.metric_norm(v);
    if vk == 0.0 {
        return 0.0;
    }
    let scale = p.h1_norm_sq(u).sqrt().max(1.0);
    let eps = 1e-4 * scale / vk;
    let shift = |s: f64| -> Vec<f64> { u.iter().zip(v).map(|(a, b)| a + s * b).collect() };
    let (_, gp) = p.energy_and_dual(&shift(eps));
    let (_, gm) = p.energy_and_dual(&shift(-eps));
    let hv: f64 = gp.iter().zip(&gm).zip(v).map(|((a, b), c)| (a - b) * c).sum();
    hv / (2.0 * eps) / (vk * vk)
}

/// Smooth random direction `K⁻¹ξ` for white noise `ξ`.
pub fn random_probe<P: Functional>(p: &P, rng: &mut impl Rng) -> Vec<f64> {
    let mut xi: Vec<f64> = (0..p.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    p.constrain(&mut xi);
    let mut v = p.riesz(&xi);
    p.constrain(&mut v);
    v
}

/// Zero below [`ZERO_NORM`]; otherwise a minimizer when no probe direction
/// (the field itself, `extra`, and [`PROBE_DIRECTIONS`] random ones) has
/// curvature below [`CURVATURE_TOL`].
pub fn classify<P: Functional>(p: &P, result: &SolveResult, extra: &[Vec<f64>], seed: u64) -> Classification {
    if result.h1_norm < ZERO_NORM {
        return Classification::Zero;
    }
    if !result.converged {
        return Classification::NonConverged;
    }
    if min_curvature(p, &result.values, extra, seed) >= CURVATURE_TOL {
        Classification::Minimizer
    } else {
        Classification::MountainPass
    }
}

/// Smallest probed Rayleigh quotient at `u`.
pub fn min_curvature<P: Functional>(p: &P, u: &[f64], extra: &[Vec<f64>], seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c1a5);
    let mut worst = rayleigh_quotient(p, u, u);
    for v in extra {
        worst = worst.min(rayleigh_quotient(p, u, v));
    }
    for _ in 0..PROBE_DIRECTIONS {
        let v = random_probe(p, &mut rng);
        worst = worst.min(rayleigh_quotient(p, u, &v));
    }
    worst
}

/// All results of a multistart run and the selected best one.
#[derive(Debug, Clone)]
pub struct Multistart {
    pub results: Vec<SolveResult>,
    /// Index of the best converged result, if any converged.
    pub best: Option<usize>,
}

impl Multistart {
    pub fn best(&self) -> Option<&SolveResult> {
        self.best.map(|i| &self.results[i])
    }

    pub fn all_failed(&self) -> bool {
        self.best.is_none()
    }
}

/// Minimizes from every start. Starts run concurrently unless `serial`;
/// the selection (lowest energy, then lowest gradient norm, then earliest
/// start) does not depend on scheduling.
pub fn multistart_minimize<P: Functional>(
    p: &P,
    starts: &[Vec<f64>],
    opts: &SolveOptions,
    serial: bool,
) -> Result<Multistart> {
    if starts.is_empty() {
        return Err(invalid("starts", "need at least one start"));
    }
    let run = |(i, s): (usize, &Vec<f64>)| {
        let o = SolveOptions {
            seed: opts.seed.wrapping_add(i as u64),
            ..*opts
        };
        minimize(p, s, &o)
    };
    let results: Vec<SolveResult> = if serial {
        starts.iter().enumerate().map(run).collect::<Result<_>>()?
    } else {
        starts.par_iter().enumerate().map(run).collect::<Result<_>>()?
    };
    let best = results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.converged)
        .min_by(|(i, a), (j, b)| {
            a.energy
                .total_cmp(&b.energy)
                .then(a.gradient_norm.total_cmp(&b.gradient_norm))
                .then(i.cmp(j))
        })
        .map(|(i, _)| i);
    Ok(Multistart { results, best })
}
