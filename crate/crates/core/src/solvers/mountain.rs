//! Path-deformation mountain pass.
//!
//! Phase 1 relaxes the straight path `0 → u_low` as a string: every interior
//! node moves along the component of its Sobolev gradient orthogonal to the
//! local tangent, then nodes are re-spread at equal H¹ arclength. Phase 2
//! climbs from the highest node: the gradient is reflected along the
//! lowest-curvature direction `τ`, which is refined every few iterations by
//! a preconditioned eigenvector iteration on finite-difference
//! Hessian-vector products.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{dual_norm, Functional};
use crate::numerics::dot;

use super::{classify, rayleigh_quotient, Level, SolveOptions, SolveResult, TraceRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MountainPassOptions {
    /// Nodes on the path, endpoints included.
    pub n_path: usize,
    pub string_iters: usize,
    pub string_step: f64,
    /// Phase-2 iterations between refinements of `τ`.
    pub refine_every: usize,
    pub refine_steps: usize,
    pub refine_rate: f64,
    pub initial_step: f64,
    pub max_step: f64,
}

impl Default for MountainPassOptions {
    fn default() -> Self {
        MountainPassOptions {
            n_path: 21,
            string_iters: 200,
            string_step: 0.5,
            refine_every: 10,
            refine_steps: 5,
            refine_rate: 0.3,
            initial_step: 0.5,
            max_step: 2.0,
        }
    }
}

/// Saddle candidate together with the relaxed path it was taken from.
#[derive(Debug, Clone)]
pub struct MountainPass {
    pub result: SolveResult,
    /// Energies along the phase-1 path.
    pub path_energies: Vec<f64>,
    /// Index of the highest interior node of that path.
    pub max_node: usize,
    /// Final lowest-curvature direction, unit in the K metric.
    pub tangent: Vec<f64>,
    /// Rayleigh quotient of the Hessian along `tangent`.
    pub tangent_curvature: f64,
}

fn combine(a: &[f64], wa: f64, b: &[f64], wb: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| wa * x + wb * y).collect()
}

fn unit<P: Functional>(p: &P, v: Vec<f64>) -> Vec<f64> {
    let n = p.metric_norm(&v);
    if n > 0.0 {
        v.into_iter().map(|x| x / n).collect()
    } else {
        v
    }
}

/// Re-spreads interior nodes at equal K-arclength along the polyline.
fn respread<P: Functional>(p: &P, path: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = path.len();
    let seg: Vec<f64> = path.windows(2).map(|w| p.metric_norm(&combine(&w[1], 1.0, &w[0], -1.0))).collect();
    let mut cum = vec![0.0; m];
    for i in 0..m - 1 {
        cum[i + 1] = cum[i] + seg[i];
    }
    let total = cum[m - 1];
    let mut out = Vec::with_capacity(m);
    out.push(path[0].clone());
    for k in 1..m - 1 {
        let target = total * k as f64 / (m - 1) as f64;
        let j = cum.partition_point(|&c| c <= target).saturating_sub(1).min(m - 2);
        let a = if seg[j] > 0.0 { (target - cum[j]) / seg[j] } else { 0.0 };
        out.push(combine(&path[j], 1.0 - a, &path[j + 1], a));
    }
    out.push(path[m - 1].clone());
    out
}

/// Dual-space Hessian-vector product by central differences of `G`.
fn hessian_vector<P: Functional>(p: &P, u: &[f64], x: &[f64]) -> Vec<f64> {
    let e = 1e-4 * p.h1_norm_sq(u).sqrt().max(1e-300) / p.metric_norm(x).max(1e-300);
    let (_, gp) = p.energy_and_dual(&combine(u, 1.0, x, e));
    let (_, gm) = p.energy_and_dual(&combine(u, 1.0, x, -e));
    gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * e)).collect()
}

/// Mountain-pass point between `0` and a negative-energy state `u_low`.
///
/// Errors when `J(u_low) ≥ 0` (no valley to connect) or when the relaxed
/// path has no interior node above both endpoints.
pub fn mountain_pass<P: Functional>(
    p: &P,
    u_low: &[f64],
    opts: &SolveOptions,
    mp: &MountainPassOptions,
) -> Result<MountainPass> {
    opts.validate()?;
    if mp.n_path < 3 {
        return Err(crate::error::invalid("n_path", "need at least one interior node"));
    }
    let e_low = p.energy(u_low);
    if !(e_low < 0.0) {
        return Err(Error::Precondition(format!(
            "mountain pass needs an endpoint with negative energy, got J = {e_low}"
        )));
    }
    let m = mp.n_path;
    let mut path: Vec<Vec<f64>> = (0..m)
        .map(|k| u_low.iter().map(|x| x * k as f64 / (m - 1) as f64).collect())
        .collect();
    for _ in 0..mp.string_iters {
        for k in 1..m - 1 {
            let ev = p.evaluate(&path[k]);
            let g = p.riesz(&ev.dual);
            let tau = unit(p, combine(&path[k + 1], 1.0, &path[k - 1], -1.0));
            let along = dot(&ev.dual, &tau);
            let mut next: Vec<f64> = path[k]
                .iter()
                .zip(g.iter().zip(&tau))
                .map(|(x, (gi, ti))| x - mp.string_step * (gi - along * ti))
                .collect();
            p.constrain(&mut next);
            path[k] = next;
        }
        path = respread(p, &path);
    }
    let path_energies: Vec<f64> = path.iter().map(|x| p.energy(x)).collect();
    let max_node = (1..m - 1)
        .max_by(|&a, &b| path_energies[a].total_cmp(&path_energies[b]).then(b.cmp(&a)))
        .expect("interior nodes exist");
    let ridge = path_energies[max_node];
    let endpoints = path_energies[0].max(path_energies[m - 1]);
    if !(ridge > endpoints) {
        return Err(Error::NoMountainPass { ridge, endpoints });
    }

    let mut u = path[max_node].clone();
    let mut tau = unit(p, combine(&path[max_node + 1], 1.0, &path[max_node - 1], -1.0));
    let mut step = mp.initial_step;
    let mut ev = p.evaluate(&u);
    let mut g = p.riesz(&ev.dual);
    let mut gn = dual_norm(&ev.dual, &g);
    let g0 = gn;
    let target = opts.tol_grad.threshold(g0);
    let mut trace = vec![TraceRow {
        iteration: 0,
        energy: ev.energy,
        change: 0.0,
        accumulated: ev.energy,
        gradient_norm: gn,
        step: 0.0,
        h1_norm_sq: p.h1_norm_sq(&u),
    }];
    let mut iterations = 0;
    let mut converged = gn <= target;
    while !converged && iterations < opts.max_iter && step > 1e-12 {
        if iterations % mp.refine_every.max(1) == 0 {
            for _ in 0..mp.refine_steps {
                let ht = hessian_vector(p, &u, &tau);
                let mu = dot(&ht, &tau);
                let kht = p.riesz(&ht);
                let mut next: Vec<f64> = tau
                    .iter()
                    .zip(&kht)
                    .map(|(t, k)| t - mp.refine_rate * (k - mu * t))
                    .collect();
                p.constrain(&mut next);
                tau = unit(p, next);
            }
        }
        iterations += 1;
        let along = dot(&ev.dual, &tau);
        let mut trial: Vec<f64> = u
            .iter()
            .zip(g.iter().zip(&tau))
            .map(|(x, (gi, ti))| x - step * (gi - 2.0 * along * ti))
            .collect();
        p.constrain(&mut trial);
        let tev = p.evaluate(&trial);
        let tg = p.riesz(&tev.dual);
        let tgn = dual_norm(&tev.dual, &tg);
        if tgn < 1.5 * gn {
            u = trial;
            let change = tev.energy - ev.energy;
            ev = tev;
            g = tg;
            gn = tgn;
            step = (step * 1.1).min(mp.max_step);
            trace.push(TraceRow {
                iteration: iterations,
                energy: ev.energy,
                change,
                accumulated: ev.energy,
                gradient_norm: gn,
                step,
                h1_norm_sq: p.h1_norm_sq(&u),
            });
            converged = gn <= target;
        } else {
            step *= 0.5;
        }
    }
    let norm_sq = p.h1_norm_sq(&u);
    let raw = dot(&ev.dual, &u);
    let mut result = SolveResult {
        energy: ev.energy,
        gradient_norm: gn,
        initial_gradient_norm: g0,
        nehari_residual: if norm_sq > 0.0 { raw / norm_sq } else { raw },
        h1_norm: norm_sq.sqrt(),
        iterations,
        converged,
        classification: super::Classification::NonConverged,
        level: Level::Beta,
        clamp_active: false,
        trace,
        values: u,
    };
    result.classification = classify(p, &result, std::slice::from_ref(&tau), opts.seed);
    let tangent_curvature = rayleigh_quotient(p, &result.values, &tau);
    Ok(MountainPass {
        result,
        path_energies,
        max_node,
        tangent: tau,
        tangent_curvature,
    })
}

impl MountainPass {
    /// `node,energy,is_max` rows of the relaxed path.
    pub fn path_csv(&self) -> String {
        let mut out = String::from("node,energy,is_max\n");
        for (k, e) in self.path_energies.iter().enumerate() {
            out.push_str(&format!("{k},{e:e},{}\n", u8::from(k == self.max_node)));
        }
        out
    }
}
