//! Closed-form reference problems shared by tests, scenarios and benches.
//!
//! The uniform unit-ball source `g = 1_{|x|<1}` has potential
//! `φ(r) = 1/2 − r²/6` inside and `1/(3r)` outside.

use crate::field3d::Grid3D;
use crate::numerics::adaptive_simpson;
use crate::radial::RadialGrid;

/// Exact potential of the unit-ball source.
pub fn ball_potential(r: f64) -> f64 {
    if r < 1.0 {
        0.5 - r * r / 6.0
    } else {
        1.0 / (3.0 * r)
    }
}

/// Hat-weighted cell fraction of the unit ball, so `Σ W g = 4π/3` exactly.
pub fn unit_ball_radial(grid: &RadialGrid) -> Vec<f64> {
    let h = grid.h;
    (0..=grid.n)
        .map(|i| {
            let ri = grid.nodes[i];
            let hat = |r: f64| (1.0 - (r - ri).abs() / h).max(0.0) * r * r;
            let (a, b) = ((ri - h).max(0.0), (ri + h).min(grid.r_max));
            if b <= 1.0 {
                return 1.0;
            }
            if a >= 1.0 {
                return 0.0;
            }
            let mut inside = 0.0;
            let mut total = 0.0;
            for (lo, hi) in [(a, ri), (ri, b)] {
                if hi <= lo {
                    continue;
                }
                total += adaptive_simpson(&hat, lo, hi, 1e-16);
                let top = hi.min(1.0);
                if top > lo {
                    inside += adaptive_simpson(&hat, lo, top, 1e-16);
                }
            }
            inside / total
        })
        .collect()
}

/// Volume fraction of each cell inside the unit ball at the origin
/// (8³ sub-samples on cells cut by the sphere).
pub fn unit_ball_cells(grid: &Grid3D) -> Vec<f64> {
    let h = grid.h;
    let sub = 8;
    grid.sample(|x| {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        // half cell diagonal is √3/2·h < 0.87h
        if r + h * 0.87 < 1.0 {
            return 1.0;
        }
        if r - h * 0.87 > 1.0 {
            return 0.0;
        }
        let mut inside = 0;
        for a in 0..sub {
            for b in 0..sub {
                for c in 0..sub {
                    let o = |m: usize| (m as f64 + 0.5) / sub as f64 - 0.5;
                    let p = [x[0] + o(a) * h, x[1] + o(b) * h, x[2] + o(c) * h];
                    if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] < 1.0 {
                        inside += 1;
                    }
                }
            }
        }
        inside as f64 / (sub * sub * sub) as f64
    })
}
