//! Threshold machinery of the pointwise energy density.
//!
//! `f_d(s) = 1/8 + (d/√8)s − (C0/p)s^{p−2}` is convex in `s` with a single
//! stationary point `s0(d)`; `d0` is the unique `d` with `min f_d = 0`.
//! Writing `b = C0/p`, `β = p − 2`:
//!
//! * `s0(d) = (√8·bβ/d)^{1/(1−β)}`
//! * `s0(d0) = (8b(1−β))^{−1/β}`
//! * `d0^{β} = C0·2^{3(4−p)/2}(3−p)^{3−p}(p−2)^{p−2}/p`
//!
//! The closed form is kept as a cross-check; [`compute_d0`] bisects.

use std::f64::consts::SQRT_2;

use serde::Serialize;

use crate::dd::Dd;
use crate::error::{invalid, Error, Result};
use crate::numerics::{adaptive_simpson, bisect, log_grid};

use super::ChargeProfile;

const SQRT8: f64 = 2.0 * SQRT_2;

fn check_cp(c0: f64, p: f64) -> Result<()> {
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(invalid("c0", format!("{c0} must be positive")));
    }
    if !(p > 2.0 && p < 3.0) {
        return Err(invalid("p", format!("{p} not in (2, 3)")));
    }
    Ok(())
}

/// `f_d(s)`; rejects `s ≤ 0`.
pub fn f_d(d: f64, s: f64, c0: f64, p: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(invalid("s", format!("{s} must be positive")));
    }
    Ok(0.125 + d / SQRT8 * s - c0 / p * s.powf(p - 2.0))
}

/// Analytic `f_d′(s)`.
pub fn f_d_prime(d: f64, s: f64, c0: f64, p: f64) -> f64 {
    d / SQRT8 - c0 * (p - 2.0) / p * s.powf(p - 3.0)
}

/// Stationary point of `f_d`.
pub fn s0(d: f64, c0: f64, p: f64) -> f64 {
    (SQRT8 * c0 * (p - 2.0) / (p * d)).powf(1.0 / (3.0 - p))
}

fn sqrt8_dd() -> Dd {
    Dd::from_f64(8.0).sqrt()
}

/// [`s0`] in double-double.
pub fn s0_dd(d: f64, c0: f64, p: f64) -> Dd {
    let (c0, pd, dd) = (Dd::from(c0), Dd::from(p), Dd::from(d));
    let beta = pd - Dd::from(2.0);
    let base = sqrt8_dd() * c0 * beta / (pd * dd);
    base.powd(Dd::ONE / (Dd::from(3.0) - pd))
}

/// `f_d(s)` in double-double.
pub fn f_d_dd(d: Dd, s: Dd, c0: f64, p: f64) -> Dd {
    let (c0, pd) = (Dd::from(c0), Dd::from(p));
    Dd::from(0.125) + d / sqrt8_dd() * s - c0 / pd * s.powd(pd - Dd::from(2.0))
}

/// `f_d′(s)` in double-double.
pub fn f_d_prime_dd(d: Dd, s: Dd, c0: f64, p: f64) -> Dd {
    let (c0, pd) = (Dd::from(c0), Dd::from(p));
    d / sqrt8_dd() - c0 * (pd - Dd::from(2.0)) / pd * s.powd(pd - Dd::from(3.0))
}

/// `|f_d′(s0(d))|`, both evaluated in double-double.
pub fn stationary_residual(d: f64, c0: f64, p: f64) -> f64 {
    f_d_prime_dd(Dd::from(d), s0_dd(d, c0, p), c0, p).to_f64().abs()
}

/// `min_s f_d(s) = f_d(s0(d))` in double-double.
fn inner_min_dd(d: Dd, c0: f64, p: f64) -> Dd {
    let (c0d, pd) = (Dd::from(c0), Dd::from(p));
    let beta = pd - Dd::from(2.0);
    let s = (sqrt8_dd() * c0d * beta / (pd * d)).powd(Dd::ONE / (Dd::from(3.0) - pd));
    f_d_dd(d, s, c0, p)
}

/// Threshold `d0(C0, p)`: bisection on `d` for `min_s f_d(s) = 0`.
///
/// The inner minimum is increasing in `d`, so a geometric bracket followed
/// by double-double bisection is exact to the last bit of the result.
pub fn compute_d0(c0: f64, p: f64) -> Result<f64> {
    check_cp(c0, p)?;
    let g = |d: Dd| inner_min_dd(d, c0, p);
    let (mut lo, mut hi) = (Dd::ONE, Dd::ONE);
    while g(hi).hi < 0.0 {
        hi = hi * Dd::from(4.0);
        if hi.hi > 1e280 {
            return Err(Error::Precondition(format!("d0 bracket overflow for C0 = {c0}, p = {p}")));
        }
    }
    while g(lo).hi > 0.0 {
        lo = lo * Dd::from(0.25);
        if lo.hi < 1e-280 {
            return Err(Error::Precondition(format!("d0 bracket underflow for C0 = {c0}, p = {p}")));
        }
    }
    for _ in 0..400 {
        let mid = (lo + hi) * Dd::from(0.5);
        if g(mid).hi < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).hi <= 1e-30 * hi.hi {
            break;
        }
    }
    Ok(((lo + hi) * Dd::from(0.5)).to_f64())
}

/// Closed form of `d0` with `(p−2)^{p−2}` in the numerator.
pub fn d0_closed_form(c0: f64, p: f64) -> f64 {
    let beta = p - 2.0;
    (c0 * 2f64.powf(1.5 * (4.0 - p)) * (3.0 - p).powf(3.0 - p) * beta.powf(beta) / p).powf(1.0 / beta)
}

/// Minimum of `f_d` over `n` log-spaced points in `[s0/1e3, s0·1e3]`.
pub fn grid_minimum(d: f64, c0: f64, p: f64, n: usize) -> f64 {
    let centre = s0(d, c0, p);
    log_grid(centre * 1e-3, centre * 1e3, n)
        .into_iter()
        .map(|s| 0.125 + d / SQRT8 * s - c0 / p * s.powf(p - 2.0))
        .fold(f64::INFINITY, f64::min)
}

/// `inf_{s≥0} s²/8 + ρs³/√8 − (C0/p)s^p`, i.e. `inf_s s²·f_ρ(s)`.
///
/// The derivative is `s·k(s)` with `k` convex and `k(0) = 1/4`; the infimum
/// is 0 unless `k` dips below zero, in which case it is attained at the
/// larger root of `k`.
pub fn m_rho_value(rho: f64, c0: f64, p: f64) -> f64 {
    let beta = p - 2.0;
    let h = |s: f64| s * s * (0.125 + rho * s / SQRT8 - c0 / p * s.powf(beta));
    let k = |s: f64| 0.25 + 3.0 * rho * s / SQRT8 - c0 * s.powf(beta);
    if c0 == 0.0 {
        return 0.0;
    }
    if rho <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let s_k = (c0 * beta * SQRT8 / (3.0 * rho)).powf(1.0 / (1.0 - beta));
    if k(s_k) >= 0.0 {
        return 0.0;
    }
    let mut hi = 2.0 * s_k;
    while k(hi) < 0.0 {
        hi *= 2.0;
    }
    let s_star = bisect(k, s_k, hi, 200).expect("bracketed root of convex k");
    h(s_star).min(0.0)
}

/// `m_ρ(x)` for the charge profile at position `x`.
pub fn m_rho(profile: &ChargeProfile, x: [f64; 3], c0: f64, p: f64) -> f64 {
    m_rho_value(profile.at(x), c0, p)
}

/// Degenerate outcomes of the sublevel-set integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Degeneracy {
    /// `ρ ≥ d0` everywhere: the sublevel set is empty.
    EmptySublevel,
}

/// `∫_{ρ<d0} m_ρ` and the measure of `{ρ < d0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoercivityFloor {
    pub floor: f64,
    pub measure: f64,
    /// `inf_{ρ<d0} m_ρ`, for the mean-value check `floor ≥ inf·measure`.
    pub m_inf: f64,
    pub degenerate: Option<Degeneracy>,
}

const SCAN_CELLS: usize = 4096;

/// Integral of `m_ρ` over the bounded set `{ρ_ε < d0}` for radial profiles.
pub fn coercivity_floor(profile: &ChargeProfile, c0: f64, p: f64) -> Result<CoercivityFloor> {
    check_cp(c0, p)?;
    if !profile.is_radial() {
        return Err(Error::Precondition("coercivity floor is implemented for radial profiles".into()));
    }
    let d0 = compute_d0(c0, p)?;
    let rho_inf = profile.rho_inf();
    if rho_inf <= d0 {
        return Err(Error::UnboundedSublevel { rho_inf, d0 });
    }
    if profile.rho_min() >= d0 {
        return Ok(CoercivityFloor {
            floor: 0.0,
            measure: 0.0,
            m_inf: 0.0,
            degenerate: Some(Degeneracy::EmptySublevel),
        });
    }
    // beyond r_out the profile is within half the gap of ρ∞ > d0
    let r_out = profile.settle_radius(0.5 * (rho_inf - d0)).max(1e-12) * 1.0001;
    let gap = |r: f64| profile.at_radius(r) - d0;
    let mut intervals = Vec::new();
    let mut start = if gap(0.0) < 0.0 { Some(0.0) } else { None };
    let dr = r_out / SCAN_CELLS as f64;
    for i in 0..SCAN_CELLS {
        let (a, b) = (i as f64 * dr, (i + 1) as f64 * dr);
        let (ga, gb) = (gap(a), gap(b));
        if ga < 0.0 && gb >= 0.0 {
            let root = bisect(gap, a, b, 200)?;
            intervals.push((start.take().unwrap_or(a), root));
        } else if ga >= 0.0 && gb < 0.0 {
            start = Some(bisect(gap, a, b, 200)?);
        }
    }
    if let Some(s) = start {
        intervals.push((s, r_out));
    }
    let shell = |r: f64| 4.0 * std::f64::consts::PI * r * r;
    let integrand = |r: f64| m_rho_value(profile.at_radius(r), c0, p) * shell(r);
    let mut floor = 0.0;
    let mut measure = 0.0;
    let mut m_inf = 0.0f64;
    for &(a, b) in &intervals {
        let scale = m_rho_value(profile.rho_min(), c0, p).abs() * shell(b) * (b - a);
        floor += adaptive_simpson(&integrand, a, b, 1e-12 * scale.max(1e-300));
        measure += 4.0 / 3.0 * std::f64::consts::PI * (b * b * b - a * a * a);
        for j in 0..=256 {
            let r = a + (b - a) * j as f64 / 256.0;
            m_inf = m_inf.min(m_rho_value(profile.at_radius(r), c0, p));
        }
    }
    Ok(CoercivityFloor {
        floor,
        measure,
        m_inf,
        degenerate: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ProfileShape;
    use crate::numerics::golden_max;

    #[test]
    fn f_d_examples() {
        assert!((f_d(0.5, 1e-300, 1.0, 2.5).unwrap() - 0.125).abs() < 1e-15);
        assert!(f_d(0.5, 0.0, 1.0, 2.5).is_err());
        let s = s0(0.5, 1.0, 2.5);
        assert!((s - 1.28).abs() < 1e-12);
        // direct evaluation: 1/8 + 0.64/√8 − 0.4·√1.28
        let oracle = 0.125 + 0.64 / 8f64.sqrt() - 0.4 * 1.28f64.sqrt();
        assert!((f_d(0.5, s, 1.0, 2.5).unwrap() - oracle).abs() < 1e-15);
        assert!((oracle + 0.101_27).abs() < 1e-5);
    }

    #[test]
    fn s0_is_root_of_derivative() {
        let s = s0(0.5, 1.0, 2.5);
        let root = bisect(|t| f_d_prime(0.5, t, 1.0, 2.5), 0.1, 10.0, 200).unwrap();
        assert!((s - root).abs() < 1e-12);
        let ratio = s0(1.0, 1.0, 2.5) / s0(0.5, 1.0, 2.5);
        assert!((ratio - 2f64.powf(-2.0)).abs() < 1e-14);
    }

    #[test]
    fn d0_examples() {
        let d0 = compute_d0(1.0, 2.5).unwrap();
        assert!((d0 - 0.905_097).abs() < 1e-6);
        assert!((d0 - d0_closed_form(1.0, 2.5)).abs() < 1e-12);
        assert!((s0(d0, 1.0, 2.5) - 0.390_625).abs() < 1e-12);
        let residual = f_d_dd(Dd::from(d0), s0_dd(d0, 1.0, 2.5), 1.0, 2.5).to_f64();
        assert!(residual.abs() < 1e-10);
        let big = compute_d0(4.0, 2.5).unwrap();
        assert!((big / d0 - 16.0).abs() < 1e-12);
    }

    #[test]
    fn printed_form_fails_zero_property() {
        // (p−2)^{p−2} in the denominator
        let (c0, p) = (1.0f64, 2.5f64);
        let beta = p - 2.0;
        let printed = (c0 * 2f64.powf(1.5 * (4.0 - p)) * (3.0 - p).powf(3.0 - p) / (p * beta.powf(beta)))
            .powf(1.0 / beta);
        let value = f_d(printed, s0(printed, c0, p), c0, p).unwrap();
        assert!(value.abs() > 1e-3);
    }

    #[test]
    fn sign_properties() {
        let d0 = compute_d0(1.0, 2.5).unwrap();
        assert!(grid_minimum(0.9 * d0, 1.0, 2.5, 1000) < 0.0);
        assert!(grid_minimum(1.1 * d0, 1.0, 2.5, 1000) > 0.0);
    }

    #[test]
    fn m_rho_matches_bracketed_minimisation() {
        let oracle = -golden_max(
            |s| -(s * s / 8.0 + 0.5 * s.powi(3) / 8f64.sqrt() - 0.4 * s.powf(2.5)),
            0.0,
            10.0,
            1e-14,
        )
        .1;
        let m = m_rho_value(0.5, 1.0, 2.5);
        assert!(m < 0.0);
        assert!((m - oracle).abs() < 1e-12);
        let d0 = compute_d0(1.0, 2.5).unwrap();
        assert_eq!(m_rho_value(2.0 * d0, 1.0, 2.5), 0.0);
        assert!(m_rho_value(d0, 1.0, 2.5).abs() < 1e-8);
    }

    #[test]
    fn floor_of_unit_ball_ramp() {
        let (c0, p) = (1.0, 2.5);
        let d0 = compute_d0(c0, p).unwrap();
        // ρ(r) = d0(0.5 + 0.5 min(r, 1)): ρ < d0 exactly on r < 1
        let profile = ChargeProfile::new(
            ProfileShape::Table {
                r: vec![0.0, 1.0, 2.0],
                rho: vec![0.5 * d0, d0, d0],
            },
            1.0,
        )
        .unwrap();
        // constant tail equals d0: use a slightly raised tail for boundedness
        assert!(coercivity_floor(&profile, c0, p).is_err());
        let profile = ChargeProfile::new(
            ProfileShape::Table {
                r: vec![0.0, 1.0, 1.0 + 1e-9, 2.0],
                rho: vec![0.5 * d0, d0, 1.5 * d0, 1.5 * d0],
            },
            1.0,
        )
        .unwrap();
        let fl = coercivity_floor(&profile, c0, p).unwrap();
        let oracle = crate::numerics::gauss_legendre(64);
        let nested: f64 = oracle
            .0
            .iter()
            .zip(&oracle.1)
            .map(|(x, w)| {
                let r = 0.5 * (x + 1.0);
                0.5 * w * m_rho_value(d0 * (0.5 + 0.5 * r), c0, p) * 4.0 * std::f64::consts::PI * r * r
            })
            .sum();
        assert!((fl.measure - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-6);
        assert!((fl.floor - nested).abs() < 1e-8 * nested.abs());
        assert!(fl.floor < 0.0);
        assert!(fl.floor >= fl.m_inf * fl.measure);
    }

    #[test]
    fn floor_degenerate_cases() {
        let d0 = compute_d0(1.0, 2.5).unwrap();
        let high = ChargeProfile::constant(2.0 * d0).unwrap();
        let f = coercivity_floor(&high, 1.0, 2.5).unwrap();
        assert_eq!(f.degenerate, Some(Degeneracy::EmptySublevel));
        assert_eq!((f.floor, f.measure), (0.0, 0.0));
        let low = ChargeProfile::constant(0.5 * d0).unwrap();
        assert!(matches!(
            coercivity_floor(&low, 1.0, 2.5),
            Err(Error::UnboundedSublevel { .. })
        ));
    }
}
