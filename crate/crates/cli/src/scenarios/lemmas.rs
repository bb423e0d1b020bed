//! Constant machinery, Poisson and gradient oracles, the inequality suites
//! and the coupling-threshold bounds.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spvar::field3d::{gradient_energy, poisson_freespace, random_smooth};
use spvar::landscape::{estimate_lambda_bounds, threshold_ratios, TrialFamily};
use spvar::models::{coercivity_floor, compute_d0, f_d, grid_minimum, s0, stationary_residual};
use spvar::numerics::dot;
use spvar::oracles::{ball_potential, unit_ball_cells, unit_ball_radial};
use spvar::radial::{poisson_radial, random_band_limited, random_direction, strauss_check};
use spvar::solvers::minimize;
use spvar::{
    ChargeProfile, Field3D, FreeSpacePoisson, Functional, Grid3D, NonlinearityKind, Problem3D, ProfileShape,
    RadialField, RadialGrid, RadialProblem,
};

use super::{absolute, fmt_e, gaussian, Context};
use crate::error::CliResult;
use crate::report::Series;
use crate::Recorder;

const SAMPLES: usize = 20;
const FIELDS: usize = 100;
const FD_FIELDS: usize = 10;
const FD_DIRECTIONS: usize = 10;

pub(crate) fn run(ctx: &Context, rec: &mut Recorder) -> CliResult<()> {
    rec.step("constants", |rec| constants(ctx, rec))?;
    rec.step("poisson", poisson)?;
    rec.step("gradients", |rec| gradients(ctx, rec))?;
    rec.step("inequalities", |rec| inequalities(ctx, rec))?;
    rec.step("bounds", |rec| bounds(ctx, rec))?;
    Ok(())
}

fn constants(ctx: &Context, rec: &mut Recorder) -> CliResult<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut root = 0.0f64;
    let mut stationary = 0.0f64;
    let mut signs = true;
    let mut table = Series::new(&["c0", "p", "d0", "root_residual", "stationary_residual"]);
    for _ in 0..SAMPLES {
        let c0 = rng.random_range(0.1..10.0);
        let p = rng.random_range(2.1..2.9);
        let d0 = compute_d0(c0, p)?;
        let r = f_d(d0, s0(d0, c0, p), c0, p)?.abs();
        let mut st = 0.0f64;
        for k in [0.5, 0.9, 1.0, 1.1, 2.0] {
            st = st.max(stationary_residual(k * d0, c0, p));
        }
        // below d0 the inner minimum dips negative, above it stays positive
        signs &= grid_minimum(0.5 * d0, c0, p, 1000) < 0.0 && grid_minimum(0.9 * d0, c0, p, 1000) < 0.0;
        signs &= grid_minimum(1.1 * d0, c0, p, 1000) >= 0.0 && grid_minimum(2.0 * d0, c0, p, 1000) >= 0.0;
        root = root.max(r);
        stationary = stationary.max(st);
        table.push(vec![c0, p, d0, r, st]);
    }
    rec.series("d0_samples", table);
    let model_d0 = compute_d0(ctx.model.c0, ctx.model.p)?;
    rec.quantity("model_d0", model_d0);
    rec.quantity("max_d0_root_residual", root);
    rec.quantity("max_stationary_residual", stationary);
    rec.check(
        "d0-root",
        "the threshold d0 is the root of the inner minimum: f_d0(s0(d0)) = 0",
        root < 1e-10,
        format!("max |f_d0(s0(d0))| = {} over {SAMPLES} random (C0, p)", fmt_e(root)),
    );
    rec.check(
        "d0-stationary",
        "s0(d) is the stationary point of f_d",
        stationary < 1e-10,
        format!("max |f_d'(s0(d))| = {}", fmt_e(stationary)),
    );
    rec.check(
        "d0-sign-properties",
        "min f_d < 0 for d < d0 and f_d > 0 for d > d0",
        signs,
        "checked at d = 0.5, 0.9, 1.1, 2 times d0 on a 1000-point log grid",
    );
    Ok(())
}

fn rel_max(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    pairs.map(|(got, want)| ((got - want) / want).abs()).fold(0.0, f64::max)
}

fn poisson(rec: &mut Recorder) -> CliResult<()> {
    let rg = RadialGrid::new(12.0, 4096)?;
    let src = RadialField::new(rg.clone(), unit_ball_radial(&rg))?;
    let phi = poisson_radial(&src)?;
    let radial_err = rel_max(rg.nodes.iter().zip(&phi.values).map(|(&r, &p)| (p, ball_potential(r))));
    let gphi = rg.integrate(&src.values.iter().zip(&phi.values).map(|(g, p)| g * p).collect::<Vec<_>>());
    let radial_ident = ((phi.gradient_energy() - gphi) / gphi).abs();

    let h = 16.0 / 128.0;
    let grid = Grid3D::with_center(8.0, 128, [0.5 * h; 3])?;
    let src3 = Field3D::new(grid.clone(), unit_ball_cells(&grid))?;
    let phi3 = poisson_freespace(&src3)?;
    let err3 = rel_max((0..grid.cells()).map(|c| {
        let x = grid.position(c);
        (phi3.values[c], ball_potential((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()))
    }));
    let charge = grid.integrate(&src3.values);
    let gphi3 = grid.integrate(&src3.values.iter().zip(&phi3.values).map(|(a, b)| a * b).collect::<Vec<_>>());
    let ident3 = ((gradient_energy(&phi3, charge) - gphi3) / gphi3).abs();

    let cg = Grid3D::new(8.0, 64)?;
    let wide = RadialGrid::new(8.0 * 3f64.sqrt() + 1.0, 4096)?;
    let g = |r: f64| (-r * r).exp();
    let pc = poisson_freespace(&Field3D::from_fn(cg.clone(), |x| g((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt())))?;
    let pr = RadialField::new(wide.clone(), poisson_radial(&RadialField::from_fn(wide, g))?.values)?;
    let cross = rel_max((0..cg.cells()).map(|c| {
        let x = cg.position(c);
        (pc.values[c], pr.interpolate((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()))
    }));

    rec.quantity("ball_max_rel_error_radial", radial_err);
    rec.quantity("ball_max_rel_error_3d", err3);
    rec.quantity("gaussian_radial_vs_3d", cross);
    rec.quantity("energy_identity_radial", radial_ident);
    rec.quantity("energy_identity_3d", ident3);
    let claim = "the potential solves -Δφ = g with the 1/(4π|x|) kernel";
    rec.check("poisson-radial-ball", claim, radial_err < 1e-3, format!("max rel error {} (r_max 12, n 4096)", fmt_e(radial_err)));
    rec.check("poisson-3d-ball", claim, err3 < 5e-3, format!("max rel error {} (L 8, n 128)", fmt_e(err3)));
    rec.check("poisson-cross-agreement", claim, cross < 5e-3, format!("Gaussian source, max rel difference {}", fmt_e(cross)));
    let ident = "∫|∇φ|² = ∫gφ";
    rec.check("energy-identity-radial", ident, radial_ident < 1e-3, fmt_e(radial_ident));
    rec.check("energy-identity-3d", ident, ident3 < 5e-3, fmt_e(ident3));
    Ok(())
}

/// Central-difference derivative along `v` at the best of three step sizes,
/// compared with `J′(u)[v]`.
fn fd_error<P: Functional>(p: &P, u: &[f64], v: &[f64]) -> f64 {
    let exact = dot(&p.evaluate(u).dual, v);
    let base = 1.0 + u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    [1e-3, 1e-4, 1e-5]
        .iter()
        .map(|k| {
            let e = k * base;
            let plus: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + e * b).collect();
            let minus: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - e * b).collect();
            let (ep, em) = (p.evaluate(&plus), p.evaluate(&minus));
            let fd = p.energy_change(&minus, &em, &plus, &ep) / (2.0 * e);
            ((fd - exact) / exact.abs().max(1e-300)).abs()
        })
        .fold(f64::INFINITY, f64::min)
}

fn gradient_profile() -> CliResult<ChargeProfile> {
    Ok(ChargeProfile::new(
        ProfileShape::Rational {
            rho0: 0.3,
            rho_inf: 1.2,
            width: 2.0,
        },
        1.0,
    )?)
}

fn gradients(ctx: &Context, rec: &mut Recorder) -> CliResult<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed ^ 0x9e37);
    let profile = gradient_profile()?;
    let rg = RadialGrid::new(12.0, 1024)?;
    let rp = RadialProblem::with_profile(rg.clone(), &profile, ctx.model.clone())?;
    let mut radial = 0.0f64;
    for _ in 0..FD_FIELDS {
        let u = random_band_limited(&rg, &mut rng, 5).values;
        for _ in 0..FD_DIRECTIONS {
            radial = radial.max(fd_error(&rp, &u, &random_direction(&rg, &mut rng)));
        }
    }
    let grid = Grid3D::new(6.0, 24)?;
    let p3 = Problem3D::with_profile(Arc::new(FreeSpacePoisson::new(grid.clone())?), &profile, ctx.model.clone())?;
    let mut cube = 0.0f64;
    for _ in 0..FD_FIELDS {
        let u = random_smooth(&grid, &mut rng, 4).values;
        for _ in 0..FD_DIRECTIONS {
            let v = random_smooth(&grid, &mut rng, 2);
            let scale = v.max_abs();
            let v: Vec<f64> = v.values.iter().map(|x| x / scale).collect();
            cube = cube.max(fd_error(&p3, &u, &v));
        }
    }
    rec.quantity("gradient_fd_rel_error_radial", radial);
    rec.quantity("gradient_fd_rel_error_3d", cube);
    let claim = "the discrete gradient is the derivative of the discrete energy";
    let n = FD_FIELDS * FD_DIRECTIONS;
    rec.check("gradient-radial", claim, radial < 1e-4, format!("max rel error {} over {n} pairs", fmt_e(radial)));
    rec.check("gradient-3d", claim, cube < 1e-3, format!("max rel error {} over {n} pairs", fmt_e(cube)));
    Ok(())
}

fn inequalities(ctx: &Context, rec: &mut Recorder) -> CliResult<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed ^ 0x51ed);
    let rg = RadialGrid::new(12.0, 2048)?;
    let unit = ChargeProfile::constant(1.0)?;
    let mut worst = f64::NEG_INFINITY;
    let mut all = true;
    for _ in 0..FIELDS {
        let u = random_band_limited(&rg, &mut rng, 6);
        let s = strauss_check(&u, &unit)?;
        all &= s.holds;
        if s.rhs > 0.0 {
            worst = worst.max(s.lhs / s.rhs);
        }
    }
    rec.quantity("strauss_max_lhs_over_rhs", worst);
    rec.check(
        "strauss-inequality",
        "(1/√8)∫ρ|u|³ ≤ ¼∫|∇u|² + ⅛∫ρφu²",
        all,
        format!("{FIELDS} random fields, max lhs/rhs = {}", fmt_e(worst)),
    );

    let d0 = compute_d0(ctx.model.c0, ctx.model.p)?;
    // deep and wide enough that descent reaches negative energy
    let well = ChargeProfile::new(
        ProfileShape::Rational {
            rho0: 0.02 * d0,
            rho_inf: 2.0 * d0,
            width: 6.0,
        },
        1.0,
    )?;
    let floor = coercivity_floor(&well, ctx.model.c0, ctx.model.p)?;
    rec.quantity("coercivity_floor", &floor);
    rec.check(
        "coercivity-floor-finite",
        "J is bounded below by ¼‖u‖² + ∫m_ρ with a finite floor over a bounded set",
        floor.floor.is_finite() && floor.floor <= 0.0 && floor.measure > 0.0 && floor.measure.is_finite(),
        format!("floor {} over measure {}", fmt_e(floor.floor), fmt_e(floor.measure)),
    );
    let grid = ctx.radial_grid()?;
    let p = RadialProblem::with_profile(grid.clone(), &well, ctx.model.clone())?;
    let mut slack = f64::INFINITY;
    let mut rows = 0;
    let mut lowest = f64::INFINITY;
    for (amp, width) in [(1.0, 1.0), (5.0, 2.0), (20.0, 2.0), (50.0, 4.0), (200.0, 1.0)] {
        let r = minimize(&p, &gaussian(&grid, amp, width), &ctx.solver(absolute(1e-6)))?;
        for row in &r.trace {
            slack = slack.min(row.energy - (0.25 * row.h1_norm_sq + floor.floor));
            lowest = lowest.min(row.energy);
            rows += 1;
        }
    }
    rec.quantity("coercivity_min_slack", slack);
    rec.quantity("coercivity_lowest_energy", lowest);
    rec.check(
        "coercivity-floor-trajectory",
        "every descent iterate satisfies J(u) ≥ ¼‖u‖² + ∫m_ρ",
        slack >= -1e-6 && lowest < 0.0,
        format!(
            "min J − ¼‖u‖² − floor = {} over {rows} iterates reaching J = {}",
            fmt_e(slack),
            fmt_e(lowest)
        ),
    );

    let above = ChargeProfile::constant(1.5 * d0)?;
    let pa = RadialProblem::with_profile(rg.clone(), &above, ctx.model.clone())?;
    let mut min_j = f64::INFINITY;
    for _ in 0..FIELDS {
        let u = random_band_limited(&rg, &mut rng, 6).values;
        min_j = min_j.min(pa.energy(&u));
    }
    rec.quantity("min_energy_rho_above_d0", min_j);
    rec.check(
        "positivity-above-d0",
        "J_ρ∞ > 0 on nonzero fields when ρ ≡ ρ∞ > d0",
        min_j > 0.0,
        format!("min J over {FIELDS} random fields = {}", fmt_e(min_j)),
    );
    Ok(())
}

/// `C1` of a pure power `a s^{q−1}`: the ratio `(a/q)s^{q−3} − 1/(2s)` is
/// stationary at `s^{q−2} = q / (2a(3−q))`.
fn pure_power_c1(q: f64, a: f64) -> f64 {
    let s = (q / (2.0 * a * (3.0 - q))).powf(1.0 / (q - 2.0));
    a / q * s.powf(q - 3.0) - 0.5 / s
}

fn bounds(ctx: &Context, rec: &mut Recorder) -> CliResult<()> {
    let family = TrialFamily::default();
    let b = estimate_lambda_bounds(&ctx.model, &family)?;
    rec.quantity("lambda_bounds", &b);
    if ctx.model.kind == NonlinearityKind::PurePower && ctx.model.q > 2.0 {
        let oracle = pure_power_c1(ctx.model.q, ctx.model.a_q);
        rec.quantity("c1_oracle", oracle);
        rec.check(
            "cubic-constant",
            "F(s) ≤ s²/2 + C1 s³ with the minimal C1",
            (ctx.model.c1 - oracle).abs() < 1e-6,
            format!("fitted {} vs stationary-point oracle {}", fmt_e(ctx.model.c1), fmt_e(oracle)),
        );
    }
    let claim = "0 < Λ0 ≤ C1²/2 and 0 < Λ̄0 ≤ C̄²/2";
    match (b.lambda0_lower, b.lambdabar0_lower) {
        (Some(lo), Some(lob)) => {
            rec.check(
                "lambda0-bracket",
                claim,
                0.0 < lo && lo <= b.lambda0_upper,
                format!("{} ≤ Λ0 ≤ {}", fmt_e(lo), fmt_e(b.lambda0_upper)),
            );
            rec.check(
                "lambdabar0-bracket",
                claim,
                0.0 < lob && lob <= b.lambdabar0_upper,
                format!("{} ≤ Λ̄0 ≤ {}", fmt_e(lob), fmt_e(b.lambdabar0_upper)),
            );
        }
        _ => {
            rec.check("lambda0-bracket", claim, false, "trial family has no member in A0 or Ā0");
        }
    }
    if let Some(w) = b.witness {
        let grid = family.grid()?;
        let member = family.member(&grid, w.sigma, w.amplitude);
        let again = threshold_ratios(&member, &ctx.model).0.unwrap_or(f64::NAN);
        let drift = (again - w.ratio).abs();
        rec.quantity("witness_drift", drift);
        rec.check(
            "witness-drift",
            "the stored lower bound is the ratio of its witness",
            drift < 1e-10,
            format!("|re-evaluated − stored| = {}", fmt_e(drift)),
        );
        let mut negative = true;
        for k in [2.0, 3.99] {
            let p = RadialProblem::autonomous(grid.clone(), k * w.ratio, ctx.model.clone())?;
            negative &= p.energy(&member.values) < 0.0;
        }
        rec.check(
            "witness-certifies-lambda",
            "J_λ∞(witness) < 0 for λ < 4·Λ0 lower bound",
            negative,
            "re-evaluated at λ = 2 and 3.99 times the lower bound",
        );
    }
    Ok(())
}
