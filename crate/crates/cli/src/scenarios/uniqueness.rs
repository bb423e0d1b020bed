//! Above the dual threshold `u = 0` is the only solution: every multistart
//! descent, autonomous or with a profile bounded below, collapses to zero.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spvar::radial::random_band_limited;
use spvar::solvers::{multistart_minimize, Multistart, ZERO_NORM};
use spvar::{ChargeProfile, Classification, ProfileShape, RadialGrid, RadialProblem};

use super::{absolute, fmt_e, gaussian, Context};
use crate::error::{CliError, CliResult};
use crate::report::Series;
use crate::Recorder;

const STARTS: usize = 20;
const TOL: f64 = 1e-9;

pub(crate) fn run(ctx: &Context, rec: &mut Recorder) -> CliResult<()> {
    let upper = rec.step("bounds", |rec| -> CliResult<f64> {
        let b = ctx.bounds()?;
        rec.quantity("lambda_bounds", &b);
        Ok(b.lambdabar0_upper)
    })?;
    let lambda = ctx.cfg.lambda.unwrap_or(2.0 * upper);
    rec.quantity("lambda", lambda);
    let profile = match &ctx.cfg.profile {
        Some(p) => p.build()?,
        None => {
            let s = upper.sqrt();
            ChargeProfile::new(
                ProfileShape::Rational {
                    rho0: 1.25 * s,
                    rho_inf: 2.5 * s,
                    width: 1.0,
                },
                1.0,
            )?
        }
    };
    if !profile.is_radial() {
        return Err(CliError::Precondition("uniqueness scan runs on the radial grid; profile must be radial".into()));
    }
    rec.quantity("rho_min", profile.rho_min());
    let grid = ctx.radial_grid()?;
    let starts = seeded_starts(&grid, ctx.seed, ctx.starts(STARTS));
    let opts = ctx.solver(absolute(TOL));

    rec.check(
        "lambda-above-dual-threshold",
        "λ exceeds the certified dual threshold",
        lambda > upper,
        format!("λ = {} vs upper bound {}", fmt_e(lambda), fmt_e(upper)),
    );
    let auto = RadialProblem::autonomous(grid.clone(), lambda, ctx.model.clone())?;
    let runs = rec.step("autonomous", |_| multistart_minimize(&auto, &starts, &opts, ctx.serial))?;
    report(rec, "autonomous", "u = 0 is the unique solution of the autonomous problem", &runs);

    rec.check(
        "rho-min-above-threshold",
        "ρ is bounded below by the square root of the dual threshold",
        profile.rho_min() > upper.sqrt(),
        format!("ρ_min = {} vs {}", fmt_e(profile.rho_min()), fmt_e(upper.sqrt())),
    );
    let shaped = RadialProblem::with_profile(grid.clone(), &profile, ctx.model.clone())?;
    let runs = rec.step("non-autonomous", |_| multistart_minimize(&shaped, &starts, &opts, ctx.serial))?;
    report(rec, "non-autonomous", "u = 0 is the unique solution for ρ bounded below", &runs);
    Ok(())
}

/// Half band-limited noise, half Gaussians of growing width; all nonnegative.
fn seeded_starts(grid: &Arc<RadialGrid>, seed: u64, n: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|k| {
            if k % 2 == 0 {
                let mut v = random_band_limited(grid, &mut rng, 4).values;
                v.iter_mut().for_each(|x| *x = x.abs());
                v
            } else {
                gaussian(grid, 10f64.powi((k % 5) as i32 - 1), 1.0 + (k / 2) as f64 * 0.5)
            }
        })
        .collect()
}

fn report(rec: &mut Recorder, name: &str, claim: &str, runs: &Multistart) {
    let mut table = Series::new(&["start", "energy", "h1_norm", "gradient_norm", "iterations", "zero"]);
    for (k, r) in runs.results.iter().enumerate() {
        table.push(vec![
            k as f64,
            r.energy,
            r.h1_norm,
            r.gradient_norm,
            r.iterations as f64,
            f64::from(u8::from(r.classification == Classification::Zero)),
        ]);
    }
    rec.series(&format!("{name}_starts"), table);
    let zero = runs.results.iter().filter(|r| r.classification == Classification::Zero).count();
    let worst = runs.results.iter().map(|r| r.h1_norm).fold(0.0, f64::max);
    rec.quantity(&format!("{name}_max_h1_norm"), worst);
    rec.check(
        &format!("{name}-all-zero"),
        claim,
        zero == runs.results.len() && worst < ZERO_NORM,
        format!("{zero}/{} starts classified zero, largest norm {}", runs.results.len(), fmt_e(worst)),
    );
}
