//! Two positive radial solutions of the autonomous problem below `4Λ₀`:
//! a negative-energy minimizer and a positive-energy mountain pass.

use spvar::solvers::{minimize, mountain_pass};
use spvar::{Classification, Level, RadialProblem};

use super::{absolute, fmt_e, gaussian, record_radial, Context};
use crate::error::CliResult;
use crate::report::Series;
use crate::Recorder;

const MIN_TOL: f64 = 1e-6;
const MP_TOL: f64 = 1e-5;
const NEHARI_TOL: f64 = 1e-3;

pub(crate) fn run(ctx: &Context, rec: &mut Recorder) -> CliResult<()> {
    let lambda = rec.step("bounds", |rec| ctx.lambda_below(rec))?;
    rec.quantity("lambda", lambda);
    let grid = ctx.radial_grid()?;
    let p = RadialProblem::autonomous(grid.clone(), lambda, ctx.model.clone())?;

    let low = rec.step("minimizer", |_| {
        minimize(&p, &gaussian(&grid, 30.0, 2.0), &ctx.solver(absolute(MIN_TOL))).map(|r| r.with_level(Level::Alpha))
    })?;
    record_radial(rec, "minimizer", &grid, &low)?;
    rec.quantity("minimizer", &low);
    let claim = "J_λ∞ has a positive radial minimizer with negative energy";
    rec.check(
        "minimizer-negative",
        claim,
        low.energy < 0.0,
        format!("J = {}", fmt_e(low.energy)),
    );
    rec.check(
        "minimizer-critical",
        claim,
        low.converged && low.gradient_norm < MIN_TOL && low.nehari_residual.abs() < NEHARI_TOL,
        format!(
            "gradient {} after {} iterations, Nehari {}",
            fmt_e(low.gradient_norm),
            low.iterations,
            fmt_e(low.nehari_residual)
        ),
    );
    rec.check(
        "minimizer-classified",
        claim,
        low.classification == Classification::Minimizer,
        format!("{:?}", low.classification),
    );
    if !(low.energy < 0.0) {
        rec.check("mountain-pass", "a second solution at positive energy", false, "no negative valley to connect to");
        return Ok(());
    }

    let mp = rec.step("mountain-pass", |_| {
        let mut opts = ctx.solver(absolute(MP_TOL));
        opts.max_iter = opts.max_iter.max(5000);
        mountain_pass(&p, &low.values, &opts, &ctx.mountain_pass())
    });
    let claim = "a second radial solution at the positive mountain-pass level";
    let mp = match mp {
        Ok(mp) => mp,
        Err(e) => {
            rec.check("mountain-pass-positive", claim, false, e.to_string());
            return Ok(());
        }
    };
    let r = &mp.result;
    record_radial(rec, "mountain_pass", &grid, r)?;
    rec.file("traces/mountain_pass_path.csv", mp.path_csv());
    let mut path = Series::new(&["node", "energy", "is_max"]);
    for (k, e) in mp.path_energies.iter().enumerate() {
        path.push(vec![k as f64, *e, f64::from(u8::from(k == mp.max_node))]);
    }
    rec.series("mountain_pass_path", path);
    rec.quantity("mountain_pass", r);
    rec.quantity("mountain_pass_tangent_curvature", mp.tangent_curvature);
    rec.check("mountain-pass-positive", claim, r.energy > 0.0, format!("J = {}", fmt_e(r.energy)));
    rec.check(
        "mountain-pass-critical",
        claim,
        r.converged && r.gradient_norm < MP_TOL && r.nehari_residual.abs() < NEHARI_TOL,
        format!(
            "gradient {} after {} iterations, Nehari {}",
            fmt_e(r.gradient_norm),
            r.iterations,
            fmt_e(r.nehari_residual)
        ),
    );
    rec.check(
        "mountain-pass-classified",
        claim,
        r.classification == Classification::MountainPass && mp.tangent_curvature < 0.0,
        format!("{:?}, tangent curvature {}", r.classification, fmt_e(mp.tangent_curvature)),
    );
    rec.check(
        "level-ordering",
        "J(v1) < 0 < J(v2)",
        low.energy < 0.0 && 0.0 < r.energy,
        format!("{} < 0 < {}", fmt_e(low.energy), fmt_e(r.energy)),
    );
    Ok(())
}
