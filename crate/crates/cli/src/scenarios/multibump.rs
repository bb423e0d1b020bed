//! Chains of `N` truncated autonomous minimizers placed where the scaled
//! charge is still small: the energy sinks linearly in `N`, which drives the
//! global minimum level to `−∞` as the scale parameter shrinks.

use spvar::landscape::{lattice_additivity, multibump_energy, truncate_and_tune, MultibumpGrid};
use spvar::models::compute_d0;
use spvar::solvers::minimize;
use spvar::{ChargeProfile, MultibumpSpec, ProfileShape, RadialField, RadialProblem};

use super::{absolute, fmt_e, gaussian, record_radial, Context};
use crate::error::CliResult;
use crate::report::Series;
use crate::Recorder;

const MAX_BUMPS: usize = 5;
const DIRECTION: [f64; 3] = [0.0, 0.0, 1.0];
const LATTICE_BUMPS: usize = 3;
const LATTICE_CELLS: usize = 72;
const ADDITIVITY_TOL: f64 = 1e-12;

pub(crate) fn run(ctx: &Context, rec: &mut Recorder) -> CliResult<()> {
    let lambda = rec.step("bounds", |rec| ctx.lambda_below(rec))?;
    rec.quantity("lambda", lambda);
    let grid = ctx.radial_grid()?;
    let auto = RadialProblem::autonomous(grid.clone(), lambda, ctx.model.clone())?;
    let v = rec.step("autonomous-minimizer", |_| {
        minimize(&auto, &gaussian(&grid, 30.0, 2.0), &ctx.solver(absolute(1e-6)))
    })?;
    record_radial(rec, "autonomous_minimizer", &grid, &v)?;
    rec.quantity("autonomous_minimizer", &v);

    let tr = rec.step("truncation", |_| truncate_and_tune(&RadialField::new(grid.clone(), v.values.clone())?, lambda, &ctx.model))?;
    let mut sweep = Series::new(&["radius", "energy", "h1_norm_sq", "potential", "coulomb"]);
    for s in &tr.sweep {
        sweep.push(vec![s.radius, s.energy, s.h1_norm_sq, s.potential, s.coulomb]);
    }
    rec.series("truncation_sweep", sweep);
    rec.quantity("r0", tr.r0);
    rec.check(
        "truncation-negative",
        "the cut-off minimizer keeps negative autonomous energy",
        tr.sweep.iter().any(|s| s.radius == tr.r0 && s.energy < 0.0),
        format!("R0 = {}", tr.r0),
    );
    rec.check(
        "truncation-converges",
        "truncated quantities approach the untruncated ones as R grows",
        tr.energy_gap_monotone && tr.parts_monotone,
        format!("energy gap monotone {}, parts monotone {}", tr.energy_gap_monotone, tr.parts_monotone),
    );

    let profile = match &ctx.cfg.profile {
        Some(p) => p.build()?,
        None => {
            let d0 = compute_d0(ctx.model.c0, ctx.model.p)?;
            ChargeProfile::new(
                ProfileShape::Ramp {
                    rho0: 0.7 * lambda.sqrt(),
                    rho_inf: 1.5 * d0.max(lambda.sqrt()),
                    r0: 1.0,
                    r1: 2.0,
                },
                1.0,
            )?
        }
    };
    let spec = ctx.grid3d_spec();
    let n_max = ctx.cfg.max_bumps.unwrap_or(MAX_BUMPS);
    let mb = rec.step("chain", |_| {
        multibump_energy(
            &tr.field,
            tr.r0,
            n_max,
            DIRECTION,
            &profile,
            &ctx.model,
            lambda,
            MultibumpGrid {
                half_width: spec.half_width,
                n: spec.n,
            },
        )
    })?;
    rec.quantity("multibump", &mb);
    let mut energy = Series::new(&["N", "J"]);
    for row in &mb.rows {
        energy.push(vec![row.n_bumps as f64, row.energy]);
    }
    rec.series("multibump_energy", energy);
    let listing = mb.rows.iter().map(|r| fmt_e(r.energy)).collect::<Vec<_>>().join(", ");
    rec.check(
        "energy-strictly-decreasing",
        "α_{ρ_ε} → −∞ as ε → 0",
        mb.strictly_decreasing,
        format!("J(w_N) = [{listing}]"),
    );
    rec.check(
        "lemma-bound",
        "J(w_N) ≤ N·J_λ^∞(u_{R0}) + C with one constant C",
        mb.lemma_bound_holds,
        format!("C = {}, J_λ^∞(u_R0) = {}", fmt_e(mb.c_apriori), fmt_e(mb.single_energy)),
    );
    rec.check(
        "cross-term-bound",
        "pairwise Coulomb cross terms obey the printed bound",
        mb.cross_bounds_hold,
        mb.rows
            .iter()
            .filter_map(|r| Some(format!("N={}: {} ≤ {}", r.n_bumps, fmt_e(r.cross_sum?), fmt_e(r.cross_bound?))))
            .collect::<Vec<_>>()
            .join("; "),
    );

    let lattice = MultibumpSpec::new(tr.r0, LATTICE_BUMPS, DIRECTION)?;
    let defect = rec.step("additivity", |_| lattice_additivity(&tr.field, &lattice, &ctx.model, LATTICE_CELLS))?;
    rec.quantity("additivity_defect", defect);
    rec.check(
        "disjoint-additivity",
        "norms and potential terms of disjoint summands add",
        defect < ADDITIVITY_TOL,
        format!("relative defect {} for N = {LATTICE_BUMPS}", fmt_e(defect)),
    );
    Ok(())
}
