//! Scenario bodies and the helpers they share.

mod autonomous;
mod ground_state;
mod lemmas;
mod multibump;
mod symmetry;
mod uniqueness;

use std::sync::Arc;

use spvar::field3d::fft_friendly;
use spvar::landscape::{estimate_lambda_bounds, TrialFamily};
use spvar::solvers::{MountainPassOptions, SolveResult};
use spvar::{GradTol, LambdaBounds, NonlinearityModel, RadialField, RadialGrid, SolveOptions};

use crate::config::{Grid3DSpec, GridScale, RadialSpec, Scenario, ScenarioConfig};
use crate::error::{CliError, CliResult};
use crate::report::Series;
use crate::{Recorder, RunOptions};

/// Rows kept when a radial profile is projected into a plot series.
const PROFILE_ROWS: usize = 512;

pub(crate) struct Context {
    pub cfg: ScenarioConfig,
    pub model: NonlinearityModel,
    pub seed: u64,
    pub serial: bool,
    pub scale: GridScale,
}

impl Context {
    pub fn new(cfg: &ScenarioConfig, opts: &RunOptions, seed: u64) -> CliResult<Self> {
        Ok(Context {
            model: cfg.model.build(&opts.base_dir)?,
            cfg: cfg.clone(),
            seed,
            serial: opts.serial,
            scale: opts.grid_scale,
        })
    }

    pub fn resolved_inputs(&self, scenario: Scenario) -> ScenarioConfig {
        let mut cfg = self.cfg.clone();
        cfg.scenario = Some(scenario);
        cfg.seed = Some(self.seed);
        cfg
    }

    pub fn radial_spec(&self) -> RadialSpec {
        self.cfg.radial.unwrap_or(match self.scale {
            GridScale::Desk => RadialSpec { r_max: 24.0, n: 4096 },
            GridScale::Fine => RadialSpec { r_max: 32.0, n: 8192 },
        })
    }

    pub fn radial_grid(&self) -> CliResult<Arc<RadialGrid>> {
        let s = self.radial_spec();
        Ok(RadialGrid::new(s.r_max, s.n)?)
    }

    pub fn grid3d_spec(&self) -> Grid3DSpec {
        self.cfg.grid3d.unwrap_or(match self.scale {
            GridScale::Desk => Grid3DSpec { half_width: 12.0, n: 128 },
            GridScale::Fine => Grid3DSpec { half_width: 12.0, n: 160 },
        })
    }

    /// Config solver options if given, else `default`; the run seed always wins.
    pub fn solver(&self, default: SolveOptions) -> SolveOptions {
        let mut o = self.cfg.solver.unwrap_or(default);
        o.seed = self.seed;
        o
    }

    pub fn mountain_pass(&self) -> MountainPassOptions {
        self.cfg.mountain_pass.unwrap_or_default()
    }

    pub fn starts(&self, default: usize) -> usize {
        self.cfg.starts.unwrap_or(default)
    }

    /// Scale parameters to try in order: the configured sweep, else the
    /// configured profile's own `ε`, else `default`.
    pub fn eps_candidates(&self, default: &[f64]) -> Vec<f64> {
        match (&self.cfg.eps_sweep, &self.cfg.profile) {
            (Some(s), _) => s.clone(),
            (None, Some(p)) => vec![p.eps],
            (None, None) => default.to_vec(),
        }
    }

    pub fn bounds(&self) -> CliResult<LambdaBounds> {
        Ok(estimate_lambda_bounds(&self.model, &TrialFamily::default())?)
    }

    /// `λ = 2·Λ₀⁻`, certified below `4Λ₀` by the family witness.
    pub fn lambda_below(&self, rec: &mut Recorder) -> CliResult<f64> {
        if let Some(l) = self.cfg.lambda {
            return Ok(l);
        }
        let b = self.bounds()?;
        rec.quantity("lambda_bounds", &b);
        let lower = b
            .lambda0_lower
            .ok_or_else(|| CliError::Precondition("trial family misses A0; no certified lambda below 4 Lambda0".into()))?;
        Ok(2.0 * lower)
    }
}

pub(crate) fn dispatch(s: Scenario, ctx: &Context, rec: &mut Recorder) -> CliResult<()> {
    match s {
        Scenario::VerifyLemmas => lemmas::run(ctx, rec),
        Scenario::Autonomous => autonomous::run(ctx, rec),
        Scenario::UniquenessScan => uniqueness::run(ctx, rec),
        Scenario::GroundState => ground_state::run(ctx, rec),
        Scenario::Multibump => multibump::run(ctx, rec),
        Scenario::SymmetryBreaking => symmetry::run(ctx, rec),
    }
}

pub(crate) fn absolute(tol: f64) -> SolveOptions {
    SolveOptions {
        tol_grad: GradTol::Absolute(tol),
        ..Default::default()
    }
}

/// `iteration,energy,gradient_norm,step` of an accepted-step trace.
pub(crate) fn trace_series(r: &SolveResult) -> Series {
    let mut s = Series::new(&["iteration", "energy", "gradient_norm", "step"]);
    for row in &r.trace {
        s.push(vec![row.iteration as f64, row.energy, row.gradient_norm, row.step]);
    }
    s
}

/// `r,u` with at most [`PROFILE_ROWS`] rows.
pub(crate) fn profile_series(grid: &RadialGrid, values: &[f64]) -> Series {
    let stride = grid.len().div_ceil(PROFILE_ROWS).max(1);
    let mut s = Series::new(&["r", "u"]);
    for i in (0..grid.len()).step_by(stride) {
        s.push(vec![grid.nodes[i], values[i]]);
    }
    s
}

pub(crate) fn radial_csv(grid: &Arc<RadialGrid>, values: &[f64]) -> CliResult<String> {
    Ok(RadialField::new(grid.clone(), values.to_vec())?.to_csv())
}

/// Records trace, field and plot series of a radial solve under `name`.
pub(crate) fn record_radial(rec: &mut Recorder, name: &str, grid: &Arc<RadialGrid>, r: &SolveResult) -> CliResult<()> {
    rec.file(&format!("traces/{name}.csv"), r.trace_csv());
    rec.file(&format!("fields/{name}.csv"), radial_csv(grid, &r.values)?);
    rec.series(&format!("{name}_trace"), trace_series(r));
    rec.series(&format!("{name}_profile"), profile_series(grid, &r.values));
    Ok(())
}

/// Smallest FFT-friendly even size at least 5/4 of `n`.
pub(crate) fn refine(n: usize) -> usize {
    let mut m = (5 * n).div_ceil(4);
    while !(m % 2 == 0 && fft_friendly(m)) {
        m += 1;
    }
    m
}

pub(crate) fn gaussian(grid: &RadialGrid, amp: f64, width: f64) -> Vec<f64> {
    let mut v = grid.sample(|r| amp * (-(r / width).powi(2)).exp());
    v[grid.n] = 0.0;
    v
}

pub(crate) fn fmt_e(x: f64) -> String {
    format!("{x:.6e}")
}
