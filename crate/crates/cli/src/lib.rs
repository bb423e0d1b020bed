//! Named, reproducible scenarios over the `spvar` laboratory.
//!
//! [`run`] executes one scenario in memory and returns the report together
//! with every artifact it produced; [`write_outcome`] lays them out on disk:
//!
//! ```text
//! report.json      deterministic: inputs, quantities, verdicts, plot series
//! runtime.json     wall-clock per step (kept out of report.json)
//! traces/*.csv     solver traces
//! fields/*.csv     radial profiles r,u
//! fields/*.bin     3-D fields in the SPF3 binary format
//! plots/*.csv      emit_plot_data projections of report.series
//! ```

pub mod config;
pub mod error;
pub mod report;
mod scenarios;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

pub use config::{GridScale, Scenario, ScenarioConfig};
pub use error::{CliError, CliResult};
pub use report::{emit_plot_data, ExperimentReport, Series, Status, Verdict};

/// Process-level knobs that are not part of the scenario physics.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed: u64,
    pub serial: bool,
    pub grid_scale: GridScale,
    /// Directory that relative paths inside the config resolve against.
    pub base_dir: PathBuf,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: 0,
            serial: false,
            grid_scale: GridScale::Desk,
            base_dir: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepTiming {
    pub step: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuntimeReport {
    pub scenario: Scenario,
    pub total_seconds: f64,
    pub steps: Vec<StepTiming>,
}

impl RuntimeReport {
    pub fn step_seconds(&self, step: &str) -> Option<f64> {
        self.steps.iter().find(|s| s.step == step).map(|s| s.seconds)
    }
}

/// A finished scenario: report plus in-memory artifacts keyed by relative path.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: ExperimentReport,
    pub runtime: RuntimeReport,
    pub files: BTreeMap<String, Vec<u8>>,
}

/// Accumulates everything a scenario body produces.
pub(crate) struct Recorder {
    quantities: BTreeMap<String, serde_json::Value>,
    verdicts: Vec<Verdict>,
    series: BTreeMap<String, Series>,
    files: BTreeMap<String, Vec<u8>>,
    steps: Vec<StepTiming>,
}

impl Recorder {
    fn new() -> Self {
        Recorder {
            quantities: BTreeMap::new(),
            verdicts: Vec::new(),
            series: BTreeMap::new(),
            files: BTreeMap::new(),
            steps: Vec::new(),
        }
    }

    pub(crate) fn quantity(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("quantities are serializable");
        self.quantities.insert(key.to_string(), v);
    }

    pub(crate) fn check(&mut self, name: &str, claim: &str, pass: bool, detail: impl Into<String>) -> bool {
        let status = if pass { Status::Pass } else { Status::Fail };
        self.verdict(name, claim, status, detail);
        pass
    }

    pub(crate) fn verdict(&mut self, name: &str, claim: &str, status: Status, detail: impl Into<String>) {
        self.verdicts.push(Verdict {
            name: name.to_string(),
            claim: claim.to_string(),
            status,
            detail: detail.into(),
        });
    }

    pub(crate) fn series(&mut self, name: &str, s: Series) {
        self.series.insert(name.to_string(), s);
    }

    pub(crate) fn file(&mut self, path: &str, bytes: impl Into<Vec<u8>>) {
        self.files.insert(path.to_string(), bytes.into());
    }

    pub(crate) fn step<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> T) -> T {
        let t = Instant::now();
        let out = f(self);
        self.steps.push(StepTiming {
            step: name.to_string(),
            seconds: t.elapsed().as_secs_f64(),
        });
        out
    }
}

/// Runs `scenario`. Validation problems are errors; numerical outcomes,
/// including non-convergence, are verdicts.
pub fn run(scenario: Scenario, cfg: &ScenarioConfig, opts: &RunOptions) -> CliResult<Outcome> {
    cfg.check()?;
    if let Some(s) = cfg.scenario {
        if s != scenario {
            return Err(CliError::Config(format!("config is for `{s}`, asked to run `{scenario}`")));
        }
    }
    let seed = cfg.seed.unwrap_or(opts.seed);
    let start = Instant::now();
    let mut rec = Recorder::new();
    let ctx = scenarios::Context::new(cfg, opts, seed)?;
    let run_body = |rec: &mut Recorder| scenarios::dispatch(scenario, &ctx, rec);
    if opts.serial {
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| CliError::Precondition(e.to_string()))?
            .install(|| run_body(&mut rec))?;
    } else {
        run_body(&mut rec)?;
    }
    let mut report = ExperimentReport {
        schema_version: config::SCHEMA_VERSION,
        scenario,
        seed,
        grid_scale: opts.grid_scale,
        serial: opts.serial,
        inputs: ctx.resolved_inputs(scenario),
        all_passed: rec.verdicts.iter().all(Verdict::passed),
        quantities: rec.quantities,
        verdicts: rec.verdicts,
        series: rec.series,
        artifacts: Vec::new(),
    };
    let mut files = rec.files;
    for (name, csv) in emit_plot_data(&report) {
        files.insert(format!("plots/{name}"), csv.into_bytes());
    }
    report.artifacts = files.keys().cloned().collect();
    Ok(Outcome {
        report,
        runtime: RuntimeReport {
            scenario,
            total_seconds: start.elapsed().as_secs_f64(),
            steps: rec.steps,
        },
        files,
    })
}

/// Writes `report.json`, `runtime.json` and every artifact under `out`.
pub fn write_outcome(outcome: &Outcome, out: &Path) -> CliResult<()> {
    let write = |rel: &str, bytes: &[u8]| -> CliResult<()> {
        let path = out.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))
    };
    write("report.json", outcome.report.to_json().as_bytes())?;
    write("runtime.json", serde_json::to_string_pretty(&outcome.runtime)?.as_bytes())?;
    for (rel, bytes) in &outcome.files {
        write(rel, bytes)?;
    }
    Ok(())
}
