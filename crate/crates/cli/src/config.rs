//! Versioned JSON scenario configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use spvar::models::FTable;
use spvar::solvers::MountainPassOptions;
use spvar::{ChargeProfile, NonlinearityModel, ProfileShape, SolveOptions};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    VerifyLemmas,
    Autonomous,
    UniquenessScan,
    GroundState,
    Multibump,
    SymmetryBreaking,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::VerifyLemmas,
        Scenario::Autonomous,
        Scenario::UniquenessScan,
        Scenario::GroundState,
        Scenario::Multibump,
        Scenario::SymmetryBreaking,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::VerifyLemmas => "verify-lemmas",
            Scenario::Autonomous => "autonomous",
            Scenario::UniquenessScan => "uniqueness-scan",
            Scenario::GroundState => "ground-state",
            Scenario::Multibump => "multibump",
            Scenario::SymmetryBreaking => "symmetry-breaking",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown scenario `{s}`")))
    }
}

/// Resolution preset; `fine` refines every grid of a scenario.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GridScale {
    #[default]
    Desk,
    Fine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum ModelSpec {
    PurePower { q: f64, a_q: f64, p: f64 },
    AsymptoticallyLinear { a2: f64, p: f64 },
    /// Two-column `s,f` CSV, resolved relative to the config file.
    Table { path: PathBuf, q: f64, a_q: f64, p: f64 },
    Vanishing { p: f64 },
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::PurePower {
            q: 2.5,
            a_q: 1.0,
            p: 2.7,
        }
    }
}

impl ModelSpec {
    pub fn build(&self, base: &Path) -> CliResult<NonlinearityModel> {
        Ok(match self {
            ModelSpec::PurePower { q, a_q, p } => NonlinearityModel::pure_power(*q, *a_q, *p)?,
            ModelSpec::AsymptoticallyLinear { a2, p } => NonlinearityModel::asymptotically_linear(*a2, *p)?,
            ModelSpec::Vanishing { p } => NonlinearityModel::vanishing(*p)?,
            ModelSpec::Table { path, q, a_q, p } => {
                let full = base.join(path);
                let text = std::fs::read_to_string(&full).map_err(|e| CliError::io(&full, e))?;
                NonlinearityModel::table(FTable::from_csv(&text)?, *q, *a_q, *p)?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub shape: ProfileShape,
    #[serde(default = "unit")]
    pub eps: f64,
}

fn unit() -> f64 {
    1.0
}

impl ProfileSpec {
    pub fn build(&self) -> CliResult<ChargeProfile> {
        Ok(ChargeProfile::new(self.shape.clone(), self.eps)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialSpec {
    pub r_max: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid3DSpec {
    pub half_width: f64,
    pub n: usize,
}

/// One scenario run. Absent fields take scenario defaults, which are
/// computed from certified bounds where the hypotheses need them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radial: Option<RadialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid3d: Option<Grid3DSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolveOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mountain_pass: Option<MountainPassOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_sweep: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_bumps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations_3d: Option<usize>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            version: SCHEMA_VERSION,
            scenario: None,
            model: ModelSpec::default(),
            profile: None,
            lambda: None,
            radial: None,
            grid3d: None,
            solver: None,
            mountain_pass: None,
            starts: None,
            seed: None,
            eps_sweep: None,
            max_bumps: None,
            iterations_3d: None,
        }
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    /// Structural checks that do not need the model.
    pub fn check(&self) -> CliResult<()> {
        if self.version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema version {} unsupported (expected {SCHEMA_VERSION})",
                self.version
            )));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(CliError::Config(format!("lambda = {l} must be positive")));
            }
        }
        if let Some(s) = &self.solver {
            s.validate()?;
        }
        if self.starts == Some(0) {
            return Err(CliError::Config("starts must be at least 1".into()));
        }
        if let Some(sweep) = &self.eps_sweep {
            if sweep.is_empty() || sweep.windows(2).any(|w| w[1] >= w[0]) || sweep.iter().any(|e| !(*e > 0.0)) {
                return Err(CliError::Config("eps_sweep must be positive and strictly decreasing".into()));
            }
        }
        if matches!(self.max_bumps, Some(n) if n == 0) {
            return Err(CliError::Config("max_bumps must be at least 1".into()));
        }
        Ok(())
    }
}
