use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::games::{make_affine_game, make_canonical_quadratic, make_cournot, AffineGameSpec, QuadraticGame};
use crate::geometry::{ConvexSet, ProductSet, SetSpec};
use crate::learner::{ScheduleMode, ScheduleSpec};

use super::diagnostics::DiagnosticsGrid;

/// One set shared by every player, or one per player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SetsSpec {
    Shared(SetSpec),
    PerPlayer(Vec<SetSpec>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "game", rename_all = "snake_case")]
pub enum GameSpec {
    CanonicalQuadratic,
    Affine {
        #[serde(rename = "B")]
        matrix: Vec<Vec<f64>>,
        b: Vec<f64>,
        sets: SetsSpec,
    },
    Cournot {
        n: usize,
        price_intercept: f64,
        price_slope: f64,
        unit_costs: Vec<f64>,
        capacity: f64,
    },
}

impl GameSpec {
    pub fn build(&self) -> Result<QuadraticGame> {
        match self {
            GameSpec::CanonicalQuadratic => Ok(make_canonical_quadratic()),
            GameSpec::Affine { matrix, b, sets } => {
                let sets = match sets {
                    SetsSpec::PerPlayer(list) => ProductSet::new(
                        list.iter().map(ConvexSet::from_spec).collect::<Result<_>>()?,
                    )?,
                    SetsSpec::Shared(spec) => {
                        let set = ConvexSet::from_spec(spec)?;
                        let d = set.dim();
                        if matrix.len() % d != 0 {
                            return Err(Error::Config(format!(
                                "B has {} rows, not a multiple of the set dimension {d}",
                                matrix.len()
                            )));
                        }
                        ProductSet::replicate(set, matrix.len() / d)?
                    }
                };
                make_affine_game(AffineGameSpec::from_rows(matrix, b)?, sets)
            }
            GameSpec::Cournot {
                n,
                price_intercept,
                price_slope,
                unit_costs,
                capacity,
            } => make_cournot(*n, *price_intercept, *price_slope, unit_costs, *capacity),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitSpec {
    Named(String),
    Point(Vec<f64>),
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec::Named("anchor".into())
    }
}

impl InitSpec {
    pub fn resolve(&self) -> Result<Option<Vec<f64>>> {
        match self {
            InitSpec::Named(s) if s == "anchor" => Ok(None),
            InitSpec::Named(s) => Err(Error::Config(format!(
                "init must be \"anchor\" or a vector, got \"{s}\""
            ))),
            InitSpec::Point(v) => Ok(Some(v.clone())),
        }
    }
}

/// Where the reference equilibrium comes from. `Auto` prefers the
/// closed-form linear solve and falls back to the fixed-point solver.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    #[default]
    Auto,
    ClosedForm,
    Solver,
}

fn default_runs() -> u64 {
    1
}

fn default_checkpoints() -> usize {
    64
}

fn default_estimator() -> EstimatorKind {
    EstimatorKind::TwoPoint
}

/// A full experiment, read from a single JSON file. Game fields sit at the
/// top level next to the run settings:
///
/// ```json
/// {"game": "canonical_quadratic", "estimator": "two_point",
///  "schedule": {"mode": "theorem2"}, "horizon": 100000, "runs": 100,
///  "seed": 1, "output": "two_point.csv"}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub game: GameSpec,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorKind,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    pub horizon: u64,
    #[serde(default = "default_runs")]
    pub runs: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub reference: ReferenceMode,
    /// Worker threads; `None` uses the global pool.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub diagnostics: Option<DiagnosticsGrid>,
}

impl ExperimentConfig {
    pub fn new(game: GameSpec, estimator: EstimatorKind, horizon: u64, runs: u64) -> Self {
        ExperimentConfig {
            game,
            estimator,
            schedule: ScheduleSpec::default(),
            horizon,
            runs,
            seed: 0,
            init: InitSpec::default(),
            checkpoints: default_checkpoints(),
            output: None,
            reference: ReferenceMode::Auto,
            workers: None,
            diagnostics: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 2 {
            return Err(Error::Config(format!("horizon must be >= 2, got {}", self.horizon)));
        }
        if self.runs < 1 {
            return Err(Error::Config("runs must be >= 1".into()));
        }
        if self.checkpoints < 1 {
            return Err(Error::Config("checkpoints must be >= 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        self.init.resolve()?;
        Ok(())
    }

    /// Schedule spec with the mode filled in from the estimator when unset:
    /// theorem 1 for one-point, theorem 2 for two-point.
    pub fn resolved_schedule(&self) -> ScheduleSpec {
        let mut spec = self.schedule.clone();
        if spec.mode.is_none() {
            spec.mode = Some(match self.estimator {
                EstimatorKind::OnePoint => ScheduleMode::Theorem1,
                EstimatorKind::TwoPoint => ScheduleMode::Theorem2,
            });
        }
        spec
    }
}

/// Reads only the game part of a config file.
pub fn load_game_spec(path: &Path) -> Result<(GameSpec, Option<DiagnosticsGrid>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    let grid = match value.get("diagnostics") {
        Some(g) => Some(serde_json::from_value(g.clone()).map_err(|e| Error::Config(e.to_string()))?),
        None => None,
    };
    let game = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
    Ok((game, grid))
}
