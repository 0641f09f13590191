use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::games::Game;
use crate::learner::{checkpoint_times, make_schedule, run, RunOptions, Schedule};
use crate::solvers;
use crate::stats::RunningStats;

use super::config::{ExperimentConfig, ReferenceMode};

/// One aggregated checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableRow {
    pub t: u64,
    pub mean_sq_dist: f64,
    pub stderr: f64,
    pub sigma: f64,
    pub rho: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentMetadata {
    pub game: String,
    pub params: Value,
    pub estimator: EstimatorKind,
    pub schedule: Schedule,
    pub horizon: u64,
    pub runs: u64,
    pub seed: u64,
    /// `"closed_form"` or `"solver"`.
    pub reference_source: &'static str,
    pub reference: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<TableRow>,
    /// Run indices in ascending order.
    pub run_indices: Vec<u64>,
    /// `per_run[k][c]`: squared distance of run `run_indices[k]` at row `c`.
    pub per_run: Vec<Vec<f64>>,
    pub metadata: ExperimentMetadata,
}

fn reference_point<G: Game + ?Sized>(game: &G, mode: ReferenceMode) -> Result<(Vec<f64>, &'static str)> {
    let closed = || game.closed_form_ne().map(|p| (p, "closed_form"));
    let solved = || -> Result<(Vec<f64>, &'static str)> {
        let r = solvers::solve_ne(game, 1e-10)?;
        if !r.converged {
            return Err(Error::contract(format!(
                "equilibrium solver stopped at residual {} after {} iterations",
                r.residual, r.iterations
            )));
        }
        Ok((r.point, "solver"))
    };
    match mode {
        ReferenceMode::ClosedForm => closed()
            .ok_or_else(|| Error::Config("no closed-form equilibrium for this game".into())),
        ReferenceMode::Solver => solved(),
        ReferenceMode::Auto => closed().map_or_else(solved, Ok),
    }
}

/// Runs `config.runs` trajectories with run indices `0..runs`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let indices: Vec<u64> = (0..config.runs).collect();
    run_experiment_runs(config, &indices)
}

/// Runs the given run indices. The result depends only on the set of
/// indices, not on their order or on the worker count.
pub fn run_experiment_runs(config: &ExperimentConfig, run_indices: &[u64]) -> Result<ExperimentOutput> {
    config.validate()?;
    if run_indices.is_empty() {
        return Err(Error::Config("at least one run is required".into()));
    }
    let game = config.game.build()?;
    let schedule = make_schedule(&config.resolved_schedule(), game.nu())?;
    let (reference, reference_source) = reference_point(&game, config.reference)?;
    let opts = RunOptions {
        checkpoints: config.checkpoints,
        init: config.init.resolve()?,
    };
    let mut indices = run_indices.to_vec();
    indices.sort_unstable();
    indices.dedup();

    let one = |run_index: u64| -> Result<Vec<f64>> {
        run(
            &game,
            &schedule,
            config.estimator,
            config.horizon,
            &reference,
            config.seed,
            run_index,
            &opts,
        )
        .map(|tr| tr.checkpoints.iter().map(|c| c.sq_dist).collect())
        .map_err(|e| Error::Run {
            run_index,
            source: Box::new(e),
        })
    };
    let fan_out = || -> Result<Vec<Vec<f64>>> { indices.par_iter().map(|&r| one(r)).collect() };
    let per_run = match config.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?
            .install(fan_out)?,
        None => fan_out()?,
    };

    let times = checkpoint_times(config.horizon, config.checkpoints);
    let mut acc = RunningStats::new(times.len());
    for dists in &per_run {
        acc.push(dists);
    }
    let stderr = acc.stderr();
    let rows = times
        .iter()
        .enumerate()
        .map(|(c, &t)| TableRow {
            t,
            mean_sq_dist: acc.mean()[c],
            stderr: stderr[c],
            sigma: schedule.sigma(t),
            rho: schedule.rho(t),
            gamma: schedule.gamma(t),
        })
        .collect();

    Ok(ExperimentOutput {
        rows,
        run_indices: indices,
        per_run,
        metadata: ExperimentMetadata {
            game: game.name().to_string(),
            params: game.params(),
            estimator: config.estimator,
            schedule,
            horizon: config.horizon,
            runs: run_indices.len() as u64,
            seed: config.seed,
            reference_source,
            reference,
        },
    })
}
