//! The payoff-based learning iteration and its parameter schedules.
//!
//! At iteration `t` every player, simultaneously:
//! 1. draws `xi_i ~ N(mu_i, sigma_t^2 I)`,
//! 2. plays `a_i = Proj_{A_i}(xi_i)`,
//! 3. observes its cost `J_i(a)` (and `J_i(mu)` for the two-point variant),
//! 4. forms the estimate `m_i`,
//! 5. updates `mu_i <- Proj_{(1 - rho_t) A_i}(mu_i - gamma_t m_i)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::estimators::{estimate_into, perturb_into, EstimatorKind, RngKey};
use crate::games::Game;
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    /// `sigma_t = a t^{-1/4}`, `rho_t = t^{-(1/4 - eps)}`; for one-point
    /// estimates.
    Theorem1,
    /// `sigma_t = b t^{-s}`, `rho_t = c t^{-r}`, `1 <= r < s`; for
    /// two-point estimates.
    Theorem2,
}

/// Config-file form of a schedule. Unset fields take the defaults listed
/// on [`make_schedule`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub mode: Option<ScheduleMode>,
    pub nu_override: Option<f64>,
    pub a: Option<f64>,
    pub epsilon: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub r: Option<f64>,
    pub s: Option<f64>,
    pub rho_max: Option<f64>,
    pub t0: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ScheduleShape {
    Theorem1 { a: f64, epsilon: f64 },
    Theorem2 { b: f64, c: f64, r: f64, s: f64 },
}

/// Step size, smoothing and shrinkage sequences `(gamma_t, sigma_t, rho_t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Schedule {
    pub nu: f64,
    pub shape: ScheduleShape,
    /// Upper clamp on `rho_t`; the unclamped theorem-1 sequence starts at 1,
    /// which would collapse the shrunk set onto its anchor.
    pub rho_max: f64,
    /// First index from which `sigma_t / rho_t` is required to decrease.
    pub t0: u64,
}

impl Schedule {
    pub fn gamma(&self, t: u64) -> f64 {
        4.0 / (self.nu * t as f64)
    }

    pub fn sigma(&self, t: u64) -> f64 {
        let t = t as f64;
        match self.shape {
            ScheduleShape::Theorem1 { a, .. } => a * t.powf(-0.25),
            ScheduleShape::Theorem2 { b, s, .. } => b * t.powf(-s),
        }
    }

    pub fn rho(&self, t: u64) -> f64 {
        let t = t as f64;
        let raw = match self.shape {
            ScheduleShape::Theorem1 { epsilon, .. } => t.powf(-(0.25 - epsilon)),
            ScheduleShape::Theorem2 { c, r, .. } => c * t.powf(-r),
        };
        raw.min(self.rho_max)
    }

    pub fn mode(&self) -> ScheduleMode {
        match self.shape {
            ScheduleShape::Theorem1 { .. } => ScheduleMode::Theorem1,
            ScheduleShape::Theorem2 { .. } => ScheduleMode::Theorem2,
        }
    }
}

fn require(cond: bool, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::contract(format!("schedule: {what} required")))
    }
}

/// Builds a schedule for a game with monotonicity constant `nu`
/// (`spec.nu_override` wins when set).
///
/// Defaults: `epsilon = 0.05`, `a = 1`, `rho_max = 0.5`, `t0 = 1`; for
/// theorem 2, `r = 1`, `s = 2`, `b = 1`, `c = 0.5`. The mode defaults to
/// theorem 1.
pub fn make_schedule(spec: &ScheduleSpec, nu: f64) -> Result<Schedule> {
    let nu = spec.nu_override.unwrap_or(nu);
    require(nu > 0.0 && nu.is_finite(), "nu > 0")?;
    let rho_max = spec.rho_max.unwrap_or(0.5);
    require(rho_max > 0.0 && rho_max < 1.0, "0 < rho_max < 1")?;
    let t0 = spec.t0.unwrap_or(1);
    require(t0 >= 1, "t0 >= 1")?;
    let shape = match spec.mode.unwrap_or(ScheduleMode::Theorem1) {
        ScheduleMode::Theorem1 => {
            let a = spec.a.unwrap_or(1.0);
            let epsilon = spec.epsilon.unwrap_or(0.05);
            require(a > 0.0 && a.is_finite(), "a > 0")?;
            require(epsilon > 0.0 && epsilon < 0.25, "0 < epsilon < 1/4")?;
            ScheduleShape::Theorem1 { a, epsilon }
        }
        ScheduleMode::Theorem2 => {
            let b = spec.b.unwrap_or(1.0);
            let c = spec.c.unwrap_or(0.5);
            let r = spec.r.unwrap_or(1.0);
            let s = spec.s.unwrap_or(2.0);
            require(b > 0.0 && b.is_finite(), "b > 0")?;
            require(c > 0.0 && c.is_finite(), "c > 0")?;
            require(r >= 1.0, "r >= 1")?;
            require(r < s && s.is_finite(), "r < s")?;
            ScheduleShape::Theorem2 { b, c, r, s }
        }
    };
    Ok(Schedule {
        nu,
        shape,
        rho_max,
        t0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    /// Index of the next iteration; starts at 1.
    pub t: u64,
    pub mu: Vec<f64>,
    pub last_xi: Vec<f64>,
    pub last_action: Vec<f64>,
}

impl LearnerState {
    /// State at `t = 1`: `init` projected onto `shrink(A, rho_1)`.
    pub fn initial<G: Game + ?Sized>(game: &G, schedule: &Schedule, init: &[f64]) -> Result<Self> {
        check_dim(game.dim(), init.len())?;
        if !linalg::all_finite(init) {
            return Err(Error::contract("initial state must be finite"));
        }
        let mut mu = init.to_vec();
        game.action_sets()
            .project_shrunk_in_place(schedule.rho(1), &mut mu);
        Ok(LearnerState {
            t: 1,
            last_xi: mu.clone(),
            last_action: mu.clone(),
            mu,
        })
    }
}

/// Reusable buffers for [`step_with`].
#[derive(Debug, Default)]
pub struct Workspace {
    estimate: Vec<f64>,
}

/// One simultaneous learning step. Draws come from
/// `(key.seed, key.run, state.t, player)`; `key.iteration` is ignored.
pub fn step<G: Game + ?Sized>(
    game: &G,
    state: &LearnerState,
    schedule: &Schedule,
    kind: EstimatorKind,
    key: RngKey,
) -> Result<LearnerState> {
    check_dim(game.dim(), state.mu.len())?;
    let mut next = state.clone();
    step_with(game, &mut next, schedule, kind, key, &mut Workspace::default())?;
    Ok(next)
}

/// In-place form of [`step`].
pub fn step_with<G: Game + ?Sized>(
    game: &G,
    state: &mut LearnerState,
    schedule: &Schedule,
    kind: EstimatorKind,
    key: RngKey,
    ws: &mut Workspace,
) -> Result<()> {
    let t = state.t;
    let n = game.dim();
    let d = game.player_dim();
    let sets = game.action_sets();
    let sigma = schedule.sigma(t);
    let gamma = schedule.gamma(t);
    let rho = schedule.rho(t);
    let key = RngKey { iteration: t, ..key };

    let fail = |k: usize, stage: &'static str| Error::NonFiniteStep {
        t,
        player: k / d.max(1),
        stage,
    };

    state.last_xi.resize(n, 0.0);
    perturb_into(&state.mu, d, sigma, key, &mut state.last_xi);
    if let Some(k) = state.last_xi.iter().position(|v| !v.is_finite()) {
        return Err(fail(k, "sample"));
    }

    state.last_action.clone_from(&state.last_xi);
    sets.project_in_place(&mut state.last_action);

    ws.estimate.resize(n, 0.0);
    estimate_into(
        game,
        kind,
        &state.mu,
        &state.last_xi,
        &state.last_action,
        sigma,
        &mut ws.estimate,
    );
    if let Some(k) = ws.estimate.iter().position(|v| !v.is_finite()) {
        return Err(fail(k, "estimate"));
    }

    for (m, g) in state.mu.iter_mut().zip(&ws.estimate) {
        *m -= gamma * g;
    }
    if let Some(k) = state.mu.iter().position(|v| !v.is_finite()) {
        return Err(fail(k, "update"));
    }
    sets.project_shrunk_in_place(rho, &mut state.mu);
    state.t = t + 1;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Checkpoint {
    pub t: u64,
    pub mu: Vec<f64>,
    pub sq_dist: f64,
    pub sigma: f64,
    pub rho: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub checkpoints: Vec<Checkpoint>,
}

/// Up to `count` geometrically spaced integers in `[1, horizon]`, always
/// including both ends, strictly increasing.
pub fn checkpoint_times(horizon: u64, count: usize) -> Vec<u64> {
    if horizon <= 1 || count <= 1 {
        return vec![horizon.max(1)];
    }
    let log_t = (horizon as f64).ln();
    let mut out: Vec<u64> = (0..count)
        .map(|k| (log_t * k as f64 / (count - 1) as f64).exp().round() as u64)
        .map(|t| t.clamp(1, horizon))
        .collect();
    *out.last_mut().unwrap() = horizon;
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub checkpoints: usize,
    /// Initial state; `None` starts at the action-set anchor.
    pub init: Option<Vec<f64>>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            checkpoints: 64,
            init: None,
        }
    }
}

/// Runs `horizon` iterations and records `|mu(t) - reference|^2` at the
/// checkpoint times. `mu(t)` is the state before iteration `t` executes.
#[allow(clippy::too_many_arguments)]
pub fn run<G: Game + ?Sized>(
    game: &G,
    schedule: &Schedule,
    kind: EstimatorKind,
    horizon: u64,
    reference: &[f64],
    seed: u64,
    run_index: u64,
    opts: &RunOptions,
) -> Result<Trajectory> {
    run_observed(game, schedule, kind, horizon, reference, seed, run_index, opts, |_| {})
}

/// [`run`] with a callback invoked after every step.
#[allow(clippy::too_many_arguments)]
pub fn run_observed<G: Game + ?Sized, F: FnMut(&LearnerState)>(
    game: &G,
    schedule: &Schedule,
    kind: EstimatorKind,
    horizon: u64,
    reference: &[f64],
    seed: u64,
    run_index: u64,
    opts: &RunOptions,
    mut observe: F,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::contract("horizon must be >= 1"));
    }
    check_dim(game.dim(), reference.len())?;
    if !game.action_sets().contains(reference, 1e-9) {
        return Err(Error::contract("reference point is not feasible"));
    }
    let init = match &opts.init {
        Some(v) => v.clone(),
        None => game.action_sets().anchor(),
    };
    let mut state = LearnerState::initial(game, schedule, &init)?;
    let times = checkpoint_times(horizon, opts.checkpoints);
    let mut next_cp = times.iter().peekable();
    let mut checkpoints = Vec::with_capacity(times.len());
    let mut ws = Workspace::default();
    let key = RngKey::new(seed, run_index, 0);
    for t in 1..=horizon {
        debug_assert_eq!(state.t, t);
        if next_cp.next_if_eq(&&t).is_some() {
            checkpoints.push(Checkpoint {
                t,
                mu: state.mu.clone(),
                sq_dist: linalg::dist_sq(&state.mu, reference),
                sigma: schedule.sigma(t),
                rho: schedule.rho(t),
                gamma: schedule.gamma(t),
            });
        }
        step_with(game, &mut state, schedule, kind, key, &mut ws)?;
        observe(&state);
    }
    Ok(Trajectory { checkpoints })
}
