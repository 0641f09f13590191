//! Gaussian sampling and payoff-based gradient estimates.
//!
//! Player `i` with state `mu_i` draws `xi_i ~ N(mu_i, sigma^2 I)` and forms
//!
//! ```text
//! one-point:  m1_i = J_i(a) (xi_i - mu_i) / sigma^2
//! two-point:  m2_i = (J_i(a) - J_i(mu)) (xi_i - mu_i) / sigma^2
//! ```
//!
//! where `a` is the joint point at which the cost is observed. The learner
//! observes at the projected action; the probes below observe at `xi`
//! itself, which isolates the zero-mean sampling noise from the bias
//! introduced by projection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::games::Game;
use crate::geometry::ProductSet;
use crate::linalg;
use crate::stats::RunningStats;

/// Key of a counter-based random stream. Each distinct key yields an
/// independent ChaCha8 stream, so draws never depend on evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngKey {
    pub seed: u64,
    pub run: u64,
    pub iteration: u64,
    pub player: u64,
}

impl RngKey {
    pub fn new(seed: u64, run: u64, iteration: u64) -> Self {
        RngKey {
            seed,
            run,
            iteration,
            player: 0,
        }
    }

    pub fn for_player(self, player: usize) -> Self {
        RngKey {
            player: player as u64,
            ..self
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut bytes = [0u8; 32];
        for (chunk, word) in bytes
            .chunks_exact_mut(8)
            .zip([self.seed, self.run, self.iteration, self.player])
        {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        ChaCha8Rng::from_seed(bytes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    OnePoint,
    TwoPoint,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::OnePoint => "one_point",
            EstimatorKind::TwoPoint => "two_point",
        }
    }
}

/// Joint gradient estimate, player blocks stacked.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub values: Vec<f64>,
    pub kind: EstimatorKind,
}

impl GradientEstimate {
    pub fn player_block(&self, player: usize, player_dim: usize) -> &[f64] {
        &self.values[player * player_dim..(player + 1) * player_dim]
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::contract(format!("sigma must be > 0, got {sigma}")))
    }
}

/// Fills `out` with `mu + sigma * z`, `z` standard normal from `rng`.
pub fn draw_gaussian<R: rand::Rng + ?Sized>(rng: &mut R, mu: &[f64], sigma: f64, out: &mut [f64]) {
    for (o, m) in out.iter_mut().zip(mu) {
        let z: f64 = StandardNormal.sample(rng);
        *o = m + sigma * z;
    }
}

/// Draws every player's perturbation from its own `(seed, run, iteration,
/// player)` stream.
pub fn perturb_into(mu: &[f64], player_dim: usize, sigma: f64, key: RngKey, out: &mut [f64]) {
    for (i, (m, o)) in mu
        .chunks(player_dim)
        .zip(out.chunks_mut(player_dim))
        .enumerate()
    {
        draw_gaussian(&mut key.for_player(i).rng(), m, sigma, o);
    }
}

/// `xi ~ N(mu, sigma^2 I)`, deterministic in `key`.
pub fn sample_state_perturbation(
    mu: &[f64],
    player_dim: usize,
    sigma: f64,
    key: RngKey,
) -> Result<Vec<f64>> {
    check_sigma(sigma)?;
    if player_dim == 0 || !mu.len().is_multiple_of(player_dim) {
        return Err(Error::contract(format!(
            "state length {} is not a multiple of player dimension {player_dim}",
            mu.len()
        )));
    }
    let mut out = vec![0.0; mu.len()];
    perturb_into(mu, player_dim, sigma, key, &mut out);
    Ok(out)
}

#[inline]
pub(crate) fn weighted_direction_into(
    weight: f64,
    xi_i: &[f64],
    mu_i: &[f64],
    sigma: f64,
    out: &mut [f64],
) {
    let s2 = sigma * sigma;
    for ((o, x), m) in out.iter_mut().zip(xi_i).zip(mu_i) {
        *o = weight * (x - m) / s2;
    }
}

/// `payoff * (xi_i - mu_i) / sigma^2`.
pub fn one_point_estimate(payoff: f64, xi_i: &[f64], mu_i: &[f64], sigma: f64) -> Result<Vec<f64>> {
    check_sigma(sigma)?;
    check_dim(mu_i.len(), xi_i.len())?;
    if !payoff.is_finite() {
        return Err(Error::NonFinite {
            value: payoff,
            context: "one-point payoff".into(),
        });
    }
    let mut out = vec![0.0; xi_i.len()];
    weighted_direction_into(payoff, xi_i, mu_i, sigma, &mut out);
    Ok(out)
}

/// `(payoff_at_action - payoff_at_state) * (xi_i - mu_i) / sigma^2`.
pub fn two_point_estimate(
    payoff_at_action: f64,
    payoff_at_state: f64,
    xi_i: &[f64],
    mu_i: &[f64],
    sigma: f64,
) -> Result<Vec<f64>> {
    check_sigma(sigma)?;
    check_dim(mu_i.len(), xi_i.len())?;
    for (value, what) in [
        (payoff_at_action, "two-point payoff at action"),
        (payoff_at_state, "two-point payoff at state"),
    ] {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                value,
                context: what.into(),
            });
        }
    }
    if !linalg::all_finite(xi_i) || !linalg::all_finite(mu_i) {
        return Err(Error::NonFinite {
            value: f64::NAN,
            context: "two-point sample or state".into(),
        });
    }
    let mut out = vec![0.0; xi_i.len()];
    weighted_direction_into(payoff_at_action - payoff_at_state, xi_i, mu_i, sigma, &mut out);
    Ok(out)
}

/// Joint estimate with costs observed at `observed` (the projected action
/// inside the learner, `xi` in the probes). Writes into `out`.
pub(crate) fn estimate_into<G: Game + ?Sized>(
    game: &G,
    kind: EstimatorKind,
    mu: &[f64],
    xi: &[f64],
    observed: &[f64],
    sigma: f64,
    out: &mut [f64],
) {
    let d = game.player_dim();
    for i in 0..game.n_players() {
        let r = i * d..(i + 1) * d;
        let weight = match kind {
            EstimatorKind::OnePoint => game.cost(i, observed),
            EstimatorKind::TwoPoint => game.cost(i, observed) - game.cost(i, mu),
        };
        weighted_direction_into(weight, &xi[r.clone()], &mu[r.clone()], sigma, &mut out[r]);
    }
}

pub fn estimate<G: Game + ?Sized>(
    game: &G,
    kind: EstimatorKind,
    mu: &[f64],
    xi: &[f64],
    observed: &[f64],
    sigma: f64,
) -> Result<GradientEstimate> {
    check_sigma(sigma)?;
    for v in [mu, xi, observed] {
        check_dim(game.dim(), v.len())?;
    }
    let mut values = vec![0.0; mu.len()];
    estimate_into(game, kind, mu, xi, observed, sigma, &mut values);
    if !linalg::all_finite(&values) {
        return Err(Error::NonFinite {
            value: values.iter().copied().find(|v| !v.is_finite()).unwrap_or(f64::NAN),
            context: format!("{} estimate", kind.as_str()),
        });
    }
    Ok(GradientEstimate { values, kind })
}

/// Monte Carlo mean with per-coordinate standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_samples: usize,
}

/// Smoothed pseudo-gradient `E[M(xi)]`, `xi ~ N(mu, sigma^2 I)`, by plain
/// Monte Carlo over `n_samples` draws from the single stream `key`.
pub fn smoothed_pseudo_gradient_mc<G: Game + ?Sized>(
    game: &G,
    mu: &[f64],
    sigma: f64,
    n_samples: usize,
    key: RngKey,
) -> Result<McEstimate> {
    check_sigma(sigma)?;
    check_dim(game.dim(), mu.len())?;
    if n_samples == 0 {
        return Err(Error::contract("n_samples must be >= 1"));
    }
    let mut rng = key.rng();
    let mut xi = vec![0.0; mu.len()];
    let mut g = vec![0.0; mu.len()];
    let mut acc = RunningStats::new(mu.len());
    for _ in 0..n_samples {
        draw_gaussian(&mut rng, mu, sigma, &mut xi);
        game.pseudo_gradient_into(&xi, &mut g);
        acc.push(&g);
    }
    Ok(McEstimate {
        estimate: acc.mean().to_vec(),
        stderr: acc.stderr(),
        n_samples,
    })
}

/// Reference stream for the smoothed pseudo-gradient inside probes, kept
/// disjoint from the estimator's stream.
fn reference_key(key: RngKey) -> RngKey {
    RngKey {
        player: u64::MAX,
        ..key
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct UnbiasednessReport {
    pub kind: EstimatorKind,
    pub sigma: f64,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub reference: Vec<f64>,
    pub reference_stderr: Vec<f64>,
    /// Largest `|mean - reference| / combined stderr` over coordinates.
    pub max_abs_z: f64,
    pub passed: bool,
}

/// Empirical mean of the estimator with costs observed at `xi`, against the
/// smoothed pseudo-gradient. For affine pseudo-gradients the reference is
/// `M(mu)` exactly; otherwise a Monte Carlo estimate with `4 n` samples.
/// Passes iff every coordinate is within 4 combined standard errors.
pub fn unbiasedness_probe<G: Game + ?Sized>(
    game: &G,
    mu: &[f64],
    sigma: f64,
    kind: EstimatorKind,
    n_samples: usize,
    key: RngKey,
) -> Result<UnbiasednessReport> {
    check_sigma(sigma)?;
    check_dim(game.dim(), mu.len())?;
    if n_samples < 2 {
        return Err(Error::contract("unbiasedness probe needs >= 2 samples"));
    }
    let mut rng = key.rng();
    let mut xi = vec![0.0; mu.len()];
    let mut m = vec![0.0; mu.len()];
    let mut acc = RunningStats::new(mu.len());
    for _ in 0..n_samples {
        draw_gaussian(&mut rng, mu, sigma, &mut xi);
        estimate_into(game, kind, mu, &xi, &xi, sigma, &mut m);
        acc.push(&m);
    }
    let (reference, reference_stderr) = if game.has_affine_gradient() {
        (game.pseudo_gradient(mu), vec![0.0; mu.len()])
    } else {
        let r = smoothed_pseudo_gradient_mc(game, mu, sigma, 4 * n_samples, reference_key(key))?;
        (r.estimate, r.stderr)
    };
    let stderr = acc.stderr();
    let mut max_abs_z: f64 = 0.0;
    for k in 0..mu.len() {
        let dev = (acc.mean()[k] - reference[k]).abs();
        let se = (stderr[k].powi(2) + reference_stderr[k].powi(2)).sqrt();
        let z = if se > 0.0 {
            dev / se
        } else if dev == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        max_abs_z = max_abs_z.max(z);
    }
    Ok(UnbiasednessReport {
        kind,
        sigma,
        mean: acc.mean().to_vec(),
        stderr,
        reference,
        reference_stderr,
        max_abs_z,
        passed: max_abs_z <= 4.0,
    })
}

/// Per-player empirical `E |m_i - M~_i|^2` with costs observed at `xi`, where
/// `M~` is the Monte Carlo smoothed pseudo-gradient from `4 n` samples.
pub fn variance_probe<G: Game + ?Sized>(
    game: &G,
    mu: &[f64],
    sigma: f64,
    kind: EstimatorKind,
    n_samples: usize,
    key: RngKey,
) -> Result<Vec<f64>> {
    check_sigma(sigma)?;
    check_dim(game.dim(), mu.len())?;
    if n_samples == 0 {
        return Err(Error::contract("n_samples must be >= 1"));
    }
    let smoothed = smoothed_pseudo_gradient_mc(game, mu, sigma, 4 * n_samples, reference_key(key))?;
    let d = game.player_dim();
    let n = game.n_players();
    let mut rng = key.rng();
    let mut xi = vec![0.0; mu.len()];
    let mut m = vec![0.0; mu.len()];
    let mut sums = vec![0.0; n];
    for _ in 0..n_samples {
        draw_gaussian(&mut rng, mu, sigma, &mut xi);
        estimate_into(game, kind, mu, &xi, &xi, sigma, &mut m);
        for (i, s) in sums.iter_mut().enumerate() {
            *s += (i * d..(i + 1) * d)
                .map(|k| (m[k] - smoothed.estimate[k]).powi(2))
                .sum::<f64>();
        }
    }
    Ok(sums.into_iter().map(|s| s / n_samples as f64).collect())
}

/// Fraction of draws `xi ~ N(mu, sigma^2 I)` landing outside the unshrunk
/// set. Requires `mu` to lie in `shrink(set, rho)`.
pub fn escape_probability_probe(
    set: &ProductSet,
    mu: &[f64],
    sigma: f64,
    rho: f64,
    n_samples: usize,
    key: RngKey,
) -> Result<f64> {
    check_sigma(sigma)?;
    check_dim(set.dim(), mu.len())?;
    if n_samples == 0 {
        return Err(Error::contract("n_samples must be >= 1"));
    }
    if !set.shrink(rho)?.contains(mu, 1e-12) {
        return Err(Error::contract(format!(
            "state is not inside the set shrunk by rho = {rho}"
        )));
    }
    let mut rng = key.rng();
    let mut xi = vec![0.0; mu.len()];
    let mut outside = 0usize;
    for _ in 0..n_samples {
        draw_gaussian(&mut rng, mu, sigma, &mut xi);
        if !set.contains(&xi, 0.0) {
            outside += 1;
        }
    }
    Ok(outside as f64 / n_samples as f64)
}

/// Per-player mean of `|(J_i(Proj xi) - J_i(xi)) (xi_i - mu_i)| / sigma^2`,
/// the bias carried by observing costs at the projected action.
pub fn projection_bias_probe<G: Game + ?Sized>(
    game: &G,
    mu: &[f64],
    sigma: f64,
    n_samples: usize,
    key: RngKey,
) -> Result<Vec<f64>> {
    check_sigma(sigma)?;
    check_dim(game.dim(), mu.len())?;
    if n_samples == 0 {
        return Err(Error::contract("n_samples must be >= 1"));
    }
    let d = game.player_dim();
    let sets = game.action_sets();
    let mut rng = key.rng();
    let mut xi = vec![0.0; mu.len()];
    let mut a = vec![0.0; mu.len()];
    let mut sums = vec![0.0; game.n_players()];
    let s2 = sigma * sigma;
    for _ in 0..n_samples {
        draw_gaussian(&mut rng, mu, sigma, &mut xi);
        a.copy_from_slice(&xi);
        sets.project_in_place(&mut a);
        if a == xi {
            continue;
        }
        for (i, s) in sums.iter_mut().enumerate() {
            let diff = game.cost(i, &a) - game.cost(i, &xi);
            let r = i * d..(i + 1) * d;
            *s += diff.abs() * linalg::dist(&xi[r.clone()], &mu[r]) / s2;
        }
    }
    Ok(sums.into_iter().map(|s| s / n_samples as f64).collect())
}
