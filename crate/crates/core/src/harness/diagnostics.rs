//! Statistical checks of the estimators on a given game.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::estimators::{
    escape_probability_probe, projection_bias_probe, unbiasedness_probe, variance_probe,
    EstimatorKind, RngKey,
};
use crate::games::{check_gradient_consistency, check_strong_monotonicity, Game};
use crate::linalg;

fn default_sigmas() -> Vec<f64> {
    vec![0.2, 0.1]
}
fn default_samples() -> usize {
    200_000
}
fn default_escape_sigma() -> f64 {
    0.02
}
fn default_escape_ratios() -> Vec<f64> {
    vec![2.0, 5.0]
}
fn default_escape_samples() -> usize {
    100_000
}
fn default_gradient_points() -> usize {
    100
}
fn default_monotone_pairs() -> usize {
    1000
}

/// Probe grid. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsGrid {
    /// Smoothing levels for the unbiasedness and variance probes. Variance
    /// ratios are taken between consecutive entries.
    #[serde(default = "default_sigmas")]
    pub sigmas: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// State for the unbiasedness probe; defaults to the set anchor.
    #[serde(default)]
    pub unbiased_point: Option<Vec<f64>>,
    /// State for the variance probe; defaults to the extreme point of the
    /// action set with the largest costs (the `1/sigma^2` growth of the
    /// one-point variance is proportional to the squared cost there).
    #[serde(default)]
    pub variance_point: Option<Vec<f64>>,
    #[serde(default = "default_escape_sigma")]
    pub escape_sigma: f64,
    /// Values of `rho * clearance / sigma` for escape and projection-bias
    /// probes.
    #[serde(default = "default_escape_ratios")]
    pub escape_ratios: Vec<f64>,
    #[serde(default = "default_escape_samples")]
    pub escape_samples: usize,
    #[serde(default = "default_gradient_points")]
    pub gradient_points: usize,
    #[serde(default = "default_monotone_pairs")]
    pub monotone_pairs: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for DiagnosticsGrid {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields defaulted")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeResult {
    pub name: String,
    pub passed: bool,
    pub detail: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub game: String,
    pub probes: Vec<ProbeResult>,
    pub all_passed: bool,
}

impl DiagnosticsReport {
    pub fn probe(&self, name: &str) -> Option<&ProbeResult> {
        self.probes.iter().find(|p| p.name == name)
    }
}

/// Band for the one-point second-moment ratio when sigma shrinks by `q`:
/// `[2.5, 6]` at `q = 2`, scaled by `q^2 / 4`.
pub fn one_point_variance_band(q: f64) -> (f64, f64) {
    (0.625 * q * q, 1.5 * q * q)
}

/// Band for the two-point second-moment ratio (bounded variance).
pub const TWO_POINT_VARIANCE_BAND: (f64, f64) = (0.5, 2.0);

/// Escape fraction allowed once `rho * clearance >= 5 sigma`.
pub const ESCAPE_LIMIT: f64 = 1e-4;

fn default_variance_point<G: Game + ?Sized>(game: &G) -> Vec<f64> {
    // Only players' own extreme points are combined uniformly across players
    // (every player at its k-th extreme point), which keeps the search small.
    let sets = game.action_sets();
    let per_player: Vec<Vec<Vec<f64>>> = sets.factors().iter().map(|f| f.extreme_points()).collect();
    let count = per_player.iter().map(Vec::len).min().unwrap_or(0);
    let mut best = sets.anchor();
    let score = |x: &[f64]| (0..game.n_players()).map(|i| game.cost(i, x).powi(2)).sum::<f64>();
    let mut best_score = score(&best);
    for k in 0..count {
        let x: Vec<f64> = per_player.iter().flat_map(|p| p[k].iter().copied()).collect();
        let s = score(&x);
        if s > best_score {
            best_score = s;
            best = x;
        }
    }
    best
}

/// Point of `shrink(A, rho)` on its boundary, toward the lower corner.
fn shrunk_boundary_point<G: Game + ?Sized>(game: &G, rho: f64) -> Result<Vec<f64>> {
    let sets = game.action_sets();
    let shrunk = sets.shrink(rho)?;
    let far: Vec<f64> = sets
        .anchor()
        .iter()
        .map(|a| a - 1e3 * (1.0 + sets.diameter()))
        .collect();
    shrunk.project(&far)
}

fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

/// Runs gradient-consistency, monotonicity, unbiasedness, variance-scaling,
/// escape-probability and projection-bias probes.
pub fn run_diagnostics<G: Game + ?Sized>(game: &G, grid: &DiagnosticsGrid) -> Result<DiagnosticsReport> {
    if grid.sigmas.is_empty() || grid.samples < 2 {
        return Err(Error::Config("diagnostics need sigmas and >= 2 samples".into()));
    }
    let sets = game.action_sets();
    let mut rng = RngKey::new(grid.seed, u64::MAX, 0).rng();
    let mut probes = Vec::new();

    // Interior points keep the finite-difference stencil well defined.
    let inner = sets.shrink(0.1)?;
    let points: Vec<Vec<f64>> = (0..grid.gradient_points)
        .map(|_| inner.sample_uniform(&mut rng))
        .collect();
    let rep = check_gradient_consistency(game, &points, 1e-4);
    probes.push(ProbeResult {
        name: "gradient_consistency".into(),
        passed: rep.passed,
        detail: serde_json::to_value(&rep).unwrap_or(Value::Null),
    });

    let rep = check_strong_monotonicity(game, grid.monotone_pairs.max(1), grid.seed)?;
    probes.push(ProbeResult {
        name: "strong_monotonicity".into(),
        passed: rep.passed,
        detail: serde_json::to_value(&rep).unwrap_or(Value::Null),
    });

    let kinds = [EstimatorKind::OnePoint, EstimatorKind::TwoPoint];
    let mu = grid.unbiased_point.clone().unwrap_or_else(|| sets.anchor());
    for (s_idx, &sigma) in grid.sigmas.iter().enumerate() {
        for (k_idx, kind) in kinds.into_iter().enumerate() {
            let key = RngKey::new(grid.seed, 1, (s_idx * 2 + k_idx) as u64);
            let rep = unbiasedness_probe(game, &mu, sigma, kind, grid.samples, key)?;
            probes.push(ProbeResult {
                name: format!("unbiasedness/{}/sigma={sigma}", kind.as_str()),
                passed: rep.passed,
                detail: serde_json::to_value(&rep).unwrap_or(Value::Null),
            });
        }
    }

    let vmu = grid
        .variance_point
        .clone()
        .unwrap_or_else(|| default_variance_point(game));
    for (k_idx, kind) in kinds.into_iter().enumerate() {
        let moments: Vec<Vec<f64>> = grid
            .sigmas
            .iter()
            .enumerate()
            .map(|(s_idx, &sigma)| {
                variance_probe(
                    game,
                    &vmu,
                    sigma,
                    kind,
                    grid.samples,
                    RngKey::new(grid.seed, 2, (s_idx * 2 + k_idx) as u64),
                )
            })
            .collect::<Result<_>>()?;
        let mut passed = grid.sigmas.len() >= 2;
        let mut ratios = Vec::new();
        for w in 0..grid.sigmas.len().saturating_sub(1) {
            let q = grid.sigmas[w] / grid.sigmas[w + 1];
            let (lo, hi) = match kind {
                EstimatorKind::OnePoint => one_point_variance_band(q),
                EstimatorKind::TwoPoint => TWO_POINT_VARIANCE_BAND,
            };
            let r: Vec<f64> = moments[w + 1]
                .iter()
                .zip(&moments[w])
                .map(|(small, large)| small / large)
                .collect();
            passed &= r.iter().all(|x| *x >= lo && *x <= hi);
            ratios.push(json!({"sigma_from": grid.sigmas[w], "sigma_to": grid.sigmas[w + 1], "ratios": r, "band": [lo, hi]}));
        }
        probes.push(ProbeResult {
            name: format!("variance_scaling/{}", kind.as_str()),
            passed,
            detail: json!({
                "point": vmu,
                "sigmas": grid.sigmas,
                "second_moments": moments,
                "ratios": ratios,
            }),
        });
    }

    let clearance = sets.anchor_clearance();
    let sigma = grid.escape_sigma;
    let mut fractions = Vec::new();
    let mut biases = Vec::new();
    for (q_idx, &ratio) in grid.escape_ratios.iter().enumerate() {
        let rho = ratio * sigma / clearance;
        if !(rho < 1.0) {
            return Err(Error::Config(format!(
                "escape ratio {ratio} needs rho = {rho} >= 1; lower escape_sigma"
            )));
        }
        let at = shrunk_boundary_point(game, rho)?;
        let key = RngKey::new(grid.seed, 3, q_idx as u64);
        fractions.push(escape_probability_probe(sets, &at, sigma, rho, grid.escape_samples, key)?);
        let per_player = projection_bias_probe(game, &at, sigma, grid.escape_samples, key)?;
        biases.push(linalg::norm(&per_player));
    }
    let limit_ok = grid
        .escape_ratios
        .iter()
        .zip(&fractions)
        .all(|(q, f)| *q < 5.0 || *f <= ESCAPE_LIMIT);
    probes.push(ProbeResult {
        name: "escape_probability".into(),
        passed: limit_ok && strictly_decreasing(&fractions),
        detail: json!({"sigma": sigma, "ratios": grid.escape_ratios, "fractions": fractions, "limit": ESCAPE_LIMIT}),
    });
    probes.push(ProbeResult {
        name: "projection_bias".into(),
        passed: strictly_decreasing(&biases),
        detail: json!({"sigma": sigma, "ratios": grid.escape_ratios, "mean_norm": biases}),
    });

    let all_passed = probes.iter().all(|p| p.passed);
    Ok(DiagnosticsReport {
        game: game.name().to_string(),
        probes,
        all_passed,
    })
}
