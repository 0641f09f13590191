//! Games with strongly monotone pseudo-gradients.
//!
//! All shipped families are quadratic: player `i` minimizes
//!
//! ```text
//! J_i(a) = 1/2 a_i' B_ii a_i + a_i' sum_{j != i} B_ij a_j + b_i' a_i
//! ```
//!
//! whose pseudo-gradient is the affine map `M(a) = B a + b`. Costs are
//! defined on the whole space; the Gaussian perturbations the learner
//! draws are not confined to the action sets.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{ConvexSet, ProductSet};
use crate::linalg;

/// An N-player game on `R^{N d}` with a strongly monotone pseudo-gradient.
pub trait Game: Send + Sync {
    fn name(&self) -> &str;

    /// Parameter record for output metadata.
    fn params(&self) -> Value {
        Value::Null
    }

    fn action_sets(&self) -> &ProductSet;

    fn n_players(&self) -> usize {
        self.action_sets().n_players()
    }

    fn player_dim(&self) -> usize {
        self.action_sets().player_dim()
    }

    fn dim(&self) -> usize {
        self.action_sets().dim()
    }

    /// Cost of `player` at the joint action (defined everywhere).
    fn cost(&self, player: usize, joint: &[f64]) -> f64;

    /// Stacked own-action gradients `(d J_i / d a_i)_i`.
    fn pseudo_gradient_into(&self, joint: &[f64], out: &mut [f64]);

    fn pseudo_gradient(&self, joint: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; joint.len()];
        self.pseudo_gradient_into(joint, &mut out);
        out
    }

    /// Strong monotonicity constant.
    fn nu(&self) -> f64;

    /// Lipschitz constant of the pseudo-gradient.
    fn lipschitz(&self) -> f64;

    /// True when the pseudo-gradient is affine, in which case the Gaussian
    /// smoothed pseudo-gradient equals the pseudo-gradient itself.
    fn has_affine_gradient(&self) -> bool {
        false
    }

    /// Equilibrium from a closed-form solve, when one is available.
    fn closed_form_ne(&self) -> Option<Vec<f64>> {
        None
    }
}

/// Affine pseudo-gradient `M(a) = B a + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineGameSpec {
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl AffineGameSpec {
    pub fn from_rows(rows: &[Vec<f64>], offset: &[f64]) -> Result<Self> {
        let n = rows.len();
        for r in rows {
            check_dim(n, r.len())?;
        }
        check_dim(n, offset.len())?;
        Ok(AffineGameSpec {
            matrix: DMatrix::from_fn(n, n, |i, j| rows[i][j]),
            offset: DVector::from_column_slice(offset),
        })
    }

    /// Smallest eigenvalue of `(B + B') / 2`.
    pub fn symmetric_eigmin(&self) -> f64 {
        let sym = (&self.matrix + self.matrix.transpose()) * 0.5;
        sym.symmetric_eigen().eigenvalues.min()
    }

    /// Largest singular value of `B`.
    pub fn spectral_norm(&self) -> f64 {
        self.matrix
            .clone()
            .singular_values()
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }
}

/// Quadratic game with affine pseudo-gradient.
#[derive(Debug, Clone)]
pub struct QuadraticGame {
    name: String,
    params: Value,
    spec: AffineGameSpec,
    sets: ProductSet,
    nu: f64,
    lipschitz: f64,
}

impl QuadraticGame {
    pub fn spec(&self) -> &AffineGameSpec {
        &self.spec
    }

    fn block(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let d = self.sets.player_dim();
        self.spec.matrix[(i * d + k, j * d + l)]
    }
}

impl Game for QuadraticGame {
    fn name(&self) -> &str {
        &self.name
    }

    fn params(&self) -> Value {
        self.params.clone()
    }

    fn action_sets(&self) -> &ProductSet {
        &self.sets
    }

    fn cost(&self, player: usize, joint: &[f64]) -> f64 {
        let d = self.sets.player_dim();
        let n = self.sets.n_players();
        let own = &joint[player * d..(player + 1) * d];
        let mut total = 0.0;
        for k in 0..d {
            let mut coupling = self.spec.offset[player * d + k];
            for l in 0..d {
                coupling += 0.5 * self.block(player, player, k, l) * own[l];
            }
            for j in (0..n).filter(|&j| j != player) {
                for l in 0..d {
                    coupling += self.block(player, j, k, l) * joint[j * d + l];
                }
            }
            total += own[k] * coupling;
        }
        total
    }

    fn pseudo_gradient_into(&self, joint: &[f64], out: &mut [f64]) {
        let b = &self.spec.matrix;
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = self.spec.offset[r];
            for (c, x) in joint.iter().enumerate() {
                acc += b[(r, c)] * x;
            }
            *o = acc;
        }
    }

    fn nu(&self) -> f64 {
        self.nu
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn has_affine_gradient(&self) -> bool {
        true
    }

    fn closed_form_ne(&self) -> Option<Vec<f64>> {
        let sol = self.spec.matrix.clone().lu().solve(&(-&self.spec.offset))?;
        let a: Vec<f64> = sol.iter().copied().collect();
        // M(a) = 0 at a feasible point is the equilibrium; otherwise the
        // constraints bind and a solver is needed.
        self.sets.contains(&a, 0.0).then_some(a)
    }
}

/// Game with `M(a) = B a + b` on the given sets. `nu` is the smallest
/// eigenvalue of the symmetric part of `B` and must be positive.
pub fn make_affine_game(spec: AffineGameSpec, sets: ProductSet) -> Result<QuadraticGame> {
    let nu = spec.symmetric_eigmin();
    let lipschitz = spec.spectral_norm();
    let params = json!({
        "B": matrix_rows(&spec.matrix),
        "b": spec.offset.iter().collect::<Vec<_>>(),
    });
    build_affine("affine", params, spec, sets, nu, lipschitz)
}

fn build_affine(
    name: &str,
    params: Value,
    spec: AffineGameSpec,
    sets: ProductSet,
    nu: f64,
    lipschitz: f64,
) -> Result<QuadraticGame> {
    check_dim(sets.dim(), spec.matrix.nrows())?;
    if !spec.matrix.iter().chain(spec.offset.iter()).all(|v| v.is_finite()) {
        return Err(Error::contract("affine game coefficients must be finite"));
    }
    if !(nu > 0.0) {
        return Err(Error::NotMonotone { eigmin: nu });
    }
    let d = sets.player_dim();
    for i in 0..sets.n_players() {
        for k in 0..d {
            for l in 0..k {
                let (x, y) = (spec.matrix[(i * d + k, i * d + l)], spec.matrix[(i * d + l, i * d + k)]);
                if x != y {
                    return Err(Error::contract(format!(
                        "diagonal block of player {i} must be symmetric to derive quadratic costs"
                    )));
                }
            }
        }
    }
    Ok(QuadraticGame {
        name: name.to_string(),
        params,
        spec,
        sets,
        nu,
        lipschitz,
    })
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// `J_1 = a1^2 + a1 a2 - a1`, `J_2 = a2^2 + a1 a2 - a2` on `[0,1]^2`.
/// Equilibrium `(1/3, 1/3)`, `nu = 1`.
pub fn make_canonical_quadratic() -> QuadraticGame {
    let spec = AffineGameSpec::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]], &[-1.0, -1.0])
        .expect("static shape");
    let unit = ConvexSet::boxed(vec![0.0], vec![1.0]).expect("static box");
    let sets = ProductSet::replicate(unit, 2).expect("static product");
    let mut game = make_affine_game(spec, sets).expect("canonical game is strongly monotone");
    game.name = "canonical_quadratic".into();
    game.params = json!({});
    game
}

/// Cournot oligopoly with linear inverse demand `P - S * sum(a)`, unit
/// costs `c_i` and capacity bound. Player `i` pays
/// `J_i(a) = a_i (c_i - P + S sum_j a_j)`.
pub fn make_cournot(
    n_players: usize,
    price_intercept: f64,
    price_slope: f64,
    unit_costs: &[f64],
    capacity: f64,
) -> Result<QuadraticGame> {
    if n_players == 0 {
        return Err(Error::contract("cournot needs at least one firm"));
    }
    check_dim(n_players, unit_costs.len())?;
    if !(price_slope > 0.0) {
        return Err(Error::contract(format!(
            "price_slope must be > 0, got {price_slope}"
        )));
    }
    if !(capacity > 0.0 && capacity.is_finite()) {
        return Err(Error::contract(format!("capacity must be > 0, got {capacity}")));
    }
    if let Some(c) = unit_costs.iter().find(|c| !(**c < price_intercept)) {
        return Err(Error::contract(format!(
            "unit cost {c} must be below price_intercept {price_intercept}"
        )));
    }
    let n = n_players;
    let matrix = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            2.0 * price_slope
        } else {
            price_slope
        }
    });
    let offset = DVector::from_iterator(n, unit_costs.iter().map(|c| c - price_intercept));
    let sets = ProductSet::replicate(ConvexSet::boxed(vec![0.0], vec![capacity])?, n)?;
    // S (11' + I) has eigenvalues S (multiplicity n - 1) and S (n + 1).
    let nu = if n == 1 { 2.0 * price_slope } else { price_slope };
    let lipschitz = price_slope * (n as f64 + 1.0);
    let params = json!({
        "n": n,
        "price_intercept": price_intercept,
        "price_slope": price_slope,
        "unit_costs": unit_costs,
        "capacity": capacity,
    });
    build_affine(
        "cournot",
        params,
        AffineGameSpec { matrix, offset },
        sets,
        nu,
        lipschitz,
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientReport {
    pub max_abs_deviation: f64,
    pub threshold: f64,
    pub n_points: usize,
    pub passed: bool,
}

/// Compares the pseudo-gradient with central differences of each player's
/// cost in its own coordinates. Passes iff the worst deviation is at most
/// `10 h^2`.
pub fn check_gradient_consistency<G: Game + ?Sized>(
    game: &G,
    points: &[Vec<f64>],
    h: f64,
) -> GradientReport {
    let d = game.player_dim();
    let mut worst: f64 = 0.0;
    let mut x = vec![0.0; game.dim()];
    for p in points {
        let grad = game.pseudo_gradient(p);
        for i in 0..game.n_players() {
            for k in 0..d {
                let idx = i * d + k;
                x.copy_from_slice(p);
                x[idx] = p[idx] + h;
                let up = game.cost(i, &x);
                x[idx] = p[idx] - h;
                let down = game.cost(i, &x);
                let fd = (up - down) / (2.0 * h);
                let dev = (fd - grad[idx]).abs();
                worst = if dev.is_nan() { f64::INFINITY } else { worst.max(dev) };
            }
        }
    }
    let threshold = 10.0 * h * h;
    GradientReport {
        max_abs_deviation: worst,
        threshold,
        n_points: points.len(),
        passed: worst <= threshold,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub min_ratio: f64,
    pub nu: f64,
    pub n_pairs: usize,
    pub passed: bool,
}

/// Minimum of `(M(x) - M(y), x - y) / |x - y|^2` over pairs drawn uniformly
/// from the joint action set. Passes iff it is at least `nu - 1e-9`.
pub fn check_strong_monotonicity<G: Game + ?Sized>(
    game: &G,
    n_pairs: usize,
    rng_seed: u64,
) -> Result<MonotonicityReport> {
    if n_pairs == 0 {
        return Err(Error::contract("n_pairs must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let sets = game.action_sets();
    let mut min_ratio = f64::INFINITY;
    for _ in 0..n_pairs {
        let x = sets.sample_uniform(&mut rng);
        let y = sets.sample_uniform(&mut rng);
        let dsq = linalg::dist_sq(&x, &y);
        if dsq == 0.0 {
            continue;
        }
        let gx = game.pseudo_gradient(&x);
        let gy = game.pseudo_gradient(&y);
        let inner: f64 = gx
            .iter()
            .zip(&gy)
            .zip(x.iter().zip(&y))
            .map(|((a, b), (p, q))| (a - b) * (p - q))
            .sum();
        min_ratio = min_ratio.min(inner / dsq);
    }
    let nu = game.nu();
    Ok(MonotonicityReport {
        min_ratio,
        nu,
        n_pairs,
        passed: min_ratio >= nu - 1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_game_values() {
        let g = make_canonical_quadratic();
        assert_eq!(g.pseudo_gradient(&[0.0, 0.0]), vec![-1.0, -1.0]);
        assert!((g.nu() - 1.0).abs() < 1e-12);
        assert!((g.lipschitz() - 3.0).abs() < 1e-12);
        let a = [0.3, 0.8];
        assert!((g.cost(0, &a) - (0.09 + 0.24 - 0.3)).abs() < 1e-15);
        assert!((g.cost(1, &a) - (0.64 + 0.24 - 0.8)).abs() < 1e-15);
    }

    #[test]
    fn canonical_ne_matches_linear_solve() {
        // 2a + b = 1, a + 2b = 1  =>  a = b = 1/3
        let ne = make_canonical_quadratic().closed_form_ne().unwrap();
        for v in ne {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn affine_game_rejects_non_monotone() {
        let spec = AffineGameSpec::from_rows(&[vec![1.0, 3.0], vec![3.0, 1.0]], &[0.5, 0.0]).unwrap();
        let sets = ProductSet::replicate(ConvexSet::boxed(vec![-1.0], vec![1.0]).unwrap(), 2).unwrap();
        match make_affine_game(spec, sets) {
            Err(Error::NotMonotone { eigmin }) => assert!((eigmin + 2.0).abs() < 1e-12),
            other => panic!("expected NotMonotone, got {other:?}"),
        }
    }

    #[test]
    fn isotropic_affine_game_has_ne_at_origin() {
        let spec = AffineGameSpec::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]], &[0.0, 0.0]).unwrap();
        let sets = ProductSet::replicate(ConvexSet::boxed(vec![-1.0], vec![1.0]).unwrap(), 2).unwrap();
        let g = make_affine_game(spec, sets).unwrap();
        assert_eq!(g.closed_form_ne().unwrap(), vec![0.0, 0.0]);
        assert!((g.nu() - 2.0).abs() < 1e-12);
        let rep = check_strong_monotonicity(&g, 200, 3).unwrap();
        assert!((rep.min_ratio - 2.0).abs() < 1e-12);
    }

    #[test]
    fn affine_game_reproduces_canonical_map() {
        let spec = AffineGameSpec::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]], &[-1.0, -1.0]).unwrap();
        let sets = ProductSet::replicate(ConvexSet::boxed(vec![0.0], vec![1.0]).unwrap(), 2).unwrap();
        let g = make_affine_game(spec, sets).unwrap();
        let c = make_canonical_quadratic();
        for x in [[0.1, 0.9], [0.5, 0.5], [-3.0, 2.0]] {
            assert_eq!(g.pseudo_gradient(&x), c.pseudo_gradient(&x));
            assert_eq!(g.cost(1, &x), c.cost(1, &x));
        }
    }

    #[test]
    fn cournot_duopoly() {
        let g = make_cournot(2, 3.0, 1.0, &[1.0, 1.0], 2.0).unwrap();
        let ne = g.closed_form_ne().unwrap();
        for v in &ne {
            assert!((v - 2.0 / 3.0).abs() < 1e-14);
        }
        assert_eq!(g.nu(), 1.0);
        assert!((g.nu() - g.spec().symmetric_eigmin()).abs() < 1e-12);
        assert!((g.lipschitz() - g.spec().spectral_norm()).abs() < 1e-12);
        // J_1(a) = a1 (c - P + S (a1 + a2))
        let a = [0.4, 1.1];
        assert!((g.cost(0, &a) - 0.4 * (1.0 - 3.0 + 1.5)).abs() < 1e-15);
    }

    #[test]
    fn cournot_monopoly() {
        let g = make_cournot(1, 5.0, 0.5, &[2.0], 10.0).unwrap();
        let ne = g.closed_form_ne().unwrap();
        assert!((ne[0] - (5.0 - 2.0) / (2.0 * 0.5)).abs() < 1e-14);
    }

    #[test]
    fn cournot_rejects_bad_params() {
        assert!(make_cournot(2, 3.0, 0.0, &[1.0, 1.0], 2.0).is_err());
        assert!(make_cournot(2, 3.0, 1.0, &[1.0, 3.0], 2.0).is_err());
        assert!(make_cournot(2, 3.0, 1.0, &[1.0, 1.0], 0.0).is_err());
        assert!(make_cournot(2, 3.0, 1.0, &[1.0], 1.0).is_err());
    }

    #[test]
    fn cournot_nu_matches_eigensolve_for_many_firms() {
        for n in 1..6 {
            let g = make_cournot(n, 10.0, 0.7, &vec![1.0; n], 5.0).unwrap();
            assert!((g.nu() - g.spec().symmetric_eigmin()).abs() < 1e-12);
            assert!((g.lipschitz() - g.spec().spectral_norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn costs_are_deterministic() {
        let g = make_cournot(3, 4.0, 1.0, &[1.0, 1.5, 0.5], 2.0).unwrap();
        let x = [0.123, 1.7, -0.3];
        assert_eq!(g.cost(2, &x).to_bits(), g.cost(2, &x).to_bits());
        assert_eq!(g.pseudo_gradient(&x), g.pseudo_gradient(&x));
    }

    #[test]
    fn gradient_consistency_multi_dim_player() {
        let rows = vec![
            vec![3.0, 0.5, 1.0, 0.0],
            vec![0.5, 2.0, 0.0, -1.0],
            vec![0.2, 0.0, 2.5, 0.3],
            vec![0.0, 0.4, 0.3, 3.0],
        ];
        let spec = AffineGameSpec::from_rows(&rows, &[0.1, -0.2, 0.3, 0.0]).unwrap();
        let sets = ProductSet::replicate(ConvexSet::ball(vec![0.0, 0.0], 1.0).unwrap(), 2).unwrap();
        let g = make_affine_game(spec, sets).unwrap();
        let pts = vec![vec![0.1, 0.2, -0.3, 0.4], vec![1.5, -2.0, 0.7, 0.0]];
        let rep = check_gradient_consistency(&g, &pts, 1e-4);
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn asymmetric_own_block_rejected() {
        let rows = vec![
            vec![3.0, 1.0, 0.0, 0.0],
            vec![0.0, 3.0, 0.0, 0.0],
            vec![0.0, 0.0, 3.0, 0.0],
            vec![0.0, 0.0, 0.0, 3.0],
        ];
        let spec = AffineGameSpec::from_rows(&rows, &[0.0; 4]).unwrap();
        let sets = ProductSet::replicate(ConvexSet::ball(vec![0.0, 0.0], 1.0).unwrap(), 2).unwrap();
        assert!(make_affine_game(spec, sets).is_err());
    }
}
