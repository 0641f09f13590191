//! Ground-truth equilibria via the projected fixed-point iteration
//!
//! ```text
//! x <- Proj_Y(x - theta F(x)),   theta = nu / (2 L^2)
//! ```
//!
//! which contracts with factor `sqrt(1 - nu^2 / (4 L^2))` when `F` is
//! `nu`-strongly monotone and `L`-Lipschitz. Its fixed points are exactly
//! the solutions of the variational inequality `VI(Y, F)`.

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::estimators::RngKey;
use crate::games::Game;
use crate::geometry::ProductSet;
use crate::linalg;

pub const DEFAULT_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VISolveResult {
    pub point: Vec<f64>,
    /// `|Proj(x - theta F(x)) - x|` at the returned point.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub theta: f64,
}

/// `|Proj_Y(x - theta F(x)) - x|`.
pub fn fixed_point_residual<F: Fn(&[f64], &mut [f64])>(
    mapping: &F,
    set: &ProductSet,
    theta: f64,
    x: &[f64],
) -> f64 {
    let mut next = vec![0.0; x.len()];
    fixed_point_map(mapping, set, theta, x, &mut next);
    linalg::dist(&next, x)
}

fn fixed_point_map<F: Fn(&[f64], &mut [f64])>(
    mapping: &F,
    set: &ProductSet,
    theta: f64,
    x: &[f64],
    out: &mut [f64],
) {
    mapping(x, out);
    for (o, v) in out.iter_mut().zip(x) {
        *o = v - theta * *o;
    }
    set.project_in_place(out);
}

/// Solves `VI(set, mapping)` with the contraction step `nu / (2 L^2)`,
/// starting from the set anchor.
pub fn solve_vi_fixed_point<F: Fn(&[f64], &mut [f64])>(
    mapping: F,
    set: &ProductSet,
    lipschitz: f64,
    nu: f64,
    tol: f64,
    max_iter: usize,
) -> Result<VISolveResult> {
    if !(nu > 0.0 && lipschitz >= nu && lipschitz.is_finite()) {
        return Err(Error::contract(format!(
            "fixed-point solver needs L >= nu > 0, got L = {lipschitz}, nu = {nu}"
        )));
    }
    solve_vi_with_step(mapping, set, nu / (2.0 * lipschitz * lipschitz), tol, max_iter)
}

/// Fixed-point iteration with an explicit step `theta`.
pub fn solve_vi_with_step<F: Fn(&[f64], &mut [f64])>(
    mapping: F,
    set: &ProductSet,
    theta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<VISolveResult> {
    if !(tol > 0.0) {
        return Err(Error::contract(format!("tol must be > 0, got {tol}")));
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::contract(format!("step must be > 0, got {theta}")));
    }
    let mut x = set.anchor();
    let mut next = vec![0.0; x.len()];
    let mut iterations = 0;
    loop {
        fixed_point_map(&mapping, set, theta, &x, &mut next);
        let residual = linalg::dist(&next, &x);
        if !residual.is_finite() {
            return Err(Error::NonFinite {
                value: residual,
                context: format!("fixed-point residual at iteration {iterations}"),
            });
        }
        if residual <= tol || iterations >= max_iter {
            return Ok(VISolveResult {
                point: x,
                residual,
                iterations,
                converged: residual <= tol,
                theta,
            });
        }
        std::mem::swap(&mut x, &mut next);
        iterations += 1;
    }
}

/// Nash equilibrium as the solution of `VI(A, M)`.
pub fn solve_ne<G: Game + ?Sized>(game: &G, tol: f64) -> Result<VISolveResult> {
    solve_vi_fixed_point(
        |x: &[f64], out: &mut [f64]| game.pseudo_gradient_into(x, out),
        game.action_sets(),
        game.lipschitz(),
        game.nu(),
        tol,
        DEFAULT_MAX_ITER,
    )
}

/// Solution of `VI(shrink(A, rho), F)` where `F` is the pseudo-gradient
/// (`sigma = None`) or its Gaussian smoothing at `sigma`.
///
/// Smoothing of an affine pseudo-gradient is the identity, so affine games
/// always use `M` directly. Otherwise the smoothed map is a sample average
/// over `mc_samples` fixed standard normal draws, which keeps it a
/// deterministic strongly monotone map with the same constants.
pub fn solve_regularized_ne<G: Game + ?Sized>(
    game: &G,
    rho: f64,
    sigma: Option<f64>,
    tol: f64,
    mc_samples: usize,
) -> Result<VISolveResult> {
    let set = game.action_sets().shrink(rho)?;
    let (l, nu) = (game.lipschitz(), game.nu());
    match sigma {
        Some(s) if !(s > 0.0 && s.is_finite()) => {
            Err(Error::contract(format!("sigma must be > 0, got {s}")))
        }
        Some(s) if !game.has_affine_gradient() => {
            if mc_samples == 0 {
                return Err(Error::contract("mc_samples must be >= 1"));
            }
            let dim = game.dim();
            let mut draws = vec![0.0; mc_samples * dim];
            let mut rng = RngKey::new(0, 0, 0).rng();
            crate::estimators::draw_gaussian(&mut rng, &vec![0.0; draws.len()], 1.0, &mut draws);
            let smoothed = move |x: &[f64], out: &mut [f64]| {
                let mut xi = vec![0.0; dim];
                let mut g = vec![0.0; dim];
                out.iter_mut().for_each(|o| *o = 0.0);
                for z in draws.chunks(dim) {
                    for k in 0..dim {
                        xi[k] = x[k] + s * z[k];
                    }
                    game.pseudo_gradient_into(&xi, &mut g);
                    for k in 0..dim {
                        out[k] += g[k];
                    }
                }
                out.iter_mut().for_each(|o| *o /= mc_samples as f64);
            };
            solve_vi_fixed_point(smoothed, &set, l, nu, tol, DEFAULT_MAX_ITER)
        }
        _ => solve_vi_fixed_point(
            |x: &[f64], out: &mut [f64]| game.pseudo_gradient_into(x, out),
            &set,
            l,
            nu,
            tol,
            DEFAULT_MAX_ITER,
        ),
    }
}

/// Distances between the equilibrium `a*`, the smoothed equilibrium
/// `mu*(sigma)` on the full set, and the shrunk-set solution `y(rho, sigma)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub sigma: f64,
    pub rho: f64,
    /// `|mu*(sigma) - a*|`
    pub smoothing_gap: f64,
    /// `|y(rho, sigma) - mu*(sigma)|`
    pub shrink_gap: f64,
    /// `|y(rho, sigma) - a*|`
    pub total_gap: f64,
    pub smoothing_gap_over_sigma: Option<f64>,
    pub shrink_gap_over_rho: Option<f64>,
}

/// Evaluates every `(sigma, rho)` pair of the two lists. `sigma = 0` means
/// no smoothing.
pub fn reference_gap_probe<G: Game + ?Sized>(
    game: &G,
    rho_list: &[f64],
    sigma_list: &[f64],
    tol: f64,
    mc_samples: usize,
) -> Result<Vec<GapRow>> {
    if rho_list.is_empty() || sigma_list.is_empty() {
        return Err(Error::contract("rho and sigma lists must be nonempty"));
    }
    let ne = solve_ne(game, tol)?;
    check_dim(game.dim(), ne.point.len())?;
    let mut rows = Vec::with_capacity(rho_list.len() * sigma_list.len());
    for &sigma in sigma_list {
        let smoothing = (sigma > 0.0).then_some(sigma);
        let mu_star = solve_regularized_ne(game, 0.0, smoothing, tol, mc_samples)?;
        let smoothing_gap = linalg::dist(&mu_star.point, &ne.point);
        for &rho in rho_list {
            let y = solve_regularized_ne(game, rho, smoothing, tol, mc_samples)?;
            let shrink_gap = linalg::dist(&y.point, &mu_star.point);
            rows.push(GapRow {
                sigma,
                rho,
                smoothing_gap,
                shrink_gap,
                total_gap: linalg::dist(&y.point, &ne.point),
                smoothing_gap_over_sigma: (sigma > 0.0).then(|| smoothing_gap / sigma),
                shrink_gap_over_rho: (rho > 0.0).then(|| shrink_gap / rho),
            });
        }
    }
    Ok(rows)
}
