#![allow(dead_code)]

use payoff_nash::games::{make_canonical_quadratic, Game, QuadraticGame};
use payoff_nash::geometry::{ConvexSet, ProductSet};

pub fn unit_square() -> ProductSet {
    ProductSet::replicate(ConvexSet::boxed(vec![0.0], vec![1.0]).unwrap(), 2).unwrap()
}

/// Every cost identically zero.
pub struct ZeroGame {
    pub sets: ProductSet,
}

impl ZeroGame {
    pub fn new() -> Self {
        ZeroGame { sets: unit_square() }
    }
}

impl Game for ZeroGame {
    fn name(&self) -> &str {
        "zero"
    }
    fn action_sets(&self) -> &ProductSet {
        &self.sets
    }
    fn cost(&self, _: usize, _: &[f64]) -> f64 {
        0.0
    }
    fn pseudo_gradient_into(&self, _: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }
    fn nu(&self) -> f64 {
        1.0
    }
    fn lipschitz(&self) -> f64 {
        1.0
    }
}

/// Canonical costs with a pseudo-gradient offset by +0.1 in component 0.
pub struct ShiftedGradient(pub QuadraticGame);

impl ShiftedGradient {
    pub fn new() -> Self {
        ShiftedGradient(make_canonical_quadratic())
    }
}

impl Game for ShiftedGradient {
    fn name(&self) -> &str {
        "shifted_gradient"
    }
    fn action_sets(&self) -> &ProductSet {
        self.0.action_sets()
    }
    fn cost(&self, i: usize, x: &[f64]) -> f64 {
        self.0.cost(i, x)
    }
    fn pseudo_gradient_into(&self, x: &[f64], out: &mut [f64]) {
        self.0.pseudo_gradient_into(x, out);
        out[0] += 0.1;
    }
    fn nu(&self) -> f64 {
        1.0
    }
    fn lipschitz(&self) -> f64 {
        3.0
    }
}

/// Claims nu = 1 but has `M(a) = [[1,3],[3,1]] a`, which is not monotone.
pub struct NonMonotone {
    pub sets: ProductSet,
}

impl Game for NonMonotone {
    fn name(&self) -> &str {
        "non_monotone"
    }
    fn action_sets(&self) -> &ProductSet {
        &self.sets
    }
    fn cost(&self, i: usize, x: &[f64]) -> f64 {
        let o = 1 - i;
        0.5 * x[i] * x[i] + 3.0 * x[i] * x[o]
    }
    fn pseudo_gradient_into(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[0] + 3.0 * x[1];
        out[1] = 3.0 * x[0] + x[1];
    }
    fn nu(&self) -> f64 {
        1.0
    }
    fn lipschitz(&self) -> f64 {
        4.0
    }
}

/// Canonical costs plus `a_i^4 / 4`: `M_i(a) = canonical_i(a) + a_i^3`.
/// Still 1-strongly monotone; its smoothing is not the identity.
pub struct QuarticGame(pub QuadraticGame);

impl QuarticGame {
    pub fn new() -> Self {
        QuarticGame(make_canonical_quadratic())
    }
}

impl Game for QuarticGame {
    fn name(&self) -> &str {
        "quartic"
    }
    fn action_sets(&self) -> &ProductSet {
        self.0.action_sets()
    }
    fn cost(&self, i: usize, x: &[f64]) -> f64 {
        self.0.cost(i, x) + 0.25 * x[i].powi(4)
    }
    fn pseudo_gradient_into(&self, x: &[f64], out: &mut [f64]) {
        self.0.pseudo_gradient_into(x, out);
        for (o, v) in out.iter_mut().zip(x) {
            *o += v.powi(3);
        }
    }
    fn nu(&self) -> f64 {
        1.0
    }
    fn lipschitz(&self) -> f64 {
        // 3 from the quadratic part plus 3 a^2 on |a| <= 1.5
        9.75
    }
}
