//! Compact convex action sets: axis-aligned boxes and Euclidean balls.
//!
//! Both have closed-form projections. Shrinkage scales a set by `1 - rho`
//! about an interior anchor point, so `shrink(A, rho)` stays inside `A` and
//! keeps the anchor as an interior point.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

/// A compact convex set with an interior anchor used for shrinkage.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSet {
    shape: Shape,
    anchor: Vec<f64>,
}

/// Config-file form of a [`ConvexSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetSpec {
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        anchor: Option<Vec<f64>>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        anchor: Option<Vec<f64>>,
    },
}

// Scaling of one coordinate about the anchor. Shared by `shrink` and
// `project_shrunk_into` so both produce bit-identical bounds.
#[inline]
fn scale_about(anchor: f64, v: f64, keep: f64) -> f64 {
    anchor + keep * (v - anchor)
}

impl ConvexSet {
    /// Box `[lower, upper]` anchored at its midpoint.
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        let anchor = lower
            .iter()
            .zip(&upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect();
        Self::new(Shape::Box { lower, upper }, anchor)
    }

    /// Ball anchored at its center.
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let anchor = center.clone();
        Self::new(Shape::Ball { center, radius }, anchor)
    }

    /// Same set with a different interior anchor.
    pub fn with_anchor(self, anchor: Vec<f64>) -> Result<Self> {
        Self::new(self.shape, anchor)
    }

    pub fn new(shape: Shape, anchor: Vec<f64>) -> Result<Self> {
        match &shape {
            Shape::Box { lower, upper } => {
                check_dim(lower.len(), upper.len())?;
                check_dim(lower.len(), anchor.len())?;
                if lower.is_empty() {
                    return Err(Error::contract("box must have at least one coordinate"));
                }
                for k in 0..lower.len() {
                    let (l, u, c) = (lower[k], upper[k], anchor[k]);
                    if !(l.is_finite() && u.is_finite() && l < u) {
                        return Err(Error::contract(format!(
                            "box bounds must satisfy lower < upper, got [{l}, {u}] at coordinate {k}"
                        )));
                    }
                    if !(l < c && c < u) {
                        return Err(Error::contract(format!(
                            "anchor coordinate {k} = {c} not strictly inside ({l}, {u})"
                        )));
                    }
                }
            }
            Shape::Ball { center, radius } => {
                check_dim(center.len(), anchor.len())?;
                if center.is_empty() {
                    return Err(Error::contract("ball must have at least one coordinate"));
                }
                if !(radius.is_finite() && *radius > 0.0) || !linalg::all_finite(center) {
                    return Err(Error::contract(format!(
                        "ball needs finite center and radius > 0, got radius {radius}"
                    )));
                }
                if !(linalg::dist(&anchor, center) < *radius) {
                    return Err(Error::contract("anchor not strictly inside ball"));
                }
            }
        }
        Ok(ConvexSet { shape, anchor })
    }

    pub fn from_spec(spec: &SetSpec) -> Result<Self> {
        let (set, anchor) = match spec {
            SetSpec::Box {
                lower,
                upper,
                anchor,
            } => (Self::boxed(lower.clone(), upper.clone())?, anchor),
            SetSpec::Ball {
                center,
                radius,
                anchor,
            } => (Self::ball(center.clone(), *radius)?, anchor),
        };
        match anchor {
            Some(a) => set.with_anchor(a.clone()),
            None => Ok(set),
        }
    }

    pub fn to_spec(&self) -> SetSpec {
        let anchor = Some(self.anchor.clone());
        match &self.shape {
            Shape::Box { lower, upper } => SetSpec::Box {
                lower: lower.clone(),
                upper: upper.clone(),
                anchor,
            },
            Shape::Ball { center, radius } => SetSpec::Ball {
                center: center.clone(),
                radius: *radius,
                anchor,
            },
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    /// Euclidean projection of `x`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut out = x.to_vec();
        self.project_in_place(&mut out);
        Ok(out)
    }

    /// Projects `x` in place. Panics if the dimension does not match.
    pub fn project_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.dim(), "projection dimension mismatch");
        match &self.shape {
            Shape::Box { lower, upper } => {
                for ((v, l), u) in x.iter_mut().zip(lower).zip(upper) {
                    *v = v.clamp(*l, *u);
                }
            }
            Shape::Ball { center, radius } => project_ball(x, center, *radius),
        }
    }

    /// Projection onto `shrink(self, rho)` without materializing the set.
    /// Gives the same result bit-for-bit as `self.shrink(rho)?.project(x)`.
    pub fn project_shrunk_in_place(&self, rho: f64, x: &mut [f64]) {
        assert_eq!(x.len(), self.dim(), "projection dimension mismatch");
        let keep = 1.0 - rho;
        match &self.shape {
            Shape::Box { lower, upper } => {
                for k in 0..x.len() {
                    let a = self.anchor[k];
                    let l = scale_about(a, lower[k], keep);
                    let u = scale_about(a, upper[k], keep);
                    x[k] = x[k].clamp(l, u);
                }
            }
            Shape::Ball { center, radius } => {
                let c: Vec<f64> = center
                    .iter()
                    .zip(&self.anchor)
                    .map(|(c, a)| scale_about(*a, *c, keep))
                    .collect();
                project_ball(x, &c, keep * radius);
            }
        }
    }

    /// The set scaled by `1 - rho` about the anchor.
    pub fn shrink(&self, rho: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::contract(format!(
                "shrinkage rho must lie in [0, 1), got {rho}"
            )));
        }
        let keep = 1.0 - rho;
        let a = &self.anchor;
        let shape = match &self.shape {
            Shape::Box { lower, upper } => Shape::Box {
                lower: lower
                    .iter()
                    .zip(a)
                    .map(|(l, a)| scale_about(*a, *l, keep))
                    .collect(),
                upper: upper
                    .iter()
                    .zip(a)
                    .map(|(u, a)| scale_about(*a, *u, keep))
                    .collect(),
            },
            Shape::Ball { center, radius } => Shape::Ball {
                center: center
                    .iter()
                    .zip(a)
                    .map(|(c, a)| scale_about(*a, *c, keep))
                    .collect(),
                radius: keep * radius,
            },
        };
        Ok(ConvexSet {
            shape,
            anchor: self.anchor.clone(),
        })
    }

    /// Membership with slack `tol` in every defining inequality.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match &self.shape {
            Shape::Box { lower, upper } => x
                .iter()
                .zip(lower)
                .zip(upper)
                .all(|((v, l), u)| *v >= l - tol && *v <= u + tol),
            Shape::Ball { center, radius } => linalg::dist(x, center) <= radius + tol,
        }
    }

    pub fn diameter(&self) -> f64 {
        match &self.shape {
            Shape::Box { lower, upper } => linalg::dist(lower, upper),
            Shape::Ball { radius, .. } => 2.0 * radius,
        }
    }

    /// Euclidean distance from `x` to the set.
    pub fn distance(&self, x: &[f64]) -> f64 {
        let mut p = x.to_vec();
        self.project_in_place(&mut p);
        linalg::dist(x, &p)
    }

    /// Distance from the anchor to the boundary. A point of `shrink(self, rho)`
    /// is at least `rho * anchor_clearance()` away from the boundary.
    pub fn anchor_clearance(&self) -> f64 {
        match &self.shape {
            Shape::Box { lower, upper } => self
                .anchor
                .iter()
                .zip(lower)
                .zip(upper)
                .map(|((a, l), u)| (a - l).min(u - a))
                .fold(f64::INFINITY, f64::min),
            Shape::Ball { center, radius } => radius - linalg::dist(&self.anchor, center),
        }
    }

    /// Corners of a box, or the 2d axis extreme points of a ball.
    pub fn extreme_points(&self) -> Vec<Vec<f64>> {
        match &self.shape {
            Shape::Box { lower, upper } => {
                let d = lower.len();
                (0..1usize << d.min(16))
                    .map(|mask| {
                        (0..d)
                            .map(|k| if mask >> k & 1 == 1 { upper[k] } else { lower[k] })
                            .collect()
                    })
                    .collect()
            }
            Shape::Ball { center, radius } => {
                let mut pts = Vec::new();
                for k in 0..center.len() {
                    for s in [-1.0, 1.0] {
                        let mut p = center.clone();
                        p[k] += s * radius;
                        pts.push(p);
                    }
                }
                pts
            }
        }
    }

    /// Uniform draw from the set.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.shape {
            Shape::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| l + (u - l) * Uniform::new(0.0, 1.0).unwrap().sample(rng))
                .collect(),
            Shape::Ball { center, radius } => {
                let d = center.len();
                let dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                let n = linalg::norm(&dir);
                let u: f64 = Uniform::new(0.0, 1.0).unwrap().sample(rng);
                let r = radius * u.powf(1.0 / d as f64);
                let mut p: Vec<f64> = center
                    .iter()
                    .zip(&dir)
                    .map(|(c, z)| c + r * z / n)
                    .collect();
                project_ball(&mut p, center, *radius);
                p
            }
        }
    }
}

fn project_ball(x: &mut [f64], center: &[f64], radius: f64) {
    let n = linalg::dist(x, center);
    if n <= radius {
        return;
    }
    let orig = x.to_vec();
    let mut scale = radius / n;
    loop {
        for k in 0..x.len() {
            x[k] = center[k] + (orig[k] - center[k]) * scale;
        }
        // Rounding can leave the rescaled point a few ulps outside.
        if linalg::dist(x, center) <= radius {
            return;
        }
        scale *= 1.0 - f64::EPSILON;
    }
}

/// Joint action set: one [`ConvexSet`] per player, all of dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSet {
    factors: Vec<ConvexSet>,
    player_dim: usize,
}

impl ProductSet {
    pub fn new(factors: Vec<ConvexSet>) -> Result<Self> {
        let player_dim = match factors.first() {
            Some(f) => f.dim(),
            None => return Err(Error::contract("product set needs at least one player")),
        };
        for f in &factors {
            check_dim(player_dim, f.dim())?;
        }
        Ok(ProductSet {
            factors,
            player_dim,
        })
    }

    /// `n` copies of the same set.
    pub fn replicate(set: ConvexSet, n: usize) -> Result<Self> {
        Self::new(vec![set; n])
    }

    pub fn factors(&self) -> &[ConvexSet] {
        &self.factors
    }

    pub fn n_players(&self) -> usize {
        self.factors.len()
    }

    pub fn player_dim(&self) -> usize {
        self.player_dim
    }

    pub fn dim(&self) -> usize {
        self.factors.len() * self.player_dim
    }

    pub fn anchor(&self) -> Vec<f64> {
        self.factors
            .iter()
            .flat_map(|f| f.anchor().iter().copied())
            .collect()
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut out = x.to_vec();
        self.project_in_place(&mut out);
        Ok(out)
    }

    pub fn project_in_place(&self, x: &mut [f64]) {
        for (f, chunk) in self.factors.iter().zip(x.chunks_mut(self.player_dim)) {
            f.project_in_place(chunk);
        }
    }

    pub fn project_shrunk_in_place(&self, rho: f64, x: &mut [f64]) {
        for (f, chunk) in self.factors.iter().zip(x.chunks_mut(self.player_dim)) {
            f.project_shrunk_in_place(rho, chunk);
        }
    }

    pub fn shrink(&self, rho: f64) -> Result<Self> {
        Ok(ProductSet {
            factors: self
                .factors
                .iter()
                .map(|f| f.shrink(rho))
                .collect::<Result<_>>()?,
            player_dim: self.player_dim,
        })
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && self
                .factors
                .iter()
                .zip(x.chunks(self.player_dim))
                .all(|(f, c)| f.contains(c, tol))
    }

    pub fn diameter(&self) -> f64 {
        self.factors
            .iter()
            .map(|f| f.diameter().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        let mut p = x.to_vec();
        self.project_in_place(&mut p);
        linalg::dist(x, &p)
    }

    /// Smallest per-player anchor clearance.
    pub fn anchor_clearance(&self) -> f64 {
        self.factors
            .iter()
            .map(ConvexSet::anchor_clearance)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.factors
            .iter()
            .flat_map(|f| f.sample_uniform(rng))
            .collect()
    }
}
