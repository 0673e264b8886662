//! Planar primitives, dyadic squares and occupancy rasters.

mod dyadic;
mod grid;

pub use dyadic::{pair_scale, BaseSquare, DyadicSquare};
pub use grid::{for_each_segment_cell, rasterize, BitGrid, OccupancyGrid};
pub(crate) use grid::span_mask;

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn polar(r: f64, theta: f64) -> Self {
        Self::new(r * theta.cos(), r * theta.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn dist_sq(self, other: Point2) -> f64 {
        (self - other).norm_sq()
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

/// Axis-aligned rectangle `[min.x, max.x] x [min.y, max.y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point2,
    pub max: Point2,
}

impl Rect {
    pub fn new(min: Point2, max: Point2) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || !(max.x > min.x && max.y > min.y) {
            return Err(LabError::InvalidGeometry(format!("degenerate rectangle {min:?}..{max:?}")));
        }
        Ok(Self { min, max })
    }

    /// Square of half-width `half` centered at `c`.
    pub fn centered(c: Point2, half: f64) -> Result<Self> {
        Self::new(Point2::new(c.x - half, c.y - half), Point2::new(c.x + half, c.y + half))
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn expand(&self, by: f64) -> Rect {
        Rect {
            min: Point2::new(self.min.x - by, self.min.y - by),
            max: Point2::new(self.max.x + by, self.max.y + by),
        }
    }

    /// Smallest rectangle holding all `points`, `None` when empty.
    pub fn bounding(points: impl IntoIterator<Item = Point2>) -> Option<Rect> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let (mut lo, mut hi) = (first, first);
        for p in it {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        Some(Rect { min: lo, max: hi })
    }

    /// Euclidean distance from `p` to the rectangle (zero inside).
    pub fn dist_to(&self, p: Point2) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        dx.hypot(dy)
    }

    /// Largest distance from `p` to any point of the rectangle.
    pub fn farthest_from(&self, p: Point2) -> f64 {
        let dx = (p.x - self.min.x).abs().max((self.max.x - p.x).abs());
        let dy = (p.y - self.min.y).abs().max((self.max.y - p.y).abs());
        dx.hypot(dy)
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
    }
}

/// Open disc `B(center, radius)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: Point2,
    pub radius: f64,
}

impl Disc {
    pub fn new(center: Point2, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !center.is_finite() {
            return Err(LabError::InvalidGeometry(format!("disc radius {radius} at {center:?}")));
        }
        Ok(Self { center, radius })
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.dist_sq(self.center) < self.radius * self.radius
    }

    pub fn bounds(&self) -> Rect {
        Rect {
            min: Point2::new(self.center.x - self.radius, self.center.y - self.radius),
            max: Point2::new(self.center.x + self.radius, self.center.y + self.radius),
        }
    }
}

/// Annulus between the circles of radius `e^a` and `e^b` around `center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annulus {
    pub center: Point2,
    pub log_r_inner: f64,
    pub log_r_outer: f64,
}

impl Annulus {
    pub fn new(center: Point2, log_r_inner: f64, log_r_outer: f64) -> Result<Self> {
        if !(log_r_outer > log_r_inner) || !log_r_inner.is_finite() || !log_r_outer.is_finite() {
            return Err(LabError::InvalidGeometry(format!(
                "annulus needs b > a, got a={log_r_inner}, b={log_r_outer}"
            )));
        }
        Ok(Self { center, log_r_inner, log_r_outer })
    }

    pub fn r_inner(&self) -> f64 {
        self.log_r_inner.exp()
    }

    pub fn r_outer(&self) -> f64 {
        self.log_r_outer.exp()
    }

    /// Closed annulus membership.
    pub fn contains(&self, p: Point2) -> bool {
        let r = p.dist(self.center);
        r >= self.r_inner() && r <= self.r_outer()
    }
}
