//! Discretized planar Brownian paths.
//!
//! Paths advance by i.i.d. isotropic Gaussian increments whose coordinates
//! have standard deviation `step_scale`. Stopping rules are ordered lists of
//! target sets; marker `i` records the first index, strictly after marker
//! `i - 1` (and after the start), at which target `i` is hit.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::Point2;
use crate::stats::{rng_from_seed, LabRng};

pub const DEFAULT_MAX_STEPS: u64 = 100_000_000;

/// A geometric target. Circles are *reached* (their boundary), every other
/// shape is *entered*.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Circle { center: Point2, radius: f64 },
    Disc { center: Point2, radius: f64 },
    Square { corner: Point2, side: f64 },
    /// `{p : p . normal >= offset}`.
    HalfPlane { normal: Point2, offset: f64 },
    Any(Vec<Shape>),
}

impl Shape {
    pub fn circle(center: Point2, radius: f64) -> Self {
        Shape::Circle { center, radius }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(LabError::InvalidGeometry(what));
        match self {
            Shape::Circle { center, radius } | Shape::Disc { center, radius } => {
                if !(*radius > 0.0 && radius.is_finite() && center.is_finite()) {
                    return bad(format!("radius {radius} at {center:?}"));
                }
            }
            Shape::Square { corner, side } => {
                if !(*side > 0.0 && side.is_finite() && corner.is_finite()) {
                    return bad(format!("square side {side}"));
                }
            }
            Shape::HalfPlane { normal, offset } => {
                if !(normal.is_finite() && normal.norm() > 0.0 && offset.is_finite()) {
                    return bad(format!("half-plane normal {normal:?}"));
                }
            }
            Shape::Any(parts) => {
                if parts.is_empty() {
                    return bad("empty union".into());
                }
                for p in parts {
                    p.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Hit predicate at a path index whose point is `cur` and predecessor
    /// `prev` (`None` at the start). A circle is hit when the signed radial
    /// distance changes side or is within `tol` of zero.
    #[inline]
    pub fn hit(&self, prev: Option<Point2>, cur: Point2, tol: f64) -> bool {
        match self {
            Shape::Circle { center, radius } => circle_hit(*center, *radius, prev, cur, tol),
            Shape::Disc { center, radius } => cur.dist_sq(*center) <= radius * radius,
            Shape::Square { corner, side } => {
                cur.x >= corner.x
                    && cur.x <= corner.x + side
                    && cur.y >= corner.y
                    && cur.y <= corner.y + side
            }
            Shape::HalfPlane { normal, offset } => cur.dot(*normal) >= *offset,
            Shape::Any(parts) => parts.iter().any(|s| s.hit(prev, cur, tol)),
        }
    }
}

/// Relative margin below which squared distances are too close to call and
/// the exact square-root comparison decides.
const SQ_MARGIN: f64 = 1e-12;

/// `sqrt(d2) >= bound`, decided on squares unless `d2` is near `bound^2`.
#[inline(always)]
fn at_least(d2: f64, p: Point2, center: Point2, bound: f64) -> bool {
    let b2 = bound * bound;
    if (d2 - b2).abs() > SQ_MARGIN * b2 {
        d2 >= b2
    } else {
        p.dist(center) >= bound
    }
}

#[inline]
pub(crate) fn circle_hit(center: Point2, radius: f64, prev: Option<Point2>, cur: Point2, tol: f64) -> bool {
    let d2 = cur.dist_sq(center);
    let (hi, lo) = (radius + tol, radius - tol);
    let clear = d2 > hi * hi * (1.0 + SQ_MARGIN) || (lo > 0.0 && d2 < lo * lo * (1.0 - SQ_MARGIN));
    if !clear && (cur.dist(center) - radius).abs() <= tol {
        return true;
    }
    match prev {
        Some(p) => at_least(p.dist_sq(center), p, center, radius) != at_least(d2, cur, center, radius),
        None => false,
    }
}

/// A shape with the squared bounds of its hit test precomputed; same
/// predicate as [`Shape::hit`].
enum Probe {
    Circle { center: Point2, radius: f64, r2: f64, hi2: f64, lo2: f64 },
    Disc { center: Point2, r2: f64 },
    Any(Vec<Probe>),
    Other(Shape),
}

impl Probe {
    fn new(shape: &Shape, tol: f64) -> Self {
        match shape {
            Shape::Circle { center, radius } => {
                let (hi, lo) = (radius + tol, radius - tol);
                Probe::Circle {
                    center: *center,
                    radius: *radius,
                    r2: radius * radius,
                    hi2: hi * hi * (1.0 + SQ_MARGIN),
                    lo2: if lo > 0.0 { lo * lo * (1.0 - SQ_MARGIN) } else { -1.0 },
                }
            }
            Shape::Disc { center, radius } => Probe::Disc { center: *center, r2: radius * radius },
            Shape::Any(parts) => Probe::Any(parts.iter().map(|p| Probe::new(p, tol)).collect()),
            other => Probe::Other(other.clone()),
        }
    }

    #[inline(always)]
    fn hit(&self, prev: Point2, cur: Point2, tol: f64) -> bool {
        match self {
            &Probe::Circle { center, radius, r2, hi2, lo2 } => {
                let d2 = cur.dist_sq(center);
                if (d2 <= hi2 && d2 >= lo2) && (cur.dist(center) - radius).abs() <= tol {
                    return true;
                }
                let side = |d2: f64, p: Point2| {
                    if (d2 - r2).abs() > SQ_MARGIN * r2 {
                        d2 >= r2
                    } else {
                        p.dist(center) >= radius
                    }
                };
                side(prev.dist_sq(center), prev) != side(d2, cur)
            }
            &Probe::Disc { center, r2 } => cur.dist_sq(center) <= r2,
            Probe::Any(parts) => parts.iter().any(|p| p.hit(prev, cur, tol)),
            Probe::Other(shape) => shape.hit(Some(prev), cur, tol),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub label: String,
    pub shape: Shape,
}

impl Target {
    pub fn new(label: impl Into<String>, shape: Shape) -> Self {
        Self { label: label.into(), shape }
    }
}

/// Composite stopping rule `tau(A_1, ..., A_m)` with a step cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub targets: Vec<Target>,
    pub max_steps: u64,
}

impl StopRule {
    pub fn new(targets: Vec<Target>, max_steps: u64) -> Result<Self> {
        let rule = Self { targets, max_steps };
        rule.validate()?;
        Ok(rule)
    }

    pub fn single(label: impl Into<String>, shape: Shape) -> Result<Self> {
        Self::new(vec![Target::new(label, shape)], DEFAULT_MAX_STEPS)
    }

    pub fn validate(&self) -> Result<()> {
        if self.targets.is_empty() {
            return Err(LabError::InvalidArgument("stop rule has no targets".into()));
        }
        if self.max_steps == 0 {
            return Err(LabError::InvalidArgument("max_steps must be positive".into()));
        }
        self.targets.iter().try_for_each(|t| t.shape.validate())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Marker {
    pub label: String,
    pub index: usize,
}

/// A discretized trajectory with its recorded stopping indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub points: Vec<Point2>,
    pub step_scale: f64,
    pub seed: u64,
    pub markers: Vec<Marker>,
    /// The step cap was reached before every target was hit.
    pub truncated: bool,
}

impl PathSample {
    /// Wrap an explicit point list (fixtures, synthetic paths).
    pub fn from_points(points: Vec<Point2>, step_scale: f64, seed: u64) -> Self {
        Self { points, step_scale, seed, markers: Vec::new(), truncated: false }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<Point2> {
        self.points.last().copied()
    }

    pub fn marker(&self, label: &str) -> Option<usize> {
        self.markers.iter().find(|m| m.label == label).map(|m| m.index)
    }

    pub fn check_invariants(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(LabError::InvalidArgument("empty path".into()));
        }
        if !(self.step_scale > 0.0) {
            return Err(LabError::InvalidArgument(format!("step scale {}", self.step_scale)));
        }
        if let Some(p) = self.points.iter().find(|p| !p.is_finite()) {
            return Err(LabError::InvalidArgument(format!("non-finite point {p:?}")));
        }
        let mut last = 0;
        for m in &self.markers {
            if m.index >= self.points.len() || m.index < last {
                return Err(LabError::InvalidArgument(format!("marker {m:?} out of order")));
            }
            last = m.index;
        }
        Ok(())
    }
}

/// Summary of a walk whose points were streamed to a visitor.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkOutcome {
    pub markers: Vec<Marker>,
    pub steps: u64,
    pub end: Point2,
    pub truncated: bool,
}

#[inline]
pub(crate) fn gaussian_step(rng: &mut LabRng, scale: f64) -> Point2 {
    let dx: f64 = rng.sample(StandardNormal);
    let dy: f64 = rng.sample(StandardNormal);
    Point2::new(scale * dx, scale * dy)
}

/// Run a walk under `rule`, handing every point (start included) to `visit`
/// with its index. Nothing is stored.
pub fn run_walk(
    seed: u64,
    start: Point2,
    step_scale: f64,
    rule: &StopRule,
    mut visit: impl FnMut(usize, Point2),
) -> Result<WalkOutcome> {
    if !(step_scale > 0.0 && step_scale.is_finite()) {
        return Err(LabError::InvalidArgument(format!("step scale {step_scale}")));
    }
    if !start.is_finite() {
        return Err(LabError::InvalidArgument(format!("start {start:?}")));
    }
    rule.validate()?;
    let tol = step_scale / 2.0;
    let mut rng = rng_from_seed(seed);
    let mut markers = Vec::with_capacity(rule.targets.len());
    let mut prev = start;
    visit(0, start);
    let mut steps = 0u64;
    let mut next = 0usize;
    let probes: Vec<Probe> = rule.targets.iter().map(|t| Probe::new(&t.shape, tol)).collect();
    while steps < rule.max_steps {
        steps += 1;
        let cur = prev + gaussian_step(&mut rng, step_scale);
        visit(steps as usize, cur);
        if probes[next].hit(prev, cur, tol) {
            let target = &rule.targets[next];
            markers.push(Marker { label: target.label.clone(), index: steps as usize });
            next += 1;
            if next == rule.targets.len() {
                return Ok(WalkOutcome { markers, steps, end: cur, truncated: false });
            }
        }
        prev = cur;
    }
    Ok(WalkOutcome { markers, steps, end: prev, truncated: true })
}

/// How a walk left an annulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnnulusExit {
    /// Entered the inner disc rather than reaching the outer circle.
    pub inner: bool,
    pub steps: u64,
    pub truncated: bool,
}

/// The walk of [`run_walk`] under the single target "enter the disc of
/// radius `r_inner` or reach the circle of radius `r_outer`" around the
/// origin, without storing or visiting points.
pub fn annulus_exit(seed: u64, start: Point2, step_scale: f64, r_inner: f64, r_outer: f64, max_steps: u64) -> Result<AnnulusExit> {
    if !(step_scale > 0.0 && step_scale.is_finite()) {
        return Err(LabError::InvalidArgument(format!("step scale {step_scale}")));
    }
    if !(r_inner > 0.0 && r_outer > r_inner && r_outer.is_finite()) {
        return Err(LabError::InvalidGeometry(format!("annulus ({r_inner}, {r_outer})")));
    }
    if !(start.norm() < r_outer) {
        return Err(LabError::InvalidArgument(format!("start {start:?} outside radius {r_outer}")));
    }
    let tol = step_scale / 2.0;
    let inner2 = r_inner * r_inner;
    // below `safe2` the outer circle is neither reached nor within `tol`
    let lo = r_outer - tol;
    let safe2 = if lo > 0.0 { lo * lo * (1.0 - SQ_MARGIN) } else { -1.0 };
    let outer = Shape::circle(Point2::ORIGIN, r_outer);
    let mut rng = rng_from_seed(seed);
    let mut prev = start;
    let mut steps = 0;
    while steps < max_steps {
        steps += 1;
        let cur = prev + gaussian_step(&mut rng, step_scale);
        let d2 = cur.norm_sq();
        if d2 <= inner2 {
            return Ok(AnnulusExit { inner: true, steps, truncated: false });
        }
        if d2 >= safe2 && outer.hit(Some(prev), cur, tol) {
            return Ok(AnnulusExit { inner: false, steps, truncated: false });
        }
        prev = cur;
    }
    Ok(AnnulusExit { inner: false, steps, truncated: true })
}

/// [`annulus_exit`] for Brownian motion rather than the walk: between
/// steps the path is a Brownian bridge, and a bridge that crosses either
/// circle counts as an exit even when both endpoints lie inside the annulus.
/// The crossing chance `exp(-2 d0 d1 / step_scale^2)` treats the circle as
/// its tangent line, which removes the first-order overshoot bias of
/// checking only at step ends.
pub fn annulus_exit_bridged(
    seed: u64,
    start: Point2,
    step_scale: f64,
    r_inner: f64,
    r_outer: f64,
    max_steps: u64,
) -> Result<AnnulusExit> {
    if !(step_scale > 0.0 && step_scale.is_finite()) {
        return Err(LabError::InvalidArgument(format!("step scale {step_scale}")));
    }
    if !(r_inner > 0.0 && r_outer > r_inner && r_outer.is_finite()) {
        return Err(LabError::InvalidGeometry(format!("annulus ({r_inner}, {r_outer})")));
    }
    let r0 = start.norm();
    if !(r0 > r_inner && r0 < r_outer) {
        return Err(LabError::InvalidArgument(format!("start {start:?} outside the annulus")));
    }
    let var = step_scale * step_scale;
    // gaps whose product exceeds `far` cross with chance below e^-40
    let far = 20.0 * var;
    // outside these bands one gap exceeds 12 steps, the other (bar a radial
    // move of 8 standard deviations) 4, so the product exceeds `far`
    let band = 12.0 * step_scale;
    let (in2, out2) = (r_inner * r_inner, r_outer * r_outer);
    let near_in2 = (r_inner + band).powi(2);
    let near_out2 = if r_outer > band { (r_outer - band).powi(2) } else { 0.0 };
    let mut rng = rng_from_seed(seed);
    let mut prev = start;
    let mut steps = 0;
    while steps < max_steps {
        steps += 1;
        let cur = prev + gaussian_step(&mut rng, step_scale);
        let d2 = cur.norm_sq();
        if d2 <= in2 {
            return Ok(AnnulusExit { inner: true, steps, truncated: false });
        }
        if d2 >= out2 {
            return Ok(AnnulusExit { inner: false, steps, truncated: false });
        }
        if d2 < near_in2 || d2 > near_out2 {
            let (r0, r1) = (prev.norm(), d2.sqrt());
            for (gap, inner) in [((r0 - r_inner) * (r1 - r_inner), true), ((r_outer - r0) * (r_outer - r1), false)] {
                if gap < far && rng.random::<f64>() < (-2.0 * gap / var).exp() {
                    return Ok(AnnulusExit { inner, steps, truncated: false });
                }
            }
        }
        prev = cur;
    }
    Ok(AnnulusExit { inner: false, steps, truncated: true })
}

/// Sample and store a full path.
pub fn sample_path(seed: u64, start: Point2, step_scale: f64, rule: &StopRule) -> Result<PathSample> {
    let mut points = Vec::new();
    let out = run_walk(seed, start, step_scale, rule, |_, p| points.push(p))?;
    Ok(PathSample { points, step_scale, seed, markers: out.markers, truncated: out.truncated })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Outward,
    Inward,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::Outward => Direction::Inward,
            Direction::Inward => Direction::Outward,
        }
    }
}

/// A path piece crossing an annulus from one boundary circle to the other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Excursion {
    pub points: Vec<Point2>,
    pub center: Point2,
    pub r_inner: f64,
    pub r_outer: f64,
    pub direction: Direction,
    /// Source indices `[start, end]` in the path the excursion came from,
    /// listed in the excursion's own time direction.
    pub source: (usize, usize),
}

impl Excursion {
    pub fn start_radius(&self) -> f64 {
        match self.direction {
            Direction::Outward => self.r_inner,
            Direction::Inward => self.r_outer,
        }
    }

    pub fn end_radius(&self) -> f64 {
        match self.direction {
            Direction::Outward => self.r_outer,
            Direction::Inward => self.r_inner,
        }
    }

    /// Endpoints on their circles; interior within `slack` of the closed annulus.
    pub fn check_invariants(&self, slack: f64) -> Result<()> {
        let bad = |what: String| Err(LabError::InvalidArgument(what));
        if !(self.r_inner > 0.0 && self.r_outer > self.r_inner) {
            return bad(format!("radii {} / {}", self.r_inner, self.r_outer));
        }
        let (first, last) = match (self.points.first(), self.points.last()) {
            (Some(f), Some(l)) if self.points.len() >= 2 => (*f, *l),
            _ => return bad("excursion needs >= 2 points".into()),
        };
        let eps = 1e-9 * self.r_outer;
        if (first.dist(self.center) - self.start_radius()).abs() > eps {
            return bad(format!("first point {first:?} off the start circle"));
        }
        if (last.dist(self.center) - self.end_radius()).abs() > eps {
            return bad(format!("last point {last:?} off the end circle"));
        }
        for p in &self.points {
            let r = p.dist(self.center);
            if r < self.r_inner - slack || r > self.r_outer + slack {
                return bad(format!("point {p:?} leaves the annulus"));
            }
        }
        Ok(())
    }
}

fn project_to_circle(p: Point2, center: Point2, radius: f64) -> Point2 {
    let d = p - center;
    let r = d.norm();
    if r == 0.0 {
        return center + Point2::new(radius, 0.0);
    }
    center + d * (radius / r)
}

/// Last-exit excursion: from the last visit of the `r_start` circle before
/// the first hit of the `r_end` circle, up to that hit. The two endpoints
/// are projected radially onto their circles (a move of at most one step).
pub fn extract_excursion(path: &PathSample, center: Point2, r_start: f64, r_end: f64) -> Result<Excursion> {
    if !(r_start > 0.0 && r_end > 0.0 && r_start != r_end) {
        return Err(LabError::InvalidGeometry(format!("radii {r_start} -> {r_end}")));
    }
    let tol = path.step_scale / 2.0;
    let pts = &path.points;
    let prev = |i: usize| if i == 0 { None } else { Some(pts[i - 1]) };
    let hit_end = (1..pts.len())
        .find(|&i| circle_hit(center, r_end, prev(i), pts[i], tol))
        .ok_or(LabError::NoCrossing { radius: r_end })?;
    let start = (0..hit_end)
        .rev()
        .find(|&i| circle_hit(center, r_start, prev(i), pts[i], tol))
        .ok_or_else(|| LabError::NotVisited(format!("circle of radius {r_start}")))?;
    let mut points = pts[start..=hit_end].to_vec();
    let last = points.len() - 1;
    points[0] = project_to_circle(points[0], center, r_start);
    points[last] = project_to_circle(points[last], center, r_end);
    let direction = if r_end > r_start { Direction::Outward } else { Direction::Inward };
    Ok(Excursion {
        points,
        center,
        r_inner: r_start.min(r_end),
        r_outer: r_start.max(r_end),
        direction,
        source: (start, hit_end),
    })
}

/// Time reversal: same trace, opposite direction.
pub fn reverse(e: &Excursion) -> Excursion {
    let mut points = e.points.clone();
    points.reverse();
    Excursion {
        points,
        center: e.center,
        r_inner: e.r_inner,
        r_outer: e.r_outer,
        direction: e.direction.flipped(),
        source: (e.source.1, e.source.0),
    }
}

/// Half-plane excursion from 0: real part a Gaussian walk, imaginary part
/// the norm of a 3-dimensional Gaussian walk. Stops at the first index with
/// imaginary part `>= height_stop`.
pub fn sample_half_plane_excursion(seed: u64, step_scale: f64, height_stop: f64) -> Result<PathSample> {
    sample_half_plane_excursion_capped(seed, step_scale, height_stop, DEFAULT_MAX_STEPS)
}

pub fn sample_half_plane_excursion_capped(
    seed: u64,
    step_scale: f64,
    height_stop: f64,
    max_steps: u64,
) -> Result<PathSample> {
    if !(height_stop > 0.0 && height_stop.is_finite()) {
        return Err(LabError::InvalidArgument(format!("height_stop {height_stop}")));
    }
    if !(step_scale > 0.0 && step_scale.is_finite()) || max_steps == 0 {
        return Err(LabError::InvalidArgument(format!("step scale {step_scale}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut x = 0.0f64;
    let mut bessel = [0.0f64; 3];
    let mut points = vec![Point2::ORIGIN];
    let mut markers = Vec::new();
    for step in 1..=max_steps {
        x += step_scale * rng.sample::<f64, _>(StandardNormal);
        for c in bessel.iter_mut() {
            *c += step_scale * rng.sample::<f64, _>(StandardNormal);
        }
        let y = (bessel[0] * bessel[0] + bessel[1] * bessel[1] + bessel[2] * bessel[2]).sqrt();
        points.push(Point2::new(x, y));
        if y >= height_stop {
            markers.push(Marker { label: "height".into(), index: step as usize });
            return Ok(PathSample { points, step_scale, seed, markers, truncated: false });
        }
    }
    Ok(PathSample { points, step_scale, seed, markers, truncated: true })
}
