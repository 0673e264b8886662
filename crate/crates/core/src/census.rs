//! Census of delta-good dyadic squares.
//!
//! A level-`n` square `S` of the base square is delta-good for a path when
//! (1) the path visits `S`, then reaches the circle of radius
//! `delta - 2^-n / sqrt 2` around the centre of `S`, then visits `S` again,
//! and (2) the disc of radius `2^-n` around the centre of `S` is not
//! disconnected from infinity by the whole path. Visits are sample points in
//! the closed square; circles are hit as in [`crate::randwalk`].

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{pair_scale, BaseSquare, BitGrid, Disc, DyadicSquare, OccupancyGrid, Point2, Rect};
use crate::randwalk::{circle_hit, sample_path, PathSample, Shape, StopRule, DEFAULT_MAX_STEPS};
use crate::stats::weighted_ls;
use crate::topology::{disc_cut_off, exterior_mask};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensusConfig {
    pub delta: f64,
    /// `N(delta)`, the coarsest level with a census.
    pub n_min: u32,
    pub n_max: u32,
    /// Paths are stopped on leaving `B(0, radius)`.
    pub radius: f64,
    pub base: BaseSquare,
    pub step_scale: f64,
}

/// Smallest `n` with `side 2^-n < delta / 16`.
pub fn n_of_delta(delta: f64, side: f64) -> u32 {
    let mut n = 0;
    while side / (1u64 << n) as f64 >= delta / 16.0 {
        n += 1;
    }
    n
}

impl CensusConfig {
    /// Census down to level `n_max` with `n_min = N(delta)` and the coarsest
    /// step allowed at `n_max`.
    pub fn new(delta: f64, n_max: u32, radius: f64, base: BaseSquare) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(LabError::InvalidArgument(format!("delta = {delta} must be positive")));
        }
        let n_min = n_of_delta(delta, base.side);
        let cfg = Self { delta, n_min, n_max, radius, base, step_scale: 0.0 };
        let cfg = Self { step_scale: cfg.side(n_max) / 8.0, ..cfg };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(LabError::InvalidArgument(format!("delta = {} must be positive", self.delta)));
        }
        if self.n_min < n_of_delta(self.delta, self.base.side) {
            return Err(LabError::InvalidArgument(format!(
                "n_min = {} is below N(delta) = {}",
                self.n_min,
                n_of_delta(self.delta, self.base.side)
            )));
        }
        if self.n_max < self.n_min || self.n_max > 24 {
            return Err(LabError::InvalidArgument(format!("levels {}..{}", self.n_min, self.n_max)));
        }
        if !(self.radius > 2.0 && self.radius.is_finite()) {
            return Err(LabError::InvalidGeometry(format!("R = {} must exceed 2", self.radius)));
        }
        let r = self.base.rect();
        let corners = [r.min, r.max, Point2::new(r.min.x, r.max.y), Point2::new(r.max.x, r.min.y)];
        if corners.iter().any(|c| c.norm() >= self.radius) {
            return Err(LabError::InvalidGeometry("base square leaves B(0, R)".into()));
        }
        let gap = r.dist_to(Point2::ORIGIN);
        if gap <= 0.0 {
            return Err(LabError::InvalidGeometry("base square contains the origin".into()));
        }
        if self.delta >= gap / 2.0 {
            return Err(LabError::InvalidGeometry(format!(
                "delta = {} must be below half the distance {gap} of the base square to the origin",
                self.delta
            )));
        }
        if !(self.step_scale > 0.0 && self.step_scale.is_finite()) {
            return Err(LabError::InvalidArgument(format!("step scale {}", self.step_scale)));
        }
        Ok(())
    }

    pub fn side(&self, n: u32) -> f64 {
        self.base.side / (1u64 << n) as f64
    }

    /// Raster cell shared by every level.
    pub fn cell_size(&self) -> f64 {
        self.side(self.n_max) / 8.0
    }

    /// Radius of the circle a level-`n` double visit must reach in between.
    pub fn excursion_radius(&self, n: u32) -> f64 {
        self.delta - self.side(n) / SQRT_2
    }

    fn check_level(&self, n: u32, step_scale: f64) -> Result<()> {
        if n < self.n_min || n > self.n_max {
            return Err(LabError::InvalidArgument(format!(
                "level {n} outside {}..={}",
                self.n_min, self.n_max
            )));
        }
        if step_scale > self.side(n) / 8.0 {
            return Err(LabError::Resolution(format!(
                "step scale {step_scale} exceeds 2^-{n}/8 = {}",
                self.side(n) / 8.0
            )));
        }
        Ok(())
    }
}

/// A path from the origin run until it leaves `B(0, R)`.
pub fn sample_census_path(seed: u64, cfg: &CensusConfig) -> Result<PathSample> {
    let rule = StopRule::new(
        vec![crate::randwalk::Target::new("exit", Shape::circle(Point2::ORIGIN, cfg.radius))],
        DEFAULT_MAX_STEPS,
    )?;
    sample_path(seed, Point2::ORIGIN, cfg.step_scale, &rule)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCensus {
    pub level: u32,
    pub good_squares: BTreeSet<DyadicSquare>,
    pub count: usize,
}

impl LevelCensus {
    fn new(level: u32, good_squares: BTreeSet<DyadicSquare>) -> Self {
        Self { level, count: good_squares.len(), good_squares }
    }
}

const LEAF: usize = 64;
const TOP: usize = 64 * LEAF;

/// Bounding boxes over blocks of a path, for first-hit queries that skip
/// blocks which cannot contain a hit.
#[derive(Debug, Clone)]
pub struct VisitIndex<'a> {
    points: &'a [Point2],
    tol: f64,
    leaf: Vec<Rect>,
    top: Vec<Rect>,
}

fn merge(a: Rect, b: Rect) -> Rect {
    Rect {
        min: Point2::new(a.min.x.min(b.min.x), a.min.y.min(b.min.y)),
        max: Point2::new(a.max.x.max(b.max.x), a.max.y.max(b.max.y)),
    }
}

impl<'a> VisitIndex<'a> {
    pub fn new(points: &'a [Point2], step_scale: f64) -> Self {
        let leaf: Vec<Rect> = points.chunks(LEAF).map(|c| Rect::bounding(c.iter().copied()).unwrap()).collect();
        let top = leaf.chunks(TOP / LEAF).map(|c| c.iter().copied().reduce(merge).unwrap()).collect();
        Self { points, tol: step_scale / 2.0, leaf, top }
    }

    /// Advance from `i` to the first index that `hit` accepts, letting `skip`
    /// pass over whole blocks; `skip` sees the block box and the index of
    /// its first point.
    fn scan(
        &self,
        mut i: usize,
        skip: impl Fn(&Rect, usize) -> bool,
        hit: impl Fn(usize) -> bool,
    ) -> Option<usize> {
        let n = self.points.len();
        while i < n {
            if i.is_multiple_of(TOP) && skip(&self.top[i / TOP], i) {
                i += TOP;
                continue;
            }
            if i.is_multiple_of(LEAF) && skip(&self.leaf[i / LEAF], i) {
                i += LEAF;
                continue;
            }
            if hit(i) {
                return Some(i);
            }
            i += 1;
        }
        None
    }

    /// First index `>= from` whose point lies in the closed rectangle.
    pub fn next_in_rect(&self, from: usize, r: &Rect) -> Option<usize> {
        self.scan(from, |b, _| !b.intersects(r), |i| r.contains(self.points[i]))
    }

    /// First index `>= from` hitting the circle `(c, radius)`.
    pub fn next_circle_hit(&self, from: usize, c: Point2, radius: f64) -> Option<usize> {
        let tol = self.tol;
        let pts = self.points;
        let side_of = |i: usize| pts[i].dist(c) - radius >= 0.0;
        self.scan(
            from,
            |b, start| {
                let prev_out = if start > 0 { Some(side_of(start - 1)) } else { None };
                let inside = b.farthest_from(c) < radius - tol && prev_out != Some(true);
                let outside = b.dist_to(c) > radius + tol && prev_out != Some(false);
                inside || outside
            },
            |i| circle_hit(c, radius, (i > 0).then(|| pts[i - 1]), pts[i], tol),
        )
    }
}

/// Symbols of the visit-order patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sym {
    S,
    T,
    /// The circle of radius `delta / 2` around the midpoint of the centres.
    C,
}

/// The eight visit orders of a pair of good squares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PairOrder {
    E1,
    E2,
    E3,
    E4,
    E5,
    E6,
    E7,
    E8,
}

impl PairOrder {
    pub const ALL: [PairOrder; 8] = [
        PairOrder::E1,
        PairOrder::E2,
        PairOrder::E3,
        PairOrder::E4,
        PairOrder::E5,
        PairOrder::E6,
        PairOrder::E7,
        PairOrder::E8,
    ];

    /// The pattern as a string over `S`, `T` and `C`.
    pub fn pattern(self) -> &'static str {
        match self {
            PairOrder::E1 => "SCSTCT",
            PairOrder::E2 => "SCTSCT",
            PairOrder::E3 => "STCST",
            PairOrder::E4 => "STCTS",
            PairOrder::E5 => "TCTSCS",
            PairOrder::E6 => "TCSTCS",
            PairOrder::E7 => "TSCTS",
            PairOrder::E8 => "TSCST",
        }
    }

    fn symbols(self) -> impl Iterator<Item = Sym> {
        self.pattern().chars().map(|c| match c {
            'S' => Sym::S,
            'T' => Sym::T,
            _ => Sym::C,
        })
    }
}

/// Census state for one path: the visit index plus the rasterized path and
/// its exterior, shared by every level.
pub struct PathCensus<'a> {
    cfg: CensusConfig,
    path: &'a PathSample,
    index: VisitIndex<'a>,
    grid: OccupancyGrid,
    exterior: BitGrid,
    /// Finest-level squares holding at least one sample point.
    visited: Vec<DyadicSquare>,
}

/// Frame covering `B(0, 1.25 R)` whose cell lattice contains the dyadic
/// lattice of the base square.
fn census_frame(cfg: &CensusConfig, path: &PathSample) -> Result<Rect> {
    let cell = cfg.cell_size();
    let reach = Rect::bounding(path.points.iter().copied())
        .map_or(0.0, |b| b.farthest_from(Point2::ORIGIN))
        .max(cfg.radius)
        * 1.25;
    let c = cfg.base.corner;
    let below = |v: f64| ((v + reach) / cell).ceil() * cell;
    let min = Point2::new(c.x - below(c.x), c.y - below(c.y));
    let max = Point2::new(min.x + ((reach - min.x) / cell).ceil() * cell, min.y + ((reach - min.y) / cell).ceil() * cell);
    Rect::new(min, max)
}

impl<'a> PathCensus<'a> {
    pub fn new(path: &'a PathSample, cfg: &CensusConfig) -> Result<Self> {
        cfg.validate()?;
        path.check_invariants()?;
        let mut grid = OccupancyGrid::new(census_frame(cfg, path)?, cfg.cell_size())?;
        grid.mark_polyline(&path.points);
        let exterior = exterior_mask(&grid.cells);
        let area = cfg.base.rect();
        let mut visited = Vec::new();
        let mut buf = Vec::new();
        for &p in path.points.iter().filter(|p| area.contains(**p)) {
            cfg.base.squares_containing(cfg.n_max, p, &mut buf);
            visited.extend_from_slice(&buf);
        }
        visited.sort_unstable();
        visited.dedup();
        Ok(Self {
            cfg: *cfg,
            path,
            index: VisitIndex::new(&path.points, path.step_scale),
            grid,
            exterior,
            visited,
        })
    }

    pub fn config(&self) -> &CensusConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn exterior(&self) -> &BitGrid {
        &self.exterior
    }

    /// Level-`n` squares holding a sample point.
    pub fn visited_squares(&self, n: u32) -> BTreeSet<DyadicSquare> {
        self.visited.iter().map(|s| s.ancestor(n)).collect()
    }

    /// Condition (1) with `visits` returns to `s`, each after reaching the
    /// excursion circle: `tau(S, circle, S, ..., S) < tau`.
    fn repeated_visit(&self, s: &DyadicSquare, visits: u32) -> bool {
        let rect = s.rect(&self.cfg.base);
        let c = s.center(&self.cfg.base);
        let r = self.cfg.excursion_radius(s.level);
        let Some(mut t) = self.index.next_in_rect(1, &rect) else { return false };
        for _ in 1..visits {
            let Some(out) = self.index.next_circle_hit(t + 1, c, r) else { return false };
            let Some(back) = self.index.next_in_rect(out + 1, &rect) else { return false };
            t = back;
        }
        true
    }

    /// Condition (2): `B(S, 2^-n)` is not disconnected from infinity.
    pub fn reaches_infinity(&self, s: &DyadicSquare) -> Result<bool> {
        let disc = Disc::new(s.center(&self.cfg.base), self.cfg.side(s.level))?;
        Ok(!disc_cut_off(&self.grid, &self.exterior, &disc)?)
    }

    fn census(&self, n: u32, visits: u32) -> Result<LevelCensus> {
        self.cfg.check_level(n, self.path.step_scale)?;
        let mut good = BTreeSet::new();
        for s in self.visited_squares(n) {
            if self.repeated_visit(&s, visits) && self.reaches_infinity(&s)? {
                good.insert(s);
            }
        }
        Ok(LevelCensus::new(n, good))
    }

    pub fn good_squares(&self, n: u32) -> Result<LevelCensus> {
        self.census(n, 2)
    }

    pub fn triple_good_squares(&self, n: u32) -> Result<LevelCensus> {
        self.census(n, 3)
    }

    pub fn sweep(&self) -> Result<CensusSweep> {
        let levels = (self.cfg.n_min..=self.cfg.n_max).map(|n| self.good_squares(n)).collect::<Result<Vec<_>>>()?;
        let nesting_violations = nesting_violations(&levels);
        Ok(CensusSweep { levels, nesting_violations })
    }

    pub fn triple_sweep(&self) -> Result<Vec<LevelCensus>> {
        (self.cfg.n_min..=self.cfg.n_max).map(|n| self.triple_good_squares(n)).collect()
    }

    /// Every pattern `E1..E8` realized by the visits of `s`, `t` and the
    /// circle of radius `delta / 2` around the midpoint of their centres.
    /// Empty when only one of the squares is visited.
    pub fn classify_pair_order(&self, s: &DyadicSquare, t: &DyadicSquare) -> Result<BTreeSet<PairOrder>> {
        let base = &self.cfg.base;
        let (rs, rt) = (s.rect(base), t.rect(base));
        let seen = [&rs, &rt].map(|r| self.index.next_in_rect(0, r).is_some());
        if seen == [false, false] {
            return Err(LabError::NotVisited(format!("squares {s:?} and {t:?}")));
        }
        if seen.contains(&false) {
            return Ok(BTreeSet::new());
        }
        let (cs, ct) = (s.center(base), t.center(base));
        let z = Point2::new((cs.x + ct.x) / 2.0, (cs.y + ct.y) / 2.0);
        let radius = self.cfg.delta / 2.0;
        let next = |sym: Sym, from: usize| match sym {
            Sym::S => self.index.next_in_rect(from, &rs),
            Sym::T => self.index.next_in_rect(from, &rt),
            Sym::C => self.index.next_circle_hit(from, z, radius),
        };
        let realized = |e: PairOrder| {
            let mut t = 0;
            e.symbols().all(|sym| match next(sym, t + 1) {
                Some(i) => {
                    t = i;
                    true
                }
                None => false,
            })
        };
        Ok(PairOrder::ALL.into_iter().filter(|&e| realized(e)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusSweep {
    pub levels: Vec<LevelCensus>,
    /// Good squares whose parent is not good at the level above.
    pub nesting_violations: u64,
}

pub fn nesting_violations(levels: &[LevelCensus]) -> u64 {
    levels
        .windows(2)
        .map(|w| {
            let coarse = &w[0].good_squares;
            w[1].good_squares.iter().filter(|s| !coarse.contains(&s.ancestor(w[0].level))).count() as u64
        })
        .sum()
}

pub fn good_squares(path: &PathSample, cfg: &CensusConfig, n: u32) -> Result<LevelCensus> {
    cfg.check_level(n, path.step_scale)?;
    PathCensus::new(path, cfg)?.good_squares(n)
}

pub fn triple_good_squares(path: &PathSample, cfg: &CensusConfig, n: u32) -> Result<LevelCensus> {
    cfg.check_level(n, path.step_scale)?;
    PathCensus::new(path, cfg)?.triple_good_squares(n)
}

pub fn census_sweep(path: &PathSample, cfg: &CensusConfig) -> Result<CensusSweep> {
    PathCensus::new(path, cfg)?.sweep()
}

pub fn classify_pair_order(
    path: &PathSample,
    s: &DyadicSquare,
    t: &DyadicSquare,
    cfg: &CensusConfig,
) -> Result<BTreeSet<PairOrder>> {
    PathCensus::new(path, cfg)?.classify_pair_order(s, t)
}

/// Least-squares slope of `log2(count)` against level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxFit {
    pub slope: f64,
    pub se: f64,
    pub intercept: f64,
    pub levels: Vec<(u32, f64)>,
}

/// Fit over levels in `fit_range` with positive counts; at least three are
/// needed.
pub fn box_dimension(counts: &BTreeMap<u32, f64>, fit_range: (u32, u32)) -> Result<BoxFit> {
    let levels: Vec<(u32, f64)> = counts
        .range(fit_range.0..=fit_range.1)
        .filter(|(_, &c)| c > 0.0 && c.is_finite())
        .map(|(&n, &c)| (n, c))
        .collect();
    if levels.len() < 3 {
        return Err(LabError::InsufficientLevels { needed: 3, found: levels.len() });
    }
    let pts: Vec<_> = levels.iter().map(|&(n, c)| (n as f64, c.log2(), 1.0)).collect();
    let fit = weighted_ls(&pts)?;
    Ok(BoxFit { slope: fit.slope, se: fit.slope_se, intercept: fit.intercept, levels })
}

/// Number of level-`n` squares of `base` holding at least one of `points`,
/// for each `n` in `levels`.
pub fn box_counts(
    points: impl IntoIterator<Item = Point2>,
    base: &BaseSquare,
    levels: std::ops::RangeInclusive<u32>,
) -> BTreeMap<u32, f64> {
    let finest = *levels.end();
    let count = 1u64 << finest;
    let scale = count as f64 / base.side;
    let mut cells: Vec<(u32, u32)> = points
        .into_iter()
        .filter(|p| base.contains(*p))
        .map(|p| {
            let i = (((p.x - base.corner.x) * scale) as u64).min(count - 1);
            let j = (((p.y - base.corner.y) * scale) as u64).min(count - 1);
            (i as u32, j as u32)
        })
        .collect();
    let mut out = BTreeMap::new();
    let mut n = finest;
    loop {
        cells.sort_unstable();
        cells.dedup();
        out.insert(n, cells.len() as f64);
        if n == *levels.start() || n == 0 {
            return out;
        }
        for c in cells.iter_mut() {
            *c = (c.0 >> 1, c.1 >> 1);
        }
        n -= 1;
    }
}

/// One row of the pair table: good pairs at level `n` whose distance lies
/// in the bracket of scale `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub n: u32,
    pub m: i32,
    /// Unordered pairs of level-`n` squares of the base square at scale `m`.
    pub pairs: u64,
    pub mean_good_pairs: f64,
    pub p_hat: f64,
    /// `2^{-2 xi n} 2^{xi m}`.
    pub bound_shape: f64,
    pub ratio: f64,
}

/// Empirical `P(S, T good)` by distance scale, averaged over paths, against
/// the shape of the second-moment bound with exponent `xi`.
pub fn pair_table(good_sets: &[&BTreeSet<DyadicSquare>], n: u32, xi: f64) -> Result<Vec<PairRow>> {
    if good_sets.is_empty() {
        return Err(LabError::InvalidArgument("pair table needs at least one path".into()));
    }
    let side = 1i64 << n;
    let mut totals: BTreeMap<i32, u64> = BTreeMap::new();
    let origin = DyadicSquare::new(n, 0, 0)?;
    for di in 0..side {
        for dj in 0..side {
            if di == 0 && dj == 0 {
                continue;
            }
            let m = pair_scale(&origin, &DyadicSquare::new(n, di as u32, dj as u32)?)?;
            // placements of the offset (di, +-dj), counted once per unordered pair
            let mult = ((side - di) * (side - dj)) as u64 * if di > 0 && dj > 0 { 2 } else { 1 };
            *totals.entry(m).or_default() += mult;
        }
    }
    let mut good: BTreeMap<i32, u64> = BTreeMap::new();
    for set in good_sets {
        let v: Vec<_> = set.iter().filter(|s| s.level == n).collect();
        for (a, s) in v.iter().enumerate() {
            for t in &v[a + 1..] {
                *good.entry(pair_scale(s, t)?).or_default() += 1;
            }
        }
    }
    let paths = good_sets.len() as f64;
    Ok(totals
        .into_iter()
        .map(|(m, pairs)| {
            let mean_good_pairs = *good.get(&m).unwrap_or(&0) as f64 / paths;
            let p_hat = mean_good_pairs / pairs as f64;
            let bound_shape = (-2.0 * xi * n as f64 + xi * m as f64).exp2();
            PairRow { n, m, pairs, mean_good_pairs, p_hat, bound_shape, ratio: p_hat / bound_shape }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> CensusConfig {
        CensusConfig::new(0.29, 8, 2.05, BaseSquare::new(Point2::new(0.6, -0.5), 1.0).unwrap()).unwrap()
    }

    /// Straight polyline through `corners`, sampled every `step`.
    fn polyline(corners: &[Point2], step: f64) -> PathSample {
        let mut pts = vec![corners[0]];
        for w in corners.windows(2) {
            let k = (w[0].dist(w[1]) / step).ceil().max(1.0) as usize;
            for i in 1..=k {
                let t = i as f64 / k as f64;
                pts.push(Point2::new(w[0].x + t * (w[1].x - w[0].x), w[0].y + t * (w[1].y - w[0].y)));
            }
        }
        PathSample::from_points(pts, step, 0)
    }

    #[test]
    fn n_of_delta_is_smallest() {
        assert_eq!(n_of_delta(0.29, 1.0), 6);
        assert_eq!(n_of_delta(0.24, 1.0), 7);
    }

    #[test]
    fn config_policy() {
        let base = BaseSquare::new(Point2::new(0.6, -0.5), 1.0).unwrap();
        assert!(CensusConfig::new(0.31, 8, 2.05, base).is_err());
        assert!(CensusConfig::new(0.2, 8, 1.9, base).is_err());
        assert!(CensusConfig::new(0.2, 8, 2.05, BaseSquare::new(Point2::new(-0.5, -0.5), 1.0).unwrap()).is_err());
        assert!(CensusConfig::new(0.2, 3, 2.05, base).is_err());
        let c = cfg();
        assert_eq!((c.n_min, c.n_max), (6, 8));
        assert_eq!(c.step_scale, c.side(8) / 8.0);
    }

    #[test]
    fn path_missing_base_square_has_empty_census() {
        let c = cfg();
        let path = polyline(&[Point2::ORIGIN, Point2::new(-2.1, 0.0)], c.step_scale);
        let sweep = census_sweep(&path, &c).unwrap();
        assert!(sweep.levels.iter().all(|l| l.count == 0));
        assert_eq!(sweep.levels.len(), 3);
    }

    #[test]
    fn coarse_steps_are_rejected() {
        let c = cfg();
        let mut path = polyline(&[Point2::ORIGIN, Point2::new(-2.1, 0.0)], c.step_scale);
        path.step_scale = c.side(7) / 8.0;
        assert!(matches!(good_squares(&path, &c, 8), Err(LabError::Resolution(_))));
        assert!(good_squares(&path, &c, 7).is_ok());
        assert!(good_squares(&path, &c, 5).is_err());
    }

    /// Out to `p`, then `spikes` excursions of length `reach` straight up and
    /// back, then along a ray to radius R.
    fn spike_path(p: Point2, spikes: usize, reach: f64, c: &CensusConfig) -> PathSample {
        let mut corners = vec![Point2::ORIGIN, p];
        for _ in 0..spikes {
            corners.push(Point2::new(p.x, p.y + reach));
            corners.push(p);
        }
        corners.push(Point2::new(2.1 * p.x / p.norm(), 2.1 * p.y / p.norm()));
        polyline(&corners, c.step_scale)
    }

    #[test]
    fn double_visit_fixture_is_good_at_every_level() {
        let c = cfg();
        let p = Point2::new(1.0 + 1e-3, 0.1 + 1e-3);
        let path = spike_path(p, 1, c.delta + 0.05, &c);
        let pc = PathCensus::new(&path, &c).unwrap();
        let mut buf = Vec::new();
        for n in c.n_min..=c.n_max {
            c.base.squares_containing(n, p, &mut buf);
            let l = pc.good_squares(n).unwrap();
            assert!(l.good_squares.contains(&buf[0]), "level {n}");
            assert!(pc.triple_good_squares(n).unwrap().count == 0);
        }
        // a spike that stays inside the excursion circle does not count
        let short = spike_path(p, 1, c.delta / 2.0, &c);
        let pc = PathCensus::new(&short, &c).unwrap();
        c.base.squares_containing(c.n_max, p, &mut buf);
        assert!(!pc.good_squares(c.n_max).unwrap().good_squares.contains(&buf[0]));
    }

    #[test]
    fn triple_visit_fixture_is_triple_good() {
        let c = cfg();
        let p = Point2::new(1.0 + 1e-3, 0.1 + 1e-3);
        let path = spike_path(p, 2, c.delta + 0.05, &c);
        let pc = PathCensus::new(&path, &c).unwrap();
        let mut buf = Vec::new();
        c.base.squares_containing(c.n_max, p, &mut buf);
        assert!(pc.triple_good_squares(c.n_max).unwrap().good_squares.contains(&buf[0]));
    }

    #[test]
    fn enclosed_square_is_not_good() {
        let c = cfg();
        let p = Point2::new(1.0 + 1e-3, 0.1 + 1e-3);
        // spike out and back, then a closed square loop around p before leaving
        let h = 0.1;
        let corners = [
            Point2::ORIGIN,
            p,
            Point2::new(p.x, p.y + c.delta + 0.05),
            p,
            Point2::new(p.x - h, p.y),
            Point2::new(p.x - h, p.y - h),
            Point2::new(p.x + h, p.y - h),
            Point2::new(p.x + h, p.y + h),
            Point2::new(p.x - h, p.y + h),
            Point2::new(p.x - h, p.y),
            Point2::new(-2.1, p.y),
        ];
        let path = polyline(&corners, c.step_scale);
        let pc = PathCensus::new(&path, &c).unwrap();
        let mut buf = Vec::new();
        c.base.squares_containing(c.n_max, p, &mut buf);
        assert!(!pc.good_squares(c.n_max).unwrap().good_squares.contains(&buf[0]));
    }

    #[test]
    fn scripted_e4_order() {
        let c = cfg();
        let s = DyadicSquare::new(6, 20, 30).unwrap();
        let t = DyadicSquare::new(6, 22, 30).unwrap();
        let (ps, pt) = (s.center(&c.base), t.center(&c.base));
        let far = Point2::new(pt.x, pt.y + c.delta);
        // S -> T -> circle -> T -> S, then away without touching either
        let path = polyline(&[Point2::ORIGIN, ps, pt, far, pt, ps, Point2::new(ps.x, -2.1)], c.step_scale);
        let got = classify_pair_order(&path, &s, &t, &c).unwrap();
        assert!(got.contains(&PairOrder::E4));
        assert!(!got.contains(&PairOrder::E5) && !got.contains(&PairOrder::E1));
        // only S visited
        let only_s = polyline(&[Point2::ORIGIN, ps, Point2::new(ps.x, -2.1)], c.step_scale);
        assert!(classify_pair_order(&only_s, &s, &t, &c).unwrap().is_empty());
        let neither = polyline(&[Point2::ORIGIN, Point2::new(-2.1, 0.0)], c.step_scale);
        assert!(matches!(classify_pair_order(&neither, &s, &t, &c), Err(LabError::NotVisited(_))));
    }

    #[test]
    fn box_dimension_of_exact_counts() {
        let full: BTreeMap<u32, f64> = (2..8).map(|n| (n, 4f64.powi(n as i32))).collect();
        assert!((box_dimension(&full, (2, 7)).unwrap().slope - 2.0).abs() < 1e-12);
        let line: BTreeMap<u32, f64> = (2..8).map(|n| (n, 2f64.powi(n as i32))).collect();
        let f = box_dimension(&line, (2, 7)).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12 && f.se < 1e-9);
        assert!(matches!(box_dimension(&line, (2, 3)), Err(LabError::InsufficientLevels { .. })));
    }

    #[test]
    fn box_counts_of_a_diagonal() {
        let base = BaseSquare::new(Point2::ORIGIN, 1.0).unwrap();
        let pts = (0..100_000).map(|i| {
            let t = (i as f64 + 0.5) / 100_000.0;
            Point2::new(t, t)
        });
        let counts = box_counts(pts, &base, 3..=9);
        for (n, c) in counts {
            assert_eq!(c, (1u64 << n) as f64);
        }
    }

    #[test]
    fn pair_table_totals_count_every_pair() {
        let n = 4;
        let rows = pair_table(&[&BTreeSet::new()], n, 1.0).unwrap();
        let all = (1u64 << (2 * n)) * ((1u64 << (2 * n)) - 1) / 2;
        assert_eq!(rows.iter().map(|r| r.pairs).sum::<u64>(), all);
        assert!(rows.iter().all(|r| r.p_hat == 0.0));
        let set: BTreeSet<_> = [DyadicSquare::new(n, 0, 0).unwrap(), DyadicSquare::new(n, 1, 0).unwrap()].into();
        let rows = pair_table(&[&set], n, 1.0).unwrap();
        let hit: Vec<_> = rows.iter().filter(|r| r.mean_good_pairs > 0.0).collect();
        assert_eq!(hit.len(), 1);
        assert_eq!(hit[0].m, n as i32);
    }

    #[test]
    fn visit_index_matches_linear_scan() {
        use crate::stats::rng_from_seed;
        use rand::Rng;
        let mut rng = rng_from_seed(4);
        let step = 0.01;
        let path = sample_path(
            9,
            Point2::ORIGIN,
            step,
            &StopRule::new(vec![crate::randwalk::Target::new("x", Shape::circle(Point2::ORIGIN, 2.0))], 1 << 22).unwrap(),
        )
        .unwrap();
        let idx = VisitIndex::new(&path.points, step);
        for _ in 0..300 {
            let from = rng.random_range(0..path.len());
            let c = Point2::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            let r = 0.05 + rng.random::<f64>();
            let want = (from..path.len())
                .find(|&i| circle_hit(c, r, (i > 0).then(|| path.points[i - 1]), path.points[i], step / 2.0));
            assert_eq!(idx.next_circle_hit(from, c, r), want);
            let rect = Rect::centered(c, 0.02 + 0.1 * rng.random::<f64>()).unwrap();
            let want = (from..path.len()).find(|&i| rect.contains(path.points[i]));
            assert_eq!(idx.next_in_rect(from, &rect), want);
        }
    }
}
