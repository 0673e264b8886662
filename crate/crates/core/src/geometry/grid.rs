use serde::{Deserialize, Serialize};

use super::{Point2, Rect};
use crate::error::{LabError, Result};
use crate::randwalk::PathSample;

/// Row-major packed bit raster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitGrid {
    width: usize,
    height: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl BitGrid {
    pub fn new(width: usize, height: usize) -> Self {
        let words_per_row = width.div_ceil(64);
        Self { width, height, words_per_row, words: vec![0; words_per_row * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        debug_assert!(x < self.width && y < self.height);
        (self.words[y * self.words_per_row + x / 64] >> (x % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize) {
        debug_assert!(x < self.width && y < self.height);
        self.words[y * self.words_per_row + x / 64] |= 1 << (x % 64);
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[u64] {
        &self.words[y * self.words_per_row..(y + 1) * self.words_per_row]
    }

    #[inline]
    pub fn row_mut(&mut self, y: usize) -> &mut [u64] {
        &mut self.words[y * self.words_per_row..(y + 1) * self.words_per_row]
    }

    /// Set bits `[from, to]` (inclusive) of row `y`.
    pub fn set_span(&mut self, y: usize, from: usize, to: usize) {
        let row = self.row_mut(y);
        let (wa, wb) = (from / 64, to / 64);
        for (w, word) in row.iter_mut().enumerate().take(wb + 1).skip(wa) {
            let lo = if w == wa { from % 64 } else { 0 };
            let hi = if w == wb { to % 64 } else { 63 };
            *word |= span_mask(lo, hi);
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn clear(&mut self) {
        self.words.iter_mut().for_each(|w| *w = 0);
    }

    /// Coordinates of every set bit, row by row.
    pub fn iter_ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.height).flat_map(move |y| {
            self.row(y).iter().enumerate().flat_map(move |(w, &word)| {
                let mut bits = word;
                std::iter::from_fn(move || {
                    if bits == 0 {
                        return None;
                    }
                    let b = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    Some((w * 64 + b, y))
                })
            })
        })
    }

    /// `true` when every set bit of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BitGrid) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }
}

#[inline]
pub(crate) fn span_mask(lo: usize, hi: usize) -> u64 {
    debug_assert!(lo <= hi && hi < 64);
    let upper = if hi == 63 { u64::MAX } else { (1u64 << (hi + 1)) - 1 };
    upper & !((1u64 << lo) - 1)
}

/// Visit every cell of the unit lattice crossed by the segment `a -> b`
/// (coordinates in cell units), as a 4-connected chain from the cell of `a`
/// to the cell of `b`.
pub fn for_each_segment_cell(a: (f64, f64), b: (f64, f64), mut f: impl FnMut(i64, i64)) {
    let (mut cx, mut cy) = (a.0.floor() as i64, a.1.floor() as i64);
    let (ex, ey) = (b.0.floor() as i64, b.1.floor() as i64);
    f(cx, cy);
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let sx: i64 = if dx > 0.0 { 1 } else { -1 };
    let sy: i64 = if dy > 0.0 { 1 } else { -1 };
    let tdx = if dx != 0.0 { 1.0 / dx.abs() } else { f64::INFINITY };
    let tdy = if dy != 0.0 { 1.0 / dy.abs() } else { f64::INFINITY };
    let mut tmx = if dx > 0.0 {
        (cx as f64 + 1.0 - a.0) * tdx
    } else if dx < 0.0 {
        (a.0 - cx as f64) * tdx
    } else {
        f64::INFINITY
    };
    let mut tmy = if dy > 0.0 {
        (cy as f64 + 1.0 - a.1) * tdy
    } else if dy < 0.0 {
        (a.1 - cy as f64) * tdy
    } else {
        f64::INFINITY
    };
    let steps = (ex - cx).abs() + (ey - cy).abs();
    for _ in 0..steps {
        let step_x = if cx == ex {
            false
        } else if cy == ey {
            true
        } else {
            // exact corner hits step x first, keeping the chain 4-connected
            tmx <= tmy
        };
        if step_x {
            cx += sx;
            tmx += tdx;
        } else {
            cy += sy;
            tmy += tdy;
        }
        f(cx, cy);
    }
}

/// Boolean raster of visited cells over a rectangular frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub origin: Point2,
    pub cell_size: f64,
    pub width: usize,
    pub height: usize,
    pub cells: BitGrid,
}

impl OccupancyGrid {
    pub fn new(frame: Rect, cell_size: f64) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(LabError::InvalidGeometry(format!("cell size {cell_size}")));
        }
        let frame = Rect::new(frame.min, frame.max)?;
        let width = (frame.width() / cell_size).ceil().max(1.0) as usize;
        let height = (frame.height() / cell_size).ceil().max(1.0) as usize;
        Ok(Self { origin: frame.min, cell_size, width, height, cells: BitGrid::new(width, height) })
    }

    pub fn frame(&self) -> Rect {
        Rect {
            min: self.origin,
            max: Point2::new(
                self.origin.x + self.width as f64 * self.cell_size,
                self.origin.y + self.height as f64 * self.cell_size,
            ),
        }
    }

    /// Fractional cell coordinates of `p`.
    #[inline]
    pub fn to_cell_coords(&self, p: Point2) -> (f64, f64) {
        ((p.x - self.origin.x) / self.cell_size, (p.y - self.origin.y) / self.cell_size)
    }

    pub fn cell_of(&self, p: Point2) -> Option<(usize, usize)> {
        let (fx, fy) = self.to_cell_coords(p);
        self.index(fx.floor() as i64, fy.floor() as i64)
    }

    #[inline]
    fn index(&self, x: i64, y: i64) -> Option<(usize, usize)> {
        (x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height)
            .then_some((x as usize, y as usize))
    }

    pub fn cell_center(&self, x: usize, y: usize) -> Point2 {
        Point2::new(
            self.origin.x + (x as f64 + 0.5) * self.cell_size,
            self.origin.y + (y as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn cell_rect(&self, x: usize, y: usize) -> Rect {
        let min = Point2::new(
            self.origin.x + x as f64 * self.cell_size,
            self.origin.y + y as f64 * self.cell_size,
        );
        Rect { min, max: Point2::new(min.x + self.cell_size, min.y + self.cell_size) }
    }

    #[inline]
    pub fn is_visited(&self, x: usize, y: usize) -> bool {
        self.cells.get(x, y)
    }

    pub fn visited_count(&self) -> usize {
        self.cells.count_ones()
    }

    pub fn mark_cell(&mut self, x: usize, y: usize) {
        self.cells.set(x, y);
    }

    pub fn mark_point(&mut self, p: Point2) {
        if let Some((x, y)) = self.cell_of(p) {
            self.cells.set(x, y);
        }
    }

    /// Mark the supercover of segment `a -> b`, clipped to the frame.
    pub fn mark_segment(&mut self, a: Point2, b: Point2) {
        let (ca, cb) = (self.to_cell_coords(a), self.to_cell_coords(b));
        let (w, h) = (self.width as f64, self.height as f64);
        let outside = |c0: f64, c1: f64, lim: f64| (c0 < 0.0 && c1 < 0.0) || (c0 >= lim && c1 >= lim);
        if outside(ca.0, cb.0, w) || outside(ca.1, cb.1, h) {
            return;
        }
        let (width, height) = (self.width as i64, self.height as i64);
        let cells = &mut self.cells;
        for_each_segment_cell(ca, cb, |x, y| {
            if x >= 0 && y >= 0 && x < width && y < height {
                cells.set(x as usize, y as usize);
            }
        });
    }

    pub fn mark_polyline(&mut self, points: &[Point2]) {
        if let Some(&first) = points.first() {
            self.mark_point(first);
        }
        for w in points.windows(2) {
            self.mark_segment(w[0], w[1]);
        }
    }

    /// Mark every cell meeting the closed disc `B(center, radius)`.
    pub fn mark_filled_disc(&mut self, center: Point2, radius: f64) {
        let (fx0, fy0) = self.to_cell_coords(Point2::new(center.x - radius, center.y - radius));
        let (fx1, fy1) = self.to_cell_coords(Point2::new(center.x + radius, center.y + radius));
        let x0 = fx0.floor().max(0.0) as usize;
        let y0 = fy0.floor().max(0.0) as usize;
        let x1 = (fx1.floor() as i64).min(self.width as i64 - 1);
        let y1 = (fy1.floor() as i64).min(self.height as i64 - 1);
        if x1 < 0 || y1 < 0 {
            return;
        }
        for y in y0..=y1 as usize {
            for x in x0..=x1 as usize {
                if self.cell_rect(x, y).dist_to(center) <= radius {
                    self.cells.set(x, y);
                }
            }
        }
    }
}

/// Rasterize a path into a fresh grid over `frame`.
pub fn rasterize(path: &PathSample, frame: Rect, cell_size: f64) -> Result<OccupancyGrid> {
    let mut grid = OccupancyGrid::new(frame, cell_size)?;
    grid.mark_polyline(&path.points);
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::rng_from_seed;
    use rand::Rng;
    use std::collections::BTreeSet;

    fn unit_frame(half: f64) -> Rect {
        Rect::centered(Point2::ORIGIN, half).unwrap()
    }

    fn path_of(points: Vec<Point2>) -> PathSample {
        PathSample::from_points(points, 0.01, 0)
    }

    #[test]
    fn single_point_marks_one_cell() {
        let g = rasterize(&path_of(vec![Point2::new(0.013, -0.2)]), unit_frame(1.0), 0.05).unwrap();
        assert_eq!(g.visited_count(), 1);
    }

    #[test]
    fn horizontal_segment_cell_count() {
        let cell = 0.05;
        let a = Point2::new(0.0123, 0.0371);
        let b = Point2::new(a.x + 10.0 * cell, a.y);
        let g = rasterize(&path_of(vec![a, b]), unit_frame(1.0), cell).unwrap();
        let cells: Vec<_> = g.cells.iter_ones().collect();
        assert!((10..=12).contains(&cells.len()), "{}", cells.len());
        assert!(cells.iter().all(|c| c.1 == cells[0].1));
    }

    #[test]
    fn chain_is_four_connected() {
        let mut rng = rng_from_seed(3);
        for _ in 0..200 {
            let a = (rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
            let b = (rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
            let mut prev: Option<(i64, i64)> = None;
            for_each_segment_cell(a, b, |x, y| {
                if let Some((px, py)) = prev {
                    assert_eq!((x - px).abs() + (y - py).abs(), 1);
                }
                prev = Some((x, y));
            });
            assert_eq!(prev, Some((b.0.floor() as i64, b.1.floor() as i64)));
        }
        // passes exactly through lattice corners
        let mut cells = Vec::new();
        for_each_segment_cell((0.5, 0.5), (2.5, 2.5), |x, y| cells.push((x, y)));
        assert_eq!(cells.first(), Some(&(0, 0)));
        assert_eq!(cells.last(), Some(&(2, 2)));
        assert_eq!(cells.len(), 5);
    }

    /// Liang-Barsky clip length of segment a->b inside the closed cell.
    fn clip_len(a: Point2, b: Point2, r: Rect) -> f64 {
        let d = b - a;
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for (p, q) in [
            (-d.x, a.x - r.min.x),
            (d.x, r.max.x - a.x),
            (-d.y, a.y - r.min.y),
            (d.y, r.max.y - a.y),
        ] {
            if p == 0.0 {
                if q < 0.0 {
                    return 0.0;
                }
            } else {
                let t = q / p;
                if p < 0.0 {
                    t0 = t0.max(t);
                } else {
                    t1 = t1.min(t);
                }
            }
        }
        if t1 < t0 {
            0.0
        } else {
            (t1 - t0) * d.norm()
        }
    }

    #[test]
    fn raster_matches_supercover_oracles() {
        let cell = 0.1;
        let frame = unit_frame(2.0);
        let mut rng = rng_from_seed(11);
        for _ in 0..20 {
            let mut pts = vec![Point2::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5))];
            for _ in 0..15 {
                let last = *pts.last().unwrap();
                pts.push(last + Point2::new(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4)));
            }
            let grid = rasterize(&path_of(pts.clone()), frame, cell).unwrap();
            let got: BTreeSet<_> = grid.cells.iter_ones().collect();

            // dense sub-sampling at cell/8
            let mut dense = BTreeSet::new();
            for w in pts.windows(2) {
                let n = ((w[1] - w[0]).norm() / (cell / 8.0)).ceil().max(1.0) as usize;
                for s in 0..=n {
                    let p = w[0] + (w[1] - w[0]) * (s as f64 / n as f64);
                    if let Some(c) = grid.cell_of(p) {
                        dense.insert(c);
                    }
                }
            }
            assert!(dense.is_subset(&got));

            // exact: every cell crossed with positive length
            let mut exact = BTreeSet::new();
            if let Some(c) = grid.cell_of(pts[0]) {
                exact.insert(c);
            }
            for y in 0..grid.height {
                for x in 0..grid.width {
                    let r = grid.cell_rect(x, y);
                    if pts.windows(2).any(|w| clip_len(w[0], w[1], r) > 1e-12) {
                        exact.insert((x, y));
                    }
                }
            }
            assert_eq!(got, exact);
        }
    }

    #[test]
    fn clipped_segments_outside_frame() {
        let g = rasterize(
            &path_of(vec![Point2::new(5.0, 5.0), Point2::new(6.0, 7.0)]),
            unit_frame(1.0),
            0.1,
        )
        .unwrap();
        assert_eq!(g.visited_count(), 0);
        let g = rasterize(
            &path_of(vec![Point2::new(-5.0, 0.05), Point2::new(5.0, 0.05)]),
            unit_frame(1.0),
            0.1,
        )
        .unwrap();
        assert_eq!(g.visited_count(), 20);
    }

    #[test]
    fn extending_a_path_is_monotone_and_refinement_covers() {
        let mut rng = rng_from_seed(5);
        let mut pts = vec![Point2::ORIGIN];
        for _ in 0..300 {
            let last = *pts.last().unwrap();
            pts.push(last + Point2::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05)));
        }
        let frame = unit_frame(2.0);
        let short = rasterize(&path_of(pts[..150].to_vec()), frame, 0.0625).unwrap();
        let long = rasterize(&path_of(pts.clone()), frame, 0.0625).unwrap();
        assert!(short.cells.is_subset_of(&long.cells));

        let fine = rasterize(&path_of(pts), frame, 0.03125).unwrap();
        let mut coarsened = OccupancyGrid::new(frame, 0.0625).unwrap();
        for (x, y) in fine.cells.iter_ones() {
            coarsened.mark_cell(x / 2, y / 2);
        }
        assert!(long.cells.is_subset_of(&coarsened.cells));
    }

    #[test]
    fn filled_disc() {
        let mut g = OccupancyGrid::new(unit_frame(1.0), 0.1).unwrap();
        g.mark_filled_disc(Point2::new(0.05, 0.05), 0.01);
        assert_eq!(g.visited_count(), 1);
        g.mark_filled_disc(Point2::ORIGIN, 0.5);
        assert!(g.visited_count() > 60 && g.visited_count() < 120);
    }
}
