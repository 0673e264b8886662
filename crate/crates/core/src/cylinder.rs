//! Disconnection around the origin on the log-polar cylinder.
//!
//! Under `z -> log z` the trace of a planar Brownian path is the trace of a
//! Brownian path on the cylinder `(u, theta)`, `theta` taken mod `2 pi`, and
//! the circle of radius `e^u` becomes a horizontal line. Walks here take
//! fixed Gaussian steps in `(u, theta)`, so every scale of an annulus is
//! resolved with the same relative accuracy. A closed loop of marked cells
//! around the cylinder is a loop of the planar path around the origin.
//!
//! With reinjection on, excursions into the unit disc are not traced: a
//! step landing at `z` with `|z| < 1` resumes on the circle at a point drawn
//! from harmonic measure seen from `z`, the image of a uniform point under
//! the disc automorphism sending `0` to `z`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::{PI, TAU};

use crate::geometry::{for_each_segment_cell, span_mask};
use crate::stats::LabRng;
use crate::topology::{next_set_bit, prev_set_bit, push_run_starts};

/// Rows kept below the floor so overshooting steps stay on the grid.
const BELOW: i64 = 8;

/// A point `(u, theta)` with `theta` unwrapped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylPoint {
    pub u: f64,
    pub theta: f64,
}

impl CylPoint {
    pub fn new(u: f64, theta: f64) -> Self {
        Self { u, theta }
    }
}

/// Where a cylinder walk stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkEnd {
    Outer,
    Inner,
    /// Reached the pause level; the walk may be resumed from its end point.
    Paused,
    Truncated,
}

/// Stopping levels for a cylinder walk. A level `b` above the walk is hit
/// once `u >= b - sigma/2`, one below once `u <= b + sigma/2`.
#[derive(Debug, Clone, Copy)]
pub struct CylStop {
    pub outer: Option<f64>,
    pub inner: Option<f64>,
    /// Return early, resumable, once `u` drops to this level.
    pub pause: Option<f64>,
    /// Resume on the unit circle after entering `u < 0`.
    pub reinject: bool,
    pub max_steps: u64,
}

#[inline]
fn fast_floor(x: f64) -> i64 {
    let t = x as i64;
    t - (x < t as f64) as i64
}

fn wrap_pi(a: f64) -> f64 {
    (a + PI).rem_euclid(TAU) - PI
}

/// Exit point on the unit circle of a Brownian path started at `(x, y)`
/// inside the unit disc.
pub fn harmonic_exit(rng: &mut LabRng, x: f64, y: f64) -> f64 {
    let phi = rng.random::<f64>() * TAU;
    let (zr, zi) = (phi.cos(), phi.sin());
    // (zeta + z) / (1 + conj(z) zeta)
    let (nr, ni) = (zr + x, zi + y);
    let (dr, di) = (1.0 + x * zr + y * zi, x * zi - y * zr);
    let d2 = dr * dr + di * di;
    let (wr, wi) = ((nr * dr + ni * di) / d2, (ni * dr - nr * di) / d2);
    wi.atan2(wr)
}

#[derive(Debug, Clone)]
pub struct CylinderGrid {
    cell: f64,
    /// Lowest `u` that can be marked.
    floor: f64,
    n_theta: usize,
    theta_cell: f64,
    words: usize,
    rows: usize,
    bits: Vec<u64>,
    /// Highest marked row, 0 when nothing is marked.
    top: usize,
    bottom: usize,
    /// Multiple of the column count subtracted from unwrapped columns.
    wrap_base: i64,
    stack: Vec<(u32, u32)>,
    seen: Vec<u64>,
}

impl CylinderGrid {
    /// Cells of height `cell` in `u`; the circumference is split into
    /// `round(2 pi / cell)` columns. Rows grow on demand past `u_hint`.
    pub fn new(cell: f64, u_hint: f64) -> Self {
        Self::with_floor(cell, 0.0, u_hint)
    }

    /// As `new`, with rows reaching down to `u = floor <= 0`.
    pub fn with_floor(cell: f64, floor: f64, u_hint: f64) -> Self {
        let floor = (floor.min(0.0) / cell).floor() * cell;
        let n_theta = ((TAU / cell).round() as usize).max(8);
        let words = n_theta.div_ceil(64);
        let rows = (((u_hint.max(0.0) - floor) / cell).ceil() as usize) + BELOW as usize + 4;
        Self {
            cell,
            floor,
            n_theta,
            theta_cell: TAU / n_theta as f64,
            words,
            rows,
            bits: vec![0; rows * words],
            top: 0,
            bottom: usize::MAX,
            wrap_base: 0,
            stack: Vec::new(),
            seen: Vec::new(),
        }
    }

    pub fn cell(&self) -> f64 {
        self.cell
    }

    pub fn columns(&self) -> usize {
        self.n_theta
    }

    pub fn clear(&mut self) {
        if self.top > 0 {
            self.bits[self.bottom * self.words..(self.top + 1) * self.words].fill(0);
        }
        self.top = 0;
        self.bottom = usize::MAX;
    }

    pub fn is_marked(&self, col: usize, row: usize) -> bool {
        row < self.rows && self.bits[row * self.words + col / 64] >> (col % 64) & 1 == 1
    }

    pub fn marked_count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Highest marked row, if any.
    pub fn top_row(&self) -> Option<usize> {
        (self.top > 0).then_some(self.top)
    }

    pub fn row_of(&self, u: f64) -> i64 {
        fast_floor((u - self.floor) / self.cell) + BELOW
    }

    fn to_cells(&self, p: CylPoint) -> (f64, f64) {
        (p.theta / self.theta_cell, (p.u - self.floor) / self.cell + BELOW as f64)
    }

    fn point_at_cells(&self, x: f64, y: f64) -> CylPoint {
        CylPoint::new((y - BELOW as f64) * self.cell + self.floor, x * self.theta_cell)
    }

    #[inline(always)]
    fn mark(&mut self, col: i64, row: i64) {
        // row 0 stays free as the seed row of the flood
        if row < 1 {
            return;
        }
        let row = row as usize;
        if row >= self.rows {
            let rows = (row + 1).max(self.rows + self.rows / 2);
            self.bits.resize(rows * self.words, 0);
            self.rows = rows;
        }
        let nt = self.n_theta as i64;
        let mut c = col - self.wrap_base;
        if !(0..nt).contains(&c) {
            self.wrap_base = col.div_euclid(nt) * nt;
            c = col - self.wrap_base;
        }
        let c = c as usize;
        self.bits[row * self.words + c / 64] |= 1 << (c % 64);
        self.top = self.top.max(row);
        self.bottom = self.bottom.min(row);
    }

    /// Mark the cells of a segment given in cell units, its first cell
    /// assumed marked already.
    #[inline(always)]
    fn mark_cells(&mut self, a: (f64, f64), b: (f64, f64), from: (i64, i64), to: (i64, i64)) {
        let (ex, ey) = (to.0 - from.0, to.1 - from.1);
        if ex.abs() <= 1 && ey.abs() <= 1 {
            // At most one corner cell in between: the side crossed first.
            // Off the diagonal the pick coincides with `from` or `to`, so it
            // is marked unconditionally.
            let bx = from.0.max(to.0) as f64;
            let by = from.1.max(to.1) as f64;
            let tx = (bx - a.0) * (b.1 - a.1);
            let ty = (by - a.1) * (b.0 - a.0);
            let x_first = (tx - ty) * (ex * ey) as f64 <= 0.0;
            let corner = if x_first { (to.0, from.1) } else { (from.0, to.1) };
            self.mark(corner.0, corner.1);
            self.mark(to.0, to.1);
        } else {
            for_each_segment_cell(a, b, |x, y| self.mark(x, y));
        }
    }

    /// Mark every cell met by the segment `a -> b`.
    pub fn mark_segment(&mut self, a: CylPoint, b: CylPoint) {
        let (ca, cb) = (self.to_cells(a), self.to_cells(b));
        let from = (fast_floor(ca.0), fast_floor(ca.1));
        let to = (fast_floor(cb.0), fast_floor(cb.1));
        self.mark(from.0, from.1);
        if from != to {
            self.mark_cells(ca, cb, from, to);
        }
    }

    pub fn mark_polyline(&mut self, pts: &[CylPoint]) {
        for w in pts.windows(2) {
            self.mark_segment(w[0], w[1]);
        }
        if let [p] = pts {
            self.mark_segment(*p, *p);
        }
    }

    /// Run a walk from `start` with per-coordinate step `sigma`, tracing it
    /// onto the grid when `MARK`. Both variants consume the generator
    /// identically, so an unmarked run can be replayed with marks.
    pub fn trace<const MARK: bool>(
        &mut self,
        rng: &mut LabRng,
        start: CylPoint,
        sigma: f64,
        stop: &CylStop,
    ) -> (WalkEnd, CylPoint, u64) {
        let (sx, sy) = (sigma / self.theta_cell, sigma / self.cell);
        let level = |u: f64| (u - self.floor) / self.cell + BELOW as f64;
        let outer = stop.outer.map_or(f64::INFINITY, |b| level(b - 0.5 * sigma));
        let inner = stop.inner.map_or(f64::NEG_INFINITY, |a| level(a + 0.5 * sigma));
        let pause = stop.pause.map_or(f64::NEG_INFINITY, |a| level(a + 0.5 * sigma));
        let zero = if stop.reinject { level(0.0) } else { f64::NEG_INFINITY };
        let (mut x, mut y) = self.to_cells(start);
        let mut cell = (fast_floor(x), fast_floor(y));
        if MARK {
            self.mark(cell.0, cell.1);
        }
        for step in 1..=stop.max_steps {
            let dx: f64 = StandardNormal.sample(rng);
            let dy: f64 = StandardNormal.sample(rng);
            let (mut nx, mut ny) = (x + sx * dx, y + sy * dy);
            let mut reinjected = false;
            if ny < zero && ny > inner {
                let t = (y - zero) / (y - ny);
                let cross = (x + t * (nx - x), zero);
                if MARK {
                    let to = (fast_floor(cross.0), fast_floor(cross.1));
                    if to != cell {
                        self.mark_cells((x, y), cross, cell, to);
                    }
                }
                let p = self.point_at_cells(nx, ny);
                let r = p.u.exp();
                let exit = harmonic_exit(rng, r * p.theta.cos(), r * p.theta.sin());
                let theta = cross.0 * self.theta_cell;
                nx = (theta + wrap_pi(exit - theta)) / self.theta_cell;
                ny = zero;
                reinjected = true;
            }
            let to = (fast_floor(nx), fast_floor(ny));
            if MARK {
                if reinjected {
                    self.mark(to.0, to.1);
                } else {
                    self.mark_cells((x, y), (nx, ny), cell, to);
                }
            }
            cell = to;
            x = nx;
            y = ny;
            if y >= outer {
                return (WalkEnd::Outer, self.point_at_cells(x, y), step);
            }
            if y <= inner {
                return (WalkEnd::Inner, self.point_at_cells(x, y), step);
            }
            if y <= pause {
                return (WalkEnd::Paused, self.point_at_cells(x, y), step);
            }
        }
        (WalkEnd::Truncated, self.point_at_cells(x, y), stop.max_steps)
    }

    /// `true` when the marked cells contain a loop around the cylinder:
    /// free cells below the lowest mark cannot reach the free row above the
    /// highest mark (free cells 4-connected, columns wrapping).
    pub fn disconnects(&mut self) -> bool {
        let Some(top) = self.top_row() else { return false };
        let (w, nt) = (self.words, self.n_theta);
        let (start, goal) = (self.bottom - 1, top + 1);
        self.seen.clear();
        self.seen.resize((goal + 1) * w, 0);
        self.stack.clear();
        self.stack.push((start as u32, 0));
        while let Some((y, x)) = self.stack.pop() {
            let (y, x) = (y as usize, x as usize);
            let (word, bit) = (y * w + x / 64, 1u64 << (x % 64));
            if (self.bits[word] | self.seen[word]) & bit != 0 {
                continue;
            }
            if y == goal {
                return false;
            }
            let occ = &self.bits[y * w..(y + 1) * w];
            let left = prev_set_bit(occ, x).map_or(0, |i| i + 1);
            let right = next_set_bit(occ, x, nt).map_or(nt - 1, |i| i - 1);
            let wraps_left = left == 0 && occ[(nt - 1) / 64] >> ((nt - 1) % 64) & 1 == 0;
            let wraps_right = right == nt - 1 && occ[0] & 1 == 0;
            let seen_row = &mut self.seen[y * w..(y + 1) * w];
            for c in left / 64..=right / 64 {
                let lo = if c == left / 64 { left % 64 } else { 0 };
                let hi = if c == right / 64 { right % 64 } else { 63 };
                seen_row[c] |= span_mask(lo, hi);
            }
            if wraps_left {
                self.stack.push((y as u32, (nt - 1) as u32));
            }
            if wraps_right {
                self.stack.push((y as u32, 0));
            }
            for ny in [y.wrapping_sub(1), y + 1] {
                if ny < start || ny > goal {
                    continue;
                }
                let r = ny * w..(ny + 1) * w;
                push_run_starts(&self.bits[r.clone()], &self.seen[r], ny, left, right, &mut self.stack);
            }
        }
        true
    }
}
