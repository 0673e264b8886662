//! Connectivity of the free cells of an occupancy grid.
//!
//! Free cells connect through their four edge-neighbours, so occupied cells
//! block like an 8-connected barrier. The frame border stands in for
//! infinity: every free component touching it is unbounded.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{span_mask, Annulus, BitGrid, Disc, OccupancyGrid, Point2, Rect};

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(len: usize) -> Self {
        Self { parent: (0..len as u32).collect(), size: vec![1; len] }
    }

    pub fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    pub fn union(&mut self, a: u32, b: u32) -> u32 {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
        ra
    }
}

/// Component labels of the free cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionLabeling {
    pub width: usize,
    pub height: usize,
    /// Row-major; `None` for visited cells.
    pub labels: Vec<Option<u32>>,
    pub component_count: u32,
    /// Label of the component holding every border free cell, if any.
    pub unbounded: Option<u32>,
}

impl RegionLabeling {
    pub fn label(&self, x: usize, y: usize) -> Option<u32> {
        self.labels[y * self.width + x]
    }
}

pub fn label_components(grid: &OccupancyGrid) -> RegionLabeling {
    let (w, h) = (grid.width, grid.height);
    let infinity = (w * h) as u32;
    let mut uf = UnionFind::new(w * h + 1);
    let free = |x: usize, y: usize| !grid.is_visited(x, y);
    let mut touches_border = false;
    for y in 0..h {
        for x in 0..w {
            if !free(x, y) {
                continue;
            }
            let i = (y * w + x) as u32;
            if x > 0 && free(x - 1, y) {
                uf.union(i, i - 1);
            }
            if y > 0 && free(x, y - 1) {
                uf.union(i, i - w as u32);
            }
            if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                uf.union(i, infinity);
                touches_border = true;
            }
        }
    }
    let mut compact = vec![u32::MAX; w * h + 1];
    let mut next = 0u32;
    let mut labels = vec![None; w * h];
    for y in 0..h {
        for x in 0..w {
            if free(x, y) {
                let root = uf.find((y * w + x) as u32) as usize;
                if compact[root] == u32::MAX {
                    compact[root] = next;
                    next += 1;
                }
                labels[y * w + x] = Some(compact[root]);
            }
        }
    }
    let unbounded = touches_border.then(|| compact[uf.find(infinity) as usize]);
    RegionLabeling { width: w, height: h, labels, component_count: next, unbounded }
}

pub(crate) fn prev_set_bit(row: &[u64], x: usize) -> Option<usize> {
    let mut w = x / 64;
    let b = x % 64;
    let mut word = if b == 0 { 0 } else { row[w] & ((1u64 << b) - 1) };
    loop {
        if word != 0 {
            return Some(w * 64 + 63 - word.leading_zeros() as usize);
        }
        if w == 0 {
            return None;
        }
        w -= 1;
        word = row[w];
    }
}

pub(crate) fn next_set_bit(row: &[u64], x: usize, width: usize) -> Option<usize> {
    let start = x + 1;
    if start >= width {
        return None;
    }
    let mut w = start / 64;
    let mut word = row[w] & !((1u64 << (start % 64)) - 1);
    loop {
        if word != 0 {
            let i = w * 64 + word.trailing_zeros() as usize;
            return (i < width).then_some(i);
        }
        w += 1;
        if w == row.len() {
            return None;
        }
        word = row[w];
    }
}

/// Free cells 4-connected to the frame border, by span filling.
pub fn exterior_mask(occ: &BitGrid) -> BitGrid {
    let (w, h) = (occ.width(), occ.height());
    let mut reached = BitGrid::new(w, h);
    if w == 0 || h == 0 {
        return reached;
    }
    let mut stack: Vec<(u32, u32)> = Vec::new();
    for x in 0..w {
        stack.push((0, x as u32));
        stack.push(((h - 1) as u32, x as u32));
    }
    for y in 0..h {
        stack.push((y as u32, 0));
        stack.push((y as u32, (w - 1) as u32));
    }
    while let Some((y, x)) = stack.pop() {
        let (y, x) = (y as usize, x as usize);
        if occ.get(x, y) || reached.get(x, y) {
            continue;
        }
        let row = occ.row(y);
        let left = prev_set_bit(row, x).map_or(0, |i| i + 1);
        let right = next_set_bit(row, x, w).map_or(w - 1, |i| i - 1);
        reached.set_span(y, left, right);
        for ny in [y.wrapping_sub(1), y + 1] {
            if ny >= h {
                continue;
            }
            push_run_starts(occ.row(ny), reached.row(ny), ny, left, right, &mut stack);
        }
    }
    reached
}

pub(crate) fn push_run_starts(occ: &[u64], reached: &[u64], y: usize, left: usize, right: usize, stack: &mut Vec<(u32, u32)>) {
    let (wa, wb) = (left / 64, right / 64);
    let mut carry = 0u64;
    for wi in wa..=wb {
        let lo = if wi == wa { left % 64 } else { 0 };
        let hi = if wi == wb { right % 64 } else { 63 };
        let cand = !(occ[wi] | reached[wi]) & span_mask(lo, hi);
        let mut starts = cand & !((cand << 1) | carry);
        carry = cand >> 63;
        while starts != 0 {
            let b = starts.trailing_zeros() as usize;
            starts &= starts - 1;
            stack.push((y as u32, (wi * 64 + b) as u32));
        }
    }
}

/// The unbounded free region of a grid, reusable across many queries.
#[derive(Debug, Clone)]
pub struct ExteriorMap<'a> {
    grid: &'a OccupancyGrid,
    mask: BitGrid,
}

impl<'a> ExteriorMap<'a> {
    pub fn new(grid: &'a OccupancyGrid) -> Self {
        Self { grid, mask: exterior_mask(&grid.cells) }
    }

    pub fn grid(&self) -> &OccupancyGrid {
        self.grid
    }

    pub fn mask(&self) -> &BitGrid {
        &self.mask
    }

    #[inline]
    pub fn is_exterior(&self, x: usize, y: usize) -> bool {
        self.mask.get(x, y)
    }

    /// `true` when `target` is cut off from infinity: no free cell in or
    /// 4-adjacent to the disc's boundary ring (cells whose centre lies within
    /// one cell of the circle) is exterior.
    pub fn disconnects(&self, target: &Disc) -> Result<bool> {
        disc_cut_off(self.grid, &self.mask, target)
    }

    /// A point is disconnected when its cell is visited or enclosed.
    pub fn point_disconnected(&self, p: Point2) -> Result<bool> {
        let (x, y) = self
            .grid
            .cell_of(p)
            .ok_or(LabError::TargetOutsideFrame { cx: p.x, cy: p.y, radius: 0.0 })?;
        Ok(!self.is_exterior(x, y))
    }

    /// Visited cells with an exterior 4-neighbour, or lying on the frame edge.
    pub fn frontier(&self) -> BitGrid {
        let occ = &self.grid.cells;
        let (w, h) = (occ.width(), occ.height());
        let nw = occ.words_per_row();
        let mut out = BitGrid::new(w, h);
        let last_bits = if w % 64 == 0 { u64::MAX } else { (1u64 << (w % 64)) - 1 };
        for y in 0..h {
            let ext = self.mask.row(y);
            let up = (y + 1 < h).then(|| self.mask.row(y + 1));
            let down = (y > 0).then(|| self.mask.row(y - 1));
            let edge_row = y == 0 || y + 1 == h;
            let occ_row = occ.row(y);
            let out_row = out.row_mut(y);
            for i in 0..nw {
                let left_carry = if i > 0 { ext[i - 1] >> 63 } else { 0 };
                let right_carry = if i + 1 < nw { ext[i + 1] << 63 } else { 0 };
                let mut near = (ext[i] << 1) | left_carry | (ext[i] >> 1) | right_carry;
                if let Some(u) = up {
                    near |= u[i];
                }
                if let Some(d) = down {
                    near |= d[i];
                }
                if edge_row {
                    near = u64::MAX;
                }
                if i == 0 {
                    near |= 1;
                }
                if i + 1 == nw {
                    let top = if w % 64 == 0 { 63 } else { w % 64 - 1 };
                    near |= 1u64 << top;
                }
                let valid = if i + 1 == nw { last_bits } else { u64::MAX };
                out_row[i] = occ_row[i] & near & valid;
            }
        }
        out
    }
}

/// `disconnects` against a precomputed exterior mask of `grid`.
pub fn disc_cut_off(g: &OccupancyGrid, exterior: &BitGrid, target: &Disc) -> Result<bool> {
    let cell = g.cell_size;
    let reach = target.radius + 2.0 * cell;
    let frame = g.frame();
    let needed = Rect::centered(target.center, reach)?;
    if !(frame.contains(needed.min) && frame.contains(needed.max)) {
        return Err(LabError::TargetOutsideFrame {
            cx: target.center.x,
            cy: target.center.y,
            radius: target.radius,
        });
    }
    let (fx0, fy0) = g.to_cell_coords(needed.min);
    let (fx1, fy1) = g.to_cell_coords(needed.max);
    let (x0, y0) = (fx0.floor() as usize, fy0.floor() as usize);
    let x1 = (fx1.floor() as usize).min(g.width - 1);
    let y1 = (fy1.floor() as usize).min(g.height - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let d = g.cell_center(x, y).dist(target.center);
            if (d - target.radius).abs() > cell {
                continue;
            }
            if exterior.get(x, y) {
                return Ok(false);
            }
            let near = [
                (x.wrapping_sub(1), y),
                (x + 1, y),
                (x, y.wrapping_sub(1)),
                (x, y + 1),
            ];
            if near.iter().any(|&(nx, ny)| nx < g.width && ny < g.height && exterior.get(nx, ny)) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

pub fn disconnects(grid: &OccupancyGrid, target: &Disc) -> Result<bool> {
    ExteriorMap::new(grid).disconnects(target)
}

/// Visited cells adjacent to the unbounded free component.
pub fn frontier_cells(grid: &OccupancyGrid) -> BitGrid {
    ExteriorMap::new(grid).frontier()
}

/// A curve in an alpha-nice configuration check; the first and last points
/// are its designated endpoints.
#[derive(Debug, Clone, Copy)]
pub struct Curve<'a> {
    pub points: &'a [Point2],
    /// Excursions between the annulus circles skip the containment condition.
    pub excursion: bool,
}

/// Containment condition: every point outside the closed annulus lies in
/// `B(start, alpha |start - centre|)`.
pub fn alpha_containment(curve: &Curve<'_>, annulus: &Annulus, alpha: f64) -> bool {
    if curve.excursion {
        return true;
    }
    let Some(&start) = curve.points.first() else { return true };
    let radius = alpha * start.dist(annulus.center);
    curve
        .points
        .iter()
        .filter(|p| !annulus.contains(**p))
        .all(|p| p.dist(start) < radius)
}

/// Whether the curves form an alpha-nice configuration, with the union of
/// curves and endpoint discs rasterized at `cell_size`.
pub fn alpha_nice(curves: &[Curve<'_>], annulus: &Annulus, alpha: f64, cell_size: f64) -> Result<bool> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(LabError::InvalidArgument(format!("alpha {alpha} not in (0,1)")));
    }
    if curves.iter().any(|c| c.points.is_empty()) {
        return Err(LabError::InvalidArgument("empty curve".into()));
    }
    if !curves.iter().all(|c| alpha_containment(c, annulus, alpha)) {
        return Ok(false);
    }
    let c = annulus.center;
    let mut discs = Vec::with_capacity(2 * curves.len());
    for curve in curves {
        for p in [curve.points[0], *curve.points.last().unwrap()] {
            discs.push((p, alpha * p.dist(c)));
        }
    }
    let everything = curves
        .iter()
        .flat_map(|cv| cv.points.iter().copied())
        .chain(discs.iter().flat_map(|&(p, r)| [p - Point2::new(r, r), p + Point2::new(r, r)]))
        .chain(std::iter::once(c));
    let bounds = Rect::bounding(everything).expect("non-empty");
    let extent = bounds.width().max(bounds.height()).max(annulus.r_outer());
    let frame = bounds.expand(0.25 * extent + 2.0 * cell_size);
    let mut grid = OccupancyGrid::new(frame, cell_size)?;
    for curve in curves {
        grid.mark_polyline(curve.points);
    }
    for &(p, r) in &discs {
        grid.mark_filled_disc(p, r);
    }
    Ok(!ExteriorMap::new(&grid).point_disconnected(c)?)
}
