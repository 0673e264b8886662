use serde::{Deserialize, Serialize};

use super::{Point2, Rect};
use crate::error::{LabError, Result};

/// The base square `S0`, given by its bottom-left corner and sidelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseSquare {
    pub corner: Point2,
    pub side: f64,
}

impl BaseSquare {
    pub fn new(corner: Point2, side: f64) -> Result<Self> {
        if !(side > 0.0 && side.is_finite()) || !corner.is_finite() {
            return Err(LabError::InvalidGeometry(format!("base square side {side}")));
        }
        Ok(Self { corner, side })
    }

    /// Default `S0 = [0.5, 1.5] x [-0.5, 0.5]`.
    pub fn standard() -> Self {
        Self { corner: Point2::new(0.5, -0.5), side: 1.0 }
    }

    pub fn rect(&self) -> Rect {
        Rect {
            min: self.corner,
            max: Point2::new(self.corner.x + self.side, self.corner.y + self.side),
        }
    }

    pub fn contains(&self, p: Point2) -> bool {
        self.rect().contains(p)
    }

    /// Every level-`level` square whose closed cell contains `p` (up to four
    /// when `p` sits on dyadic grid lines).
    pub fn squares_containing(&self, level: u32, p: Point2, out: &mut Vec<DyadicSquare>) {
        out.clear();
        let count = 1u64 << level;
        let scale = count as f64 / self.side;
        let fx = (p.x - self.corner.x) * scale;
        let fy = (p.y - self.corner.y) * scale;
        if !(fx >= 0.0 && fy >= 0.0 && fx <= count as f64 && fy <= count as f64) {
            return;
        }
        let candidates = |f: f64| -> ([u64; 2], usize) {
            let i = f.floor() as u64;
            if f == i as f64 {
                match i {
                    0 => ([0, 0], 1),
                    i if i == count => ([i - 1, 0], 1),
                    i => ([i - 1, i], 2),
                }
            } else {
                ([i, 0], 1)
            }
        };
        let (is, ni) = candidates(fx);
        let (js, nj) = candidates(fy);
        for &i in &is[..ni] {
            for &j in &js[..nj] {
                out.push(DyadicSquare { level, i: i as u32, j: j as u32 });
            }
        }
    }
}

/// Dyadic subsquare `S^{i,j}_n` of the base square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicSquare {
    pub level: u32,
    pub i: u32,
    pub j: u32,
}

impl DyadicSquare {
    pub fn new(level: u32, i: u32, j: u32) -> Result<Self> {
        if level > 31 {
            return Err(LabError::InvalidArgument(format!("level {level} too deep")));
        }
        let count = 1u64 << level;
        if i as u64 >= count || j as u64 >= count {
            return Err(LabError::InvalidArgument(format!(
                "index ({i}, {j}) out of range for level {level}"
            )));
        }
        Ok(Self { level, i, j })
    }

    pub fn root() -> Self {
        Self { level: 0, i: 0, j: 0 }
    }

    pub fn side(&self, base: &BaseSquare) -> f64 {
        base.side / (1u64 << self.level) as f64
    }

    pub fn rect(&self, base: &BaseSquare) -> Rect {
        let s = self.side(base);
        let min = Point2::new(base.corner.x + self.i as f64 * s, base.corner.y + self.j as f64 * s);
        Rect { min, max: Point2::new(min.x + s, min.y + s) }
    }

    /// Barycentre of the square.
    pub fn center(&self, base: &BaseSquare) -> Point2 {
        let s = self.side(base);
        Point2::new(
            base.corner.x + (self.i as f64 + 0.5) * s,
            base.corner.y + (self.j as f64 + 0.5) * s,
        )
    }

    pub fn contains(&self, base: &BaseSquare, p: Point2) -> bool {
        self.rect(base).contains(p)
    }

    /// The four children, ordered `(2i,2j), (2i+1,2j), (2i,2j+1), (2i+1,2j+1)`.
    pub fn children(&self) -> [DyadicSquare; 4] {
        let (l, i, j) = (self.level + 1, 2 * self.i, 2 * self.j);
        [
            DyadicSquare { level: l, i, j },
            DyadicSquare { level: l, i: i + 1, j },
            DyadicSquare { level: l, i, j: j + 1 },
            DyadicSquare { level: l, i: i + 1, j: j + 1 },
        ]
    }

    pub fn parent(&self) -> Result<DyadicSquare> {
        if self.level == 0 {
            return Err(LabError::InvalidArgument("level-0 square has no parent".into()));
        }
        Ok(DyadicSquare { level: self.level - 1, i: self.i / 2, j: self.j / 2 })
    }

    /// Ancestor at `level <= self.level`.
    pub fn ancestor(&self, level: u32) -> DyadicSquare {
        let shift = self.level - level;
        DyadicSquare { level, i: self.i >> shift, j: self.j >> shift }
    }
}

/// Set distance between two same-level squares, in units of the base side.
fn set_distance(s: &DyadicSquare, t: &DyadicSquare) -> f64 {
    let side = 1.0 / (1u64 << s.level) as f64;
    let gap = |a: u32, b: u32| (a.abs_diff(b) as f64 - 1.0).max(0.0) * side;
    gap(s.i, t.i).hypot(gap(s.j, t.j))
}

/// Scale `m` with `dist(s, t)` in `[2^{-m-1}, 2^{-m})` (base-side units).
///
/// Squares closer than the finest bracket `2^{-n-1}` (including adjacent
/// ones) map to their own level `n`.
pub fn pair_scale(s: &DyadicSquare, t: &DyadicSquare) -> Result<i32> {
    if s.level != t.level {
        return Err(LabError::InvalidArgument("pair_scale needs same-level squares".into()));
    }
    if s == t {
        return Err(LabError::InvalidArgument("pair_scale needs distinct squares".into()));
    }
    let d = set_distance(s, t);
    let n = s.level as i32;
    if d < 0.5f64.powi(n + 1) {
        return Ok(n);
    }
    let mut m = n;
    while d >= 0.5f64.powi(m) {
        m -= 1;
    }
    Ok(m)
}
