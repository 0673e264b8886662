//! Brute-force oracles shared by the integration tests and the acceptance
//! run.
#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};
use std::f64::consts::TAU;

use frontier_core::geometry::{Disc, OccupancyGrid, Point2, Rect};
use frontier_core::exponents::{run_batch, Mode, TrialSpec};
use frontier_core::randwalk::{extract_excursion, reverse, sample_path, PathSample, Shape, StopRule, Target};
use frontier_core::stats::rng_from_seed;
use frontier_core::topology::{disconnects, frontier_cells, label_components};
use rand::Rng;

pub const N: usize = 64;

pub fn grid_64(cell: f64) -> OccupancyGrid {
    let half = N as f64 * cell / 2.0;
    OccupancyGrid::new(Rect::centered(Point2::ORIGIN, half).unwrap(), cell).unwrap()
}

pub fn random_grid(seed: u64) -> OccupancyGrid {
    let mut rng = rng_from_seed(seed);
    let mut g = grid_64(1.0);
    let density = 0.3 + 0.35 * rng.random::<f64>();
    for y in 0..N {
        for x in 0..N {
            if rng.random::<f64>() < density {
                g.mark_cell(x, y);
            }
        }
    }
    g
}

fn nbrs4(x: usize, y: usize) -> [(usize, usize); 4] {
    [(x.wrapping_sub(1), y), (x + 1, y), (x, y.wrapping_sub(1)), (x, y + 1)]
}

/// Free cells reachable from a free border cell.
pub fn bfs_exterior(g: &OccupancyGrid) -> Vec<bool> {
    let (w, h) = (g.width, g.height);
    let mut ext = vec![false; w * h];
    let mut q = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if (x == 0 || y == 0 || x + 1 == w || y + 1 == h) && !g.is_visited(x, y) {
                ext[y * w + x] = true;
                q.push_back((x, y));
            }
        }
    }
    while let Some((x, y)) = q.pop_front() {
        for (nx, ny) in nbrs4(x, y) {
            if nx < w && ny < h && !ext[ny * w + nx] && !g.is_visited(nx, ny) {
                ext[ny * w + nx] = true;
                q.push_back((nx, ny));
            }
        }
    }
    ext
}

/// Components by breadth-first search, one flood per unlabeled free cell.
/// The frame border stands for infinity, so every free cell reachable from
/// it forms a single component.
pub fn bfs_components(g: &OccupancyGrid) -> Vec<Option<usize>> {
    let (w, h) = (g.width, g.height);
    let mut comp: Vec<Option<usize>> = bfs_exterior(g).iter().map(|&e| e.then_some(0)).collect();
    let mut next = 1;
    for start in 0..w * h {
        if comp[start].is_some() || g.is_visited(start % w, start / w) {
            continue;
        }
        comp[start] = Some(next);
        let mut q = VecDeque::from([start]);
        while let Some(i) = q.pop_front() {
            for (nx, ny) in nbrs4(i % w, i / w) {
                if nx < w && ny < h && comp[ny * w + nx].is_none() && !g.is_visited(nx, ny) {
                    comp[ny * w + nx] = Some(next);
                    q.push_back(ny * w + nx);
                }
            }
        }
        next += 1;
    }
    comp
}

pub fn bfs_disconnects(g: &OccupancyGrid, d: &Disc) -> bool {
    let ext = bfs_exterior(g);
    let (w, h) = (g.width, g.height);
    for y in 0..h {
        for x in 0..w {
            if (g.cell_center(x, y).dist(d.center) - d.radius).abs() > g.cell_size {
                continue;
            }
            let mut cells = nbrs4(x, y).to_vec();
            cells.push((x, y));
            if cells.iter().any(|&(cx, cy)| cx < w && cy < h && ext[cy * w + cx]) {
                return false;
            }
        }
    }
    true
}

pub fn same_partition(a: &[Option<u32>], b: &[Option<usize>]) -> bool {
    let mut ab = HashMap::new();
    let mut ba = HashMap::new();
    a.iter().zip(b).all(|(x, y)| match (x, y) {
        (None, None) => true,
        (Some(x), Some(y)) => *ab.entry(*x).or_insert(*y) == *y && *ba.entry(*y).or_insert(*x) == *x,
        _ => false,
    })
}

/// Labels, unbounded component and disconnection of a random disc on grid
/// `seed`, each against the oracle. Returns the disconnection answer.
pub fn check_grid(seed: u64) -> Result<bool, String> {
    let g = random_grid(seed);
    let lab = label_components(&g);
    if !same_partition(&lab.labels, &bfs_components(&g)) {
        return Err(format!("partition differs for grid {seed}"));
    }
    for (i, e) in bfs_exterior(&g).iter().enumerate() {
        let unbounded = lab.unbounded.is_some() && lab.labels[i] == lab.unbounded;
        if *e != unbounded {
            return Err(format!("unbounded component differs for grid {seed}"));
        }
    }
    let mut rng = rng_from_seed(seed ^ 0xabcdef);
    let r = 3.0 + 10.0 * rng.random::<f64>();
    let c = Point2::new(rng.random::<f64>() * 20.0 - 10.0, rng.random::<f64>() * 20.0 - 10.0);
    let d = Disc::new(c, r).unwrap();
    let got = disconnects(&g, &d).map_err(|e| e.to_string())?;
    if got != bfs_disconnects(&g, &d) {
        return Err(format!("disconnects differs for grid {seed}"));
    }
    Ok(got)
}

/// Hit of the origin-centred circle of radius `r` at index `i`, spelled out.
fn on_circle(path: &PathSample, r: f64, i: usize) -> bool {
    let tol = path.step_scale / 2.0;
    let d = path.points[i].norm() - r;
    d.abs() <= tol || (i > 0 && (path.points[i - 1].norm() >= r) != (d >= 0.0))
}

/// Random fixture path with rough steps around the circles of radius 1 and 2.
pub fn excursion_fixture(seed: u64) -> (PathSample, f64, f64) {
    let mut rng = rng_from_seed(seed);
    let step = 0.05 + 0.2 * rng.random::<f64>();
    let mut pts = vec![Point2::polar(rng.random::<f64>() * 2.5, rng.random::<f64>() * TAU)];
    for _ in 0..rng.random_range(5..200) {
        let last = *pts.last().unwrap();
        let jump = Point2::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0);
        pts.push(last + jump * (3.0 * step));
    }
    let (r1, r2) = if seed.is_multiple_of(2) { (1.0, 2.0) } else { (2.0, 1.0) };
    (PathSample::from_points(pts, step, seed), r1, r2)
}

/// extract_excursion against a scan of every index for the first end hit
/// and the last start visit before it. Returns whether an excursion exists.
pub fn check_excursion(seed: u64) -> Result<bool, String> {
    let (path, r1, r2) = excursion_fixture(seed);
    let end = (1..path.len()).find(|&i| on_circle(&path, r2, i));
    let start = end.and_then(|e| (0..e).rfind(|&i| on_circle(&path, r1, i)));
    match (extract_excursion(&path, Point2::ORIGIN, r1, r2), start, end) {
        (Ok(e), Some(s), Some(t)) if e.source == (s, t) => {
            e.check_invariants(3.0 * path.step_scale * 2f64.sqrt()).map_err(|err| format!("fixture {seed}: {err}"))?;
            Ok(true)
        }
        (Err(_), None, _) => Ok(false),
        (got, s, t) => Err(format!("fixture {seed}: {:?} vs scan {s:?} {t:?}", got.map(|e| e.source))),
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Marking more cells never undoes a disconnection.
pub fn prop_monotone(seed: u64, extra: &[(usize, usize)]) -> Result<(), String> {
    let mut g = random_grid(seed);
    let d = Disc::new(Point2::new(0.0, 0.0), 8.0).unwrap();
    let before = disconnects(&g, &d).map_err(|e| e.to_string())?;
    for &(x, y) in extra {
        g.mark_cell(x, y);
        let now = disconnects(&g, &d).map_err(|e| e.to_string())?;
        ensure(!before || now, || format!("grid {seed}: marking ({x}, {y}) reconnected the disc"))?;
    }
    Ok(())
}

/// Frontier cells are visited and have a 4-neighbour in the unbounded
/// component or off the frame.
pub fn prop_frontier(seed: u64) -> Result<(), String> {
    let g = random_grid(seed);
    let f = frontier_cells(&g);
    let ext = bfs_exterior(&g);
    for (x, y) in f.iter_ones() {
        ensure(g.is_visited(x, y), || format!("grid {seed}: ({x}, {y}) not visited"))?;
        let touches = [(x.wrapping_sub(1), y), (x + 1, y), (x, y.wrapping_sub(1)), (x, y + 1)]
            .iter()
            .any(|&(nx, ny)| nx >= g.width || ny >= g.height || ext[ny * g.width + nx]);
        ensure(touches, || format!("grid {seed}: ({x}, {y}) does not touch the exterior"))?;
    }
    Ok(())
}

/// Reversing twice is the identity and reversal keeps the point multiset.
pub fn prop_reverse(seed: u64) -> Result<(), String> {
    let step = 1.0 / 16.0;
    let rule = StopRule::new(vec![Target::new("out", Shape::circle(Point2::ORIGIN, 2.0))], 1 << 22).unwrap();
    let p = sample_path(seed, Point2::ORIGIN, step, &rule).map_err(|e| e.to_string())?;
    let e = extract_excursion(&p, Point2::ORIGIN, 1.0, 2.0).map_err(|e| e.to_string())?;
    let r = reverse(&e);
    ensure(reverse(&r) == e, || format!("seed {seed}: reverse is not an involution"))?;
    r.check_invariants(step * 6.0).map_err(|err| format!("seed {seed}: {err}"))?;
    let key = |q: &Point2| (q.x.to_bits(), q.y.to_bits());
    let mut a: Vec<_> = e.points.iter().map(key).collect();
    let mut b: Vec<_> = r.points.iter().map(key).collect();
    a.sort_unstable();
    b.sort_unstable();
    ensure(a == b, || format!("seed {seed}: points changed"))
}

/// Successes for k = 1..=4 on shared walks.
pub fn successes_for_k(n: f64, mode: fn(u32) -> Mode, samples: u64, seed: u64) -> Vec<u64> {
    (1..=4).map(|k| run_batch(&TrialSpec::new(k, n, mode(k), samples, seed)).unwrap().successes).collect()
}

/// Adding a path to a paired batch never adds a success.
pub fn prop_paired_k(seed: u64, n: f64) -> Result<(), String> {
    let s = successes_for_k(n, |_| Mode::Plain, 40, seed);
    ensure(s.windows(2).all(|w| w[1] <= w[0]), || format!("seed {seed}, n {n}: {s:?}"))
}
