//! The experiments behind each subcommand. Every command is a pure function
//! of its [`Config`], so a stored record can be replayed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::time::Instant;

use frontier_core::census::{
    box_counts, box_dimension, pair_table, sample_census_path, BoxFit, CensusConfig, PairOrder, PairRow, PathCensus,
};
use frontier_core::error::LabError;
use frontier_core::exponents::{
    dimension_targets, fit_exponent, poly_diagnostic_from, run_batch, xi, DimensionTargets, DisconnectionBatch,
    ExponentFit, Mode, PolyDiagnostic,
};
use frontier_core::geometry::{BaseSquare, DyadicSquare, OccupancyGrid, Point2, Rect};
use frontier_core::randwalk::{sample_path, Shape, StopRule, Target};
use frontier_core::stats::derive_seed;
use frontier_core::topology::frontier_cells;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{Config, FrontierConfig};
use crate::error::{CliError, Result};
use crate::record::{Command, Resolution, RunRecord};
use crate::svg;

const CENSUS_STREAM: u64 = 0xce05;
const FRONTIER_STREAM: u64 = 0xf207;

/// Everything a command produces.
pub struct Outcome {
    pub results: Value,
    pub resolution: Resolution,
    pub csv: Vec<u8>,
    pub svg: Option<String>,
    pub summary: String,
}

pub fn execute(command: Command, cfg: &Config) -> Result<Outcome> {
    match command {
        Command::Xi => Ok(xi_outcome(&cmd_xi()?)?),
        Command::Disconnect => disconnect_outcome(&cmd_disconnect(cfg)?),
        Command::Census => census_outcome(&cmd_census(cfg)?),
        Command::Frontier => {
            let (res, svg) = cmd_frontier(cfg)?;
            let mut out = frontier_outcome(&res)?;
            out.svg = Some(svg);
            Ok(out)
        }
    }
}

/// Run and wrap in a record stamped with the wall-clock time.
pub fn run(command: Command, cfg: &Config) -> Result<(RunRecord, Outcome)> {
    let t = Instant::now();
    let out = execute(command, cfg)?;
    let record = RunRecord::new(command, cfg, out.resolution, out.results.clone(), t.elapsed().as_secs_f64())?;
    Ok((record, out))
}

/// Re-run a stored record and compare the payloads byte for byte.
pub fn replay(record: &RunRecord) -> Result<()> {
    let out = execute(record.command, &record.config)?;
    if serde_json::to_string(&out.results)? == record.results_text()? {
        Ok(())
    } else {
        Err(CliError::ReplayMismatch(record.run_id.clone()))
    }
}

fn csv_of<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| CliError::io("csv buffer", e.into_error()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiRow {
    pub k: u32,
    pub xi: f64,
    /// `2 - xi(k)`
    pub dimension: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiTable {
    pub rows: Vec<XiRow>,
    pub targets: DimensionTargets,
}

pub fn cmd_xi() -> Result<XiTable> {
    let rows = (1..=8)
        .map(|k| xi(k).map(|x| XiRow { k, xi: x.value, dimension: 2.0 - x.value }))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(XiTable { rows, targets: dimension_targets() })
}

fn xi_outcome(t: &XiTable) -> Result<Outcome> {
    let mut s = String::from("k   xi(k)      2-xi(k)\n");
    for r in &t.rows {
        let _ = writeln!(s, "{}   {:.6}   {:.6}", r.k, r.xi, r.dimension);
    }
    let d = &t.targets;
    let _ = writeln!(s, "frontier {:.6}  double-on-frontier {:.6}  pioneer {:.6}", d.frontier, d.double_on_frontier, d.pioneer);
    let _ = writeln!(s, "pioneer-double {:.6}  pioneer-triple {:.6}", d.pioneer_double, d.pioneer_triple);
    Ok(Outcome {
        results: serde_json::to_value(t)?,
        resolution: Resolution { step_scale: None, cell_size: None },
        csv: csv_of(&t.rows)?,
        svg: None,
        summary: s,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisconnectResults {
    pub k: u32,
    pub mode: String,
    pub batches: Vec<DisconnectionBatch>,
    pub fit: Option<ExponentFit>,
    /// 95% normal interval for `xi`.
    pub ci95: Option<(f64, f64)>,
    pub fit_error: Option<String>,
    pub poly: Option<PolyDiagnostic>,
}

pub fn cmd_disconnect(cfg: &Config) -> Result<DisconnectResults> {
    let d = &cfg.disconnect;
    let batches = d
        .levels()?
        .into_iter()
        .map(|n| run_batch(&d.spec(n, cfg.seed)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let (fit, fit_error) = match fit_exponent(&batches, d.correction()) {
        Ok(f) => (Some(f), None),
        Err(e @ (LabError::InsufficientLevels { .. } | LabError::Degenerate(_))) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let ci95 = fit.as_ref().map(|f| (f.xi_hat - 1.96 * f.se, f.xi_hat + 1.96 * f.se));
    let poly = match d.mode {
        Mode::Conditioned => Some(poly_diagnostic_from(&batches, d.ratio_bound)?),
        _ => None,
    };
    Ok(DisconnectResults { k: d.k, mode: d.mode.to_string(), batches, fit, ci95, fit_error, poly })
}

#[derive(Serialize)]
struct BatchRow {
    n: f64,
    trials: u64,
    successes: u64,
    p_hat: f64,
    ci_low: f64,
    ci_high: f64,
    rejected: u64,
    dropped: u64,
    acceptance: Option<f64>,
}

fn disconnect_outcome(r: &DisconnectResults) -> Result<Outcome> {
    let rows: Vec<BatchRow> = r
        .batches
        .iter()
        .map(|b| BatchRow {
            n: b.spec.n,
            trials: b.trials,
            successes: b.successes,
            p_hat: b.p_hat,
            ci_low: b.ci_low,
            ci_high: b.ci_high,
            rejected: b.rejected,
            dropped: b.dropped,
            acceptance: b.acceptance_rate(),
        })
        .collect();
    let mut s = format!("k = {}, mode {}\n", r.k, r.mode);
    for b in &rows {
        let _ = writeln!(s, "n = {}  p = {:.5} [{:.5}, {:.5}]  ({} / {})", b.n, b.p_hat, b.ci_low, b.ci_high, b.successes, b.trials);
    }
    match (&r.fit, r.ci95) {
        (Some(f), Some((lo, hi))) => {
            let _ = writeln!(s, "xi_hat = {:.4} +- {:.4}  (95%: {lo:.4} .. {hi:.4}); xi({}) = {:.4}", f.xi_hat, f.se, r.k, xi(r.k)?.value);
        }
        _ => {
            let _ = writeln!(s, "no fit: {}", r.fit_error.as_deref().unwrap_or("-"));
        }
    }
    if let Some(p) = &r.poly {
        for row in &p.rows {
            let _ = writeln!(s, "n = {}  r(n) = {:.4} [{:.4}, {:.4}]  acceptance {:?}", row.n, row.ratio, row.ratio_low, row.ratio_high, row.acceptance);
        }
        let _ = writeln!(s, "max/min ratio {:.3} (bound {})", p.max_over_min, p.bound);
    }
    let spec = r.batches.first().map(|b| &b.spec);
    Ok(Outcome {
        results: serde_json::to_value(r)?,
        resolution: Resolution { step_scale: spec.map(|s| s.step_scale), cell_size: spec.map(|s| s.cell_size) },
        csv: csv_of(&rows)?,
        svg: None,
        summary: s,
    })
}

/// What one path contributes to a census run.
#[derive(Debug, Clone, Default)]
struct PathSummary {
    counts: Vec<usize>,
    triple: Vec<usize>,
    nesting: u64,
    pair_level_good: BTreeSet<DyadicSquare>,
    orders: BTreeMap<PairOrder, u64>,
    classified: u64,
    unclassified: u64,
}

/// Pairs classified per path, nearest pairs first.
const PAIRS_PER_PATH: usize = 200;

fn census_path(seed: u64, cfg: &CensusConfig, pair_level: u32) -> Result<PathSummary> {
    let path = sample_census_path(seed, cfg)?;
    let pc = PathCensus::new(&path, cfg)?;
    let sweep = pc.sweep()?;
    let triple = pc.triple_sweep()?;
    let good = sweep.levels.iter().find(|l| l.level == pair_level).map(|l| l.good_squares.clone()).unwrap_or_default();
    // pairs close enough that every excursion of either square crosses the
    // circle around their midpoint
    let limit = cfg.delta - 2.0 * std::f64::consts::SQRT_2 * cfg.side(pair_level);
    let v: Vec<_> = good.iter().collect();
    let mut close: Vec<(f64, &DyadicSquare, &DyadicSquare)> = Vec::new();
    for (a, s) in v.iter().enumerate() {
        for t in &v[a + 1..] {
            let d = s.center(&cfg.base).dist(t.center(&cfg.base));
            if d < limit {
                close.push((d, s, t));
            }
        }
    }
    close.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| (a.1, a.2).cmp(&(b.1, b.2))));
    let mut summary = PathSummary {
        counts: sweep.levels.iter().map(|l| l.count).collect(),
        triple: triple.iter().map(|l| l.count).collect(),
        nesting: sweep.nesting_violations,
        ..PathSummary::default()
    };
    for (_, s, t) in close.into_iter().take(PAIRS_PER_PATH) {
        let orders = pc.classify_pair_order(s, t)?;
        if orders.is_empty() {
            summary.unclassified += 1;
        } else {
            summary.classified += 1;
        }
        for o in orders {
            *summary.orders.entry(o).or_default() += 1;
        }
    }
    summary.pair_level_good = good;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: u32,
    pub mean_count: f64,
    pub sd_count: f64,
    pub mean_triple: f64,
    pub paths_with_triple: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusResults {
    pub census: CensusConfig,
    pub paths: u64,
    pub levels: Vec<LevelSummary>,
    pub fit: Option<BoxFit>,
    pub fit_range: (u32, u32),
    pub slope_in_band: bool,
    pub nesting_violations: u64,
    /// Mean triple counts non-increasing from `n_min + 2` on.
    pub triple_non_increasing: bool,
    pub triple_zero_at_finest: bool,
    pub pair_level: u32,
    /// Close good pairs classified, with how often each order occurs.
    pub pair_orders: BTreeMap<PairOrder, u64>,
    pub pairs_classified: u64,
    pub pairs_unclassified: u64,
    pub pair_table: Vec<PairRow>,
}

pub fn cmd_census(cfg: &Config) -> Result<CensusResults> {
    let c = &cfg.census;
    let census = c.census_config()?;
    let pair_level = c.pair_level.unwrap_or(census.n_min);
    if pair_level < census.n_min || pair_level > census.n_max {
        return Err(CliError::Config(format!("pair level {pair_level} outside the census levels")));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(c.parallel_paths.min(rayon::current_num_threads()))
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let summaries = pool.install(|| {
        (0..c.paths)
            .into_par_iter()
            .map(|i| census_path(derive_seed(cfg.seed, CENSUS_STREAM, i), &census, pair_level))
            .collect::<Result<Vec<_>>>()
    })?;
    let paths = c.paths as f64;
    let levels: Vec<LevelSummary> = (census.n_min..=census.n_max)
        .enumerate()
        .map(|(i, level)| {
            let counts: Vec<f64> = summaries.iter().map(|s| s.counts[i] as f64).collect();
            let mean = counts.iter().sum::<f64>() / paths;
            let var = counts.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (paths - 1.0).max(1.0);
            LevelSummary {
                level,
                mean_count: mean,
                sd_count: var.sqrt(),
                mean_triple: summaries.iter().map(|s| s.triple[i] as f64).sum::<f64>() / paths,
                paths_with_triple: summaries.iter().filter(|s| s.triple[i] > 0).count() as u64,
            }
        })
        .collect();
    let means: BTreeMap<u32, f64> = levels.iter().map(|l| (l.level, l.mean_count)).collect();
    let fit = match box_dimension(&means, c.levels) {
        Ok(f) => Some(f),
        Err(LabError::InsufficientLevels { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let slope_in_band = fit.as_ref().is_some_and(|f| f.slope >= c.slope_band.0 && f.slope <= c.slope_band.1);
    let tail: Vec<f64> = levels.iter().filter(|l| l.level >= census.n_min + 2).map(|l| l.mean_triple).collect();
    let mut orders = BTreeMap::new();
    for s in &summaries {
        for (o, n) in &s.orders {
            *orders.entry(*o).or_default() += n;
        }
    }
    let sets: Vec<&BTreeSet<DyadicSquare>> = summaries.iter().map(|s| &s.pair_level_good).collect();
    Ok(CensusResults {
        census,
        paths: c.paths,
        fit,
        fit_range: c.levels,
        slope_in_band,
        nesting_violations: summaries.iter().map(|s| s.nesting).sum(),
        triple_non_increasing: tail.windows(2).all(|w| w[1] <= w[0]),
        triple_zero_at_finest: levels.last().is_some_and(|l| l.mean_triple == 0.0),
        levels,
        pair_level,
        pair_orders: orders,
        pairs_classified: summaries.iter().map(|s| s.classified).sum(),
        pairs_unclassified: summaries.iter().map(|s| s.unclassified).sum(),
        pair_table: pair_table(&sets, pair_level, xi(4)?.value)?,
    })
}

fn census_outcome(r: &CensusResults) -> Result<Outcome> {
    let mut s = format!("{} paths, delta {}, levels {}..{}\n", r.paths, r.census.delta, r.census.n_min, r.census.n_max);
    for l in &r.levels {
        let _ = writeln!(s, "n = {}  mean good {:.3} (sd {:.3})  mean triple {:.3}", l.level, l.mean_count, l.sd_count, l.mean_triple);
    }
    match &r.fit {
        Some(f) => {
            let _ = writeln!(s, "slope {:.4} +- {:.4} over {:?} (target {:.4}; in band: {})", f.slope, f.se, r.fit_range, 2.0 - xi(4)?.value, r.slope_in_band);
        }
        None => s.push_str("slope: too few positive levels\n"),
    }
    let _ = writeln!(s, "nesting violations: {}", r.nesting_violations);
    let _ = writeln!(s, "triple counts non-increasing: {}, zero at finest level: {}", r.triple_non_increasing, r.triple_zero_at_finest);
    let _ = writeln!(s, "pair orders at level {} over {} close pairs ({} unclassified):", r.pair_level, r.pairs_classified, r.pairs_unclassified);
    for (o, n) in &r.pair_orders {
        let _ = writeln!(s, "  {o:?} {} {n}", o.pattern());
    }
    Ok(Outcome {
        results: serde_json::to_value(r)?,
        resolution: Resolution { step_scale: Some(r.census.step_scale), cell_size: Some(r.census.cell_size()) },
        csv: csv_of(&r.levels)?,
        svg: None,
        summary: s,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierResults {
    pub seed: u64,
    pub steps: u64,
    pub truncated: bool,
    pub step_scale: f64,
    pub cell_size: f64,
    pub visited_cells: usize,
    pub frontier_cells: usize,
    pub frontier_within_visited: bool,
    pub box_counts: BTreeMap<u32, f64>,
    pub fit: BoxFit,
}

#[derive(Serialize)]
struct BoxRow {
    level: u32,
    boxes: f64,
}

/// Walk from the origin to the unit circle, frontier cells of its trace and
/// their box-counting slope over dyadic squares of `[-1, 1]^2`.
pub fn cmd_frontier(cfg: &Config) -> Result<(FrontierResults, String)> {
    let f: &FrontierConfig = &cfg.frontier;
    let step = f.step_scale()?;
    let (lo, hi) = f.levels;
    if lo < 1 || hi < lo + 2 || f.min_cells_per_box == 0 {
        return Err(CliError::Config(format!("levels {lo}..{hi} / cells per box {}", f.min_cells_per_box)));
    }
    let base = BaseSquare::new(Point2::new(-1.0, -1.0), 2.0)?;
    let cell = 2.0 * step;
    let finest = base.side / (1u64 << hi) as f64;
    if cell * f.min_cells_per_box as f64 > finest {
        return Err(LabError::Resolution(format!(
            "cell {cell} leaves fewer than {} cells along a level-{hi} box",
            f.min_cells_per_box
        ))
        .into());
    }
    let seed = derive_seed(cfg.seed, FRONTIER_STREAM, 0);
    let rule = StopRule::new(vec![Target::new("exit", Shape::circle(Point2::ORIGIN, 1.0))], f.max_steps)?;
    let path = sample_path(seed, Point2::ORIGIN, step, &rule)?;
    let frame = Rect::centered(Point2::ORIGIN, 1.25)?;
    let mut grid = OccupancyGrid::new(frame, cell)?;
    grid.mark_polyline(&path.points);
    let front = frontier_cells(&grid);
    let within = front.is_subset_of(&grid.cells);
    let centres: Vec<Point2> = front.iter_ones().map(|(x, y)| grid.cell_center(x, y)).collect();
    let counts = box_counts(centres.iter().copied(), &base, lo..=hi);
    let fit = box_dimension(&counts, (lo, hi))?;
    let figure = svg::render(&path.points, f.svg_points, &grid, &front, Rect::centered(Point2::ORIGIN, 1.05)?);
    let res = FrontierResults {
        seed,
        steps: path.len() as u64 - 1,
        truncated: path.truncated,
        step_scale: step,
        cell_size: cell,
        visited_cells: grid.visited_count(),
        frontier_cells: centres.len(),
        frontier_within_visited: within,
        box_counts: counts,
        fit,
    };
    Ok((res, figure))
}

fn frontier_outcome(r: &FrontierResults) -> Result<Outcome> {
    let rows: Vec<BoxRow> = r.box_counts.iter().map(|(&level, &boxes)| BoxRow { level, boxes }).collect();
    let mut s = format!("{} steps (step {}, cell {}), {} frontier cells of {} visited\n", r.steps, r.step_scale, r.cell_size, r.frontier_cells, r.visited_cells);
    for b in &rows {
        let _ = writeln!(s, "level {}  boxes {}", b.level, b.boxes);
    }
    let _ = writeln!(s, "box-count slope {:.4} +- {:.4} (target 4/3)", r.fit.slope, r.fit.se);
    Ok(Outcome {
        results: serde_json::to_value(r)?,
        resolution: Resolution { step_scale: Some(r.step_scale), cell_size: Some(r.cell_size) },
        csv: csv_of(&rows)?,
        svg: None,
        summary: s,
    })
}
