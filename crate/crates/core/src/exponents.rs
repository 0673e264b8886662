//! Disconnection exponents: closed forms and Monte Carlo estimates.
//!
//! The probability that `k` independent paths crossing the annulus
//! `1 < |z| < e^n` do not disconnect the origin from infinity decays like
//! `exp(-n xi(k))`. Three sampling modes are offered:
//!
//! * plain: all `k` walks start uniformly on the unit circle and stop on
//!   reaching radius `e^n`; they may wander inside the unit disc, and the
//!   event is that the origin stays connected to infinity;
//! * mixed: `l` walks start on the unit circle, the other `k - l` start
//!   uniformly on the outer circle and stop on hitting the unit circle; the
//!   event is that the unit disc stays connected to infinity;
//! * conditioned: walks start uniformly on radius `e^n / 2` and are kept only
//!   if they hit the unit circle before radius `e^n`; kept walks continue
//!   until they reach radius `e^n`, and the event is as in mixed mode.
//!
//! In mixed and conditioned mode the unit disc is the target, so a walk
//! entering it is resumed at its exit point without being traced.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, TAU};

use crate::cylinder::{CylPoint, CylStop, CylinderGrid, WalkEnd};
use crate::error::{LabError, Result};
use crate::geometry::{Disc, OccupancyGrid, Point2, Rect};
use crate::randwalk::{run_walk, Shape, StopRule, Target, DEFAULT_MAX_STEPS};
use crate::stats::{derive_seed, rng_from_seed, weighted_ls, wilson_ci, LabRng};
use crate::topology::disconnects;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiValue {
    pub k: u32,
    pub value: f64,
}

/// `xi(k) = ((sqrt(24k + 1) - 1)^2 - 4) / 48`.
pub fn xi(k: u32) -> Result<XiValue> {
    if k < 1 {
        return Err(LabError::InvalidArgument("xi(k) needs k >= 1".into()));
    }
    let s = (24.0 * k as f64 + 1.0).sqrt() - 1.0;
    Ok(XiValue { k, value: (s * s - 4.0) / 48.0 })
}

fn xi_value(k: u32) -> f64 {
    xi(k).expect("k >= 1").value
}

/// Hausdorff dimensions predicted from the exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionTargets {
    /// `2 - xi(2)`
    pub frontier: f64,
    /// `2 - xi(4)`
    pub double_on_frontier: f64,
    /// `2 - xi(1)`
    pub pioneer: f64,
    /// `2 - xi(3)`
    pub pioneer_double: f64,
    /// `2 - xi(5)`
    pub pioneer_triple: f64,
}

pub fn dimension_targets() -> DimensionTargets {
    DimensionTargets {
        frontier: 2.0 - xi_value(2),
        double_on_frontier: 2.0 - xi_value(4),
        pioneer: 2.0 - xi_value(1),
        pioneer_double: 2.0 - xi_value(3),
        pioneer_triple: 2.0 - xi_value(5),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Mode {
    Plain,
    /// `inside` walks start on the unit circle, the rest on the outer circle.
    Mixed { inside: u32 },
    Conditioned,
}

impl Mode {
    fn tag(self) -> u64 {
        match self {
            Mode::Plain => 1,
            Mode::Mixed { inside } => 2 | (inside as u64) << 8,
            Mode::Conditioned => 3,
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Plain => write!(f, "plain"),
            Mode::Mixed { inside } => write!(f, "mixed:{inside}"),
            Mode::Conditioned => write!(f, "conditioned"),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Mode::Plain),
            "conditioned" => Ok(Mode::Conditioned),
            _ => match s.strip_prefix("mixed:").map(str::parse::<u32>) {
                Some(Ok(inside)) => Ok(Mode::Mixed { inside }),
                _ => Err(LabError::InvalidArgument(format!("unknown mode {s:?}"))),
            },
        }
    }
}

/// How the `k` paths are traced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Walks on the cylinder `(log r, theta)`; `step_scale` and `cell_size`
    /// are measured in `log r`. Scale-uniform resolution.
    #[default]
    LogPolar,
    /// Planar walks rasterized on one Euclidean grid. Only `mixed:k` (every
    /// walk from the unit circle, unit-disc target); cost
    /// grows like `e^{2n}`.
    Euclidean,
}

/// Largest admissible cell: 32 cells across the unit inner radius.
pub const MAX_CELL: f64 = 1.0 / 32.0;
pub const DEFAULT_REJECTION_BUDGET: u64 = 100_000;
pub const DEFAULT_DEPTH: f64 = 10.0;
/// Descent between loop checks of a plain-mode path inside the unit disc.
const PAUSE_GAP: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub k: u32,
    /// Log radius ratio of the annulus.
    pub n: f64,
    pub mode: Mode,
    pub samples: u64,
    pub step_scale: f64,
    pub cell_size: f64,
    pub master_seed: u64,
    #[serde(default)]
    pub backend: Backend,
    pub max_steps: u64,
    /// Attempts allowed per conditioned path before the trial is dropped.
    pub rejection_budget: u64,
    /// Plain mode: a path reaching `|z| <= e^-depth` counts as cutting the
    /// origin off.
    #[serde(default = "default_depth")]
    pub depth: f64,
}

fn default_depth() -> f64 {
    DEFAULT_DEPTH
}

impl TrialSpec {
    pub fn new(k: u32, n: f64, mode: Mode, samples: u64, master_seed: u64) -> Self {
        Self {
            k,
            n,
            mode,
            samples,
            step_scale: MAX_CELL / 2.0,
            cell_size: MAX_CELL,
            master_seed,
            backend: Backend::LogPolar,
            max_steps: DEFAULT_MAX_STEPS,
            rejection_budget: DEFAULT_REJECTION_BUDGET,
            depth: DEFAULT_DEPTH,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n > 0.0 && self.n.is_finite()) {
            return Err(LabError::InvalidArgument(format!("n = {} must be positive", self.n)));
        }
        if self.samples == 0 {
            return Err(LabError::InvalidArgument("samples must be positive".into()));
        }
        if let Mode::Mixed { inside } = self.mode {
            if inside > self.k {
                return Err(LabError::InvalidArgument(format!("mixed:{inside} exceeds k = {}", self.k)));
            }
        }
        if self.mode == Mode::Conditioned && self.n <= LN_2 {
            return Err(LabError::InvalidArgument("conditioned mode needs n > ln 2".into()));
        }
        if !(self.depth > 0.0 && self.depth.is_finite()) {
            return Err(LabError::InvalidArgument(format!("depth {} must be positive", self.depth)));
        }
        if self.max_steps == 0 || self.rejection_budget == 0 {
            return Err(LabError::InvalidArgument("max_steps and rejection_budget must be positive".into()));
        }
        if !(self.cell_size > 0.0 && self.cell_size <= MAX_CELL) {
            return Err(LabError::Resolution(format!(
                "cell size {} exceeds 1/32 of the inner radius",
                self.cell_size
            )));
        }
        if !(self.step_scale > 0.0 && self.step_scale <= self.cell_size / 2.0) {
            return Err(LabError::Resolution(format!(
                "step scale {} exceeds half the cell size {}",
                self.step_scale, self.cell_size
            )));
        }
        if self.backend == Backend::Euclidean && self.mode != (Mode::Mixed { inside: self.k }) {
            return Err(LabError::InvalidArgument(format!("the euclidean backend supports mixed:{} only", self.k)));
        }
        Ok(())
    }

    fn cylinder(&self) -> CylinderGrid {
        match self.mode {
            Mode::Plain => CylinderGrid::with_floor(self.cell_size, -self.depth, self.n),
            _ => CylinderGrid::new(self.cell_size, self.n),
        }
    }

    /// Stream shared by every `k`, so batches differing only in `k` reuse
    /// the same walks.
    fn stream(&self) -> u64 {
        derive_seed(self.n.to_bits(), self.mode.tag(), self.backend as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisconnectionBatch {
    pub spec: TrialSpec,
    pub successes: u64,
    pub trials: u64,
    /// Conditioning rejections plus truncated walks.
    pub rejected: u64,
    pub truncated: u64,
    /// Trials dropped because a path exhausted its rejection budget or was
    /// truncated.
    pub dropped: u64,
    pub accepted_paths: u64,
    pub attempted_paths: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl DisconnectionBatch {
    /// Fraction of conditioned attempts that hit the unit circle first.
    pub fn acceptance_rate(&self) -> Option<f64> {
        (self.attempted_paths > 0).then(|| self.accepted_paths as f64 / self.attempted_paths as f64)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    successes: u64,
    trials: u64,
    rejected: u64,
    truncated: u64,
    dropped: u64,
    accepted: u64,
    attempted: u64,
}

impl Tally {
    fn merge(mut self, o: Tally) -> Tally {
        self.successes += o.successes;
        self.trials += o.trials;
        self.rejected += o.rejected;
        self.truncated += o.truncated;
        self.dropped += o.dropped;
        self.accepted += o.accepted;
        self.attempted += o.attempted;
        self
    }
}

struct Workspace {
    grid: CylinderGrid,
}

pub fn run_batch(spec: &TrialSpec) -> Result<DisconnectionBatch> {
    spec.validate()?;
    let tally = if spec.k == 0 {
        Tally { successes: spec.samples, trials: spec.samples, ..Tally::default() }
    } else {
        let stream = spec.stream();
        match spec.backend {
            Backend::LogPolar => (0..spec.samples)
                .into_par_iter()
                .map_init(
                    || Workspace { grid: spec.cylinder() },
                    |ws, t| log_polar_trial(spec, derive_seed(spec.master_seed, stream, t), ws),
                )
                .reduce(Tally::default, Tally::merge),
            Backend::Euclidean => (0..spec.samples)
                .into_par_iter()
                .map(|t| euclidean_trial(spec, derive_seed(spec.master_seed, stream, t)))
                .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))?,
        }
    };
    if tally.trials == 0 {
        return Err(LabError::ZeroAccepted { attempted: spec.samples, rejected: tally.rejected });
    }
    let (ci_low, ci_high) = wilson_ci(tally.successes, tally.trials, 0.95)?;
    Ok(DisconnectionBatch {
        spec: spec.clone(),
        successes: tally.successes,
        trials: tally.trials,
        rejected: tally.rejected,
        truncated: tally.truncated,
        dropped: tally.dropped,
        accepted_paths: tally.accepted,
        attempted_paths: tally.attempted,
        p_hat: tally.successes as f64 / tally.trials as f64,
        ci_low,
        ci_high,
    })
}

fn log_polar_trial(spec: &TrialSpec, trial_seed: u64, ws: &mut Workspace) -> Tally {
    let mut tally = Tally::default();
    let grid = &mut ws.grid;
    grid.clear();
    let sigma = spec.step_scale;
    let n = spec.n;
    for j in 0..spec.k {
        let inside = match spec.mode {
            Mode::Mixed { inside } => j < inside,
            _ => true,
        };
        let end = match spec.mode {
            Mode::Conditioned => match conditioned_path(spec, trial_seed, j as u64, grid, &mut tally) {
                Some(end) => end,
                None => {
                    tally.dropped += 1;
                    return tally;
                }
            },
            Mode::Plain => {
                let mut rng = rng_from_seed(derive_seed(trial_seed, j as u64, 0));
                let start = CylPoint::new(0.0, rng.random::<f64>() * TAU);
                match origin_path(spec, grid, &mut rng, start) {
                    Some(end) => end,
                    None => {
                        tally.trials = 1;
                        return tally;
                    }
                }
            }
            _ if inside => {
                let mut rng = rng_from_seed(derive_seed(trial_seed, j as u64, 0));
                let start = CylPoint::new(0.0, rng.random::<f64>() * TAU);
                let outward = CylStop { outer: Some(n), inner: None, pause: None, reinject: true, max_steps: spec.max_steps };
                grid.trace::<true>(&mut rng, start, sigma, &outward).0
            }
            _ => {
                let mut rng = rng_from_seed(derive_seed(trial_seed, j as u64, 0));
                let start = CylPoint::new(n, rng.random::<f64>() * TAU);
                let inward = CylStop { outer: None, inner: Some(0.0), pause: None, reinject: false, max_steps: spec.max_steps };
                grid.trace::<true>(&mut rng, start, sigma, &inward).0
            }
        };
        if end == WalkEnd::Truncated {
            tally.truncated += 1;
            tally.rejected += 1;
            tally.dropped += 1;
            return tally;
        }
        // adding paths never reconnects, so a loop settles the trial
        if j + 1 < spec.k && grid.disconnects() {
            tally.trials = 1;
            return tally;
        }
    }
    tally.trials = 1;
    tally.successes = (!grid.disconnects()) as u64;
    tally
}

/// Plain-mode path from the unit circle out to `u = n`, traced without
/// reinjection. Returns `None` once the trial is known to be disconnected:
/// the path came within `e^-depth` of the origin, or a loop had already
/// formed at one of the checks made every `PAUSE_GAP` of descent.
fn origin_path(spec: &TrialSpec, grid: &mut CylinderGrid, rng: &mut LabRng, start: CylPoint) -> Option<WalkEnd> {
    let mut stop = CylStop {
        outer: Some(spec.n),
        inner: Some(-spec.depth),
        pause: Some(-PAUSE_GAP),
        reinject: false,
        max_steps: spec.max_steps,
    };
    let mut at = start;
    let mut used = 0;
    loop {
        let (end, p, steps) = grid.trace::<true>(rng, at, spec.step_scale, &stop);
        used += steps;
        match end {
            WalkEnd::Paused => {
                if grid.disconnects() {
                    return None;
                }
                if used >= spec.max_steps {
                    return Some(WalkEnd::Truncated);
                }
                at = p;
                stop.max_steps = spec.max_steps - used;
                stop.pause = stop.pause.map(|l| l - PAUSE_GAP).filter(|&l| l > -spec.depth);
            }
            WalkEnd::Inner => return None,
            end => return Some(end),
        }
    }
}

/// Draw attempts for path `j` until one hits the unit circle before the
/// outer circle, then replay it onto `grid` and continue it outward.
fn conditioned_path(
    spec: &TrialSpec,
    trial_seed: u64,
    j: u64,
    grid: &mut CylinderGrid,
    tally: &mut Tally,
) -> Option<WalkEnd> {
    let n = spec.n;
    let sigma = spec.step_scale;
    let first = CylStop { outer: Some(n), inner: Some(0.0), pause: None, reinject: false, max_steps: spec.max_steps };
    for attempt in 0..spec.rejection_budget {
        let seed = derive_seed(trial_seed, j, attempt);
        let mut rng = rng_from_seed(seed);
        let start = CylPoint::new(n - LN_2, rng.random::<f64>() * TAU);
        let (end, _, _) = grid.trace::<false>(&mut rng, start, sigma, &first);
        tally.attempted += 1;
        match end {
            WalkEnd::Inner => {
                tally.accepted += 1;
                let mut rng = rng_from_seed(seed);
                let start = CylPoint::new(n - LN_2, rng.random::<f64>() * TAU);
                let (_, at, _) = grid.trace::<true>(&mut rng, start, sigma, &first);
                let rest = CylStop { outer: Some(n), inner: None, pause: None, reinject: true, max_steps: spec.max_steps };
                return Some(grid.trace::<true>(&mut rng, at, sigma, &rest).0);
            }
            WalkEnd::Outer => tally.rejected += 1,
            _ => {
                tally.rejected += 1;
                tally.truncated += 1;
            }
        }
    }
    None
}

/// Plain-mode trial on one planar grid over `[-1.25 e^n, 1.25 e^n]^2`.
fn euclidean_trial(spec: &TrialSpec, trial_seed: u64) -> Result<Tally> {
    let outer = spec.n.exp();
    let frame = Rect::centered(Point2::ORIGIN, 1.25 * outer + 4.0 * spec.cell_size)?;
    let mut grid = OccupancyGrid::new(frame, spec.cell_size)?;
    let rule = StopRule::new(vec![Target::new("exit", Shape::circle(Point2::ORIGIN, outer))], spec.max_steps)?;
    let mut tally = Tally::default();
    for j in 0..spec.k {
        let seed = derive_seed(trial_seed, j as u64, 0);
        let theta = rng_from_seed(seed ^ 0x9e37_79b9_7f4a_7c15).random::<f64>() * TAU;
        let mut prev: Option<Point2> = None;
        let out = run_walk(seed, Point2::polar(1.0, theta), spec.step_scale, &rule, |_, p| {
            match prev {
                Some(a) => grid.mark_segment(a, p),
                None => grid.mark_point(p),
            }
            prev = Some(p);
        })?;
        if out.truncated {
            tally.truncated += 1;
            tally.rejected += 1;
            tally.dropped += 1;
            return Ok(tally);
        }
    }
    tally.trials = 1;
    tally.successes = (!disconnects(&grid, &Disc::new(Point2::ORIGIN, 1.0)?)?) as u64;
    Ok(tally)
}

/// What is subtracted from `-ln p_hat` before regressing on `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    #[default]
    None,
    /// Add `k ln n`, removing the `n^k` prefactor of `p`.
    PolyK,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub n: f64,
    pub p_hat: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub k: u32,
    pub mode: Option<Mode>,
    pub points: Vec<FitPoint>,
    /// Levels left out for having too few successes.
    pub excluded: Vec<f64>,
    pub xi_hat: f64,
    pub se: f64,
    pub intercept: f64,
    pub correction: Correction,
}

/// Successes a level needs before it enters a fit.
pub const MIN_SUCCESSES: u64 = 50;

fn corrected(k: u32, n: f64, p: f64, correction: Correction) -> f64 {
    let y = -p.ln();
    match correction {
        Correction::None => y,
        Correction::PolyK => y + k as f64 * n.ln(),
    }
}

/// Weighted regression of `-ln p (+ k ln n)` on `n` for given points.
pub fn fit_points(k: u32, points: &[FitPoint], correction: Correction) -> Result<ExponentFit> {
    if points.len() < 3 {
        return Err(LabError::InsufficientLevels { needed: 3, found: points.len() });
    }
    if let Some(p) = points.iter().find(|p| !(p.p_hat > 0.0 && p.p_hat <= 1.0)) {
        return Err(LabError::Degenerate(format!("p_hat {} at n = {}", p.p_hat, p.n)));
    }
    let rows: Vec<_> = points.iter().map(|p| (p.n, corrected(k, p.n, p.p_hat, correction), p.weight)).collect();
    let line = weighted_ls(&rows)?;
    Ok(ExponentFit {
        k,
        mode: None,
        points: points.to_vec(),
        excluded: Vec::new(),
        xi_hat: line.slope,
        se: line.slope_se,
        intercept: line.intercept,
        correction,
    })
}

/// Fit `xi` from Monte Carlo batches. Weights are inverse delta-method
/// variances of `ln p_hat`, i.e. `successes / (1 - p_hat)`.
pub fn fit_exponent(batches: &[DisconnectionBatch], correction: Correction) -> Result<ExponentFit> {
    let Some(first) = batches.first() else {
        return Err(LabError::InsufficientLevels { needed: 3, found: 0 });
    };
    if batches.iter().any(|b| b.spec.k != first.spec.k || b.spec.mode != first.spec.mode) {
        return Err(LabError::InvalidArgument("batches mix k or mode".into()));
    }
    let (usable, low): (Vec<_>, Vec<_>) = batches.iter().partition(|b| b.successes >= MIN_SUCCESSES);
    let points: Vec<FitPoint> = usable
        .iter()
        .map(|b| {
            let q = (1.0 - b.p_hat).max(1.0 / b.trials as f64);
            FitPoint { n: b.spec.n, p_hat: b.p_hat, weight: b.successes as f64 / q }
        })
        .collect();
    let mut fit = fit_points(first.spec.k, &points, correction)?;
    fit.mode = Some(first.spec.mode);
    fit.excluded = low.iter().map(|b| b.spec.n).collect();
    Ok(fit)
}

/// `r(n) = p(n) e^{n xi(2k)} / n^k` for each `(n, p)`.
pub fn correction_ratios(k: u32, points: &[(f64, f64)], poly: bool) -> Result<Vec<f64>> {
    let x = xi(2 * k)?.value;
    Ok(points
        .iter()
        .map(|&(n, p)| {
            let r = p * (n * x).exp();
            if poly {
                r / n.powi(k as i32)
            } else {
                r
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub n: f64,
    pub p_hat: f64,
    pub ratio: f64,
    pub ratio_low: f64,
    pub ratio_high: f64,
    pub usable: bool,
    pub acceptance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyDiagnostic {
    pub k: u32,
    pub rows: Vec<RatioRow>,
    pub max_over_min: f64,
    pub bound: f64,
    pub within_bound: bool,
}

/// Ratio table from already-run conditioned batches.
pub fn poly_diagnostic_from(batches: &[DisconnectionBatch], bound: f64) -> Result<PolyDiagnostic> {
    let Some(first) = batches.first() else {
        return Err(LabError::InsufficientLevels { needed: 1, found: 0 });
    };
    let k = first.spec.k;
    let mut rows = Vec::with_capacity(batches.len());
    for b in batches {
        let scale = correction_ratios(k, &[(b.spec.n, 1.0)], true)?[0];
        rows.push(RatioRow {
            n: b.spec.n,
            p_hat: b.p_hat,
            ratio: b.p_hat * scale,
            ratio_low: b.ci_low * scale,
            ratio_high: b.ci_high * scale,
            usable: b.successes >= MIN_SUCCESSES,
            acceptance: b.acceptance_rate(),
        });
    }
    let used: Vec<f64> = rows.iter().filter(|r| r.usable).map(|r| r.ratio).collect();
    if used.is_empty() {
        return Err(LabError::InsufficientLevels { needed: 1, found: 0 });
    }
    let max = used.iter().cloned().fold(f64::MIN, f64::max);
    let min = used.iter().cloned().fold(f64::MAX, f64::min);
    let max_over_min = max / min;
    Ok(PolyDiagnostic { k, rows, max_over_min, bound, within_bound: max_over_min <= bound })
}

/// Run conditioned batches at each `n` from `template` and tabulate
/// `r(n)`; the bound is on `max r / min r` over levels with enough successes.
pub fn poly_correction_diagnostic(k: u32, ns: &[f64], template: &TrialSpec, bound: f64) -> Result<PolyDiagnostic> {
    let batches = ns
        .iter()
        .map(|&n| run_batch(&TrialSpec { k, n, mode: Mode::Conditioned, ..template.clone() }))
        .collect::<Result<Vec<_>>>()?;
    poly_diagnostic_from(&batches, bound)
}
