//! Run configuration: one JSON document per run, see `docs/config-schema.md`.

use std::path::Path;

use frontier_core::census::{n_of_delta, CensusConfig};
use frontier_core::exponents::{Backend, Correction, Mode, TrialSpec, DEFAULT_DEPTH, DEFAULT_REJECTION_BUDGET, MAX_CELL};
use frontier_core::geometry::{BaseSquare, Point2};
use frontier_core::randwalk::DEFAULT_MAX_STEPS;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub schema_version: u32,
    pub seed: u64,
    pub disconnect: DisconnectConfig,
    pub census: CensusSettings,
    pub frontier: FrontierConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            disconnect: DisconnectConfig::default(),
            census: CensusSettings::default(),
            frontier: FrontierConfig::default(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg: Config = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema version {} (this build reads {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }
}

mod mode_string {
    use frontier_core::exponents::Mode;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Mode, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(m)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mode, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisconnectConfig {
    pub k: u32,
    /// `plain`, `mixed:L` or `conditioned`.
    #[serde(with = "mode_string")]
    pub mode: Mode,
    /// Inclusive range of log radius ratios `n`.
    pub n_from: u32,
    pub n_to: u32,
    pub trials: u64,
    pub step_scale: f64,
    pub cell_size: f64,
    pub backend: Backend,
    pub depth: f64,
    pub max_steps: u64,
    pub rejection_budget: u64,
    /// Fit correction; conditioned runs default to `poly_k`.
    pub correction: Option<Correction>,
    /// Bound on max/min of the polynomial-correction ratios.
    pub ratio_bound: f64,
}

impl Default for DisconnectConfig {
    fn default() -> Self {
        Self {
            k: 1,
            mode: Mode::Plain,
            n_from: 1,
            n_to: 4,
            trials: 10_000,
            step_scale: MAX_CELL / 2.0,
            cell_size: MAX_CELL,
            backend: Backend::LogPolar,
            depth: DEFAULT_DEPTH,
            max_steps: DEFAULT_MAX_STEPS,
            rejection_budget: DEFAULT_REJECTION_BUDGET,
            correction: None,
            ratio_bound: 10.0,
        }
    }
}

impl DisconnectConfig {
    pub fn levels(&self) -> Result<Vec<u32>> {
        if self.n_from == 0 || self.n_from > self.n_to {
            return Err(CliError::Config(format!("n sweep {}..{}", self.n_from, self.n_to)));
        }
        Ok((self.n_from..=self.n_to).collect())
    }

    pub fn correction(&self) -> Correction {
        self.correction.unwrap_or(match self.mode {
            Mode::Conditioned => Correction::PolyK,
            _ => Correction::None,
        })
    }

    pub fn spec(&self, n: u32, seed: u64) -> TrialSpec {
        TrialSpec {
            step_scale: self.step_scale,
            cell_size: self.cell_size,
            backend: self.backend,
            depth: self.depth,
            max_steps: self.max_steps,
            rejection_budget: self.rejection_budget,
            ..TrialSpec::new(self.k, n as f64, self.mode, self.trials, seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CensusSettings {
    pub paths: u64,
    pub delta: f64,
    /// Fit range; the census itself runs from `N(delta)` to `levels.1`.
    pub levels: (u32, u32),
    pub radius: f64,
    pub base_corner: (f64, f64),
    pub base_side: f64,
    /// Expected band for the census slope.
    pub slope_band: (f64, f64),
    /// Level of the pair-order and pair-count tables (default `N(delta)`).
    pub pair_level: Option<u32>,
    /// Paths held in memory at once.
    pub parallel_paths: usize,
}

impl Default for CensusSettings {
    fn default() -> Self {
        Self {
            paths: 100,
            delta: 0.29,
            levels: (6, 9),
            radius: 2.05,
            base_corner: (0.6, -0.5),
            base_side: 1.0,
            slope_band: (0.25, 0.65),
            pair_level: None,
            parallel_paths: 2,
        }
    }
}

impl CensusSettings {
    pub fn census_config(&self) -> Result<CensusConfig> {
        let base = BaseSquare::new(Point2::new(self.base_corner.0, self.base_corner.1), self.base_side)?;
        let cfg = CensusConfig::new(self.delta, self.levels.1, self.radius, base)?;
        let n_min = n_of_delta(self.delta, self.base_side);
        if self.levels.0 < n_min || self.levels.0 > self.levels.1 {
            return Err(CliError::Config(format!(
                "levels {}..{} must lie in {n_min}..=n_max with N(delta) = {n_min}",
                self.levels.0, self.levels.1
            )));
        }
        if self.paths == 0 || self.parallel_paths == 0 {
            return Err(CliError::Config("paths and parallel_paths must be positive".into()));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrontierConfig {
    /// Target walk length; the step scale is the dyadic `2^-j` nearest to
    /// `steps^-1/2`.
    pub steps: u64,
    /// Box-count levels of the square `[-1, 1]^2`.
    pub levels: (u32, u32),
    /// Fewest raster cells along a finest box side; the cell is twice the
    /// step scale.
    pub min_cells_per_box: u32,
    pub max_steps: u64,
    /// Path vertices kept in the SVG.
    pub svg_points: usize,
}

impl Default for FrontierConfig {
    fn default() -> Self {
        Self { steps: 4_000_000, levels: (4, 8), min_cells_per_box: 2, max_steps: DEFAULT_MAX_STEPS, svg_points: 40_000 }
    }
}

impl FrontierConfig {
    pub fn step_scale(&self) -> Result<f64> {
        if self.steps < 4 {
            return Err(CliError::Config(format!("steps = {}", self.steps)));
        }
        let j = (0.5 * (self.steps as f64).log2()).round() as i32;
        Ok(2f64.powi(-j))
    }
}
