//! Binomial intervals, weighted least squares and seed derivation.

use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{LabError, Result};

/// Generator used by every simulation in the crate.
pub type LabRng = Pcg64Mcg;

pub fn rng_from_seed(seed: u64) -> LabRng {
    Pcg64Mcg::seed_from_u64(seed)
}

/// Wilson score interval for a binomial proportion at confidence `level`.
pub fn wilson_ci(successes: u64, trials: u64, level: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(LabError::InvalidArgument("wilson_ci needs trials > 0".into()));
    }
    if successes > trials {
        return Err(LabError::InvalidArgument(format!(
            "successes {successes} exceed trials {trials}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(LabError::InvalidArgument(format!("confidence level {level} not in (0,1)")));
    }
    let z = Normal::standard().inverse_cdf(1.0 - (1.0 - level) / 2.0);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let low = if successes == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let high = if successes == trials { 1.0 } else { (center + half).clamp(p, 1.0) };
    Ok((low, high))
}

/// Result of a weighted straight-line fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Residual-scaled standard error of the slope.
    pub slope_se: f64,
}

/// Weighted least squares over `(x, y, w)` triples.
///
/// The slope error is scaled by the weighted residual variance, so it is
/// unchanged when all weights are multiplied by a common factor.
pub fn weighted_ls(points: &[(f64, f64, f64)]) -> Result<LineFit> {
    if points.len() < 3 {
        return Err(LabError::Degenerate(format!("need >= 3 points, got {}", points.len())));
    }
    if let Some(p) = points
        .iter()
        .find(|(x, y, w)| !(x.is_finite() && y.is_finite() && w.is_finite() && *w > 0.0))
    {
        return Err(LabError::Degenerate(format!("bad point {p:?}")));
    }
    let sw: f64 = points.iter().map(|p| p.2).sum();
    let xm = points.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let ym = points.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = points.iter().map(|&(x, _, w)| w * (x - xm) * (x - xm)).sum();
    let first_x = points[0].0;
    if points.iter().all(|p| p.0 == first_x) || sxx <= 0.0 {
        return Err(LabError::Degenerate("fewer than 2 distinct x values".into()));
    }
    let sxy: f64 = points.iter().map(|&(x, y, w)| w * (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = points
        .iter()
        .map(|&(x, y, w)| {
            let r = y - intercept - slope * x;
            w * r * r
        })
        .sum();
    // rss is normalized by the mean weight so the scale of w drops out
    let dof = (points.len() - 2) as f64;
    let sigma2 = rss / dof;
    let slope_se = (sigma2 / sxx).sqrt();
    Ok(LineFit { slope, intercept, slope_se })
}

/// Deterministic per-trial seed derivation: `derive(master, stream, index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self { master_seed, stream_id }
    }

    pub fn seed(&self, index: u64) -> u64 {
        derive_seed(self.master_seed, self.stream_id, index)
    }

    pub fn rng(&self, index: u64) -> LabRng {
        rng_from_seed(self.seed(index))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Pure mixing function; for fixed `(master, stream)` it is a bijection in `index`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let base = splitmix64(splitmix64(master) ^ stream.rotate_left(17));
    splitmix64(base ^ index)
}
