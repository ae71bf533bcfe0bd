//! Temporal distances: Sakoe-Chiba banded dynamic time warping, an
//! exhaustive warping-path oracle for small inputs, and squared Euclidean.

use serde::{Deserialize, Serialize};

use crate::error::{config, shape, Result};

/// Longest series the exhaustive oracle accepts.
pub const BRUTE_FORCE_MAX_LEN: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointCost {
    SquaredDiff,
    AbsDiff,
}

impl PointCost {
    #[inline]
    pub fn eval(self, a: f64, b: f64) -> f64 {
        match self {
            PointCost::SquaredDiff => (a - b) * (a - b),
            PointCost::AbsDiff => (a - b).abs(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DtwConfig {
    /// Warping window radius: cells `(i, j)` with `|i − j| ≤ band`.
    pub band: usize,
    pub point_cost: PointCost,
}

impl Default for DtwConfig {
    fn default() -> Self {
        Self {
            band: 6,
            point_cost: PointCost::SquaredDiff,
        }
    }
}

impl DtwConfig {
    pub fn new(band: usize, point_cost: PointCost) -> Self {
        Self { band, point_cost }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.band == 0 || self.band > n.max(1) {
            return config(format!("band radius {} outside 1..={n}", self.band));
        }
        Ok(())
    }
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return shape(format!("series lengths differ: {} vs {}", a.len(), b.len()));
    }
    Ok(())
}

/// Minimum accumulated point cost over monotone warping paths inside the band.
pub fn dtw(a: &[f64], b: &[f64], cfg: &DtwConfig) -> Result<f64> {
    check_lengths(a, b)?;
    cfg.validate(a.len())?;
    Ok(dtw_unchecked(a, b, cfg))
}

/// [`dtw`] without validation, for hot loops over pre-validated windows.
pub fn dtw_unchecked(a: &[f64], b: &[f64], cfg: &DtwConfig) -> f64 {
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let r = cfg.band;
    // two rolling rows of the (n+1)x(n+1) accumulated cost table
    let mut prev = vec![f64::INFINITY; n + 1];
    let mut curr = vec![f64::INFINITY; n + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        curr.fill(f64::INFINITY);
        let lo = i.saturating_sub(r).max(1);
        let hi = (i + r).min(n);
        for j in lo..=hi {
            let best = prev[j - 1].min(prev[j]).min(curr[j - 1]);
            curr[j] = cfg.point_cost.eval(a[i - 1], b[j - 1]) + best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[n]
}

/// Enumerates every monotone warping path inside the band. Exponential;
/// refuses series longer than [`BRUTE_FORCE_MAX_LEN`].
pub fn dtw_bruteforce(a: &[f64], b: &[f64], cfg: &DtwConfig) -> Result<f64> {
    check_lengths(a, b)?;
    cfg.validate(a.len())?;
    let n = a.len();
    if n > BRUTE_FORCE_MAX_LEN {
        return config(format!(
            "exhaustive DTW limited to length {BRUTE_FORCE_MAX_LEN}, got {n}"
        ));
    }
    if n == 0 {
        return Ok(0.0);
    }

    fn walk(i: usize, j: usize, acc: f64, a: &[f64], b: &[f64], cfg: &DtwConfig, best: &mut f64) {
        let acc = acc + cfg.point_cost.eval(a[i], b[j]);
        let n = a.len();
        if i + 1 == n && j + 1 == n {
            if acc < *best {
                *best = acc;
            }
            return;
        }
        for (di, dj) in [(1, 0), (0, 1), (1, 1)] {
            let (ni, nj) = (i + di, j + dj);
            if ni < n && nj < n && ni.abs_diff(nj) <= cfg.band {
                walk(ni, nj, acc, a, b, cfg, best);
            }
        }
    }

    let mut best = f64::INFINITY;
    walk(0, 0, 0.0, a, b, cfg, &mut best);
    Ok(best)
}

pub fn euclidean_sq(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a, b)?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}
