use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::raster::RasterSeries;
use crate::error::{data, Result};

/// Per-feature min-max record fitted on a training range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Scaling {
    /// Fits the per-feature range over `time_range` of every sensor.
    pub fn fit(series: &RasterSeries, time_range: Range<usize>) -> Result<Self> {
        if time_range.is_empty() || time_range.end > series.timestamps() {
            return data(format!(
                "cannot fit scaling on time range {time_range:?} of {} timestamps",
                series.timestamps()
            ));
        }
        let mut min = vec![f64::INFINITY; series.features()];
        let mut max = vec![f64::NEG_INFINITY; series.features()];
        for s in 0..series.sensors() {
            for f in 0..series.features() {
                for &v in &series.channel(s, f)[time_range.clone()] {
                    min[f] = min[f].min(v);
                    max[f] = max[f].max(v);
                }
            }
        }
        for f in 0..series.features() {
            if max[f] <= min[f] {
                return data(format!("feature {f} is constant ({}); cannot rescale", min[f]));
            }
        }
        Ok(Self { min, max })
    }

    /// Rescales with the fitted range. Values outside it are not clipped.
    pub fn apply(&self, series: &RasterSeries) -> Result<RasterSeries> {
        self.check(series)?;
        let mut out = series.clone();
        for s in 0..series.sensors() {
            for f in 0..series.features() {
                let (lo, span) = (self.min[f], self.max[f] - self.min[f]);
                for v in out.channel_mut(s, f) {
                    *v = (*v - lo) / span;
                }
            }
        }
        Ok(out)
    }

    pub fn inverse(&self, series: &RasterSeries) -> Result<RasterSeries> {
        self.check(series)?;
        let mut out = series.clone();
        for s in 0..series.sensors() {
            for f in 0..series.features() {
                let (lo, span) = (self.min[f], self.max[f] - self.min[f]);
                for v in out.channel_mut(s, f) {
                    *v = *v * span + lo;
                }
            }
        }
        Ok(out)
    }

    fn check(&self, series: &RasterSeries) -> Result<()> {
        if series.features() != self.min.len() {
            return data(format!(
                "scaling fitted on {} features, series has {}",
                self.min.len(),
                series.features()
            ));
        }
        Ok(())
    }
}

/// Min-max rescale to `[0, 1]` using the range observed over `fit_range`.
pub fn normalize(raw: &RasterSeries, fit_range: Range<usize>) -> Result<(RasterSeries, Scaling)> {
    let scaling = Scaling::fit(raw, fit_range)?;
    Ok((scaling.apply(raw)?, scaling))
}
