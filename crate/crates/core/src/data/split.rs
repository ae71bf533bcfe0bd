use super::raster::RasterSeries;
use crate::error::{config, data, Result};

/// Index of the first test timestamp for a prefix split.
pub fn split_point(timestamps: usize, train_fraction: f64) -> Result<usize> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return config(format!("train fraction {train_fraction} outside (0, 1)"));
    }
    Ok((train_fraction * timestamps as f64).round() as usize)
}

/// Time-prefix split: the first `train_fraction` of timestamps train, the
/// remainder tests. Both sides must hold at least one window of length `w`.
pub fn split(series: &RasterSeries, train_fraction: f64, w: usize) -> Result<(RasterSeries, RasterSeries)> {
    let cut = split_point(series.timestamps(), train_fraction)?;
    let test_len = series.timestamps() - cut;
    if cut < w || test_len < w {
        return data(format!(
            "split at {cut} leaves {cut} train and {test_len} test timestamps; each side needs >= {w}"
        ));
    }
    Ok((
        series.slice_time(0..cut)?,
        series.slice_time(cut..series.timestamps())?,
    ))
}
