//! Ingestion, normalization, windowing and synthetic data.

mod ingest;
mod normalize;
mod raster;
mod split;
mod synthetic;
mod window;

pub use ingest::{ingest_csv, ingest_reader, interpolate_gaps, CsvLayout, CsvSchema, IngestReport, MAX_MISSING_FRACTION};
pub use normalize::{normalize, Scaling};
pub use raster::{RasterSeries, DEFAULT_PERIOD_SECS};
pub use split::{split, split_point};
pub use synthetic::{generate_synthetic, DailyPattern, Peak, PlantedDrop, SyntheticSpec, STEPS_PER_DAY};
pub use window::{sliding_window, WindowPoint, WindowedDataset};

use crate::Result;

/// Windowed training (and optional test) data with the scaling fitted on
/// the training prefix.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub train: WindowedDataset,
    pub test: Option<WindowedDataset>,
    pub scaling: Scaling,
}

/// Split by time (if `train_fraction` is given), min-max scale with the
/// training range, then window both sides.
pub fn prepare(raw: &RasterSeries, w: usize, train_fraction: Option<f64>) -> Result<Prepared> {
    match train_fraction {
        None => {
            let (scaled, scaling) = normalize(raw, 0..raw.timestamps())?;
            Ok(Prepared {
                train: sliding_window(&scaled, w)?,
                test: None,
                scaling,
            })
        }
        Some(fraction) => {
            let (train_raw, _) = split(raw, fraction, w)?;
            let cut = train_raw.timestamps();
            let (scaled, scaling) = normalize(raw, 0..cut)?;
            let train = sliding_window(&scaled.slice_time(0..cut)?, w)?;
            let mut test = sliding_window(&scaled.slice_time(cut..raw.timestamps())?, w)?;
            test.time_origin = cut;
            Ok(Prepared {
                train,
                test: Some(test),
                scaling,
            })
        }
    }
}
