use std::io::Write;
use std::path::Path;

use anyhow::Context;
use sha2::{Digest, Sha256};
use stdec::data::{
    generate_synthetic, ingest_csv, prepare, CsvSchema, Prepared, RasterSeries, SyntheticSpec, WindowedDataset,
};
use stdec::spatial::{line_lambda, SpatialWeights};

use crate::config::{RunConfig, SynthSource};
use crate::error::{usage, CliResult};

/// Raw series, its windowed form and a digest identifying both.
pub struct Loaded {
    pub raw: RasterSeries,
    pub prepared: Prepared,
    pub fingerprint: String,
}

impl Loaded {
    pub fn split(&self, test: bool) -> CliResult<&WindowedDataset> {
        if test {
            self.prepared
                .test
                .as_ref()
                .ok_or_else(|| usage("--test needs a train fraction"))
        } else {
            Ok(&self.prepared.train)
        }
    }
}

pub fn synthetic_spec(src: &SynthSource) -> CliResult<SyntheticSpec> {
    Ok(SyntheticSpec::with_regions(src.sensors, src.days, src.regions, src.noise, src.seed)?)
}

pub fn load(cfg: &RunConfig) -> CliResult<Loaded> {
    let raw = match (&cfg.data, &cfg.synthetic) {
        (Some(path), None) => {
            let report = ingest_csv(path, &CsvSchema::default())
                .with_context(|| format!("reading {}", path.display()))?;
            let filled: usize = report.filled.iter().sum();
            if filled > 0 {
                eprintln!("interpolated {filled} missing cells");
            }
            report.series
        }
        (None, Some(src)) => generate_synthetic(&synthetic_spec(src)?)?.0,
        _ => return Err(usage("exactly one data source is required")),
    };
    let prepared = prepare(&raw, cfg.w, cfg.train_fraction)?;
    let fingerprint = fingerprint(&raw, cfg.w, cfg.train_fraction);
    Ok(Loaded { raw, prepared, fingerprint })
}

/// SHA-256 over the raw values and the windowing parameters.
pub fn fingerprint(raw: &RasterSeries, w: usize, train_fraction: Option<f64>) -> String {
    let mut h = Sha256::new();
    for n in [raw.sensors(), raw.timestamps(), raw.features(), w] {
        h.update((n as u64).to_le_bytes());
    }
    h.update(train_fraction.unwrap_or(1.0).to_bits().to_le_bytes());
    for id in &raw.sensor_ids {
        h.update(id.as_bytes());
        h.update([0]);
    }
    for v in raw.values() {
        h.update(v.to_bits().to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn spatial_weights(cfg: &RunConfig, sensors: usize) -> CliResult<SpatialWeights> {
    match &cfg.lambda {
        Some(path) => {
            let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let weights = SpatialWeights::read_csv(std::io::BufReader::new(file))?;
            if weights.sensors() != sensors {
                return Err(usage(format!(
                    "spatial weights cover {} sensors, data has {sensors}",
                    weights.sensors()
                )));
            }
            Ok(weights)
        }
        None => Ok(line_lambda(sensors)?),
    }
}

/// Wide CSV `timestamp,<sensor ids>` readable by the ingester; one feature.
pub fn write_raster_csv(series: &RasterSeries, out: impl Write) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["timestamp".to_string()];
    header.extend(series.sensor_ids.iter().cloned());
    w.write_record(&header)?;
    for (t, label) in series.time_labels.iter().enumerate() {
        let mut rec = vec![label.clone()];
        rec.extend((0..series.sensors()).map(|i| format!("{:?}", series.get(i, t, 0))));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn create(path: &Path) -> CliResult<std::io::BufWriter<std::fs::File>> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use stdec::data::ingest_reader;

    #[test]
    fn raster_round_trips_through_ingest() {
        let spec = SyntheticSpec::with_regions(3, 1, 1, 0.1, 4).unwrap();
        let (series, _) = generate_synthetic(&spec).unwrap();
        let mut buf = Vec::new();
        write_raster_csv(&series, &mut buf).unwrap();
        let back = ingest_reader(buf.as_slice(), &CsvSchema::default()).unwrap().series;
        assert_eq!(back, series);
    }

    #[test]
    fn fingerprint_tracks_values_and_window() {
        let spec = SyntheticSpec::with_regions(3, 1, 1, 0.1, 4).unwrap();
        let (mut series, _) = generate_synthetic(&spec).unwrap();
        let a = fingerprint(&series, 12, None);
        assert_eq!(a, fingerprint(&series, 12, None));
        assert_eq!(a.len(), 64);
        assert_ne!(a, fingerprint(&series, 6, None));
        series.set(0, 0, 0, series.get(0, 0, 0) + 1e-12);
        assert_ne!(a, fingerprint(&series, 12, None));
    }
}
