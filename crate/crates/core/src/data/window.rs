use std::io::{Read, Write};

use super::raster::RasterSeries;
use crate::error::{data, shape, Result};
use crate::nn::Matrix;

/// Stride-1, mean-subtracted windows of every sensor.
///
/// Points are ordered by window start `t`, then location `i`: the point at
/// `(t, i)` has index `t * sensors + i`, so each timestamp forms a
/// contiguous block of `sensors` rows.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowedDataset {
    window: usize,
    features: usize,
    sensors: usize,
    windows_per_sensor: usize,
    /// Absolute index of window start 0 in the source series.
    pub time_origin: usize,
    series: Matrix,
    means: Vec<f64>,
}

/// Borrowed view of one windowed point.
#[derive(Clone, Copy, Debug)]
pub struct WindowPoint<'a> {
    pub location: usize,
    pub time: usize,
    pub series: &'a [f64],
    pub mean: f64,
}

impl WindowedDataset {
    pub fn from_parts(
        window: usize,
        features: usize,
        sensors: usize,
        series: Matrix,
        means: Vec<f64>,
    ) -> Result<Self> {
        if sensors == 0 || series.rows() % sensors != 0 {
            return shape(format!(
                "{} rows do not split into blocks of {sensors} sensors",
                series.rows()
            ));
        }
        if series.cols() != window * features || means.len() != series.rows() {
            return shape("window matrix and means disagree with window x features");
        }
        Ok(Self {
            window,
            features,
            sensors,
            windows_per_sensor: series.rows() / sensors,
            time_origin: 0,
            series,
            means,
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn sensors(&self) -> usize {
        self.sensors
    }

    pub fn windows_per_sensor(&self) -> usize {
        self.windows_per_sensor
    }

    pub fn len(&self) -> usize {
        self.series.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.series.rows() == 0
    }

    pub fn index_of(&self, time: usize, location: usize) -> usize {
        time * self.sensors + location
    }

    pub fn point(&self, idx: usize) -> WindowPoint<'_> {
        WindowPoint {
            location: idx % self.sensors,
            time: idx / self.sensors,
            series: self.series.row(idx),
            mean: self.means[idx],
        }
    }

    pub fn points(&self) -> impl Iterator<Item = WindowPoint<'_>> {
        (0..self.len()).map(|i| self.point(i))
    }

    /// Mean-subtracted windows, one row per point.
    pub fn series(&self) -> &Matrix {
        &self.series
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Windows of the block at window start `time`, in location order.
    pub fn block(&self, time: usize) -> std::ops::Range<usize> {
        time * self.sensors..(time + 1) * self.sensors
    }

    /// CSV with columns `t,i,v0..v{w·f-1},window_mean`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string(), "i".to_string()];
        header.extend((0..self.window * self.features).map(|j| format!("v{j}")));
        header.push("window_mean".into());
        wtr.write_record(&header)?;
        for p in self.points() {
            let mut rec = vec![(p.time + self.time_origin).to_string(), p.location.to_string()];
            rec.extend(p.series.iter().map(|v| format!("{v:?}")));
            rec.push(format!("{:?}", p.mean));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv(input: impl Read, features: usize) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let width = rdr.headers()?.len();
        if width < 4 || (width - 3) % features != 0 {
            return data("windowed CSV needs t,i,v0..,window_mean columns");
        }
        let cols = width - 3;
        let mut rows = Vec::new();
        let mut means = Vec::new();
        let mut coords = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                rec.get(k)
                    .unwrap_or_default()
                    .parse::<f64>()
                    .map_err(|e| crate::Error::Data(format!("bad number in column {k}: {e}")))
            };
            coords.push((parse(0)? as usize, parse(1)? as usize));
            rows.push((0..cols).map(|k| parse(k + 2)).collect::<Result<Vec<_>>>()?);
            means.push(parse(width - 1)?);
        }
        let sensors = coords.iter().map(|c| c.1).max().map_or(0, |m| m + 1);
        let origin = coords.first().map_or(0, |c| c.0);
        for (idx, &(t, i)) in coords.iter().enumerate() {
            if (t - origin) * sensors + i != idx {
                return data(format!("row {idx} at (t={t}, i={i}) breaks (t, i) ordering"));
            }
        }
        let mut ds = Self::from_parts(cols / features, features, sensors, Matrix::from_rows(&rows)?, means)?;
        ds.time_origin = origin;
        Ok(ds)
    }
}

/// Stride-1 windows of length `w`, with each window's mean removed and kept.
/// Multi-feature windows are flattened feature-major.
pub fn sliding_window(series: &RasterSeries, w: usize) -> Result<WindowedDataset> {
    if w == 0 || w > series.timestamps() {
        return data(format!(
            "window {w} does not fit a series of {} timestamps",
            series.timestamps()
        ));
    }
    let (s, f) = (series.sensors(), series.features());
    let per_sensor = series.timestamps() - w + 1;
    let mut mat = Matrix::zeros(per_sensor * s, w * f);
    let mut means = Vec::with_capacity(per_sensor * s);
    for t in 0..per_sensor {
        for i in 0..s {
            let row = mat.row_mut(t * s + i);
            for feat in 0..f {
                row[feat * w..(feat + 1) * w].copy_from_slice(&series.channel(i, feat)[t..t + w]);
            }
            let mean = row.iter().sum::<f64>() / row.len() as f64;
            for v in row.iter_mut() {
                *v -= mean;
            }
            means.push(mean);
        }
    }
    WindowedDataset::from_parts(w, f, s, mat, means)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_count_and_ordering() {
        let r = RasterSeries::from_sensor_rows(&[
            vec![0.0, 1.0, 2.0, 3.0, 4.0],
            vec![10.0, 11.0, 12.0, 13.0, 14.0],
        ])
        .unwrap();
        let ds = sliding_window(&r, 3).unwrap();
        assert_eq!(ds.len(), 6);
        let p = ds.point(3);
        assert_eq!((p.time, p.location), (1, 1));
        assert_eq!(p.mean, 12.0);
        assert_eq!(p.series, &[-1.0, 0.0, 1.0]);
        assert_eq!(ds.index_of(2, 0), 4);
    }

    #[test]
    fn mean_is_subtracted() {
        let r = RasterSeries::from_sensor_rows(&[vec![0.2, 0.4, 0.6]]).unwrap();
        let ds = sliding_window(&r, 3).unwrap();
        let p = ds.point(0);
        assert!((p.mean - 0.4).abs() < 1e-15);
        let expected = [-0.2, 0.0, 0.2];
        for (a, b) in p.series.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn oversized_window_rejected() {
        let r = RasterSeries::from_sensor_rows(&[vec![0.0; 4]]).unwrap();
        assert!(sliding_window(&r, 5).is_err());
    }

    #[test]
    fn multi_feature_flattening_is_feature_major() {
        let r = RasterSeries::new(
            vec!["a".into()],
            vec!["0".into(), "1".into()],
            2,
            vec![1.0, 3.0, 10.0, 30.0],
            300,
        )
        .unwrap();
        let ds = sliding_window(&r, 2).unwrap();
        let p = ds.point(0);
        assert_eq!(p.mean, 11.0);
        assert_eq!(p.series, &[-10.0, -8.0, -1.0, 19.0]);
    }

    #[test]
    fn csv_round_trip() {
        let r = RasterSeries::from_sensor_rows(&[vec![0.1, 0.7, 0.3, 0.9], vec![0.5, 0.2, 0.8, 0.4]])
            .unwrap();
        let ds = sliding_window(&r, 2).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,i,v0,v1,window_mean\n"));
        let back = WindowedDataset::read_csv(buf.as_slice(), 1).unwrap();
        assert_eq!(back, ds);
    }
}
