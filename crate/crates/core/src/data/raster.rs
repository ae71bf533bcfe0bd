use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{config, shape, Result};

/// Five minutes, the loop-detector aggregation period.
pub const DEFAULT_PERIOD_SECS: u64 = 300;

/// Dense georeferenced series: `sensors × timestamps × features`.
///
/// Sensor order is the line order of the road: sensor `i` neighbours
/// `i - 1` and `i + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RasterSeries {
    sensors: usize,
    timestamps: usize,
    features: usize,
    /// Layout `[(sensor * features + feature) * timestamps + t]`.
    values: Vec<f64>,
    pub sensor_ids: Vec<String>,
    pub time_labels: Vec<String>,
    pub period_secs: u64,
}

impl RasterSeries {
    /// `values` uses the `(sensor, feature, time)` layout.
    pub fn new(
        sensor_ids: Vec<String>,
        time_labels: Vec<String>,
        features: usize,
        values: Vec<f64>,
        period_secs: u64,
    ) -> Result<Self> {
        let sensors = sensor_ids.len();
        let timestamps = time_labels.len();
        if features == 0 {
            return config("a series needs at least one feature");
        }
        if values.len() != sensors * timestamps * features {
            return shape(format!(
                "{} values for {sensors} sensors x {timestamps} timestamps x {features} features",
                values.len()
            ));
        }
        Ok(Self {
            sensors,
            timestamps,
            features,
            values,
            sensor_ids,
            time_labels,
            period_secs,
        })
    }

    /// Single-feature series from one row of values per sensor.
    pub fn from_sensor_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let t = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != t) {
            return shape("sensor rows differ in length");
        }
        Self::new(
            (0..rows.len()).map(|i| format!("s{i}")).collect(),
            (0..t).map(|k| k.to_string()).collect(),
            1,
            rows.concat(),
            DEFAULT_PERIOD_SECS,
        )
    }

    pub fn sensors(&self) -> usize {
        self.sensors
    }

    pub fn timestamps(&self) -> usize {
        self.timestamps
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, sensor: usize, t: usize, feature: usize) -> f64 {
        self.values[(sensor * self.features + feature) * self.timestamps + t]
    }

    pub fn set(&mut self, sensor: usize, t: usize, feature: usize, value: f64) {
        self.values[(sensor * self.features + feature) * self.timestamps + t] = value;
    }

    /// Contiguous time series for one sensor and feature.
    pub fn channel(&self, sensor: usize, feature: usize) -> &[f64] {
        let start = (sensor * self.features + feature) * self.timestamps;
        &self.values[start..start + self.timestamps]
    }

    pub fn channel_mut(&mut self, sensor: usize, feature: usize) -> &mut [f64] {
        let start = (sensor * self.features + feature) * self.timestamps;
        &mut self.values[start..start + self.timestamps]
    }

    /// Copy restricted to a time range.
    pub fn slice_time(&self, range: Range<usize>) -> Result<Self> {
        if range.end > self.timestamps || range.start > range.end {
            return shape(format!(
                "time range {range:?} outside 0..{}",
                self.timestamps
            ));
        }
        let mut values = Vec::with_capacity(self.sensors * self.features * range.len());
        for s in 0..self.sensors {
            for f in 0..self.features {
                values.extend_from_slice(&self.channel(s, f)[range.clone()]);
            }
        }
        Self::new(
            self.sensor_ids.clone(),
            self.time_labels[range].to_vec(),
            self.features,
            values,
            self.period_secs,
        )
    }
}
