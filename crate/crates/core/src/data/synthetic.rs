use std::ops::Range;

use chrono::{Duration, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::raster::{RasterSeries, DEFAULT_PERIOD_SECS};
use crate::error::{config, Result};

pub const STEPS_PER_DAY: usize = 288;

/// Gaussian bump in the daily profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub hour: f64,
    pub width_hours: f64,
    pub height: f64,
}

/// Daily flow profile in normalized units (peak flow near 1): a night floor
/// rising to a daytime plateau, plus rush-hour peaks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DailyPattern {
    pub night_level: f64,
    pub day_level: f64,
    pub peaks: Vec<Peak>,
}

impl DailyPattern {
    pub fn value_at(&self, hour: f64) -> f64 {
        // smooth ramp up around 6h and down around 21h
        let rise = 1.0 / (1.0 + (-(hour - 6.0) * 1.5).exp());
        let fall = 1.0 / (1.0 + ((hour - 21.0) * 1.2).exp());
        let base = self.night_level + (self.day_level - self.night_level) * rise * fall;
        let bumps: f64 = self
            .peaks
            .iter()
            .map(|p| p.height * (-(hour - p.hour).powi(2) / (2.0 * p.width_hours.powi(2))).exp())
            .sum();
        base + bumps
    }

    /// Deterministic, mutually distinct prototypes for `region` in `0..n`.
    pub fn for_region(region: usize) -> Self {
        match region {
            0 => Self {
                night_level: 0.05,
                day_level: 0.35,
                peaks: vec![
                    Peak { hour: 8.0, width_hours: 1.0, height: 0.55 },
                    Peak { hour: 17.5, width_hours: 1.3, height: 0.225 },
                ],
            },
            1 => Self {
                night_level: 0.075,
                day_level: 0.275,
                peaks: vec![
                    Peak { hour: 7.0, width_hours: 1.2, height: 0.175 },
                    Peak { hour: 18.0, width_hours: 1.0, height: 0.6 },
                ],
            },
            2 => Self {
                night_level: 0.0375,
                day_level: 0.4,
                peaks: vec![Peak { hour: 12.5, width_hours: 2.2, height: 0.375 }],
            },
            r => {
                // golden-ratio offsets spread further prototypes over the day
                let a = (r as f64 * 0.618_033_988_75).fract();
                let b = (r as f64 * 0.414_213_562_37).fract();
                Self {
                    night_level: 0.025 + 0.075 * b,
                    day_level: 0.25 + 0.2 * a,
                    peaks: vec![
                        Peak { hour: 6.5 + 5.0 * a, width_hours: 0.8 + b, height: 0.2 + 0.45 * b },
                        Peak { hour: 15.0 + 4.5 * b, width_hours: 1.0 + a, height: 0.15 + 0.4 * a },
                    ],
                }
            }
        }
    }
}

/// Multiplicative flow disruption on one sensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedDrop {
    pub sensor: usize,
    pub start: usize,
    pub len: usize,
    pub factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub sensors: usize,
    pub days: usize,
    /// Contiguous sensor ranges partitioning `0..sensors`.
    pub regions: Vec<Range<usize>>,
    pub prototypes: Vec<DailyPattern>,
    pub noise_std: f64,
    pub seed: u64,
    #[serde(default)]
    pub anomalies: Vec<PlantedDrop>,
}

impl SyntheticSpec {
    /// `n_regions` contiguous, near-equal regions with the built-in prototypes.
    pub fn with_regions(sensors: usize, days: usize, n_regions: usize, noise_std: f64, seed: u64) -> Result<Self> {
        if n_regions == 0 || n_regions > sensors {
            return config(format!("cannot split {sensors} sensors into {n_regions} regions"));
        }
        let regions = (0..n_regions)
            .map(|r| (r * sensors / n_regions)..((r + 1) * sensors / n_regions))
            .collect();
        Ok(Self {
            sensors,
            days,
            regions,
            prototypes: (0..n_regions).map(DailyPattern::for_region).collect(),
            noise_std,
            seed,
            anomalies: Vec::new(),
        })
    }

    pub fn timestamps(&self) -> usize {
        self.days * STEPS_PER_DAY
    }

    fn validate(&self) -> Result<()> {
        if self.sensors == 0 || self.days == 0 {
            return config("synthetic data needs at least one sensor and one day");
        }
        if self.regions.is_empty() {
            return config("synthetic data needs at least one region");
        }
        if self.prototypes.len() != self.regions.len() {
            return config(format!(
                "{} prototypes for {} regions",
                self.prototypes.len(),
                self.regions.len()
            ));
        }
        if !(self.noise_std >= 0.0) {
            return config(format!("noise_std must be >= 0, got {}", self.noise_std));
        }
        let mut next = 0;
        for (r, range) in self.regions.iter().enumerate() {
            if range.is_empty() {
                return config(format!("region {r} is empty"));
            }
            if range.start != next {
                return config(format!("region {r} starts at {} instead of {next}", range.start));
            }
            next = range.end;
        }
        if next != self.sensors {
            return config(format!("regions cover 0..{next}, not 0..{}", self.sensors));
        }
        for a in &self.anomalies {
            if a.sensor >= self.sensors || a.start + a.len > self.timestamps() {
                return config(format!("planted drop {a:?} falls outside the data"));
            }
        }
        Ok(())
    }
}

/// Synthetic flows plus each sensor's region label.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(RasterSeries, Vec<usize>)> {
    spec.validate()?;
    let steps = spec.timestamps();
    let mut labels = vec![0; spec.sensors];
    for (r, range) in spec.regions.iter().enumerate() {
        labels[range.clone()].fill(r);
    }
    let profiles: Vec<Vec<f64>> = spec
        .prototypes
        .iter()
        .map(|p| {
            (0..STEPS_PER_DAY)
                .map(|k| p.value_at(k as f64 * 24.0 / STEPS_PER_DAY as f64))
                .collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_std.max(f64::MIN_POSITIVE))
        .map_err(|e| crate::Error::Config(e.to_string()))?;
    let mut values = Vec::with_capacity(spec.sensors * steps);
    for &region in &labels {
        for t in 0..steps {
            let mut v = profiles[region][t % STEPS_PER_DAY];
            if spec.noise_std > 0.0 {
                v += noise.sample(&mut rng);
            }
            values.push(v.max(0.0));
        }
    }
    for a in &spec.anomalies {
        for t in a.start..a.start + a.len {
            values[a.sensor * steps + t] *= a.factor;
        }
    }

    let start = NaiveDate::from_ymd_opt(2016, 1, 1)
        .expect("valid date")
        .and_hms_opt(0, 0, 0)
        .expect("valid time");
    let period = Duration::seconds(DEFAULT_PERIOD_SECS as i64);
    let time_labels = (0..steps)
        .map(|t| (start + period * t as i32).format("%Y-%m-%d %H:%M:%S").to_string())
        .collect();
    let series = RasterSeries::new(
        (0..spec.sensors).map(|i| format!("s{i}")).collect(),
        time_labels,
        1,
        values,
        DEFAULT_PERIOD_SECS,
    )?;
    Ok((series, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_regions_are_identical() {
        let spec = SyntheticSpec::with_regions(6, 2, 2, 0.0, 1).unwrap();
        let (series, labels) = generate_synthetic(&spec).unwrap();
        assert_eq!(labels, vec![0, 0, 0, 1, 1, 1]);
        assert_eq!(series.channel(0, 0), series.channel(2, 0));
        assert_eq!(series.channel(3, 0), series.channel(5, 0));
        assert_ne!(series.channel(0, 0), series.channel(3, 0));
        assert_eq!(series.timestamps(), 2 * STEPS_PER_DAY);
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let spec = SyntheticSpec::with_regions(4, 1, 2, 0.05, 42).unwrap();
        assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
        let other = SyntheticSpec { seed: 43, ..spec.clone() };
        assert_ne!(generate_synthetic(&spec).unwrap().0, generate_synthetic(&other).unwrap().0);
    }

    #[test]
    fn empty_region_is_rejected() {
        let mut spec = SyntheticSpec::with_regions(4, 1, 2, 0.0, 0).unwrap();
        spec.regions = vec![0..4, 4..4];
        assert!(generate_synthetic(&spec).is_err());
        assert!(SyntheticSpec::with_regions(4, 1, 0, 0.0, 0).is_err());
    }

    #[test]
    fn planted_drop_scales_flow() {
        let mut spec = SyntheticSpec::with_regions(2, 1, 1, 0.0, 0).unwrap();
        spec.anomalies.push(PlantedDrop { sensor: 1, start: 100, len: 12, factor: 0.1 });
        let (series, _) = generate_synthetic(&spec).unwrap();
        let a = series.get(0, 105, 0);
        assert!((series.get(1, 105, 0) - 0.1 * a).abs() < 1e-9);
        assert_eq!(series.get(1, 112, 0), series.get(0, 112, 0));
    }
}
