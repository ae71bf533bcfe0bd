use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use stdec::dec::{LossWeights, TrainConfig, Variant};
use stdec::dtw::{DtwConfig, PointCost};

use crate::error::{usage, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// k-means on pretrained autoencoder latents
    Kmeans,
    /// k-medoids under DTW on the raw windows
    KmeansDtw,
    Dec,
    Sdec,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Kmeans => "kmeans",
            ModelKind::KmeansDtw => "kmeans-dtw",
            ModelKind::Dec => "dec",
            ModelKind::Sdec => "sdec",
        }
    }

    /// Network variant, `None` for the DTW baseline.
    pub fn variant(self) -> Option<Variant> {
        match self {
            ModelKind::Kmeans => Some(Variant::KmeansAe),
            ModelKind::KmeansDtw => None,
            ModelKind::Dec => Some(Variant::Dec),
            ModelKind::Sdec => Some(Variant::Sdec),
        }
    }

    pub fn default_weights(self) -> LossWeights {
        match self {
            ModelKind::Kmeans | ModelKind::KmeansDtw => LossWeights::AUTOENCODER,
            ModelKind::Dec => LossWeights::DEC,
            ModelKind::Sdec => LossWeights::SPATIAL_DEC,
        }
    }

    pub fn from_variant(v: Variant) -> Self {
        match v {
            Variant::KmeansAe => ModelKind::Kmeans,
            Variant::Dec => ModelKind::Dec,
            Variant::Sdec => ModelKind::Sdec,
        }
    }
}

/// Generated dataset: contiguous regions with built-in daily prototypes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSource {
    pub sensors: usize,
    pub days: usize,
    pub regions: usize,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

impl FromStr for SynthSource {
    type Err = String;

    /// `sensors=12,days=14,regions=3,noise=0.05,seed=7`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = SynthSource { sensors: 0, days: 0, regions: 0, noise: 0.0, seed: 0 };
        let mut seen = [false; 3];
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got {part:?}"))?;
            let bad = |e: &dyn std::fmt::Display| format!("{key}: {e}");
            match key.trim() {
                "sensors" => (out.sensors, seen[0]) = (value.trim().parse().map_err(|e| bad(&e))?, true),
                "days" => (out.days, seen[1]) = (value.trim().parse().map_err(|e| bad(&e))?, true),
                "regions" => (out.regions, seen[2]) = (value.trim().parse().map_err(|e| bad(&e))?, true),
                "noise" => out.noise = value.trim().parse().map_err(|e| bad(&e))?,
                "seed" => out.seed = value.trim().parse().map_err(|e| bad(&e))?,
                other => return Err(format!("unknown key {other:?}")),
            }
        }
        if seen.contains(&false) {
            return Err("sensors, days and regions are required".into());
        }
        Ok(out)
    }
}

/// Inclusive range of candidate cluster counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KRange {
    pub min: usize,
    pub max: usize,
    #[serde(default = "one")]
    pub step: usize,
}

fn one() -> usize {
    1
}

impl KRange {
    pub fn values(&self) -> Vec<usize> {
        (self.min..=self.max).step_by(self.step.max(1)).collect()
    }
}

impl FromStr for KRange {
    type Err = String;

    /// `min:max` or `min:max:step`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}"));
        let range = match parts.as_slice() {
            [a, b] => KRange { min: num(a)?, max: num(b)?, step: 1 },
            [a, b, c] => KRange { min: num(a)?, max: num(b)?, step: num(c)? },
            _ => return Err(format!("expected min:max[:step], got {s:?}")),
        };
        if range.min == 0 || range.max < range.min || range.step == 0 {
            return Err(format!("invalid k range {s:?}"));
        }
        if range.values().len() < 3 {
            return Err("a k range needs at least three candidates".into());
        }
        Ok(range)
    }
}

/// Everything a run needs; loaded from `--config` and overridden by flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub synthetic: Option<SynthSource>,
    /// Custom spatial weight matrix (CSV); the line prior otherwise.
    pub lambda: Option<PathBuf>,
    pub w: usize,
    pub band: usize,
    pub point_cost: PointCost,
    pub train_fraction: Option<f64>,
    pub variant: ModelKind,
    pub k: usize,
    /// Pick `k` at the knee of this range instead of using `k`.
    pub elbow: Option<KRange>,
    /// Loss weights; the variant's defaults when absent.
    pub weights: Option<LossWeights>,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub pretrain_epochs: usize,
    pub early_stop: Option<f64>,
    pub learning_rate: f64,
    pub kmeans_restarts: usize,
    pub hidden: Vec<usize>,
    pub latent_position: usize,
    pub dropout: f64,
    /// Rows used to fit the DTW medoids.
    pub max_fit: usize,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            data: None,
            synthetic: None,
            lambda: None,
            w: 12,
            band: 6,
            point_cost: PointCost::SquaredDiff,
            train_fraction: None,
            variant: ModelKind::Sdec,
            k: t.k,
            elbow: None,
            weights: None,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            pretrain_epochs: t.pretrain_epochs,
            early_stop: t.early_stop,
            learning_rate: t.learning_rate,
            kmeans_restarts: t.kmeans_restarts,
            hidden: t.hidden,
            latent_position: t.latent_position,
            dropout: t.dropout,
            max_fit: 2000,
            out: None,
            seed: t.seed,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
    }

    pub fn weights(&self) -> LossWeights {
        self.weights.unwrap_or_else(|| self.variant.default_weights())
    }

    pub fn dtw(&self) -> DtwConfig {
        DtwConfig::new(self.band, self.point_cost)
    }

    pub fn train_config(&self, k: usize) -> TrainConfig {
        TrainConfig {
            k,
            weights: self.weights(),
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            pretrain_epochs: self.pretrain_epochs,
            early_stop: self.early_stop,
            learning_rate: self.learning_rate,
            kmeans_restarts: self.kmeans_restarts,
            hidden: self.hidden.clone(),
            latent_position: self.latent_position,
            dropout: self.dropout,
            seed: self.seed,
        }
    }

    /// Checks that do not need the data.
    pub fn validate(&self) -> CliResult<()> {
        match (&self.data, &self.synthetic) {
            (Some(_), Some(_)) => return Err(usage("give either a data file or a synthetic spec, not both")),
            (None, None) => return Err(usage("no data source: pass --data or --synthetic")),
            _ => {}
        }
        if let Some(s) = &self.synthetic {
            if s.regions == 0 || s.regions > s.sensors {
                return Err(usage(format!("cannot split {} sensors into {} regions", s.sensors, s.regions)));
            }
        }
        if self.w == 0 {
            return Err(usage("window length w must be at least 1"));
        }
        if self.band == 0 || self.band > self.w {
            return Err(usage(format!("band radius {} outside 1..={}", self.band, self.w)));
        }
        if let Some(f) = self.train_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(usage(format!("train fraction {f} outside (0, 1)")));
            }
        }
        if self.elbow.is_none() && self.k == 0 {
            return Err(usage("k must be at least 1"));
        }
        if self.max_fit == 0 {
            return Err(usage("max_fit must be at least 1"));
        }
        if let Some(v) = self.variant.variant() {
            self.train_config(self.k.max(1)).validate(v).map_err(|e| usage(e.to_string()))?;
        } else if self.weights.is_some_and(|w| w != LossWeights::AUTOENCODER) {
            return Err(usage("kmeans-dtw takes no loss weights"));
        }
        Ok(())
    }
}
