use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::head::{argmax_rows, soft_assign, target_distribution, Assignments, ClusterHead};
use super::loss::{joint_loss, JointBatch, LossParts, LossWeights, SpatialBatch};
use crate::data::WindowedDataset;
use crate::error::{config, Result};
use crate::kmeans::kmeans;
use crate::nn::{AdamState, Architecture, Matrix, Mode, Network};
use crate::spatial::SpatialWeights;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Pretrained autoencoder plus k-means on the latents; no joint phase.
    KmeansAe,
    Dec,
    Sdec,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::KmeansAe => "kmeans-ae",
            Variant::Dec => "dec",
            Variant::Sdec => "sdec",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub k: usize,
    pub weights: LossWeights,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub pretrain_epochs: usize,
    /// Stop once fewer than this fraction of hard assignments change
    /// between epochs; `None` disables early stopping.
    pub early_stop: Option<f64>,
    pub learning_rate: f64,
    pub kmeans_restarts: usize,
    pub hidden: Vec<usize>,
    pub latent_position: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k: 80,
            weights: LossWeights::SPATIAL_DEC,
            batch_size: 288,
            max_epochs: 100,
            pretrain_epochs: 30,
            early_stop: Some(0.001),
            learning_rate: 1e-3,
            kmeans_restarts: 10,
            hidden: vec![8, 8, 128, 4, 128, 8, 8],
            latent_position: 3,
            dropout: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, variant: Variant) -> Result<()> {
        if self.k == 0 {
            return config("k must be at least 1");
        }
        if self.batch_size == 0 {
            return config("batch_size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return config("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return config("dropout must lie in [0, 1)");
        }
        if let Some(tol) = self.early_stop {
            if !(0.0..=1.0).contains(&tol) {
                return config("early_stop must lie in [0, 1]");
            }
        }
        if self.latent_position >= self.hidden.len() {
            return config("latent_position must index a hidden layer");
        }
        if variant != Variant::KmeansAe {
            self.weights.validate()?;
        }
        if variant == Variant::Dec && self.weights.alpha0 != 0.0 {
            return config(format!("alpha0 must be 0 for dec, got {}", self.weights.alpha0));
        }
        Ok(())
    }

    pub fn architecture(&self, input_dim: usize, output_dim: usize) -> Architecture {
        Architecture {
            input_dim,
            hidden: self.hidden.clone(),
            latent_position: self.latent_position,
            output_dim,
            dropout: self.dropout,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pretrain,
    Joint,
}

/// Sample-weighted means of the loss terms over one epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub phase: Phase,
    pub parts: LossParts,
    /// Share of hard assignments that changed since the previous epoch.
    pub changed_fraction: Option<f64>,
}

pub fn write_log_csv(log: &[EpochLog], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "phase", "spatial", "kl", "reconstruction", "total", "changed_fraction"])?;
    for e in log {
        let phase = match e.phase {
            Phase::Pretrain => "pretrain",
            Phase::Joint => "joint",
        };
        w.write_record([
            e.epoch.to_string(),
            phase.to_string(),
            format!("{:?}", e.parts.spatial),
            format!("{:?}", e.parts.kl),
            format!("{:?}", e.parts.reconstruction),
            format!("{:?}", e.parts.total),
            e.changed_fraction.map_or(String::new(), |c| format!("{c:?}")),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub struct TrainedModel {
    pub variant: Variant,
    pub config: TrainConfig,
    pub network: Network,
    pub head: ClusterHead,
    /// Eval-mode latents of every point after training.
    pub latents: Matrix,
    pub assignments: Assignments,
    pub log: Vec<EpochLog>,
    /// True when the assignment-change criterion ended the joint phase.
    pub converged: bool,
}

/// Encoder inputs `[x, g]`: each window followed by its location one-hot.
pub fn encoder_inputs(data: &WindowedDataset) -> Matrix {
    let (n, m, s) = (data.len(), data.series().cols(), data.sensors());
    let mut inputs = Matrix::zeros(n, m + s);
    for (r, point) in data.points().enumerate() {
        let row = inputs.row_mut(r);
        row[..m].copy_from_slice(point.series);
        row[m + point.location] = 1.0;
    }
    inputs
}

fn batches(timestamps: usize, sensors: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..timestamps).collect();
    order.shuffle(rng);
    let per_batch = batch_size.div_ceil(sensors).max(1);
    order
        .chunks(per_batch)
        .map(|chunk| {
            chunk
                .iter()
                .flat_map(|&t| t * sensors..(t + 1) * sensors)
                .collect()
        })
        .collect()
}

fn accumulate(sum: &mut LossParts, parts: &LossParts, rows: usize) {
    let w = rows as f64;
    sum.spatial += parts.spatial * w;
    sum.kl += parts.kl * w;
    sum.reconstruction += parts.reconstruction * w;
    sum.total += parts.total * w;
}

fn averaged(mut sum: LossParts, rows: usize) -> LossParts {
    let w = 1.0 / rows.max(1) as f64;
    sum.spatial *= w;
    sum.kl *= w;
    sum.reconstruction *= w;
    sum.total *= w;
    sum
}

/// Autoencoder pretraining with reconstruction only.
fn pretrain(
    net: &mut Network,
    data: &WindowedDataset,
    inputs: &Matrix,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    log: &mut Vec<EpochLog>,
) -> Result<()> {
    let shapes: Vec<usize> = net.param_slices().iter().map(|s| s.len()).collect();
    let mut adam = AdamState::new(&shapes, cfg.learning_rate);
    // unused by the reconstruction-only loss; any width-matching head works
    let dummy = ClusterHead::new(Matrix::zeros(1, net.latent_dim()))?;
    for epoch in 0..cfg.pretrain_epochs {
        let mut sum = LossParts::default();
        for idx in batches(data.windows_per_sensor(), data.sensors(), cfg.batch_size, rng) {
            let batch_inputs = inputs.select_rows(&idx);
            let targets = data.series().select_rows(&idx);
            let batch = JointBatch { inputs: &batch_inputs, targets: &targets, p: None, spatial: None };
            let res = joint_loss(net, &dummy, &batch, &LossWeights::AUTOENCODER, Mode::Train(&mut *rng))?;
            accumulate(&mut sum, &res.parts, idx.len());
            let grads = res.grads.slices();
            adam.step(&mut net.param_slices_mut(), &grads)?;
        }
        log.push(EpochLog {
            epoch,
            phase: Phase::Pretrain,
            parts: averaged(sum, data.len()),
            changed_fraction: None,
        });
    }
    Ok(())
}

/// Full clustering procedure: pretraining, k-means initialization of the
/// centroids, then (for DEC variants) joint self-training with per-epoch
/// refresh of the targets and latent snapshot.
pub fn train(
    data: &WindowedDataset,
    lambda: Option<&SpatialWeights>,
    cfg: &TrainConfig,
    variant: Variant,
) -> Result<TrainedModel> {
    cfg.validate(variant)?;
    let s = data.sensors();
    if cfg.k > data.len() {
        return config(format!("k = {} exceeds the {} points", cfg.k, data.len()));
    }
    let spatial_on = variant == Variant::Sdec && cfg.weights.alpha0 > 0.0;
    if spatial_on {
        match lambda {
            None => return config("sdec with alpha0 > 0 needs spatial weights"),
            Some(l) if l.sensors() != s => {
                return config(format!("spatial weights cover {} sensors, data has {s}", l.sensors()))
            }
            Some(_) => {}
        }
    }

    let inputs = encoder_inputs(data);
    let arch = cfg.architecture(inputs.cols(), data.series().cols());
    let mut net = Network::from_architecture(&arch, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut log = Vec::new();
    pretrain(&mut net, data, &inputs, cfg, &mut rng, &mut log)?;

    let z = net.encode(&inputs)?;
    let init = kmeans(&z, cfg.k, cfg.kmeans_restarts, cfg.seed.wrapping_add(2))?;
    let mut head = ClusterHead::new(init.centroids)?;

    let mut converged = false;
    if variant != Variant::KmeansAe {
        let mut shapes: Vec<usize> = net.param_slices().iter().map(|s| s.len()).collect();
        shapes.push(head.centroids.as_slice().len());
        let mut adam = AdamState::new(&shapes, cfg.learning_rate);
        let mut previous: Option<Vec<usize>> = None;
        for epoch in 0..cfg.max_epochs {
            let snapshot = net.encode(&inputs)?;
            let q = soft_assign(&snapshot, &head)?;
            let p = target_distribution(&q)?;
            let hard = argmax_rows(&q);
            let changed = previous.as_ref().map(|prev| {
                prev.iter().zip(&hard).filter(|(a, b)| a != b).count() as f64 / hard.len() as f64
            });
            if let (Some(c), Some(tol)) = (changed, cfg.early_stop) {
                if c < tol {
                    converged = true;
                    break;
                }
            }
            previous = Some(hard);

            let mut sum = LossParts::default();
            for idx in batches(data.windows_per_sensor(), s, cfg.batch_size, &mut rng) {
                let batch_inputs = inputs.select_rows(&idx);
                let targets = data.series().select_rows(&idx);
                let batch_p = p.select_rows(&idx);
                let points: Vec<(usize, usize)> = idx.iter().map(|&r| (r % s, r / s)).collect();
                let spatial = match (spatial_on, lambda) {
                    (true, Some(weights)) => Some(SpatialBatch { weights, snapshot: &snapshot, points: &points }),
                    _ => None,
                };
                let batch = JointBatch {
                    inputs: &batch_inputs,
                    targets: &targets,
                    p: Some(&batch_p),
                    spatial,
                };
                let weights = if spatial_on {
                    cfg.weights
                } else {
                    LossWeights { alpha0: 0.0, ..cfg.weights }
                };
                let res = joint_loss(&net, &head, &batch, &weights, Mode::Train(&mut rng))?;
                accumulate(&mut sum, &res.parts, idx.len());
                let mut grads = res.grads.slices();
                grads.push(res.centroid_grad.as_slice());
                let mut params = net.param_slices_mut();
                params.push(head.centroids.as_mut_slice());
                adam.step(&mut params, &grads)?;
            }
            log.push(EpochLog {
                epoch,
                phase: Phase::Joint,
                parts: averaged(sum, data.len()),
                changed_fraction: changed,
            });
        }
    }

    let latents = net.encode(&inputs)?;
    let q = soft_assign(&latents, &head)?;
    let assignments = Assignments::from_q(q, s)?;
    Ok(TrainedModel {
        variant,
        config: cfg.clone(),
        network: net,
        head,
        latents,
        assignments,
        log,
        converged,
    })
}
