use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use stdec::data::WindowedDataset;
use stdec::dec::{anomaly_distance, encoder_inputs, soft_assign, Assignments, SavedModel};
use stdec::dtw::{dtw, DtwConfig};
use stdec::nn::Matrix;

use crate::config::ModelKind;
use crate::error::CliResult;

/// k-medoids under DTW: the medoid windows themselves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MedoidModel {
    pub dtw: DtwConfig,
    pub window: usize,
    pub sensors: usize,
    pub medoids: Vec<Vec<f64>>,
    pub fingerprint: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Network(SavedModel),
    Medoids(MedoidModel),
}

/// A model's view of a dataset.
pub struct Applied {
    pub labels: Vec<usize>,
    /// Encoder output, or the windows for the DTW baseline.
    pub latents: Matrix,
    pub assignments: Option<Assignments>,
    /// `windows per sensor × sensors` distance of each point to its cluster.
    pub anomaly: Matrix,
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Network(m) => ModelKind::from_variant(m.variant),
            Model::Medoids(_) => ModelKind::KmeansDtw,
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Model::Network(m) => m.head.k(),
            Model::Medoids(m) => m.medoids.len(),
        }
    }

    pub fn fingerprint(&self) -> Option<&str> {
        match self {
            Model::Network(m) => m.fingerprint.as_deref(),
            Model::Medoids(m) => m.fingerprint.as_deref(),
        }
    }

    fn shape(&self) -> (usize, usize) {
        match self {
            Model::Network(m) => (m.window, m.sensors),
            Model::Medoids(m) => (m.window, m.sensors),
        }
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let mut out = crate::dataset::create(path)?;
        match self {
            Model::Network(m) => m.save(&mut out)?,
            Model::Medoids(m) => {
                serde_json::to_writer(&mut out, m)?;
                writeln!(out)?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let open = || -> CliResult<BufReader<std::fs::File>> {
            let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            Ok(BufReader::new(file))
        };
        let mut first = String::new();
        open()?.read_line(&mut first)?;
        let header: serde_json::Value = serde_json::from_str(first.trim())
            .with_context(|| format!("{} is not a checkpoint", path.display()))?;
        if header.get("medoids").is_some() {
            let m: MedoidModel = serde_json::from_value(header)?;
            Ok(Model::Medoids(m))
        } else {
            let m = SavedModel::load(open()?).with_context(|| format!("loading {}", path.display()))?;
            Ok(Model::Network(m))
        }
    }

    /// Rejects datasets other than the one the model was trained on.
    pub fn check_dataset(&self, data: &WindowedDataset, fingerprint: &str) -> CliResult<()> {
        let (window, sensors) = self.shape();
        if window != data.window() || sensors != data.sensors() {
            return Err(anyhow::anyhow!(
                "dataset mismatch: model expects {sensors} sensors with window {window}, data has {} with window {}",
                data.sensors(),
                data.window()
            )
            .into());
        }
        if let Some(fp) = self.fingerprint() {
            if fp != fingerprint {
                return Err(anyhow::anyhow!(
                    "dataset mismatch: model was trained on data {}, evaluating {}",
                    &fp[..fp.len().min(12)],
                    &fingerprint[..fingerprint.len().min(12)]
                )
                .into());
            }
        }
        Ok(())
    }

    pub fn apply(&self, data: &WindowedDataset) -> CliResult<Applied> {
        let s = data.sensors();
        match self {
            Model::Network(m) => {
                let latents = m.network.encode(&encoder_inputs(data))?;
                let assignments = Assignments::from_q(soft_assign(&latents, &m.head)?, s)?;
                let anomaly = anomaly_distance(&assignments, &latents, &m.head, s)?;
                Ok(Applied {
                    labels: assignments.hard.clone(),
                    latents,
                    assignments: Some(assignments),
                    anomaly,
                })
            }
            Model::Medoids(m) => {
                let mut labels = Vec::with_capacity(data.len());
                let mut dist = Vec::with_capacity(data.len());
                for row in data.series().iter_rows() {
                    let mut best = (0, f64::INFINITY);
                    for (j, med) in m.medoids.iter().enumerate() {
                        let d = dtw(row, med, &m.dtw)?;
                        if d < best.1 {
                            best = (j, d);
                        }
                    }
                    labels.push(best.0);
                    dist.push(best.1);
                }
                Ok(Applied {
                    labels,
                    latents: data.series().clone(),
                    assignments: None,
                    anomaly: Matrix::from_vec(data.windows_per_sensor(), s, dist)?,
                })
            }
        }
    }
}

/// CSV `t,i,hard` for models without soft assignments.
pub fn write_hard_csv(labels: &[usize], sensors: usize, out: impl Write, time_origin: usize) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "i", "hard"])?;
    for (r, l) in labels.iter().enumerate() {
        w.write_record([(r / sensors + time_origin).to_string(), (r % sensors).to_string(), l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// CSV `t,i,z0..` of one latent row per point.
pub fn write_latent_csv(latents: &Matrix, sensors: usize, out: impl Write, time_origin: usize) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string(), "i".to_string()];
    header.extend((0..latents.cols()).map(|c| format!("z{c}")));
    w.write_record(&header)?;
    for (r, z) in latents.iter_rows().enumerate() {
        let mut rec = vec![(r / sensors + time_origin).to_string(), (r % sensors).to_string()];
        rec.extend(z.iter().map(|v| format!("{v:?}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// CSV `t,s0..` of hard labels, one row per timestamp.
pub fn write_label_grid_csv(labels: &[usize], sensors: usize, out: impl Write, time_origin: usize) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((0..sensors).map(|i| format!("s{i}")));
    w.write_record(&header)?;
    for (t, row) in labels.chunks(sensors).enumerate() {
        let mut rec = vec![(t + time_origin).to_string()];
        rec.extend(row.iter().map(usize::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

