use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::head::ClusterHead;
use super::train::{TrainConfig, Variant};
use crate::error::{data, Result};
use crate::nn::checkpoint::{read_tensor_file, write_tensor_file, NetworkHeader};
use crate::nn::{Matrix, Network};

/// Everything needed to re-encode and re-assign a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct SavedModel {
    pub variant: Variant,
    pub config: TrainConfig,
    pub network: Network,
    pub head: ClusterHead,
    pub window: usize,
    pub sensors: usize,
    /// Digest of the training dataset, for mismatch detection.
    pub fingerprint: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    network: NetworkHeader,
    variant: Variant,
    config: TrainConfig,
    k: usize,
    latent_dim: usize,
    window: usize,
    sensors: usize,
    fingerprint: Option<String>,
}

const CENTROIDS: &str = "centroids";

impl SavedModel {
    /// One JSON header line followed by one CSV line per tensor.
    pub fn save(&self, out: impl Write) -> Result<()> {
        let header = Header {
            network: self.network.header(),
            variant: self.variant,
            config: self.config.clone(),
            k: self.head.k(),
            latent_dim: self.head.dim(),
            window: self.window,
            sensors: self.sensors,
            fingerprint: self.fingerprint.clone(),
        };
        let mut tensors = self.network.named_tensors();
        tensors.push((CENTROIDS.to_string(), self.head.centroids.as_slice()));
        write_tensor_file(out, &serde_json::to_value(&header)?, &tensors)
    }

    pub fn load(input: impl BufRead) -> Result<Self> {
        let (value, tensors) = read_tensor_file(input)?;
        let header: Header = serde_json::from_value(value)?;
        let network = Network::from_parts(&header.network, &tensors)?;
        let Some((_, centroids)) = tensors.iter().find(|(n, _)| n == CENTROIDS) else {
            return data("checkpoint lacks centroids");
        };
        let head = ClusterHead::new(Matrix::from_vec(header.k, header.latent_dim, centroids.clone())?)?;
        Ok(Self {
            variant: header.variant,
            config: header.config,
            network,
            head,
            window: header.window,
            sensors: header.sensors,
            fingerprint: header.fingerprint,
        })
    }
}
