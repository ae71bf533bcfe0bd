//! Line-oriented parameter files: one JSON header line, then one CSV line
//! per named tensor (`name,v0,v1,...`). Values are written in shortest
//! round-trip form, so a save/load cycle is bit-exact.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::matrix::Matrix;
use super::network::{Activation, DenseLayer, Network};
use crate::error::{data, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerHeader {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub dropout: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkHeader {
    pub layers: Vec<LayerHeader>,
    pub latent_index: usize,
    pub seed: u64,
}

pub fn write_tensor_file(
    mut out: impl Write,
    header: &Value,
    tensors: &[(String, &[f64])],
) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string(header)?)?;
    for (name, values) in tensors {
        write!(out, "{name}")?;
        for v in values.iter() {
            write!(out, ",{v:?}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_tensor_file(input: impl BufRead) -> Result<(Value, Vec<(String, Vec<f64>)>)> {
    let mut lines = input.lines();
    let header_line = match lines.next() {
        Some(line) => line?,
        None => return data("empty parameter file"),
    };
    let header: Value = serde_json::from_str(&header_line)?;
    let mut tensors = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let name = fields.next().unwrap_or_default().to_string();
        let values = fields
            .map(|f| {
                f.trim().parse::<f64>().map_err(|e| {
                    crate::Error::Data(format!("tensor line {}: bad value {f:?}: {e}", lineno + 2))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        tensors.push((name, values));
    }
    Ok((header, tensors))
}

impl Network {
    pub fn header(&self) -> NetworkHeader {
        NetworkHeader {
            layers: self
                .layers
                .iter()
                .map(|l| LayerHeader {
                    in_dim: l.in_dim(),
                    out_dim: l.out_dim(),
                    activation: l.activation,
                    dropout: l.dropout_rate,
                })
                .collect(),
            latent_index: self.latent_index,
            seed: self.rng_seed,
        }
    }

    /// Named flat tensors `layer{k}.weights`, `layer{k}.bias`.
    pub fn named_tensors(&self) -> Vec<(String, &[f64])> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(k, l)| {
                [
                    (format!("layer{k}.weights"), l.weights.as_slice()),
                    (format!("layer{k}.bias"), l.bias.as_slice()),
                ]
            })
            .collect()
    }

    /// Rebuilds a network from its header and the tensors named by
    /// [`Network::named_tensors`].
    pub fn from_parts(header: &NetworkHeader, tensors: &[(String, Vec<f64>)]) -> Result<Self> {
        let lookup = |name: &str| {
            tensors
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| crate::Error::Data(format!("missing tensor {name}")))
        };
        let mut layers = Vec::with_capacity(header.layers.len());
        for (k, lh) in header.layers.iter().enumerate() {
            let weights = Matrix::from_vec(lh.in_dim, lh.out_dim, lookup(&format!("layer{k}.weights"))?)?;
            let bias = lookup(&format!("layer{k}.bias"))?;
            layers.push(DenseLayer::new(weights, bias, lh.activation, lh.dropout)?);
        }
        Network::new(layers, header.latent_index, header.seed)
    }

    pub fn save(&self, out: impl Write) -> Result<()> {
        let header = serde_json::json!({ "network": self.header() });
        write_tensor_file(out, &header, &self.named_tensors())
    }

    pub fn load(input: impl BufRead) -> Result<Self> {
        let (header, tensors) = read_tensor_file(input)?;
        let net_header: NetworkHeader = serde_json::from_value(
            header
                .get("network")
                .cloned()
                .ok_or_else(|| crate::Error::Data("header lacks a network section".into()))?,
        )?;
        Self::from_parts(&net_header, &tensors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::network::Architecture;

    #[test]
    fn save_load_is_bit_exact() {
        let net = Network::from_architecture(&Architecture::traffic_default(18, 12), 99).unwrap();
        let mut buf = Vec::new();
        net.save(&mut buf).unwrap();
        let back = Network::load(buf.as_slice()).unwrap();
        assert_eq!(back, net);
        let first_line = String::from_utf8(buf).unwrap().lines().next().unwrap().to_string();
        assert!(first_line.contains("\"latent_index\":4"));
        assert!(first_line.contains("\"relu\""));
    }

    #[test]
    fn missing_tensor_is_an_error() {
        let net = Network::from_architecture(&Architecture::traffic_default(4, 4), 1).unwrap();
        let header = serde_json::json!({ "network": net.header() });
        let mut buf = Vec::new();
        write_tensor_file(&mut buf, &header, &net.named_tensors()[..3]).unwrap();
        assert!(Network::load(buf.as_slice()).is_err());
    }
}
