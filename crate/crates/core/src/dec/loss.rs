use serde::{Deserialize, Serialize};

use super::head::{kl_loss_and_grad, ClusterHead};
use crate::error::{config, shape, Result};
use crate::nn::{Gradients, Matrix, Mode, Network};
use crate::spatial::SpatialWeights;

/// Weights of the spatial, clustering and reconstruction terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl LossWeights {
    pub const AUTOENCODER: Self = Self { alpha0: 0.0, alpha1: 0.0, alpha2: 1.0 };
    pub const DEC: Self = Self { alpha0: 0.0, alpha1: 0.2, alpha2: 1.0 };
    pub const SPATIAL_DEC: Self = Self { alpha0: 0.1, alpha1: 0.2, alpha2: 1.0 };

    pub fn new(alpha0: f64, alpha1: f64, alpha2: f64) -> Result<Self> {
        let w = Self { alpha0, alpha1, alpha2 };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha0, self.alpha1, self.alpha2];
        if all.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return config(format!("loss weights must be finite and >= 0, got {all:?}"));
        }
        if all.iter().all(|&a| a == 0.0) {
            return config("at least one loss weight must be positive");
        }
        Ok(())
    }
}

/// Spatial term for one latent against the detached snapshots of every
/// location at the same timestamp: `Σ_k (λ_ik/2)·||z − z̄_k||²` and its
/// gradient `Σ_k λ_ik·(z − z̄_k)`.
pub fn spatial_loss_and_grad(z: &[f64], snapshot: &Matrix, lambda_row: &[f64]) -> Result<(f64, Vec<f64>)> {
    if snapshot.rows() != lambda_row.len() || snapshot.cols() != z.len() {
        return shape(format!(
            "snapshot {:?} against latent width {} and {} weights",
            snapshot.shape(),
            z.len(),
            lambda_row.len()
        ));
    }
    let mut grad = vec![0.0; z.len()];
    let loss = spatial_accumulate(z, snapshot.as_slice(), lambda_row, &mut grad);
    Ok((loss, grad))
}

/// `block` holds one snapshot row per weight, flattened; the gradient is
/// added into `grad`.
fn spatial_accumulate(z: &[f64], block: &[f64], lambda_row: &[f64], grad: &mut [f64]) -> f64 {
    let mut loss = 0.0;
    for (zbar, &l) in block.chunks_exact(z.len()).zip(lambda_row) {
        if l == 0.0 {
            continue;
        }
        for (a, g) in grad.iter_mut().enumerate() {
            let diff = z[a] - zbar[a];
            loss += 0.5 * l * diff * diff;
            *g += l * diff;
        }
    }
    loss
}

/// Spatial context of a batch: the full-dataset latent snapshot (rows in
/// `t * sensors + i` order) and the `(location, time)` of each batch row.
pub struct SpatialBatch<'a> {
    pub weights: &'a SpatialWeights,
    pub snapshot: &'a Matrix,
    pub points: &'a [(usize, usize)],
}

/// One mini-batch: encoder inputs `[x, g]`, reconstruction targets `x`,
/// clustering targets `p`, and the optional spatial context.
pub struct JointBatch<'a> {
    pub inputs: &'a Matrix,
    pub targets: &'a Matrix,
    pub p: Option<&'a Matrix>,
    pub spatial: Option<SpatialBatch<'a>>,
}

/// Per-term batch means; `total` is their weighted sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LossParts {
    pub spatial: f64,
    pub kl: f64,
    pub reconstruction: f64,
    pub total: f64,
}

/// Joint loss on given activations, with gradients at the output and latent
/// layers and for the centroids.
pub struct HeadEval {
    pub parts: LossParts,
    pub output_grad: Matrix,
    pub latent_grad: Matrix,
    pub centroid_grad: Matrix,
}

pub struct JointLoss {
    pub parts: LossParts,
    pub grads: Gradients,
    pub centroid_grad: Matrix,
}

/// Loss from latent and output activations. The reconstruction term is half
/// the per-point mean squared error; the spatial term is averaged over the
/// `s` pair rows of each point, matching training on the pair-expanded set.
pub fn evaluate_heads(
    latent: &Matrix,
    output: &Matrix,
    head: &ClusterHead,
    batch: &JointBatch<'_>,
    weights: &LossWeights,
) -> Result<HeadEval> {
    weights.validate()?;
    let n = latent.rows();
    if output.shape() != batch.targets.shape() {
        return shape(format!("output {:?} vs targets {:?}", output.shape(), batch.targets.shape()));
    }
    let scale = 1.0 / n.max(1) as f64;
    let mut parts = LossParts::default();
    let mut output_grad = Matrix::zeros(output.rows(), output.cols());
    let mut latent_grad = Matrix::zeros(n, latent.cols());
    let mut centroid_grad = Matrix::zeros(head.k(), head.dim());

    if weights.alpha2 > 0.0 {
        let m = output.cols() as f64;
        let mut rec = 0.0;
        for (g, (o, t)) in output_grad
            .as_mut_slice()
            .iter_mut()
            .zip(output.as_slice().iter().zip(batch.targets.as_slice()))
        {
            let diff = o - t;
            rec += diff * diff;
            *g = weights.alpha2 * diff * scale / m;
        }
        parts.reconstruction = 0.5 * rec * scale / m;
    }

    if weights.alpha1 > 0.0 {
        let Some(p) = batch.p else {
            return config("a clustering weight needs target distributions");
        };
        let kl = kl_loss_and_grad(latent, head, p)?;
        parts.kl = kl.loss;
        for (g, k) in latent_grad.as_mut_slice().iter_mut().zip(kl.z_grad.as_slice()) {
            *g += weights.alpha1 * k;
        }
        for (g, k) in centroid_grad.as_mut_slice().iter_mut().zip(kl.centroid_grad.as_slice()) {
            *g += weights.alpha1 * k;
        }
    }

    if weights.alpha0 > 0.0 {
        let Some(sp) = &batch.spatial else {
            return config("a spatial weight needs spatial weights and a latent snapshot");
        };
        if sp.points.len() != n {
            return shape(format!("{} spatial points for {n} batch rows", sp.points.len()));
        }
        let s = sp.weights.sensors();
        if sp.snapshot.cols() != latent.cols() {
            return shape("snapshot width differs from latent width");
        }
        let per_pair = 1.0 / s as f64;
        let mut total = 0.0;
        let mut grad = vec![0.0; latent.cols()];
        for (r, &(i, t)) in sp.points.iter().enumerate() {
            let start = t * s;
            if i >= s || start + s > sp.snapshot.rows() {
                return shape(format!("no snapshot for location {i} at timestamp {t}"));
            }
            let d = latent.cols();
            let block = &sp.snapshot.as_slice()[start * d..(start + s) * d];
            grad.fill(0.0);
            total += spatial_accumulate(latent.row(r), block, sp.weights.row(i), &mut grad);
            for (g, v) in latent_grad.row_mut(r).iter_mut().zip(&grad) {
                *g += weights.alpha0 * v * per_pair * scale;
            }
        }
        parts.spatial = total * per_pair * scale;
    }

    parts.total =
        weights.alpha0 * parts.spatial + weights.alpha1 * parts.kl + weights.alpha2 * parts.reconstruction;
    Ok(HeadEval {
        parts,
        output_grad,
        latent_grad,
        centroid_grad,
    })
}

/// Forward pass, joint loss and backpropagated gradients for one batch.
pub fn joint_loss(
    net: &Network,
    head: &ClusterHead,
    batch: &JointBatch<'_>,
    weights: &LossWeights,
    mode: Mode<'_>,
) -> Result<JointLoss> {
    if net.latent_dim() != head.dim() {
        return shape(format!("latent width {} vs centroid width {}", net.latent_dim(), head.dim()));
    }
    let pass = net.forward(batch.inputs, mode)?;
    let eval = evaluate_heads(&pass.latent, &pass.output, head, batch, weights)?;
    let grads = net.backward(&pass, &eval.output_grad, &eval.latent_grad)?;
    Ok(JointLoss {
        parts: eval.parts,
        grads,
        centroid_grad: eval.centroid_grad,
    })
}
