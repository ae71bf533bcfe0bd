use super::matrix::Matrix;
use super::network::{Mode, Network};
use crate::error::{Error, Result};

/// Denominator floor for relative errors, so gradients that are zero on both
/// sides compare as equal.
pub const REL_ERR_FLOOR: f64 = 1e-5;

const BASE_STEP: f64 = 1e-5;

/// Loss value plus its gradients with respect to the network output and latent.
#[derive(Clone, Debug)]
pub struct LossEval {
    pub loss: f64,
    pub output_grad: Matrix,
    pub latent_grad: Matrix,
}

/// A differentiable loss on the latent and output activations of a network.
pub trait Objective {
    fn evaluate(&self, latent: &Matrix, output: &Matrix) -> Result<LossEval>;
}

impl<F> Objective for F
where
    F: Fn(&Matrix, &Matrix) -> Result<LossEval>,
{
    fn evaluate(&self, latent: &Matrix, output: &Matrix) -> Result<LossEval> {
        self(latent, output)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// `(tensor, offset)` of the worst parameter in [`Network::param_slices`] order.
    pub worst: (usize, usize),
    pub checked: usize,
    pub pass: bool,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Central difference of `f` at `x` along every coordinate, with the step
/// scaled by the coordinate magnitude.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|j| {
            let h = BASE_STEP * x[j].abs().max(1.0);
            probe[j] = x[j] + h;
            let up = f(&probe);
            probe[j] = x[j] - h;
            let down = f(&probe);
            probe[j] = x[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Compares backpropagated parameter gradients of `objective` against central
/// finite differences. Dropout is disabled throughout.
pub fn finite_diff_check(
    net: &Network,
    objective: &impl Objective,
    input: &Matrix,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let loss_at = |candidate: &Network| -> Result<f64> {
        let pass = candidate.forward(input, Mode::Eval)?;
        Ok(objective.evaluate(&pass.latent, &pass.output)?.loss)
    };

    let pass = net.forward(input, Mode::Eval)?;
    let eval = objective.evaluate(&pass.latent, &pass.output)?;
    let repeat = loss_at(net)?;
    if eval.loss.to_bits() != repeat.to_bits() {
        return Err(Error::NonDeterministic(format!(
            "loss changed between identical evaluations ({} vs {repeat})",
            eval.loss
        )));
    }
    let analytic = net.backward(&pass, &eval.output_grad, &eval.latent_grad)?;

    let mut probe = net.clone();
    let mut max_rel_err = 0.0_f64;
    let mut worst = (0, 0);
    let mut checked = 0;
    for (tensor, grads) in analytic.slices().iter().enumerate() {
        for (offset, &a) in grads.iter().enumerate() {
            let original = net.param_slices()[tensor][offset];
            let h = BASE_STEP * original.abs().max(1.0);
            probe.param_slices_mut()[tensor][offset] = original + h;
            let up = loss_at(&probe)?;
            probe.param_slices_mut()[tensor][offset] = original - h;
            let down = loss_at(&probe)?;
            probe.param_slices_mut()[tensor][offset] = original;
            let numeric = (up - down) / (2.0 * h);
            let err = relative_error(a, numeric);
            if err > max_rel_err {
                max_rel_err = err;
                worst = (tensor, offset);
            }
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        max_rel_err,
        worst,
        checked,
        pass: max_rel_err < tolerance,
    })
}

#[cfg(test)]
mod tests {
    use std::cell::Cell;

    use super::*;
    use crate::nn::network::Architecture;

    fn mse(latent: &Matrix, output: &Matrix, target: &Matrix) -> Result<LossEval> {
        let n = output.rows() as f64;
        let mut grad = output.clone();
        let mut loss = 0.0;
        for (g, t) in grad.as_mut_slice().iter_mut().zip(target.as_slice()) {
            *g -= t;
            loss += 0.5 * *g * *g;
            *g /= n;
        }
        Ok(LossEval {
            loss: loss / n,
            output_grad: grad,
            latent_grad: Matrix::zeros(latent.rows(), latent.cols()),
        })
    }

    #[test]
    fn central_difference_of_quadratic() {
        let g = central_difference(|x| x[0] * x[0] + 3.0 * x[1], &[2.0, -1.0]);
        assert!((g[0] - 4.0).abs() < 1e-8);
        assert!((g[1] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn tiny_autoencoder_passes() {
        let arch = Architecture {
            input_dim: 5,
            hidden: vec![6, 3, 6],
            latent_position: 1,
            output_dim: 5,
            dropout: 0.2,
        };
        let mut net = Network::from_architecture(&arch, 21).unwrap();
        // nonzero biases keep pre-activations off the ReLU kink when a
        // layer input is all zeros
        for (k, layer) in net.layers.iter_mut().enumerate() {
            for (j, b) in layer.bias.iter_mut().enumerate() {
                *b = 0.05 * (((k * 7 + j * 3) % 5) as f64 - 2.0) + 0.013;
            }
        }
        let x = Matrix::from_vec(4, 5, (0..20).map(|v| ((v * 7) % 11) as f64 / 11.0 - 0.4).collect())
            .unwrap();
        let target = x.clone();
        let report = finite_diff_check(&net, &|z: &Matrix, y: &Matrix| mse(z, y, &target), &x, 1e-4)
            .unwrap();
        assert!(report.pass, "{report:?}");
        assert_eq!(report.checked, net.param_count());
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let arch = Architecture {
            input_dim: 3,
            hidden: vec![4, 2, 4],
            latent_position: 1,
            output_dim: 3,
            dropout: 0.0,
        };
        let net = Network::from_architecture(&arch, 5).unwrap();
        let x = Matrix::from_vec(2, 3, vec![0.1, 0.5, -0.3, 0.7, -0.2, 0.4]).unwrap();
        let target = x.clone();
        let doubled = |z: &Matrix, y: &Matrix| {
            let mut e = mse(z, y, &target)?;
            e.output_grad.scale(2.0);
            Ok(e)
        };
        let report = finite_diff_check(&net, &doubled, &x, 1e-4).unwrap();
        assert!(!report.pass);
    }

    #[test]
    fn nondeterministic_loss_is_reported() {
        let arch = Architecture {
            input_dim: 2,
            hidden: vec![2],
            latent_position: 0,
            output_dim: 2,
            dropout: 0.0,
        };
        let net = Network::from_architecture(&arch, 1).unwrap();
        let x = Matrix::from_vec(1, 2, vec![0.3, 0.6]).unwrap();
        let calls = Cell::new(0.0);
        let drifting = |z: &Matrix, y: &Matrix| {
            calls.set(calls.get() + 1.0);
            Ok(LossEval {
                loss: calls.get(),
                output_grad: Matrix::zeros(y.rows(), y.cols()),
                latent_grad: Matrix::zeros(z.rows(), z.cols()),
            })
        };
        let err = finite_diff_check(&net, &drifting, &x, 1e-4);
        assert!(matches!(err, Err(Error::NonDeterministic(_))));
    }
}
