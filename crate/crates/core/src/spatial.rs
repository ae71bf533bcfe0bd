//! Geographic prior: one-hot locations, the line-distance weight matrix λ
//! and the per-timestamp pair expansion consumed by the spatial loss.

use std::io::Read;

use crate::error::{config, data, shape, Result};
use crate::nn::Matrix;

/// Tolerance used when validating a user-supplied λ for symmetry.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

pub fn one_hot(i: usize, s: usize) -> Result<Vec<f64>> {
    if i >= s {
        return config(format!("location {i} out of range for {s} locations"));
    }
    let mut g = vec![0.0; s];
    g[i] = 1.0;
    Ok(g)
}

/// Symmetric `s × s` weights in `[-1, 1]`: positive pulls latents of two
/// locations together, negative pushes them apart. The diagonal is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialWeights {
    s: usize,
    lambda: Vec<f64>,
}

impl SpatialWeights {
    pub fn from_matrix(s: usize, lambda: Vec<f64>) -> Result<Self> {
        if lambda.len() != s * s {
            return shape(format!("{} weights for {s} locations", lambda.len()));
        }
        for i in 0..s {
            if lambda[i * s + i] != 0.0 {
                return data(format!("λ[{i}][{i}] = {} but the diagonal must be 0", lambda[i * s + i]));
            }
            for k in 0..s {
                let v = lambda[i * s + k];
                if !(-1.0..=1.0).contains(&v) {
                    return data(format!("λ[{i}][{k}] = {v} outside [-1, 1]"));
                }
                if (v - lambda[k * s + i]).abs() > SYMMETRY_TOLERANCE {
                    return data(format!("λ is not symmetric at ({i}, {k})"));
                }
            }
        }
        Ok(Self { s, lambda })
    }

    /// Reads an `s × s` matrix CSV without a header.
    pub fn read_csv(input: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut values = Vec::new();
        let mut rows = 0;
        for rec in rdr.records() {
            let rec = rec?;
            for field in rec.iter() {
                values.push(
                    field
                        .parse::<f64>()
                        .map_err(|e| crate::Error::Data(format!("bad λ entry {field:?}: {e}")))?,
                );
            }
            rows += 1;
        }
        Self::from_matrix(rows, values)
    }

    pub fn sensors(&self) -> usize {
        self.s
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.lambda[i * self.s + k]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.lambda[i * self.s..(i + 1) * self.s]
    }
}

/// `λ_ik = 1 − 2|i − k|/(s + 1)` for `i ≠ k` and 0 on the diagonal.
pub fn line_lambda(s: usize) -> Result<SpatialWeights> {
    if s < 2 {
        return config(format!("line prior needs at least 2 locations, got {s}"));
    }
    let mut lambda = vec![0.0; s * s];
    for i in 0..s {
        for k in 0..s {
            if i != k {
                lambda[i * s + k] = 1.0 - 2.0 * i.abs_diff(k) as f64 / (s as f64 + 1.0);
            }
        }
    }
    Ok(SpatialWeights { s, lambda })
}

/// `(i, k)` for a row of a pair block.
pub fn pair_of_row(row: usize, s: usize) -> (usize, usize) {
    (row / s, row % s)
}

/// The `s²` training rows of one timestamp: row `i·s + k` pairs input
/// `[x_i, g_i]` with the detached target `z̄_k` and weight `λ_ik`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairBatch {
    pub inputs: Matrix,
    pub targets: Matrix,
    pub weights: Vec<f64>,
    /// `(i, k, t)` per row.
    pub pair_index: Vec<(usize, usize, usize)>,
}

/// Expands the `s` location-ordered windows of timestamp `t` against the
/// latent snapshot of the same timestamp.
pub fn expand_pairs(
    t: usize,
    windows: &Matrix,
    snapshot: &Matrix,
    weights: &SpatialWeights,
) -> Result<PairBatch> {
    let s = weights.sensors();
    if windows.rows() != s {
        return shape(format!("{} points at timestamp {t}, expected {s}", windows.rows()));
    }
    if snapshot.rows() != s {
        return shape(format!("{} snapshot rows at timestamp {t}, expected {s}", snapshot.rows()));
    }
    let in_cols = windows.cols() + s;
    let mut inputs = Matrix::zeros(s * s, in_cols);
    let mut targets = Matrix::zeros(s * s, snapshot.cols());
    let mut w = Vec::with_capacity(s * s);
    let mut pair_index = Vec::with_capacity(s * s);
    for i in 0..s {
        for k in 0..s {
            let row = i * s + k;
            let dst = inputs.row_mut(row);
            dst[..windows.cols()].copy_from_slice(windows.row(i));
            dst[windows.cols() + i] = 1.0;
            targets.row_mut(row).copy_from_slice(snapshot.row(k));
            w.push(weights.get(i, k));
            pair_index.push((i, k, t));
        }
    }
    Ok(PairBatch {
        inputs,
        targets,
        weights: w,
        pair_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_examples() {
        assert_eq!(one_hot(1, 4).unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(one_hot(0, 1).unwrap(), vec![1.0]);
        assert!(one_hot(4, 4).is_err());
        assert_eq!(one_hot(2, 7).unwrap().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn six_location_rows() {
        let l = line_lambda(6).unwrap();
        let exact_row1 = [0.0, 5.0 / 7.0, 3.0 / 7.0, 1.0 / 7.0, -1.0 / 7.0, -3.0 / 7.0];
        for k in 0..6 {
            assert!((l.get(0, k) - exact_row1[k]).abs() < 1e-15);
        }
        // the commonly quoted two-decimal rows are these values truncated
        let quoted_row1 = [0.0, 0.71, 0.42, 0.14, -0.14, -0.42];
        let quoted_row2 = [0.71, 0.0, 0.71, 0.42, 0.14, -0.14];
        let trunc = |v: f64| (v * 100.0).trunc() / 100.0;
        for k in 0..6 {
            assert!((trunc(l.get(0, k)) - quoted_row1[k]).abs() < 1e-12);
            assert!((trunc(l.get(1, k)) - quoted_row2[k]).abs() < 1e-12);
        }
        assert_eq!(l.get(1, 5), l.get(5, 1));
        assert!((l.get(1, 5) - (-1.0 / 7.0)).abs() < 1e-15);
    }

    #[test]
    fn too_few_locations() {
        assert!(line_lambda(1).is_err());
    }

    #[test]
    fn pair_expansion_order() {
        let l = line_lambda(2).unwrap();
        let x = Matrix::from_rows(&[[0.1, 0.2], [0.3, 0.4]]).unwrap();
        let z = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
        let b = expand_pairs(7, &x, &z, &l).unwrap();
        assert_eq!(
            b.pair_index,
            vec![(0, 0, 7), (0, 1, 7), (1, 0, 7), (1, 1, 7)]
        );
        assert_eq!(b.inputs.row(2), &[0.3, 0.4, 0.0, 1.0]);
        assert_eq!(b.targets.row(2), &[1.0]);
        assert_eq!(b.weights[0], 0.0);
        assert_eq!(b.weights[3], 0.0);
    }

    #[test]
    fn row_five_of_three_locations() {
        let l = line_lambda(3).unwrap();
        let x = Matrix::zeros(3, 2);
        let z = Matrix::zeros(3, 4);
        let b = expand_pairs(0, &x, &z, &l).unwrap();
        assert_eq!(pair_of_row(5, 3), (1, 2));
        assert_eq!(b.pair_index[5], (1, 2, 0));
        assert_eq!(b.weights[5], 0.5);
    }

    #[test]
    fn wrong_block_size() {
        let l = line_lambda(3).unwrap();
        assert!(expand_pairs(0, &Matrix::zeros(2, 2), &Matrix::zeros(3, 1), &l).is_err());
    }

    #[test]
    fn custom_lambda_validation() {
        let ok = SpatialWeights::read_csv("0,0.5\n0.5,0\n".as_bytes()).unwrap();
        assert_eq!(ok.get(0, 1), 0.5);
        assert!(SpatialWeights::read_csv("0,0.5\n0.4,0\n".as_bytes()).is_err());
        assert!(SpatialWeights::read_csv("1,0.5\n0.5,0\n".as_bytes()).is_err());
        assert!(SpatialWeights::read_csv("0,1.5\n1.5,0\n".as_bytes()).is_err());
    }
}
