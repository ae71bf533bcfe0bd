use std::io::Write;

use crate::error::{config, data, shape, Result};
use crate::nn::{sq_dist, Matrix};

/// Cluster centers in latent space.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterHead {
    pub centroids: Matrix,
}

impl ClusterHead {
    pub fn new(centroids: Matrix) -> Result<Self> {
        if centroids.rows() == 0 || centroids.cols() == 0 {
            return config("a cluster head needs at least one centroid of positive width");
        }
        if !centroids.is_finite() {
            return data("centroids must be finite");
        }
        Ok(Self { centroids })
    }

    pub fn k(&self) -> usize {
        self.centroids.rows()
    }

    pub fn dim(&self) -> usize {
        self.centroids.cols()
    }
}

/// Soft assignments, targets and hard labels for a set of points.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignments {
    pub q: Matrix,
    pub p: Matrix,
    pub hard: Vec<usize>,
    /// `(location, time)` of each row.
    pub point_index: Vec<(usize, usize)>,
}

impl Assignments {
    /// Rows in dataset order (`t * sensors + i`).
    pub fn from_q(q: Matrix, sensors: usize) -> Result<Self> {
        let p = target_distribution(&q)?;
        let hard = argmax_rows(&q);
        let point_index = (0..q.rows()).map(|r| (r % sensors, r / sensors)).collect();
        Ok(Self { q, p, hard, point_index })
    }

    pub fn k(&self) -> usize {
        self.q.cols()
    }

    /// Clusters that no point selects as its argmax.
    pub fn empty_clusters(&self) -> Vec<usize> {
        let mut used = vec![false; self.k()];
        for &h in &self.hard {
            used[h] = true;
        }
        (0..self.k()).filter(|&j| !used[j]).collect()
    }

    /// `t × s` grid of hard labels.
    pub fn grid(&self, sensors: usize) -> Vec<Vec<usize>> {
        self.hard.chunks(sensors).map(<[usize]>::to_vec).collect()
    }

    /// CSV `t,i,hard,q_0..q_{k-1}`; `time_origin` offsets `t`.
    pub fn write_csv(&self, out: impl Write, time_origin: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string(), "i".to_string(), "hard".to_string()];
        header.extend((0..self.k()).map(|j| format!("q_{j}")));
        w.write_record(&header)?;
        for (row, &(i, t)) in self.point_index.iter().enumerate() {
            let mut rec = vec![(t + time_origin).to_string(), i.to_string(), self.hard[row].to_string()];
            rec.extend(self.q.row(row).iter().map(|v| format!("{v:?}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Row-wise argmax, lowest index on ties.
pub fn argmax_rows(m: &Matrix) -> Vec<usize> {
    m.iter_rows()
        .map(|r| {
            r.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |b, (j, &v)| if v > b.1 { (j, v) } else { b })
                .0
        })
        .collect()
}

/// Student-t kernels `(1 + ||z - μ_j||²)^-1` for one point.
fn kernels(z: &[f64], head: &ClusterHead, out: &mut [f64]) {
    for (j, k) in out.iter_mut().enumerate() {
        *k = 1.0 / (1.0 + sq_dist(z, head.centroids.row(j)));
    }
}

/// Student-t soft assignment with one degree of freedom.
pub fn soft_assign(z: &Matrix, head: &ClusterHead) -> Result<Matrix> {
    if z.cols() != head.dim() {
        return shape(format!("latents have width {}, centroids {}", z.cols(), head.dim()));
    }
    let mut q = Matrix::zeros(z.rows(), head.k());
    for (r, zr) in z.iter_rows().enumerate() {
        let row = q.row_mut(r);
        kernels(zr, head, row);
        let total: f64 = row.iter().sum();
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Ok(q)
}

/// Sharpened targets `p_ij ∝ q_ij² / f_j` with soft frequencies `f_j = Σ_i q_ij`.
pub fn target_distribution(q: &Matrix) -> Result<Matrix> {
    let f = q.col_sums();
    if let Some(j) = f.iter().position(|&v| !(v > 0.0)) {
        return data(format!("cluster {j} has zero soft frequency"));
    }
    let mut p = q.clone();
    for r in 0..p.rows() {
        let row = p.row_mut(r);
        for (v, fj) in row.iter_mut().zip(&f) {
            *v = *v * *v / fj;
        }
        let total: f64 = row.iter().sum();
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Ok(p)
}

/// KL divergence of one row pair, with `0·log 0 = 0`.
pub fn kl_row(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pv, _)| pv > 0.0)
        .map(|(&pv, &qv)| pv * (pv / qv).ln())
        .sum()
}

#[derive(Clone, Debug)]
pub struct KlGrad {
    /// Mean over rows of `KL(p_i || q_i)`.
    pub loss: f64,
    pub z_grad: Matrix,
    pub centroid_grad: Matrix,
}

/// Mean KL loss over the rows of `z` against constant targets `p`, with
/// gradients through the soft assignment to both latents and centroids.
pub fn kl_loss_and_grad(z: &Matrix, head: &ClusterHead, p: &Matrix) -> Result<KlGrad> {
    let q = soft_assign(z, head)?;
    if p.shape() != q.shape() {
        return shape(format!("targets {:?} vs assignments {:?}", p.shape(), q.shape()));
    }
    let (n, d, k) = (z.rows(), head.dim(), head.k());
    let scale = 1.0 / n.max(1) as f64;
    let mut z_grad = Matrix::zeros(n, d);
    let mut centroid_grad = Matrix::zeros(k, d);
    let mut loss = 0.0;
    let mut kern = vec![0.0; k];
    for r in 0..n {
        let zr = z.row(r);
        loss += kl_row(p.row(r), q.row(r));
        kernels(zr, head, &mut kern);
        for j in 0..k {
            let c = 2.0 * kern[j] * (p[(r, j)] - q[(r, j)]) * scale;
            let mu = head.centroids.row(j);
            for a in 0..d {
                let g = c * (zr[a] - mu[a]);
                z_grad[(r, a)] += g;
                centroid_grad[(j, a)] -= g;
            }
        }
    }
    Ok(KlGrad {
        loss: loss * scale,
        z_grad,
        centroid_grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::central_difference;

    fn head(rows: &[[f64; 2]]) -> ClusterHead {
        ClusterHead::new(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn hand_soft_assignment() {
        let q = soft_assign(&Matrix::from_rows(&[[0.0, 0.0]]).unwrap(), &head(&[[0.0, 0.0], [1.0, 0.0]])).unwrap();
        assert!((q[(0, 0)] - 2.0 / 3.0).abs() < 1e-12);
        assert!((q[(0, 1)] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_cluster_and_equidistant() {
        let z = Matrix::from_rows(&[[3.0, -1.0], [0.5, 0.0]]).unwrap();
        let q1 = soft_assign(&z, &head(&[[0.0, 0.0]])).unwrap();
        assert_eq!(q1.as_slice(), &[1.0, 1.0]);
        let q2 = soft_assign(&Matrix::from_rows(&[[0.0, 0.0]]).unwrap(), &head(&[[1.0, 0.0], [-1.0, 0.0]])).unwrap();
        assert_eq!(q2.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn hand_target_distribution() {
        let q = Matrix::from_rows(&[[0.6, 0.4], [0.4, 0.6]]).unwrap();
        let p = target_distribution(&q).unwrap();
        // 0.36 / (0.36 + 0.16)
        assert!((p[(0, 0)] - 0.6923).abs() < 1e-4);
        assert!((p[(0, 1)] - 0.3077).abs() < 1e-4);
        assert!((p[(1, 0)] - 0.3077).abs() < 1e-4);
    }

    #[test]
    fn one_hot_and_uniform_targets() {
        let q = Matrix::from_rows(&[[1.0, 0.0], [0.3, 0.7]]).unwrap();
        let p = target_distribution(&q).unwrap();
        assert_eq!(p.row(0), &[1.0, 0.0]);
        let u = Matrix::from_rows(&[[0.25; 4], [0.25; 4]]).unwrap();
        assert_eq!(target_distribution(&u).unwrap(), u);
        let dead = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        assert!(target_distribution(&dead).is_err());
    }

    #[test]
    fn kl_hand_values() {
        assert!((kl_row(&[1.0, 0.0], &[0.5, 0.5]) - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(kl_row(&[0.3, 0.7], &[0.3, 0.7]), 0.0);
    }

    #[test]
    fn kl_gradient_vanishes_at_target() {
        let z = Matrix::from_rows(&[[0.2, 0.1], [1.0, -0.4]]).unwrap();
        let h = head(&[[0.0, 0.0], [1.0, 0.0]]);
        let q = soft_assign(&z, &h).unwrap();
        let g = kl_loss_and_grad(&z, &h, &q).unwrap();
        assert!(g.loss.abs() < 1e-15);
        assert!(g.z_grad.as_slice().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn kl_gradients_match_finite_differences() {
        let z = Matrix::from_rows(&[[0.3, -0.2], [1.1, 0.4], [-0.5, 0.9]]).unwrap();
        let h = head(&[[0.0, 0.1], [1.0, -0.3], [-0.2, 1.2]]);
        let p = target_distribution(&soft_assign(&z, &h).unwrap()).unwrap();
        let g = kl_loss_and_grad(&z, &h, &p).unwrap();

        let loss_z = |flat: &[f64]| {
            let zz = Matrix::from_vec(3, 2, flat.to_vec()).unwrap();
            kl_loss_and_grad(&zz, &h, &p).unwrap().loss
        };
        let num = central_difference(loss_z, z.as_slice());
        for (a, n) in g.z_grad.as_slice().iter().zip(&num) {
            assert!(crate::nn::relative_error(*a, *n) < 1e-6, "{a} vs {n}");
        }

        let loss_mu = |flat: &[f64]| {
            let hh = ClusterHead::new(Matrix::from_vec(3, 2, flat.to_vec()).unwrap()).unwrap();
            kl_loss_and_grad(&z, &hh, &p).unwrap().loss
        };
        let num = central_difference(loss_mu, h.centroids.as_slice());
        for (a, n) in g.centroid_grad.as_slice().iter().zip(&num) {
            assert!(crate::nn::relative_error(*a, *n) < 1e-6, "{a} vs {n}");
        }
    }

    #[test]
    fn assignment_csv_layout() {
        let q = Matrix::from_rows(&[[0.9, 0.1], [0.2, 0.8], [0.5, 0.5], [0.4, 0.6]]).unwrap();
        let a = Assignments::from_q(q, 2).unwrap();
        assert_eq!(a.hard, vec![0, 1, 0, 1]);
        assert_eq!(a.point_index[3], (1, 1));
        let mut buf = Vec::new();
        a.write_csv(&mut buf, 10).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,i,hard,q_0,q_1");
        assert_eq!(lines[2], "10,1,1,0.2,0.8");
        assert_eq!(a.grid(2), vec![vec![0, 1], vec![0, 1]]);
    }
}
