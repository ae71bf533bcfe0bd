use crate::dtw::{dtw, DtwConfig};
use crate::error::{shape, Result};
use crate::nn::{sq_dist, Matrix};

#[derive(Clone, Debug, PartialEq)]
pub struct Compactness {
    /// Mean DTW of each cluster's members to its medoid; `None` when empty.
    pub per_cluster: Vec<Option<f64>>,
    /// Row index of each cluster's medoid.
    pub medoids: Vec<Option<usize>>,
    pub empty_clusters: Vec<usize>,
    /// Mean over non-empty clusters divided by the window length.
    pub normalized: f64,
}

/// Member whose latent lies nearest the cluster's latent mean.
pub fn latent_medoid(members: &[usize], latents: &Matrix) -> usize {
    let d = latents.cols();
    let mut mean = vec![0.0; d];
    for &m in members {
        for (a, v) in mean.iter_mut().zip(latents.row(m)) {
            *a += v;
        }
    }
    for a in &mut mean {
        *a /= members.len() as f64;
    }
    let mut best = (members[0], f64::INFINITY);
    for &m in members {
        let dist = sq_dist(latents.row(m), &mean);
        if dist < best.1 {
            best = (m, dist);
        }
    }
    best.0
}

/// DTW compactness per cluster for labels over the rows of `windows`,
/// with medoids chosen in latent space.
pub fn temporal_compactness(
    labels: &[usize],
    k: usize,
    windows: &Matrix,
    latents: &Matrix,
    window_len: usize,
    cfg: &DtwConfig,
) -> Result<Compactness> {
    if labels.len() != windows.rows() || latents.rows() != windows.rows() {
        return shape(format!(
            "{} labels, {} windows, {} latents",
            labels.len(),
            windows.rows(),
            latents.rows()
        ));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (r, &l) in labels.iter().enumerate() {
        if l >= k {
            return shape(format!("label {l} outside 0..{k}"));
        }
        members[l].push(r);
    }
    let mut per_cluster = Vec::with_capacity(k);
    let mut medoids = Vec::with_capacity(k);
    let mut empty_clusters = Vec::new();
    for (j, m) in members.iter().enumerate() {
        if m.is_empty() {
            per_cluster.push(None);
            medoids.push(None);
            empty_clusters.push(j);
            continue;
        }
        let med = latent_medoid(m, latents);
        let mut total = 0.0;
        for &r in m {
            total += dtw(windows.row(r), windows.row(med), cfg)?;
        }
        per_cluster.push(Some(total / m.len() as f64));
        medoids.push(Some(med));
    }
    let used: Vec<f64> = per_cluster.iter().flatten().copied().collect();
    let normalized = used.iter().sum::<f64>() / (used.len().max(1) * window_len.max(1)) as f64;
    Ok(Compactness {
        per_cluster,
        medoids,
        empty_clusters,
        normalized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtw::PointCost;

    #[test]
    fn hand_computed_cluster() {
        let cfg = DtwConfig { band: 1, point_cost: PointCost::SquaredDiff };
        let windows = Matrix::from_rows(&[[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 1.0], [5.0, 5.0, 5.0]]).unwrap();
        // latent mean of cluster 0 is 0.4, nearest member is row 0
        let latents = Matrix::from_rows(&[[0.5], [0.0], [0.7], [9.0]]).unwrap();
        let c = temporal_compactness(&[0, 0, 0, 1], 3, &windows, &latents, 3, &cfg).unwrap();
        assert_eq!(c.medoids[0], Some(0));
        // dtw(row1, row0) = 1, dtw(row2, row0) = 3
        assert!((c.per_cluster[0].unwrap() - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(c.per_cluster[1], Some(0.0));
        assert_eq!(c.empty_clusters, vec![2]);
        assert!((c.normalized - (4.0 / 3.0) / 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn identical_members_are_perfectly_compact() {
        let cfg = DtwConfig::default();
        let w = Matrix::from_rows(&[[0.1; 12], [0.1; 12]]).unwrap();
        let z = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let c = temporal_compactness(&[0, 0], 1, &w, &z, 12, &cfg).unwrap();
        assert_eq!(c.per_cluster, vec![Some(0.0)]);
    }
}
