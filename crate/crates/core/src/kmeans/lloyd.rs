use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::KmeansResult;
use crate::error::{config, Result};
use crate::nn::{sq_dist, Matrix};

pub const MAX_ITERATIONS: usize = 300;

pub(crate) fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 {
        return config("k must be at least 1");
    }
    if k > n {
        return config(format!("k = {k} exceeds the {n} available points"));
    }
    Ok(())
}

/// Index sampled with probability proportional to `weights`; uniform when
/// all weights vanish.
pub(crate) fn weighted_pick(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return rng.random_range(0..weights.len());
    }
    let mut target = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if target < w {
            return i;
        }
        target -= w;
    }
    // rounding left a sliver past the last positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// k-means++ seeding: indices of the initial centers.
pub(crate) fn plus_plus(
    n: usize,
    k: usize,
    dist: impl Fn(usize, usize) -> f64,
    rng: &mut impl Rng,
) -> Vec<usize> {
    let mut centers = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = (0..n).map(|i| dist(i, centers[0])).collect();
    while centers.len() < k {
        let mut weights = nearest.clone();
        for &c in &centers {
            weights[c] = 0.0;
        }
        let next = if weights.iter().all(|&w| w == 0.0) {
            // every remaining point coincides with a center; take an unused index
            (0..n).find(|i| !centers.contains(i)).expect("k <= n")
        } else {
            weighted_pick(&weights, rng)
        };
        centers.push(next);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(dist(i, next));
        }
    }
    centers
}

/// Nearest centroid (lowest index on ties) and its squared distance.
pub(crate) fn nearest_centroid(point: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter_rows().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign(points: &Matrix, centroids: &Matrix, labels: &mut [usize], dists: &mut [f64]) -> f64 {
    let mut inertia = 0.0;
    for (i, p) in points.iter_rows().enumerate() {
        let (j, d) = nearest_centroid(p, centroids);
        labels[i] = j;
        dists[i] = d;
        inertia += d;
    }
    inertia
}

fn update(points: &Matrix, labels: &[usize], dists: &[f64], centroids: &mut Matrix) {
    let (k, d) = centroids.shape();
    let mut sums = Matrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (p, &j) in points.iter_rows().zip(labels) {
        counts[j] += 1;
        for (s, v) in sums.row_mut(j).iter_mut().zip(p) {
            *s += v;
        }
    }
    let mut taken = vec![false; points.rows()];
    for j in 0..k {
        if counts[j] == 0 {
            // re-seed an empty cluster at the farthest unclaimed point
            let far = (0..points.rows())
                .filter(|&i| !taken[i])
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                .expect("k <= n leaves an unclaimed point");
            taken[far] = true;
            centroids.row_mut(j).copy_from_slice(points.row(far));
        } else {
            let inv = 1.0 / counts[j] as f64;
            for (c, s) in centroids.row_mut(j).iter_mut().zip(sums.row(j)) {
                *c = s * inv;
            }
        }
    }
}

fn lloyd(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> KmeansResult {
    let n = points.rows();
    let seeds = plus_plus(n, k, |a, b| sq_dist(points.row(a), points.row(b)), rng);
    let mut centroids = points.select_rows(&seeds);
    let mut labels = vec![usize::MAX; n];
    let mut next_labels = vec![0; n];
    let mut dists = vec![0.0; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        let inertia = assign(points, &centroids, &mut next_labels, &mut dists);
        trace.push(inertia);
        iterations += 1;
        if next_labels == labels || iterations >= MAX_ITERATIONS {
            labels.copy_from_slice(&next_labels);
            return KmeansResult {
                centroids,
                assignments: labels,
                inertia,
                iterations,
                inertia_trace: trace,
                medoid_indices: Vec::new(),
            };
        }
        labels.copy_from_slice(&next_labels);
        update(points, &labels, &dists, &mut centroids);
    }
}

/// k-means++ seeded Lloyd iterations; best inertia over `restarts` runs.
pub fn kmeans(points: &Matrix, k: usize, restarts: usize, seed: u64) -> Result<KmeansResult> {
    check_k(k, points.rows())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KmeansResult> = None;
    for _ in 0..restarts.max(1) {
        let run = lloyd(points, k, &mut rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Assigns each row to its nearest centroid.
pub fn predict(points: &Matrix, centroids: &Matrix) -> Vec<usize> {
    points.iter_rows().map(|p| nearest_centroid(p, centroids).0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> Matrix {
        Matrix::from_rows(&[[0.0, 0.0], [0.0, 2.0], [10.0, 10.0], [12.0, 10.0]]).unwrap()
    }

    #[test]
    fn two_blobs_by_hand() {
        let r = kmeans(&blobs(), 2, 3, 7).unwrap();
        assert_eq!(r.assignments[0], r.assignments[1]);
        assert_eq!(r.assignments[2], r.assignments[3]);
        assert_ne!(r.assignments[0], r.assignments[2]);
        let a = r.assignments[0];
        assert_eq!(r.centroids.row(a), &[0.0, 1.0]);
        assert_eq!(r.centroids.row(1 - a), &[11.0, 10.0]);
        // each blob: two points at distance 1 from their mean
        assert_eq!(r.inertia, 4.0);
    }

    #[test]
    fn k_equals_n_has_zero_inertia() {
        let r = kmeans(&blobs(), 4, 1, 0).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut seen = r.assignments.clone();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2, 3]);
    }

    #[test]
    fn too_many_clusters() {
        assert!(kmeans(&blobs(), 5, 1, 0).is_err());
        assert!(kmeans(&blobs(), 0, 1, 0).is_err());
    }

    #[test]
    fn duplicate_points_still_seed() {
        let pts = Matrix::from_rows(&[[1.0], [1.0], [1.0]]).unwrap();
        let r = kmeans(&pts, 3, 1, 0).unwrap();
        assert_eq!(r.inertia, 0.0);
    }

    #[test]
    fn weighted_pick_respects_zeros() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let i = weighted_pick(&[0.0, 2.0, 0.0, 1.0], &mut rng);
            assert!(i == 1 || i == 3);
        }
    }
}
