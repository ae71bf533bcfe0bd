use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::lloyd::{check_k, plus_plus};
use super::KmeansResult;
use crate::dtw::{dtw, DtwConfig};
use crate::error::Result;
use crate::nn::Matrix;

const MAX_SWEEPS: usize = 100;

/// Symmetric pairwise DTW matrix, row-major `n × n`.
fn pairwise(windows: &Matrix, cfg: &DtwConfig) -> Result<Vec<f64>> {
    let n = windows.rows();
    let mut d = vec![0.0; n * n];
    for a in 0..n {
        for b in a + 1..n {
            let v = dtw(windows.row(a), windows.row(b), cfg)?;
            d[a * n + b] = v;
            d[b * n + a] = v;
        }
    }
    Ok(d)
}

/// Alternating k-medoids on a precomputed distance matrix. Returns
/// `(medoids, labels, cost, sweeps, trace)`.
fn alternate(
    dist: &[f64],
    n: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>, f64, usize, Vec<f64>) {
    let mut medoids = plus_plus(n, k, |a, b| dist[a * n + b], rng);
    let mut labels = vec![usize::MAX; n];
    let mut trace = Vec::new();
    let mut sweeps = 0;
    loop {
        let mut next = vec![0; n];
        let mut cost = 0.0;
        for (i, l) in next.iter_mut().enumerate() {
            let (j, d) = medoids
                .iter()
                .enumerate()
                .map(|(j, &m)| (j, dist[i * n + m]))
                .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
            *l = j;
            cost += d;
        }
        trace.push(cost);
        sweeps += 1;
        if next == labels || sweeps >= MAX_SWEEPS {
            return (medoids, next, cost, sweeps, trace);
        }
        labels = next;

        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            members[l].push(i);
        }
        for (j, m) in members.iter().enumerate() {
            if m.is_empty() {
                continue;
            }
            // member minimising the summed distance to its cluster; the current
            // medoid wins ties so cost never increases
            let total = |c: usize| m.iter().map(|&i| dist[c * n + i]).sum::<f64>();
            let mut best = (medoids[j], total(medoids[j]));
            for &c in m {
                let t = total(c);
                if t < best.1 {
                    best = (c, t);
                }
            }
            medoids[j] = best.0;
        }
    }
}

/// k-medoids under DTW over all rows of `windows`. Memory is quadratic in
/// the row count; see [`kmedoid_dtw_sampled`] for large inputs.
pub fn kmedoid_dtw(
    windows: &Matrix,
    k: usize,
    cfg: &DtwConfig,
    restarts: usize,
    seed: u64,
) -> Result<KmeansResult> {
    let n = windows.rows();
    check_k(k, n)?;
    let dist = pairwise(windows, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, Vec<usize>, f64, usize, Vec<f64>)> = None;
    for _ in 0..restarts.max(1) {
        let run = alternate(&dist, n, k, &mut rng);
        if best.as_ref().is_none_or(|b| run.2 < b.2) {
            best = Some(run);
        }
    }
    let (medoids, assignments, inertia, iterations, inertia_trace) = best.expect("one restart");
    Ok(KmeansResult {
        centroids: windows.select_rows(&medoids),
        assignments,
        inertia,
        iterations,
        inertia_trace,
        medoid_indices: medoids,
    })
}

/// Fits medoids on at most `max_fit` seeded random rows, then assigns every
/// row to its nearest medoid by DTW.
pub fn kmedoid_dtw_sampled(
    windows: &Matrix,
    k: usize,
    cfg: &DtwConfig,
    restarts: usize,
    seed: u64,
    max_fit: usize,
) -> Result<KmeansResult> {
    let n = windows.rows();
    check_k(k, n)?;
    if n <= max_fit {
        return kmedoid_dtw(windows, k, cfg, restarts, seed);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut subset = sample(&mut rng, n, max_fit.max(k)).into_vec();
    subset.sort_unstable();
    let fitted = kmedoid_dtw(&windows.select_rows(&subset), k, cfg, restarts, seed)?;
    let medoids: Vec<usize> = fitted.medoid_indices.iter().map(|&m| subset[m]).collect();
    let mut assignments = Vec::with_capacity(n);
    let mut inertia = 0.0;
    for row in windows.iter_rows() {
        let mut best = (0, f64::INFINITY);
        for (j, &m) in medoids.iter().enumerate() {
            let d = dtw(row, windows.row(m), cfg)?;
            if d < best.1 {
                best = (j, d);
            }
        }
        assignments.push(best.0);
        inertia += best.1;
    }
    Ok(KmeansResult {
        centroids: fitted.centroids,
        assignments,
        inertia,
        iterations: fitted.iterations,
        inertia_trace: fitted.inertia_trace,
        medoid_indices: medoids,
    })
}
