//! Classical clustering baselines and the elbow heuristic for choosing `k`.

mod elbow;
mod kmedoid;
mod lloyd;

pub use elbow::{elbow, knee_point, ElbowCurve};
pub use kmedoid::{kmedoid_dtw, kmedoid_dtw_sampled};
pub use lloyd::{kmeans, predict, MAX_ITERATIONS};

use crate::nn::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct KmeansResult {
    /// One row per cluster: means for k-means, medoid series for k-medoids.
    pub centroids: Matrix,
    pub assignments: Vec<usize>,
    /// Summed squared distance (k-means) or DTW cost (k-medoids).
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after each assignment step of the winning restart.
    pub inertia_trace: Vec<f64>,
    /// Row indices of the medoids; empty for k-means.
    pub medoid_indices: Vec<usize>,
}
