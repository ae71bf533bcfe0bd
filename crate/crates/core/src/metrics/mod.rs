//! Temporal compactness, spatial connectivity and the statistics used to
//! compare clusterings.

mod report;
mod spatial;
mod stats;
mod temporal;

pub use report::{assemble_report, evaluate_run, ClusterReport, Comparison, PairTest, RunInput};
pub use spatial::{
    connectivity, connectivity_row, disconnectivity, disconnectivity_row, runs,
    spatial_metric_series,
};
pub use stats::{average_ranks, pearson, rand_index, spearman, welch_t_test, TTest};
pub use temporal::{latent_medoid, temporal_compactness, Compactness};
