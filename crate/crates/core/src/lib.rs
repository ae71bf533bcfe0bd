//! Spatio-temporal clustering of georeferenced time series.
//!
//! The crate bundles a small dense autoencoder engine, deep embedded
//! clustering (DEC) with an optional spatial regularizer, banded dynamic
//! time warping, k-means / k-medoids baselines and the spatial
//! connectivity metrics used to compare the resulting clusterings.

pub mod data;
pub mod dec;
pub mod dtw;
mod error;
pub mod kmeans;
pub mod metrics;
pub mod nn;
pub mod spatial;

pub use error::{Error, Result};
