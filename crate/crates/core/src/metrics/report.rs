use std::io::Write;

use serde::Serialize;

use super::spatial::{connectivity, disconnectivity, spatial_metric_series};
use super::stats::{welch_t_test, TTest};
use super::temporal::temporal_compactness;
use crate::dtw::DtwConfig;
use crate::error::{config, data, shape, Result};
use crate::nn::Matrix;

/// Clustering of one dataset by one model, ready for evaluation.
pub struct RunInput<'a> {
    pub model: String,
    pub fingerprint: Option<String>,
    /// Hard labels in `t * sensors + i` order.
    pub labels: &'a [usize],
    pub k: usize,
    pub sensors: usize,
    pub windows: &'a Matrix,
    /// Representation used to pick medoids (latents, or the windows
    /// themselves for models without an encoder).
    pub latents: &'a Matrix,
    pub window_len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterReport {
    pub model: String,
    pub fingerprint: Option<String>,
    pub compactness: Vec<Option<f64>>,
    pub compactness_normalized: f64,
    pub connectivity: usize,
    pub connectivity_normalized: f64,
    pub disconnectivity: usize,
    pub disconnectivity_normalized: f64,
    pub spatial_metric: f64,
    pub empty_clusters: Vec<usize>,
    /// Per-timestamp spatial metric.
    #[serde(skip)]
    pub spatial_metric_series: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairTest {
    pub a: String,
    pub b: String,
    /// `None` when the statistic is undefined (both series constant).
    pub test: Option<TTest>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub reports: Vec<ClusterReport>,
    pub t_tests: Vec<PairTest>,
}

pub fn evaluate_run(run: &RunInput<'_>, cfg: &DtwConfig) -> Result<ClusterReport> {
    if run.sensors == 0 || run.labels.len() % run.sensors != 0 {
        return shape(format!("{} labels do not fill rows of {} sensors", run.labels.len(), run.sensors));
    }
    let grid: Vec<Vec<usize>> = run.labels.chunks(run.sensors).map(<[usize]>::to_vec).collect();
    let norm = (grid.len() * run.sensors * run.sensors) as f64;
    let s_c = connectivity(&grid)?;
    let s_d = disconnectivity(&grid)?;
    let (series, s_m) = spatial_metric_series(&grid)?;
    let comp = temporal_compactness(run.labels, run.k, run.windows, run.latents, run.window_len, cfg)?;
    Ok(ClusterReport {
        model: run.model.clone(),
        fingerprint: run.fingerprint.clone(),
        compactness: comp.per_cluster,
        compactness_normalized: comp.normalized,
        connectivity: s_c,
        connectivity_normalized: s_c as f64 / norm,
        disconnectivity: s_d,
        disconnectivity_normalized: s_d as f64 / norm,
        spatial_metric: s_m,
        empty_clusters: comp.empty_clusters,
        spatial_metric_series: series,
    })
}

/// Collects reports and runs a t-test on the spatial metric series of every
/// pair. All runs must share a dataset.
pub fn assemble_report(reports: Vec<ClusterReport>) -> Result<Comparison> {
    if reports.is_empty() {
        return config("a comparison needs at least one run");
    }
    for r in &reports[1..] {
        if r.fingerprint != reports[0].fingerprint
            || r.spatial_metric_series.len() != reports[0].spatial_metric_series.len()
        {
            return data(format!(
                "runs {} and {} were evaluated on different datasets",
                reports[0].model, r.model
            ));
        }
    }
    let mut t_tests = Vec::new();
    for a in 0..reports.len() {
        for b in a + 1..reports.len() {
            t_tests.push(PairTest {
                a: reports[a].model.clone(),
                b: reports[b].model.clone(),
                test: welch_t_test(&reports[a].spatial_metric_series, &reports[b].spatial_metric_series).ok(),
            });
        }
    }
    Ok(Comparison { reports, t_tests })
}

impl Comparison {
    /// CSV `model,compactness,connectivity,disconnectivity` with normalized values.
    pub fn write_table_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["model", "compactness", "connectivity", "disconnectivity"])?;
        for r in &self.reports {
            w.write_record([
                r.model.clone(),
                format!("{:?}", r.compactness_normalized),
                format!("{:?}", r.connectivity_normalized),
                format!("{:?}", r.disconnectivity_normalized),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// CSV `t,<model>...` of the per-timestamp spatial metric.
    pub fn write_series_csv(&self, out: impl Write, time_origin: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(self.reports.iter().map(|r| r.model.clone()));
        w.write_record(&header)?;
        for t in 0..self.reports[0].spatial_metric_series.len() {
            let mut rec = vec![(t + time_origin).to_string()];
            rec.extend(self.reports.iter().map(|r| format!("{:?}", r.spatial_metric_series[t])));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
