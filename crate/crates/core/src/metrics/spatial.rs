use crate::error::{shape, Result};

/// Lengths of maximal same-label runs along the line of sensors.
pub fn runs(labels: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=labels.len() {
        if i == labels.len() || labels[i] != labels[start] {
            out.push(i - start);
            start = i;
        }
    }
    out
}

/// Connectivity of one timestamp: every location counts the size of its run.
pub fn connectivity_row(labels: &[usize]) -> usize {
    runs(labels).iter().map(|l| l * l).sum()
}

/// Dis-connectivity of one timestamp: every location counts the same-label
/// locations outside its run.
pub fn disconnectivity_row(labels: &[usize]) -> usize {
    let mut counts = std::collections::HashMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    let same: usize = counts.values().map(|c| c * c).sum();
    same - connectivity_row(labels)
}

fn check_grid(grid: &[Vec<usize>]) -> Result<usize> {
    let s = grid.first().map_or(0, Vec::len);
    if s == 0 || grid.iter().any(|r| r.len() != s) {
        return shape("assignment grid must be non-empty and rectangular");
    }
    Ok(s)
}

/// Sum of run sizes over all `(t, i)` of a `t × s` label grid.
pub fn connectivity(grid: &[Vec<usize>]) -> Result<usize> {
    check_grid(grid)?;
    Ok(grid.iter().map(|r| connectivity_row(r)).sum())
}

pub fn disconnectivity(grid: &[Vec<usize>]) -> Result<usize> {
    check_grid(grid)?;
    Ok(grid.iter().map(|r| disconnectivity_row(r)).sum())
}

/// Per-timestamp `(s_c − s_d) / s²` and its mean over timestamps.
pub fn spatial_metric_series(grid: &[Vec<usize>]) -> Result<(Vec<f64>, f64)> {
    let s = check_grid(grid)?;
    let norm = (s * s) as f64;
    let series: Vec<f64> = grid
        .iter()
        .map(|r| (connectivity_row(r) as f64 - disconnectivity_row(r) as f64) / norm)
        .collect();
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    Ok((series, mean))
}
