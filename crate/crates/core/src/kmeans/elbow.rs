use std::io::Write;

use serde::Serialize;

use super::lloyd::kmeans;
use crate::error::{config, Result};
use crate::nn::Matrix;

/// Best-of-restarts inertia per candidate `k` and the detected knee.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ElbowCurve {
    pub ks: Vec<usize>,
    pub inertias: Vec<f64>,
    pub knee: usize,
    /// False when the curve has no bend (a straight line), in which case
    /// `knee` is the smallest `k`.
    pub knee_found: bool,
}

impl ElbowCurve {
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "inertia", "knee_flag"])?;
        for (&k, &v) in self.ks.iter().zip(&self.inertias) {
            let flag = u8::from(self.knee_found && k == self.knee);
            w.write_record([k.to_string(), format!("{v:?}"), flag.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Knee of a decreasing curve: after min-max scaling both axes, the point
/// farthest from the chord joining the end points.
pub fn knee_point(ks: &[usize], values: &[f64]) -> Result<(usize, bool)> {
    if ks.len() != values.len() {
        return config("k list and values differ in length");
    }
    if ks.len() < 3 {
        return config("knee detection needs at least three values of k");
    }
    if ks.windows(2).any(|p| p[1] <= p[0]) {
        return config("k values must be strictly increasing");
    }
    let (k0, k1) = (ks[0] as f64, *ks.last().unwrap() as f64);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Ok((ks[0], false));
    }
    let x: Vec<f64> = ks.iter().map(|&k| (k as f64 - k0) / (k1 - k0)).collect();
    let y: Vec<f64> = values.iter().map(|&v| (v - lo) / (hi - lo)).collect();
    let (x0, y0, x1, y1) = (x[0], y[0], *x.last().unwrap(), *y.last().unwrap());
    let norm = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
    let mut best = (0, 0.0);
    for i in 0..ks.len() {
        let d = ((y1 - y0) * x[i] - (x1 - x0) * y[i] + x1 * y0 - y1 * x0).abs() / norm;
        if d > best.1 {
            best = (i, d);
        }
    }
    if best.1 < 1e-9 {
        return Ok((ks[0], false));
    }
    Ok((ks[best.0], true))
}

pub fn elbow(points: &Matrix, ks: &[usize], restarts: usize, seed: u64) -> Result<ElbowCurve> {
    let mut inertias = Vec::with_capacity(ks.len());
    for &k in ks {
        inertias.push(kmeans(points, k, restarts, seed)?.inertia);
    }
    let (knee, knee_found) = knee_point(ks, &inertias)?;
    Ok(ElbowCurve {
        ks: ks.to_vec(),
        inertias,
        knee,
        knee_found,
    })
}
