use std::io::Write;

use super::head::{Assignments, ClusterHead};
use crate::error::{shape, Result};
use crate::nn::{sq_dist, Matrix};

/// Latent distance of every point to its assigned centroid, as a
/// `windows per sensor × sensors` grid.
pub fn anomaly_distance(
    assignments: &Assignments,
    latents: &Matrix,
    head: &ClusterHead,
    sensors: usize,
) -> Result<Matrix> {
    if latents.rows() != assignments.hard.len() || latents.rows() % sensors.max(1) != 0 {
        return shape(format!(
            "{} latents, {} assignments, {sensors} sensors",
            latents.rows(),
            assignments.hard.len()
        ));
    }
    if latents.cols() != head.dim() {
        return shape("latent width differs from centroid width");
    }
    let values = latents
        .iter_rows()
        .zip(&assignments.hard)
        .map(|(z, &j)| sq_dist(z, head.centroids.row(j)).sqrt())
        .collect();
    Matrix::from_vec(latents.rows() / sensors, sensors, values)
}

/// CSV `t,s0..s{n-1}`: one row per timestamp; `time_origin` offsets `t`.
pub fn write_grid_csv(grid: &Matrix, out: impl Write, time_origin: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((0..grid.cols()).map(|i| format!("s{i}")));
    w.write_record(&header)?;
    for (t, row) in grid.iter_rows().enumerate() {
        let mut rec = vec![(t + time_origin).to_string()];
        rec.extend(row.iter().map(|v| format!("{v:?}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dec::head::soft_assign;

    #[test]
    fn distances_and_shape() {
        let head = ClusterHead::new(Matrix::from_rows(&[[0.0, 0.0], [10.0, 0.0]]).unwrap()).unwrap();
        let z = Matrix::from_rows(&[[0.0, 0.0], [3.0, 4.0], [10.0, 0.0], [9.0, 0.0], [1.0, 0.0], [0.0, 0.0]]).unwrap();
        let a = Assignments::from_q(soft_assign(&z, &head).unwrap(), 2).unwrap();
        let grid = anomaly_distance(&a, &z, &head, 2).unwrap();
        assert_eq!(grid.shape(), (3, 2));
        assert_eq!(grid.as_slice(), &[0.0, 5.0, 0.0, 1.0, 1.0, 0.0]);
        let mut buf = Vec::new();
        write_grid_csv(&grid, &mut buf, 0).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("t,s0,s1\n0,0.0,5.0\n"));
    }
}
