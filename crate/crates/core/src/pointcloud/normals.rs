use rayon::prelude::*;

use super::{covariance_eigen, GridIndex, PointCloud};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Per-point normals from the covariance of each point's `k` nearest
/// neighbors (smallest eigenvector), flipped to face the sensor origin.
pub fn estimate_normals(c: &PointCloud, k: usize) -> Result<PointCloud> {
    if k < 3 || c.len() < k {
        return Err(Error::TooFewPoints {
            needed: k.max(3),
            got: c.len(),
        });
    }
    let index = GridIndex::for_knn(&c.points, k);
    let origin = c.sensor_origin;
    let normals: Vec<Vec3> = c
        .points
        .par_iter()
        .map(|p| {
            let nbrs = index.knn(p, k);
            let (_, _, vecs) = covariance_eigen(nbrs.iter().map(|&i| &c.points[i])).expect("knn returns at least one point");
            let mut n = vecs[0];
            if n.dot(&(origin - p)) < 0.0 {
                n = -n;
            }
            n
        })
        .collect();
    let mut out = c.clone();
    out.normals = Some(normals);
    Ok(out)
}
