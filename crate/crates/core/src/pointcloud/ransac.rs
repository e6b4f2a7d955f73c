use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{covariance_eigen, Plane, PointCloud};
use crate::error::{Error, Result};

/// RANSAC settings. Sand is rough, hence the loose default tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacParams {
    pub iterations: usize,
    /// Inlier band half-width (mm).
    pub tolerance: f64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            iterations: 200,
            tolerance: 5.0,
        }
    }
}

/// Least-squares plane through `points` (smallest covariance eigenvector).
pub fn fit_plane_least_squares(c: &PointCloud, idx: &[usize]) -> Result<Plane> {
    if idx.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: idx.len() });
    }
    let (mean, vals, vecs) = covariance_eigen(idx.iter().map(|&i| &c.points[i])).ok_or(Error::EmptyCloud)?;
    if vals[1] <= 1e-12 * vals[2].max(f64::MIN_POSITIVE) {
        return Err(Error::Degenerate("points are collinear".into()));
    }
    let n = vecs[0];
    Ok(Plane {
        normal: n,
        offset: n.dot(&mean.coords),
    }
    .oriented_up())
}

/// Plane with the most inliers over `iters` random 3-point hypotheses,
/// refit by least squares over its inliers. Inlier indices are ascending.
///
/// Ties keep the earliest iteration, so the result is a pure function of
/// the inputs and `seed`.
pub fn fit_plane_ransac(c: &PointCloud, iters: usize, tol: f64, seed: u64) -> Result<(Plane, Vec<usize>)> {
    let n = c.len();
    if n < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: n });
    }
    let (_, vals, _) = covariance_eigen(c.points.iter()).ok_or(Error::EmptyCloud)?;
    if vals[1] <= 1e-12 * vals[2].max(f64::MIN_POSITIVE) {
        return Err(Error::Degenerate("all points are collinear".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(usize, Plane)> = None;
    for _ in 0..iters.max(1) {
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let mut k = rng.random_range(0..n - 2);
        for taken in sorted_pair(a, b) {
            if k >= taken {
                k += 1;
            }
        }
        let Some(plane) = Plane::through_points(&c.points[a], &c.points[b], &c.points[k]) else {
            continue;
        };
        let count = c.points.iter().filter(|p| plane.signed_distance(p).abs() <= tol).count();
        if best.as_ref().is_none_or(|(bc, _)| count > *bc) {
            best = Some((count, plane));
        }
    }

    let (_, hypothesis) = best.ok_or_else(|| Error::Degenerate("no non-degenerate sample found".into()))?;
    let inliers = inliers_of(c, &hypothesis, tol);
    let plane = match fit_plane_least_squares(c, &inliers) {
        Ok(p) => p,
        // A sliver of collinear inliers: keep the sampled plane.
        Err(_) => hypothesis.oriented_up(),
    };
    let refit_inliers = inliers_of(c, &plane, tol);
    if refit_inliers.len() >= inliers.len() {
        Ok((plane, refit_inliers))
    } else {
        Ok((hypothesis.oriented_up(), inliers))
    }
}

fn inliers_of(c: &PointCloud, plane: &Plane, tol: f64) -> Vec<usize> {
    c.points
        .iter()
        .enumerate()
        .filter(|(_, p)| plane.signed_distance(p).abs() <= tol)
        .map(|(i, _)| i)
        .collect()
}

fn sorted_pair(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}
