use std::collections::BTreeMap;

use super::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::{Point3, Vec3};

/// Replaces the points of each occupied voxel (keyed by `floor(p / leaf)`)
/// with their centroid. Output follows ascending voxel key. Normals, when
/// present, are averaged and renormalized.
pub fn voxel_downsample(c: &PointCloud, leaf: f64) -> Result<PointCloud> {
    if !(leaf > 0.0 && leaf.is_finite()) {
        return Err(Error::config("leaf", "voxel size must be positive"));
    }
    struct Acc {
        sum: Vec3,
        normal: Vec3,
        first_normal: Option<Vec3>,
        count: usize,
    }
    let mut voxels: BTreeMap<(i64, i64, i64), Acc> = BTreeMap::new();
    for (i, p) in c.points.iter().enumerate() {
        let key = (
            (p.x / leaf).floor() as i64,
            (p.y / leaf).floor() as i64,
            (p.z / leaf).floor() as i64,
        );
        let acc = voxels.entry(key).or_insert(Acc {
            sum: Vec3::zeros(),
            normal: Vec3::zeros(),
            first_normal: None,
            count: 0,
        });
        acc.sum += p.coords;
        acc.count += 1;
        if let Some(n) = c.normal(i) {
            acc.normal += n;
            acc.first_normal.get_or_insert(*n);
        }
    }
    let mut points = Vec::with_capacity(voxels.len());
    let mut normals = Vec::with_capacity(voxels.len());
    for acc in voxels.values() {
        points.push(Point3::from(acc.sum / acc.count as f64));
        if let Some(first) = acc.first_normal {
            normals.push(acc.normal.try_normalize(1e-12).unwrap_or(first));
        }
    }
    Ok(PointCloud {
        points,
        normals: c.normals.as_ref().map(|_| normals),
        frame: c.frame.clone(),
        sensor_origin: c.sensor_origin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn duplicates_collapse() {
        let c = PointCloud::new(vec![Point3::new(1.0, 2.0, 3.0); 2]);
        assert_eq!(voxel_downsample(&c, 0.5).unwrap().len(), 1);
    }

    #[test]
    fn distant_points_survive() {
        let c = PointCloud::new(vec![Point3::origin(), Point3::new(100.0, 0.0, 0.0)]);
        assert_eq!(voxel_downsample(&c, 10.0).unwrap().len(), 2);
    }

    #[test]
    fn grid_count_matches_distinct_voxels() {
        let pitch = 3.0;
        let pts: Vec<Point3> = (0..10)
            .flat_map(|i| {
                (0..10).flat_map(move |j| {
                    (0..10).map(move |k| Point3::new(i as f64 * pitch + 0.4, j as f64 * pitch + 0.4, k as f64 * pitch + 0.4))
                })
            })
            .collect();
        let c = PointCloud::new(pts.clone());
        for leaf in [pitch, 2.0 * pitch, 4.5] {
            let brute: HashSet<(i64, i64, i64)> = pts
                .iter()
                .map(|p| {
                    (
                        (p.x / leaf).floor() as i64,
                        (p.y / leaf).floor() as i64,
                        (p.z / leaf).floor() as i64,
                    )
                })
                .collect();
            let out = voxel_downsample(&c, leaf).unwrap();
            assert_eq!(out.len(), brute.len());
            assert!(out.len() <= c.len());
        }
    }

    #[test]
    fn rejects_non_positive_leaf() {
        let c = PointCloud::new(vec![Point3::origin()]);
        assert!(voxel_downsample(&c, 0.0).is_err());
    }
}
