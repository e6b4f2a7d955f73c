use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::geometry::{RigidTransform, Vec3};
use crate::pointcloud::{GridIndex, PointCloud};

/// Darboux-style frame at cloud point `idx`, built from the normals of its
/// neighbors within `radius`.
///
/// Columns: `x'` = minor principal curvature direction (the direction along
/// which normals vary least, e.g. a cylinder's axis), `y' = z' × x'`,
/// `z'` = the dominant normal direction, signed like the point's own normal.
pub fn local_frame(c: &PointCloud, idx: usize, radius: f64) -> Result<RigidTransform> {
    let index = GridIndex::new(&c.points, radius.max(1e-3));
    local_frame_with(c, &index, idx, radius)
}

pub(crate) fn local_frame_with(c: &PointCloud, index: &GridIndex<'_>, idx: usize, radius: f64) -> Result<RigidTransform> {
    let normals = c.normals.as_ref().ok_or_else(|| Error::Degenerate("cloud has no normals".into()))?;
    let p = c.points[idx];
    let nbrs = index.radius(&p, radius);
    if nbrs.len() < 3 {
        return Err(Error::InsufficientNeighborhood {
            index: idx,
            found: nbrs.len(),
        });
    }
    let mut m = Matrix3::<f64>::zeros();
    for &i in &nbrs {
        let n = normals[i];
        m += n * n.transpose();
    }
    let (_, vecs) = crate::pointcloud::sym_eigen_sorted(&m);
    let mut z = vecs[2];
    if z.dot(&normals[idx]) < 0.0 {
        z = -z;
    }
    let mut x = vecs[0] - z * vecs[0].dot(&z);
    if x.norm() < 1e-9 {
        x = any_perpendicular(&z);
    }
    let x = x.normalize();
    let y = z.cross(&x);
    Ok(RigidTransform::from_axes(&x, &y, &z, &p))
}

/// Deterministic unit vector perpendicular to `v`.
pub(crate) fn any_perpendicular(v: &Vec3) -> Vec3 {
    let helper = if v.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    (helper - v * helper.dot(v)).normalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;

    #[test]
    fn planar_patch_frame() {
        let pts: Vec<Point3> = (0..15)
            .flat_map(|i| (0..15).map(move |j| Point3::new(i as f64, j as f64, 0.0)))
            .collect();
        let n = vec![Vec3::z(); pts.len()];
        let c = PointCloud::new(pts).with_normals(n).unwrap();
        let f = local_frame(&c, 112, 3.0).unwrap();
        assert!(f.axis(2).dot(&Vec3::z()) > 1f64.to_radians().cos());
        assert!(f.validate().is_ok());
    }

    #[test]
    fn cylinder_minor_curvature_is_axis() {
        // Cylinder of radius 20 along the direction (1, 1, 0)/√2.
        let axis = Vec3::new(1.0, 1.0, 0.0).normalize();
        let u = Vec3::z();
        let w = axis.cross(&u);
        let mut pts = Vec::new();
        let mut normals = Vec::new();
        for i in 0..60 {
            for j in 0..40 {
                let t = -30.0 + i as f64;
                let th = j as f64 / 40.0 * std::f64::consts::TAU;
                let n = u * th.cos() + w * th.sin();
                pts.push(Point3::from(axis * t + n * 20.0));
                normals.push(n);
            }
        }
        let c = PointCloud::new(pts).with_normals(normals).unwrap();
        let idx = 30 * 40 + 3;
        let f = local_frame(&c, idx, 8.0).unwrap();
        assert!(f.axis(0).dot(&axis).abs() > 5f64.to_radians().cos());
        assert!(f.axis(2).dot(&c.normals.as_ref().unwrap()[idx]) > 0.9);
    }

    #[test]
    fn isolated_point_fails() {
        let c = PointCloud::new(vec![Point3::origin(), Point3::new(100.0, 0.0, 0.0), Point3::new(0.0, 100.0, 0.0)])
            .with_normals(vec![Vec3::z(); 3])
            .unwrap();
        assert!(matches!(
            local_frame(&c, 0, 1.0),
            Err(Error::InsufficientNeighborhood { found: 1, .. })
        ));
    }
}
