//! Point clouds: construction from depth, workspace cropping, plane removal,
//! downsampling and normal estimation.

mod index;
pub mod io;
mod normals;
mod ransac;
mod voxel;

pub use index::GridIndex;
pub use normals::estimate_normals;
pub use ransac::{fit_plane_least_squares, fit_plane_ransac, RansacParams};
pub use voxel::voxel_downsample;

use serde::{Deserialize, Serialize};

use crate::depth::DepthImage;
use crate::error::{Error, Result};
use crate::geometry::{deproject_pixel, CameraIntrinsics, PixelDepth, Point3, RigidTransform, Vec3};

/// Points in millimeters with optional unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub normals: Option<Vec<Vec3>>,
    pub frame: String,
    /// Where the sensor sat when the cloud was captured; normals are
    /// oriented toward it.
    pub sensor_origin: Point3,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        Self {
            points,
            normals: None,
            frame: "robot".to_string(),
            sensor_origin: Point3::origin(),
        }
    }

    pub fn with_normals(mut self, normals: Vec<Vec3>) -> Result<Self> {
        if normals.len() != self.points.len() {
            return Err(Error::Format {
                what: "point cloud",
                message: format!("{} normals for {} points", normals.len(), self.points.len()),
            });
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn with_sensor_origin(mut self, origin: Point3) -> Self {
        self.sensor_origin = origin;
        self
    }

    pub fn with_frame(mut self, frame: impl Into<String>) -> Self {
        self.frame = frame.into();
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn normal(&self, i: usize) -> Option<&Vec3> {
        self.normals.as_ref().map(|n| &n[i])
    }

    /// Keeps the points whose index passes `keep`, preserving order.
    pub fn select(&self, mut keep: impl FnMut(usize, &Point3) -> bool) -> PointCloud {
        let idx: Vec<usize> = self
            .points
            .iter()
            .enumerate()
            .filter(|(i, p)| keep(*i, p))
            .map(|(i, _)| i)
            .collect();
        self.subset(&idx)
    }

    pub fn subset(&self, idx: &[usize]) -> PointCloud {
        PointCloud {
            points: idx.iter().map(|&i| self.points[i]).collect(),
            normals: self.normals.as_ref().map(|n| idx.iter().map(|&i| n[i]).collect()),
            frame: self.frame.clone(),
            sensor_origin: self.sensor_origin,
        }
    }

    pub fn transformed(&self, t: &RigidTransform) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| t.transform_point(p)).collect(),
            normals: self.normals.as_ref().map(|n| n.iter().map(|v| t.transform_vector(v)).collect()),
            frame: self.frame.clone(),
            sensor_origin: t.transform_point(&self.sensor_origin),
        }
    }

    pub fn centroid(&self) -> Option<Point3> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self.points.iter().fold(Vec3::zeros(), |acc, p| acc + p.coords);
        Some(Point3::from(sum / self.points.len() as f64))
    }
}

/// Axis-aligned box in the robot frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Workspace {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self> {
        let w = Self { min, max };
        w.validate()?;
        Ok(w)
    }

    /// Box of half-extents `half` centered at `center`.
    pub fn around(center: &Point3, half: [f64; 3]) -> Self {
        Self {
            min: [center.x - half[0], center.y - half[1], center.z - half[2]],
            max: [center.x + half[0], center.y + half[1], center.z + half[2]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for axis in 0..3 {
            if !(self.min[axis] < self.max[axis]) {
                return Err(Error::config(
                    format!("workspace.min[{axis}]"),
                    format!("min {} must be below max {}", self.min[axis], self.max[axis]),
                ));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn translated(&self, t: &Vec3) -> Self {
        Self {
            min: [self.min[0] + t.x, self.min[1] + t.y, self.min[2] + t.z],
            max: [self.max[0] + t.x, self.max[1] + t.y, self.max[2] + t.z],
        }
    }
}

/// Plane `n · p = offset` with unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub normal: Vec3,
    pub offset: f64,
}

impl Plane {
    pub fn new(normal: Vec3, offset: f64) -> Result<Self> {
        let n = normal.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Degenerate("plane normal has zero length".into()));
        }
        Ok(Self {
            normal: normal / n,
            offset: offset / n,
        })
    }

    /// Horizontal plane `z = height` with the normal pointing up.
    pub fn horizontal(height: f64) -> Self {
        Self {
            normal: Vec3::z(),
            offset: height,
        }
    }

    pub fn through_points(a: &Point3, b: &Point3, c: &Point3) -> Option<Self> {
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        let scale = (b - a).norm().max((c - a).norm());
        if !(len > 1e-12 * scale * scale) {
            return None;
        }
        let n = n / len;
        Some(Self {
            normal: n,
            offset: n.dot(&a.coords),
        })
    }

    pub fn signed_distance(&self, p: &Point3) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }

    /// Height of the plane above (x, y); `None` for vertical planes.
    pub fn z_at(&self, x: f64, y: f64) -> Option<f64> {
        if self.normal.z.abs() < 1e-12 {
            return None;
        }
        Some((self.offset - self.normal.x * x - self.normal.y * y) / self.normal.z)
    }

    pub fn flipped(&self) -> Self {
        Self {
            normal: -self.normal,
            offset: -self.offset,
        }
    }

    /// Orients the normal toward robot +z (first non-zero component positive
    /// for vertical planes).
    pub fn oriented_up(&self) -> Self {
        let key = if self.normal.z != 0.0 {
            self.normal.z
        } else if self.normal.y != 0.0 {
            self.normal.y
        } else {
            self.normal.x
        };
        if key < 0.0 {
            self.flipped()
        } else {
            *self
        }
    }

    pub fn translated(&self, t: &Vec3) -> Self {
        Self {
            normal: self.normal,
            offset: self.offset + self.normal.dot(t),
        }
    }
}

/// Deprojects every valid pixel on a `stride` grid into the robot frame,
/// row-major.
pub fn cloud_from_depth(depth: &DepthImage, intr: &CameraIntrinsics, cam_to_robot: &RigidTransform, stride: u32) -> Result<PointCloud> {
    if stride == 0 {
        return Err(Error::config("stride", "must be at least 1"));
    }
    let mut points = Vec::new();
    for v in (0..depth.height()).step_by(stride as usize) {
        for u in (0..depth.width()).step_by(stride as usize) {
            let d = depth.get(u, v);
            if d == 0 {
                continue;
            }
            let p = deproject_pixel(intr, PixelDepth::new(u as f64, v as f64, d as f64))?;
            points.push(cam_to_robot.transform_point(&p));
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(PointCloud::new(points).with_sensor_origin(cam_to_robot.origin()))
}

/// Points inside the closed box, in input order.
pub fn crop_workspace(c: &PointCloud, w: &Workspace) -> PointCloud {
    c.select(|_, p| w.contains(p))
}

/// Points strictly more than `margin` above the plane, in input order.
pub fn filter_above_plane(c: &PointCloud, plane: &Plane, margin: f64) -> PointCloud {
    c.select(|_, p| plane.signed_distance(p) > margin)
}

/// Eigen-decomposition of the covariance of `points` about their mean,
/// returned as (mean, eigenvalues ascending, eigenvectors as columns).
pub(crate) fn covariance_eigen<'a>(points: impl Iterator<Item = &'a Point3> + Clone) -> Option<(Point3, [f64; 3], [Vec3; 3])> {
    let mut n = 0usize;
    let mut sum = Vec3::zeros();
    for p in points.clone() {
        sum += p.coords;
        n += 1;
    }
    if n == 0 {
        return None;
    }
    let mean = sum / n as f64;
    let mut cov = nalgebra::Matrix3::<f64>::zeros();
    for p in points {
        let d = p.coords - mean;
        cov += d * d.transpose();
    }
    cov /= n as f64;
    let (vals, vecs) = sym_eigen_sorted(&cov);
    Some((Point3::from(mean), vals, vecs))
}

/// Eigenvalues ascending with matching unit eigenvectors.
pub(crate) fn sym_eigen_sorted(m: &nalgebra::Matrix3<f64>) -> ([f64; 3], [Vec3; 3]) {
    let eig = nalgebra::SymmetricEigen::new(*m);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.map(|i| eig.eigenvalues[i]);
    let vecs = order.map(|i| eig.eigenvectors.column(i).into_owned().normalize());
    (vals, vecs)
}
