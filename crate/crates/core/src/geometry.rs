//! Pinhole camera model, pixel/point conversion and rigid-frame algebra.
//!
//! Units are millimeters and radians. Camera frames use +z along the optical
//! axis, +x right and +y down; the robot/world frame has +z up.

use nalgebra::{Matrix3, Rotation3, Unit};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;

const ORTHO_TOL: f64 = 1e-9;

/// Pinhole intrinsics plus image size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraIntrinsics {
    /// 640x480 with a 600 px focal length. The rig's real values were never
    /// published, so treat these as placeholders.
    fn default() -> Self {
        Self {
            fx: 600.0,
            fy: 600.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        }
    }
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let intr = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fx.is_finite() && self.fy > 0.0 && self.fy.is_finite()) {
            return Err(Error::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidIntrinsics("image size is zero".into()));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return Err(Error::InvalidIntrinsics(format!("cx={} outside [0, {})", self.cx, self.width)));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(Error::InvalidIntrinsics(format!("cy={} outside [0, {})", self.cy, self.height)));
        }
        Ok(())
    }

    /// Same field of view at a different resolution.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            fx: self.fx * factor,
            fy: self.fy * factor,
            cx: self.cx * factor,
            cy: self.cy * factor,
            width: ((self.width as f64) * factor).round() as u32,
            height: ((self.height as f64) * factor).round() as u32,
        }
    }

    /// Whether a (sub-pixel) coordinate falls on the image. Pixel `i` covers
    /// `[i - 0.5, i + 0.5)`.
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= -0.5 && u < self.width as f64 - 0.5 && v >= -0.5 && v < self.height as f64 - 0.5
    }

    /// Unnormalized viewing ray through a pixel, in the camera frame (z = 1).
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// A pixel with its depth along the optical axis. `d == 0` marks a hole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelDepth {
    pub u: f64,
    pub v: f64,
    pub d: f64,
}

impl PixelDepth {
    pub fn new(u: f64, v: f64, d: f64) -> Self {
        Self { u, v, d }
    }
}

/// Pixel plus depth to a camera-frame point.
pub fn deproject_pixel(intr: &CameraIntrinsics, pd: PixelDepth) -> Result<Point3> {
    if !intr.contains(pd.u, pd.v) {
        return Err(Error::OutOfBounds {
            u: pd.u,
            v: pd.v,
            width: intr.width,
            height: intr.height,
        });
    }
    if pd.d == 0.0 {
        return Err(Error::MissingDepth { u: pd.u, v: pd.v });
    }
    if !(pd.d > 0.0 && pd.d.is_finite()) {
        return Err(Error::BehindCamera { z: pd.d });
    }
    Ok(Point3::new(
        (pd.u - intr.cx) * pd.d / intr.fx,
        (pd.v - intr.cy) * pd.d / intr.fy,
        pd.d,
    ))
}

/// Camera-frame point to pixel plus depth. No bounds check: the returned pixel
/// may lie off the image.
pub fn project_point(intr: &CameraIntrinsics, p: &Point3) -> Result<PixelDepth> {
    if !(p.z > 0.0) {
        return Err(Error::BehindCamera { z: p.z });
    }
    Ok(PixelDepth {
        u: intr.cx + intr.fx * p.x / p.z,
        v: intr.cy + intr.fy * p.y / p.z,
        d: p.z,
    })
}

/// Proper rigid motion `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransformRepr", into = "TransformRepr")]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

/// Wire form: row-major 3x3 rotation and a translation triple.
#[derive(Serialize, Deserialize)]
struct TransformRepr {
    rotation: [f64; 9],
    translation: [f64; 3],
}

impl TryFrom<TransformRepr> for RigidTransform {
    type Error = Error;

    fn try_from(r: TransformRepr) -> Result<Self> {
        let rotation = Matrix3::from_row_slice(&r.rotation);
        let t = RigidTransform {
            rotation,
            translation: Vec3::from(r.translation),
        };
        t.validate()?;
        Ok(t)
    }
}

impl From<RigidTransform> for TransformRepr {
    fn from(t: RigidTransform) -> Self {
        let mut rotation = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                rotation[r * 3 + c] = t.rotation[(r, c)];
            }
        }
        TransformRepr {
            rotation,
            translation: [t.translation.x, t.translation.y, t.translation.z],
        }
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Builds a transform, rejecting matrices that are not proper rotations.
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        let t = Self { rotation, translation };
        t.validate()?;
        Ok(t)
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::new(x, y, z),
        }
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle);
        Self {
            rotation: *rot.matrix(),
            translation: Vec3::zeros(),
        }
    }

    pub fn rot_x(angle: f64) -> Self {
        Self::from_axis_angle(&Vec3::x(), angle)
    }

    pub fn rot_y(angle: f64) -> Self {
        Self::from_axis_angle(&Vec3::y(), angle)
    }

    pub fn rot_z(angle: f64) -> Self {
        Self::from_axis_angle(&Vec3::z(), angle)
    }

    /// Frame whose columns are the given axes, placed at `origin`. The axes
    /// must already be orthonormal and right-handed.
    pub fn from_axes(x: &Vec3, y: &Vec3, z: &Vec3, origin: &Point3) -> Self {
        Self {
            rotation: Matrix3::from_columns(&[*x, *y, *z]),
            translation: origin.coords,
        }
    }

    /// Camera pose looking from `eye` toward `target`. Camera +z is the
    /// viewing direction and camera +y points as close to `-up` as possible.
    pub fn look_at(eye: &Point3, target: &Point3, up: &Vec3) -> Result<Self> {
        let z = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::InvalidTransform("eye and target coincide".into()))?;
        let x = z
            .cross(&-up)
            .try_normalize(1e-9)
            .ok_or_else(|| Error::InvalidTransform("view direction parallel to up".into()))?;
        let y = z.cross(&x);
        Ok(Self::from_axes(&x, &y, &z, eye))
    }

    pub fn with_translation(mut self, t: Vec3) -> Self {
        self.translation = t;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rotation.iter().any(|v| !v.is_finite()) || self.translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidTransform("non-finite entries".into()));
        }
        let err = (self.rotation.transpose() * self.rotation - Matrix3::identity()).abs().max();
        if err > ORTHO_TOL {
            return Err(Error::InvalidTransform(format!(
                "rotation is not orthonormal (max |RᵀR - I| = {err:e})"
            )));
        }
        let det = self.rotation.determinant();
        if (det - 1.0).abs() > ORTHO_TOL {
            return Err(Error::InvalidTransform(format!("det(R) = {det}")));
        }
        Ok(())
    }

    pub fn transform_point(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn invert(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn origin(&self) -> Point3 {
        Point3::from(self.translation)
    }

    pub fn axis(&self, i: usize) -> Vec3 {
        self.rotation.column(i).into_owned()
    }

    /// Rotation angle between two orientations, in radians.
    pub fn angle_to(&self, other: &RigidTransform) -> f64 {
        let rel = self.rotation.transpose() * other.rotation;
        ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }

    /// Largest elementwise difference, for approximate comparisons.
    pub fn max_abs_diff(&self, other: &RigidTransform) -> f64 {
        let r = (self.rotation - other.rotation).abs().max();
        let t = (self.translation - other.translation).abs().max();
        r.max(t)
    }

    /// Re-orthonormalizes the rotation (SVD projection), for long
    /// composition chains.
    pub fn renormalized(&self) -> RigidTransform {
        let rot = Rotation3::from_matrix_eps(&self.rotation, 1e-12, 100, Rotation3::identity());
        RigidTransform {
            rotation: *rot.matrix(),
            translation: self.translation,
        }
    }
}

/// A camera placed in the world: intrinsics plus its camera-to-world pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub intrinsics: CameraIntrinsics,
    /// Maps camera-frame points into the world/robot frame.
    pub pose: RigidTransform,
}

impl Camera {
    pub fn new(intrinsics: CameraIntrinsics, pose: RigidTransform) -> Self {
        Self { intrinsics, pose }
    }

    pub fn looking_at(intrinsics: CameraIntrinsics, eye: Point3, target: Point3) -> Result<Self> {
        // Straight-down views would make world +z parallel to the view axis;
        // fall back to world +y as the "up" reference.
        let dir = (target - eye).normalize();
        let up = if dir.cross(&Vec3::z()).norm() < 1e-6 {
            Vec3::y()
        } else {
            Vec3::z()
        };
        Ok(Self {
            intrinsics,
            pose: RigidTransform::look_at(&eye, &target, &up)?,
        })
    }

    pub fn center(&self) -> Point3 {
        self.pose.origin()
    }

    /// World-frame unit ray through pixel (u, v), and the factor converting
    /// ray length to optical-axis depth.
    pub fn world_ray(&self, u: f64, v: f64) -> (Vec3, f64) {
        let r = self.intrinsics.ray(u, v);
        let n = r.norm();
        (self.pose.rotation * (r / n), 1.0 / n)
    }

    pub fn project_world(&self, p: &Point3) -> Result<PixelDepth> {
        let pc = self.pose.invert().transform_point(p);
        project_point(&self.intrinsics, &pc)
    }

    pub fn deproject_world(&self, pd: PixelDepth) -> Result<Point3> {
        Ok(self.pose.transform_point(&deproject_pixel(&self.intrinsics, pd)?))
    }
}
