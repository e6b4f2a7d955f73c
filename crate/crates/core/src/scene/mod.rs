//! Seeded synthetic worlds: a sand heightfield with superellipsoid rocks and
//! robot parts, rendered to depth images and exact instance masks.
//!
//! The world frame is the robot frame: millimeters, z up, the robot base at
//! the origin and the mean sand surface near z = 0.

mod generate;
mod objects;
mod render;
mod sensor;
mod shapes;
mod terrain;

pub use generate::{generate_scene, AssemblySpec, CameraSpec, PartKind, RockSpec, SceneSpec};
pub use objects::{dims, Attachment, AttachmentKind, ObjectRef, RobotPartModel, RockModel};
pub use render::{degrade_mask, render_depth, render_instance_masks, render_view, trace, RenderedMask, Trace, View};
pub use sensor::SensorModel;
pub use shapes::{Primitive, Shape, Superellipsoid};
pub use terrain::{Terrain, TerrainSpec};

pub(crate) use sensor::pixel_rng;

use serde::{Deserialize, Serialize};

use crate::geometry::{Camera, CameraIntrinsics, Point3};

/// A generated world plus the two cameras.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub seed: u64,
    pub terrain: Terrain,
    pub rocks: Vec<RockModel>,
    pub parts: Vec<RobotPartModel>,
    /// Fixed eye-on-base camera.
    pub base_camera: Camera,
    /// Intrinsics of the eye-in-hand camera; its pose follows the arm.
    pub hand_intrinsics: CameraIntrinsics,
}

impl Scene {
    pub fn objects(&self) -> impl Iterator<Item = ObjectRef<'_>> {
        self.rocks.iter().map(ObjectRef::Rock).chain(self.parts.iter().map(ObjectRef::Part))
    }

    pub fn object(&self, id: usize) -> Option<ObjectRef<'_>> {
        self.objects().find(|o| o.id() == id)
    }

    pub fn rock(&self, id: usize) -> Option<&RockModel> {
        self.rocks.iter().find(|r| r.id == id)
    }

    pub fn rock_mut(&mut self, id: usize) -> Option<&mut RockModel> {
        self.rocks.iter_mut().find(|r| r.id == id)
    }

    pub fn part(&self, id: usize) -> Option<&RobotPartModel> {
        self.parts.iter().find(|p| p.id == id)
    }

    pub fn part_mut(&mut self, id: usize) -> Option<&mut RobotPartModel> {
        self.parts.iter_mut().find(|p| p.id == id)
    }

    /// Moves an object; returns false for an unknown id.
    pub fn set_pose(&mut self, id: usize, pose: crate::geometry::RigidTransform) -> bool {
        if let Some(r) = self.rock_mut(id) {
            r.pose = pose;
            return true;
        }
        if let Some(p) = self.part_mut(id) {
            p.pose = pose;
            return true;
        }
        false
    }

    /// Takes an object out of the world (e.g. a rock that rolled away).
    pub fn remove(&mut self, id: usize) -> bool {
        let before = self.rocks.len() + self.parts.len();
        self.rocks.retain(|r| r.id != id);
        self.parts.retain(|p| p.id != id);
        before != self.rocks.len() + self.parts.len()
    }

    /// Highest surface under `(x, y)` among the terrain and every rock
    /// except `exclude`.
    pub fn support_height(&self, x: f64, y: f64, exclude: Option<usize>) -> f64 {
        self.rocks
            .iter()
            .filter(|r| Some(r.id) != exclude)
            .filter_map(|r| r.top_surface(x, y))
            .fold(self.terrain.height(x, y), f64::max)
    }

    /// Eye-in-hand camera at `eye` looking at `target`.
    pub fn hand_camera(&self, eye: Point3, target: Point3) -> crate::error::Result<Camera> {
        Camera::looking_at(self.hand_intrinsics, eye, target)
    }
}

/// Height at which an upright rock centered over `(cx, cy)` comes to rest
/// when dropped onto `support`, sampling its footprint every `step` mm.
pub(crate) fn rest_height(rock: &RockModel, support: impl Fn(f64, f64) -> f64, step: f64) -> f64 {
    let [a, b, _] = rock.shape.axes;
    let r = rock.pose.rotation;
    let t = rock.pose.translation;
    let nx = (2.0 * a / step).ceil() as i64;
    let ny = (2.0 * b / step).ceil() as i64;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=nx {
        let lx = (-a + i as f64 * step).min(a);
        for j in 0..=ny {
            let ly = (-b + j as f64 * step).min(b);
            let Some(hh) = rock.shape.half_height(lx, ly) else {
                continue;
            };
            let wx = t.x + r[(0, 0)] * lx + r[(0, 1)] * ly;
            let wy = t.y + r[(1, 0)] * lx + r[(1, 1)] * ly;
            best = best.max(support(wx, wy) + hh);
        }
    }
    best
}
