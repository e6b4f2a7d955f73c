//! Six-DOF parallel-jaw grasp detection over point clouds.
//!
//! Candidates are seeded on sampled surface points, oriented by a local
//! surface frame, swept about a configurable hand axis, pushed along the
//! approach direction until the palm meets the surface, and kept only when
//! collision-free with enough points between the fingers. Ranking uses a
//! geometric antipodal score over the closing region.
//!
//! Hand frame convention: the pose's rotation columns are the approach axis
//! `a`, the closing axis `c` and the hand axis `h = a × c`. The pose origin is
//! the center of the palm face. In hand coordinates `(pa, pc, ph)`:
//!
//! * closing region: `0 ≤ pa ≤ finger_depth`, `|pc| ≤ aperture/2`, `|ph| ≤ hand_height/2`
//! * fingers: same `pa`/`ph` ranges, `aperture/2 < |pc| ≤ aperture/2 + finger_width`
//! * palm: `-palm_depth ≤ pa < 0`, `|pc| ≤ aperture/2 + finger_width`, `|ph| ≤ hand_height/2`

mod candidates;
mod frame;
mod select;

pub use candidates::{generate_candidates, sample_seeds};
pub use frame::local_frame;
pub use select::{antipodal_fraction, detect_grasps, filter_by_approach, score_candidate, select_grasps};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, RigidTransform, Vec3};
use crate::pointcloud::Workspace;

/// Gripper dimensions in millimeters.
///
/// Defaults are deliberately smaller than a stock xArm gripper: smaller hand
/// models produced more valid grasps on rock-sized objects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HandGeometry {
    pub finger_width: f64,
    /// Distance between the open fingers.
    pub max_aperture: f64,
    /// How far the fingers extend along the approach axis.
    pub finger_depth: f64,
    /// Extent of the fingers along the hand axis.
    pub hand_height: f64,
    /// Thickness of the hand base behind the fingers; used for the
    /// contact test that ends the approach push.
    pub palm_depth: f64,
}

impl Default for HandGeometry {
    fn default() -> Self {
        Self {
            finger_width: 12.0,
            max_aperture: 80.0,
            finger_depth: 50.0,
            hand_height: 25.0,
            palm_depth: 20.0,
        }
    }
}

/// Which hand-frame volume a point falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HandRegion {
    Closing,
    Finger,
    Palm,
    Outside,
}

impl HandGeometry {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("finger_width", self.finger_width),
            ("max_aperture", self.max_aperture),
            ("finger_depth", self.finger_depth),
            ("hand_height", self.hand_height),
            ("palm_depth", self.palm_depth),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("hand.{name}"), "must be positive"));
            }
        }
        Ok(())
    }

    /// Hand-frame coordinates `(pa, pc, ph)` of a world point.
    #[inline]
    pub fn local(pose: &RigidTransform, p: &Point3) -> [f64; 3] {
        let d = p - pose.origin();
        [
            d.dot(&pose.rotation.column(0)),
            d.dot(&pose.rotation.column(1)),
            d.dot(&pose.rotation.column(2)),
        ]
    }

    #[inline]
    pub fn region(&self, l: [f64; 3]) -> HandRegion {
        let [pa, pc, ph] = l;
        if ph.abs() > self.hand_height / 2.0 {
            return HandRegion::Outside;
        }
        let half = self.max_aperture / 2.0;
        let outer = half + self.finger_width;
        let apc = pc.abs();
        if apc > outer {
            return HandRegion::Outside;
        }
        if (0.0..=self.finger_depth).contains(&pa) {
            if apc <= half {
                HandRegion::Closing
            } else {
                HandRegion::Finger
            }
        } else if pa < 0.0 && pa >= -self.palm_depth {
            HandRegion::Palm
        } else {
            HandRegion::Outside
        }
    }
}

/// Approach-direction filter about world `-z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApproachFilter {
    pub enabled: bool,
    pub cone_half_angle_deg: f64,
}

impl Default for ApproachFilter {
    fn default() -> Self {
        Self {
            enabled: true,
            cone_half_angle_deg: 45.0,
        }
    }
}

/// Candidate generation, filtering and selection settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraspConfig {
    pub num_samples: usize,
    pub num_orientations: usize,
    pub num_selected: usize,
    /// World direction the orientation sweep rotates about (vertical).
    pub hand_axis: [f64; 3],
    pub approach_filter: ApproachFilter,
    pub min_closing_points: usize,
    pub seed: u64,
    /// Neighborhood radius for the local surface frame (mm).
    pub frame_radius: f64,
    /// Neighbors used for normal estimation.
    pub normals_k: usize,
    /// Approach push increment (mm).
    pub push_step: f64,
    /// Added to the measured object extent to get the opening width (mm).
    pub width_clearance: f64,
    pub friction_half_angle_deg: f64,
    /// Normalizer for the point-count factor of the score.
    pub expected_closing_points: f64,
    /// Points closer than this to the support plane are discarded (mm).
    pub plane_margin: f64,
    /// Crop box applied before anything else.
    pub workspace: Option<Workspace>,
    /// Optional voxel downsampling leaf (mm) after cropping.
    pub voxel_leaf: Option<f64>,
}

impl Default for GraspConfig {
    fn default() -> Self {
        Self {
            num_samples: 100,
            num_orientations: 5,
            num_selected: 20,
            hand_axis: [0.0, 0.0, 1.0],
            approach_filter: ApproachFilter::default(),
            min_closing_points: 10,
            seed: 0,
            frame_radius: 8.0,
            normals_k: 15,
            push_step: 2.0,
            width_clearance: 4.0,
            friction_half_angle_deg: 30.0,
            expected_closing_points: 100.0,
            plane_margin: 6.0,
            workspace: None,
            voxel_leaf: None,
        }
    }
}

impl GraspConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_samples == 0 {
            return Err(Error::config("grasp.num_samples", "must be at least 1"));
        }
        if self.num_orientations == 0 {
            return Err(Error::config("grasp.num_orientations", "must be at least 1"));
        }
        if self.num_selected == 0 {
            return Err(Error::config("grasp.num_selected", "must be at least 1"));
        }
        let cone = self.approach_filter.cone_half_angle_deg;
        if !(cone > 0.0 && cone <= 90.0) {
            return Err(Error::config("grasp.approach_filter.cone_half_angle_deg", "must lie in (0, 90]"));
        }
        if Vec3::from(self.hand_axis).norm() < 1e-9 {
            return Err(Error::config("grasp.hand_axis", "must be non-zero"));
        }
        if self.normals_k < 3 {
            return Err(Error::config("grasp.normals_k", "must be at least 3"));
        }
        if !(self.push_step > 0.0) {
            return Err(Error::config("grasp.push_step", "must be positive"));
        }
        if !(self.frame_radius > 0.0) {
            return Err(Error::config("grasp.frame_radius", "must be positive"));
        }
        if !(self.expected_closing_points > 0.0) {
            return Err(Error::config("grasp.expected_closing_points", "must be positive"));
        }
        if let Some(w) = &self.workspace {
            w.validate()
                .map_err(|_| Error::config("grasp.workspace", "min must be below max on every axis"))?;
        }
        if let Some(leaf) = self.voxel_leaf {
            if !(leaf > 0.0) {
                return Err(Error::config("grasp.voxel_leaf", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn hand_axis(&self) -> Vec3 {
        Vec3::from(self.hand_axis).normalize()
    }

    /// Same settings with the approach cone opened to 90°, used for the
    /// single retry after an empty result.
    pub fn widened(&self) -> Self {
        let mut c = self.clone();
        c.approach_filter.cone_half_angle_deg = 90.0;
        c
    }
}

/// A hypothesized grasp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspCandidate {
    /// Palm-center pose in the robot frame; columns = approach, closing, hand axis.
    pub pose: RigidTransform,
    pub grasp_width: f64,
    pub score: f64,
    pub closing_point_count: usize,
    pub antipodal_fraction: f64,
    /// Rank of the seed in the sampled seed list.
    pub seed_index: usize,
    pub orientation_index: usize,
    /// Cloud index of the seed point.
    pub seed_point: usize,
}

impl GraspCandidate {
    pub fn approach(&self) -> Vec3 {
        self.pose.axis(0)
    }

    pub fn closing_axis(&self) -> Vec3 {
        self.pose.axis(1)
    }

    pub fn hand_axis(&self) -> Vec3 {
        self.pose.axis(2)
    }

    /// Center of the closing region (the tool center point).
    pub fn center(&self, hand: &HandGeometry) -> Point3 {
        self.pose.origin() + self.approach() * (hand.finger_depth / 2.0)
    }

    /// Angle between the approach axis and world `-z`, in degrees.
    pub fn approach_angle_deg(&self) -> f64 {
        self.approach().dot(&-Vec3::z()).clamp(-1.0, 1.0).acos().to_degrees()
    }

    pub fn tie_key(&self) -> (usize, usize) {
        (self.seed_index, self.orientation_index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regions_partition_the_hand() {
        let h = HandGeometry::default();
        assert_eq!(h.region([10.0, 0.0, 0.0]), HandRegion::Closing);
        assert_eq!(h.region([10.0, 40.0, 0.0]), HandRegion::Closing);
        assert_eq!(h.region([10.0, 40.5, 0.0]), HandRegion::Finger);
        assert_eq!(h.region([10.0, -52.0, 12.0]), HandRegion::Finger);
        assert_eq!(h.region([10.0, 52.5, 0.0]), HandRegion::Outside);
        assert_eq!(h.region([-1.0, 0.0, 0.0]), HandRegion::Palm);
        assert_eq!(h.region([-21.0, 0.0, 0.0]), HandRegion::Outside);
        assert_eq!(h.region([51.0, 0.0, 0.0]), HandRegion::Outside);
        assert_eq!(h.region([10.0, 0.0, 13.0]), HandRegion::Outside);
    }

    #[test]
    fn config_validation() {
        assert!(GraspConfig::default().validate().is_ok());
        let mut c = GraspConfig::default();
        c.approach_filter.cone_half_angle_deg = 0.0;
        assert!(c.validate().is_err());
        c.approach_filter.cone_half_angle_deg = 90.0;
        assert!(c.validate().is_ok());
        c.num_samples = 0;
        assert!(c.validate().is_err());
        let cfg: GraspConfig = serde_json::from_str(r#"{"num_samples": 50}"#).unwrap();
        assert_eq!(cfg.num_samples, 50);
        assert_eq!(cfg.num_orientations, 5);
        assert_eq!(cfg.num_selected, 20);
    }
}
