//! From instance masks and depth to positions and heights in the robot frame.

use serde::{Deserialize, Serialize};
use statrs::statistics::Statistics;

use crate::depth::DepthImage;
use crate::error::{Error, Result};
use crate::geometry::{deproject_pixel, CameraIntrinsics, PixelDepth, Point3, RigidTransform};
use crate::mask::{mask_area, mask_centroid, BBox, InstanceMask, ObjectClass};
use crate::pointcloud::{Plane, Workspace};
use crate::scene::{degrade_mask, SensorModel, Terrain, View};

/// Half-size of the depth median window, in pixels (5x5).
pub const MEDIAN_RADIUS: u32 = 2;

/// Quantile of the filtered mask heights taken as the object top.
pub const TOP_QUANTILE: f64 = 0.95;

/// One segmented object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class: ObjectClass,
    /// Tight box of `mask`; `None` only for an empty mask.
    pub bbox: Option<BBox>,
    pub mask: InstanceMask,
    pub confidence: f64,
    /// Ground-truth id when the detection came from the simulator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_id: Option<usize>,
}

impl Detection {
    pub fn new(mask: InstanceMask, object_id: Option<usize>) -> Self {
        Self {
            class: mask.class,
            bbox: mask.bbox(),
            confidence: mask.confidence,
            mask,
            object_id,
        }
    }

    pub fn area(&self) -> usize {
        mask_area(&self.mask)
    }
}

/// Source of detections for a rendered view. A learned segmenter would
/// implement this from the image alone.
pub trait Detector {
    fn detect(&self, view: &View, seed: u64) -> Vec<Detection>;
}

/// Detector backed by the renderer's exact masks, degraded by a sensor model.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OracleDetector {
    pub sensor: SensorModel,
}

impl Detector for OracleDetector {
    fn detect(&self, view: &View, seed: u64) -> Vec<Detection> {
        view.masks
            .iter()
            .map(|m| {
                let degraded = degrade_mask(&m.mask, &self.sensor, seed.wrapping_add(m.object_id as u64));
                Detection::new(degraded, Some(m.object_id))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SortedDetections {
    pub detections: Vec<Detection>,
    /// Detections dropped for having an empty mask.
    pub dropped_empty: usize,
}

/// Largest mask first. Equal areas are ordered by centroid row, then
/// column; remaining ties keep the input order.
pub fn sort_by_mask_area(ds: Vec<Detection>) -> SortedDetections {
    let total = ds.len();
    let mut keyed: Vec<(usize, (f64, f64), Detection)> = ds
        .into_iter()
        .filter_map(|d| {
            let c = mask_centroid(&d.mask).ok()?;
            Some((d.area(), c, d))
        })
        .collect();
    let dropped_empty = total - keyed.len();
    if dropped_empty > 0 {
        log::warn!("dropped {dropped_empty} detections with empty masks");
    }
    keyed.sort_by(|a, b| b.0.cmp(&a.0).then(a.1 .1.total_cmp(&b.1 .1)).then(a.1 .0.total_cmp(&b.1 .0)));
    SortedDetections {
        detections: keyed.into_iter().map(|(_, _, d)| d).collect(),
        dropped_empty,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CameraId {
    #[default]
    Base,
    Hand,
}

/// Object position in the robot frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkspacePose {
    pub position: Point3,
    pub camera: CameraId,
    pub sample: u64,
}

impl WorkspacePose {
    pub fn tagged(mut self, camera: CameraId, sample: u64) -> Self {
        self.camera = camera;
        self.sample = sample;
        self
    }
}

/// Deprojects the median depth around the mask centroid into the robot frame.
pub fn object_workspace_pose(
    d: &Detection,
    depth: &DepthImage,
    intr: &CameraIntrinsics,
    cam_to_robot: &RigidTransform,
    workspace: Option<&Workspace>,
) -> Result<WorkspacePose> {
    let (u, v) = mask_centroid(&d.mask)?;
    let z = depth.window_median(u, v, MEDIAN_RADIUS).ok_or(Error::NoDepth { u, v })?;
    let p = cam_to_robot.transform_point(&deproject_pixel(intr, PixelDepth::new(u, v, z))?);
    if let Some(w) = workspace {
        if !w.contains(&p) {
            return Err(Error::OutOfWorkspace { x: p.x, y: p.y, z: p.z });
        }
    }
    Ok(WorkspacePose {
        position: p,
        camera: CameraId::Base,
        sample: 0,
    })
}

/// Surface an object rests on, as a height field.
pub trait SupportSurface {
    fn support_z(&self, x: f64, y: f64) -> Option<f64>;
}

impl SupportSurface for Plane {
    fn support_z(&self, x: f64, y: f64) -> Option<f64> {
        self.z_at(x, y)
    }
}

impl SupportSurface for Terrain {
    fn support_z(&self, x: f64, y: f64) -> Option<f64> {
        Some(self.height(x, y))
    }
}

/// Robot-frame points of the mask, one per pixel, each from the median
/// depth of its window.
pub fn mask_points(d: &Detection, depth: &DepthImage, intr: &CameraIntrinsics, cam_to_robot: &RigidTransform) -> Result<Vec<Point3>> {
    let mut out = Vec::new();
    for (u, v) in d.mask.pixels() {
        let (u, v) = (u as f64, v as f64);
        if let Some(z) = depth.window_median(u, v, MEDIAN_RADIUS) {
            out.push(cam_to_robot.transform_point(&deproject_pixel(intr, PixelDepth::new(u, v, z))?));
        }
    }
    Ok(out)
}

/// Object height above the support surface under its footprint centroid.
///
/// The top is a high quantile of the median-filtered mask points rather
/// than their maximum, which would chase the noise.
pub fn estimate_height(
    d: &Detection,
    depth: &DepthImage,
    intr: &CameraIntrinsics,
    cam_to_robot: &RigidTransform,
    support: &dyn SupportSurface,
) -> Result<f64> {
    let pts = mask_points(d, depth, intr, cam_to_robot)?;
    if pts.is_empty() {
        let (u, v) = mask_centroid(&d.mask)?;
        return Err(Error::NoDepth { u, v });
    }
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(x, y), p| (x + p.x / n, y + p.y / n));
    let mut zs: Vec<f64> = pts.iter().map(|p| p.z).collect();
    zs.sort_by(f64::total_cmp);
    let k = ((zs.len() - 1) as f64 * TOP_QUANTILE).round() as usize;
    let top = zs[k];
    let base = support
        .support_z(mx, my)
        .ok_or_else(|| Error::Degenerate("support surface is vertical".into()))?;
    let h = top - base;
    if h <= 0.0 {
        return Err(Error::NegativeHeight(h));
    }
    Ok(h)
}

/// Per-axis sample standard deviation (n - 1 denominator), in mm.
pub fn pose_stability_stats(samples: &[WorkspacePose]) -> Result<[f64; 3]> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    // Offsets from the first sample, so identical samples give exactly zero.
    let first = samples[0].position;
    let axis = |i: usize| samples.iter().map(|s| s.position[i] - first[i]).std_dev();
    Ok([axis(0), axis(1), axis(2)])
}

/// Pairs ordered consistently with `truth` (descending), and pairs compared.
/// Pairs with equal truth values count as correct.
pub fn pairwise_order_agreement(truth_in_predicted_order: &[f64]) -> (usize, usize) {
    let t = truth_in_predicted_order;
    let mut correct = 0;
    let mut total = 0;
    for i in 0..t.len() {
        for j in i + 1..t.len() {
            total += 1;
            if t[i] >= t[j] {
                correct += 1;
            }
        }
    }
    (correct, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    fn square(u0: u32, v0: u32, side: u32) -> Detection {
        let px = (u0..u0 + side).flat_map(|u| (v0..v0 + side).map(move |v| (u, v)));
        Detection::new(InstanceMask::from_pixels(64, 64, ObjectClass::Rock, px), None)
    }

    #[test]
    fn sorts_by_area_then_centroid() {
        let ds = vec![square(0, 0, 4), square(10, 10, 3), square(30, 30, 5)];
        let s = sort_by_mask_area(ds);
        let areas: Vec<usize> = s.detections.iter().map(|d| d.area()).collect();
        assert_eq!(areas, vec![25, 16, 9]);
        let ties = vec![square(20, 9, 3), square(5, 9, 3), square(40, 1, 3)];
        let s = sort_by_mask_area(ties);
        let us: Vec<u32> = s.detections.iter().map(|d| d.bbox.unwrap().u_min).collect();
        assert_eq!(us, vec![40, 5, 20]);
    }

    #[test]
    fn empty_masks_are_dropped() {
        let empty = Detection::new(InstanceMask::new(64, 64, ObjectClass::Rock), None);
        let s = sort_by_mask_area(vec![empty, square(0, 0, 2)]);
        assert_eq!(s.detections.len(), 1);
        assert_eq!(s.dropped_empty, 1);
    }

    #[test]
    fn pose_at_principal_point() {
        let intr = CameraIntrinsics::new(100.0, 100.0, 32.0, 32.0, 64, 64).unwrap();
        let d = square(30, 30, 5);
        let depth = DepthImage::filled(64, 64, 500);
        let p = object_workspace_pose(&d, &depth, &intr, &RigidTransform::identity(), None).unwrap();
        assert!((p.position - Point3::new(0.0, 0.0, 500.0)).norm() < 1e-9);
        let w = Workspace::new([-10.0, -10.0, 0.0], [10.0, 10.0, 100.0]).unwrap();
        assert!(matches!(
            object_workspace_pose(&d, &depth, &intr, &RigidTransform::identity(), Some(&w)),
            Err(Error::OutOfWorkspace { .. })
        ));
        let holes = DepthImage::new(64, 64);
        assert!(matches!(
            object_workspace_pose(&d, &holes, &intr, &RigidTransform::identity(), None),
            Err(Error::NoDepth { .. })
        ));
    }

    #[test]
    fn height_over_plane() {
        let intr = CameraIntrinsics::new(100.0, 100.0, 32.0, 32.0, 64, 64).unwrap();
        // Camera 500 above the ground looking down: camera z maps to world -z.
        let pose = RigidTransform::rot_x(std::f64::consts::PI).with_translation(Vec3::new(0.0, 0.0, 500.0));
        let d = square(28, 28, 8);
        let mut depth = DepthImage::filled(64, 64, 500);
        for (u, v) in d.mask.pixels() {
            depth.set(u, v, 450);
        }
        let h = estimate_height(&d, &depth, &intr, &pose, &Plane::horizontal(0.0)).unwrap();
        assert!((h - 50.0).abs() < 1e-9);
        assert!(matches!(
            estimate_height(&d, &depth, &intr, &pose, &Plane::horizontal(60.0)),
            Err(Error::NegativeHeight(_))
        ));
    }

    #[test]
    fn stability_stats() {
        let at = |x: f64| WorkspacePose {
            position: Point3::new(x, 1.0, 2.0),
            camera: CameraId::Base,
            sample: 0,
        };
        let s = pose_stability_stats(&[at(3.0), at(3.0), at(3.0)]).unwrap();
        assert_eq!(s, [0.0, 0.0, 0.0]);
        let alt: Vec<_> = (0..1000).map(|i| at(if i % 2 == 0 { -1.0 } else { 1.0 })).collect();
        let s = pose_stability_stats(&alt).unwrap();
        assert!((s[0] - (1000.0f64 / 999.0).sqrt()).abs() < 1e-12);
        assert!(pose_stability_stats(&[at(0.0)]).is_err());
    }

    #[test]
    fn order_agreement() {
        assert_eq!(pairwise_order_agreement(&[3.0, 2.0, 1.0]), (3, 3));
        assert_eq!(pairwise_order_agreement(&[1.0, 2.0, 3.0]), (0, 3));
        assert_eq!(pairwise_order_agreement(&[5.0]), (0, 0));
    }
}
