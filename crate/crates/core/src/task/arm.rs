use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, RigidTransform, Vec3};
use crate::grasp::{GraspCandidate, HandGeometry, HandRegion};
use crate::pointcloud::Workspace;
use crate::scene::Scene;

/// Sampling pitch of the closing region when checking what the fingers hold.
const CONTACT_PITCH: f64 = 2.0;

/// What the gripper is holding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Held {
    pub object_id: usize,
    /// Object pose in the gripper frame; constant while held.
    pub grip_to_object: RigidTransform,
    /// Centroid of the object's samples between the fingers, gripper frame.
    pub closing_centroid: Point3,
    pub closing_points: usize,
}

/// End-effector state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmState {
    /// Palm-center pose, same axis convention as grasp candidates.
    pub pose: RigidTransform,
    pub opening: f64,
    pub held: Option<Held>,
    pub reach: Workspace,
}

impl ArmState {
    /// Open gripper pointing straight down at `position`.
    pub fn home(position: Point3, hand: &HandGeometry, reach: Workspace) -> Self {
        let pose = RigidTransform::from_axes(&-Vec3::z(), &Vec3::y(), &Vec3::x(), &position);
        Self {
            pose,
            opening: hand.max_aperture,
            held: None,
            reach,
        }
    }
}

/// Moves the palm to `pose`, dragging any held object along.
pub fn move_to(arm: &ArmState, scene: &mut Scene, pose: RigidTransform) -> Result<ArmState> {
    if !arm.reach.contains(&pose.origin()) {
        return Err(Error::Unreachable);
    }
    let mut next = *arm;
    next.pose = pose;
    if let Some(h) = &arm.held {
        scene.set_pose(h.object_id, pose.compose(&h.grip_to_object));
    }
    Ok(next)
}

/// Object surface seen between the open fingers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosingContact {
    pub object_id: usize,
    /// Samples inside the object with a neighbor outside it.
    pub surface_points: usize,
    /// Samples inside the object.
    pub inside_points: usize,
    /// Mean of the inside samples, world frame.
    pub centroid: Point3,
}

/// Objects intersecting the closing region of a hand at `pose`, by id.
pub fn closing_contacts(scene: &Scene, hand: &HandGeometry, pose: &RigidTransform) -> Vec<ClosingContact> {
    let n = |extent: f64| (extent / CONTACT_PITCH).floor() as i64;
    let (na, nc, nh) = (n(hand.finger_depth), n(hand.max_aperture / 2.0), n(hand.hand_height / 2.0));
    let region_center = pose.transform_point(&Point3::new(hand.finger_depth / 2.0, 0.0, 0.0));
    let region_radius = Vec3::new(hand.finger_depth / 2.0, hand.max_aperture / 2.0, hand.hand_height / 2.0).norm();
    let step_axes = [pose.axis(0), pose.axis(1), pose.axis(2)];
    let mut out = Vec::new();
    for obj in scene.objects() {
        let (c, r) = obj.bounding_sphere();
        if (c - region_center).norm() > r + region_radius + CONTACT_PITCH {
            continue;
        }
        let mut surface = 0;
        let mut inside = 0;
        let mut sum = Vec3::zeros();
        for i in 0..=na {
            for j in -nc..=nc {
                for k in -nh..=nh {
                    let l = [i as f64 * CONTACT_PITCH, j as f64 * CONTACT_PITCH, k as f64 * CONTACT_PITCH];
                    debug_assert_eq!(hand.region(l), HandRegion::Closing);
                    let p = pose.transform_point(&Point3::from(l));
                    if !obj.contains(&p) {
                        continue;
                    }
                    inside += 1;
                    sum += p.coords;
                    let exposed = step_axes
                        .iter()
                        .any(|ax| !obj.contains(&(p + ax * CONTACT_PITCH)) || !obj.contains(&(p - ax * CONTACT_PITCH)));
                    if exposed {
                        surface += 1;
                    }
                }
            }
        }
        if inside > 0 {
            out.push(ClosingContact {
                object_id: obj.id(),
                surface_points: surface,
                inside_points: inside,
                centroid: Point3::from(sum / inside as f64),
            });
        }
    }
    out
}

/// Pre-grasp, approach, close. The grasp holds when exactly one object lies
/// between the fingers with at least `min_points` surface samples.
pub fn execute_grasp(
    arm: &ArmState,
    scene: &mut Scene,
    hand: &HandGeometry,
    g: &GraspCandidate,
    min_points: usize,
    pre_grasp_offset: f64,
) -> Result<ArmState> {
    if let Some(h) = &arm.held {
        return Err(Error::AlreadyHolding(h.object_id));
    }
    let pre = g.pose.with_translation(g.pose.translation - g.approach() * pre_grasp_offset);
    let arm = move_to(arm, scene, pre)?;
    let mut arm = move_to(&arm, scene, g.pose)?;
    let contacts = closing_contacts(scene, hand, &g.pose);
    match contacts.len() {
        0 => return Err(Error::GraspMiss { points: 0 }),
        1 => {}
        n => return Err(Error::MultiObject { count: n }),
    }
    let c = contacts[0];
    if c.surface_points < min_points {
        return Err(Error::GraspMiss { points: c.surface_points });
    }
    let obj_pose = *scene.object(c.object_id).expect("contact refers to a scene object").pose();
    let inv = g.pose.invert();
    arm.opening = g.grasp_width.min(hand.max_aperture);
    arm.held = Some(Held {
        object_id: c.object_id,
        grip_to_object: inv.compose(&obj_pose),
        closing_centroid: inv.transform_point(&c.centroid),
        closing_points: c.surface_points,
    });
    Ok(arm)
}

/// Opens the gripper; the object stays where it is.
pub fn release(arm: &ArmState, hand: &HandGeometry) -> Result<(ArmState, usize)> {
    let h = arm.held.ok_or(Error::NothingHeld)?;
    let mut next = *arm;
    next.held = None;
    next.opening = hand.max_aperture;
    Ok((next, h.object_id))
}
