use serde::{Deserialize, Serialize};

use super::arm::{move_to, release, ArmState};
use super::report::{AssemblyRecord, TaskKind, TrialReport};
use super::stack::{grasp_first_that_holds, hand_camera_grasps};
use super::{sub_seed, Clock, TaskConfig};
use crate::error::{Error, Result};
use crate::geometry::{Camera, PixelDepth, Point3, RigidTransform, Vec3};
use crate::grasp::HandGeometry;
use crate::mask::ObjectClass;
use crate::perception::{object_workspace_pose, sort_by_mask_area, Detector, OracleDetector};
use crate::pointcloud::{cloud_from_depth, fit_plane_ransac};
use crate::scene::{render_view, Primitive, Scene, Shape};

/// Steps of the assembly sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssemblyPhase {
    GetPose,
    Grasp,
    PreAssembly,
    DetectJoint,
    Displace,
    Attach,
    Done,
    Failed,
}

impl AssemblyPhase {
    pub fn as_str(&self) -> &'static str {
        match self {
            AssemblyPhase::GetPose => "get_pose",
            AssemblyPhase::Grasp => "grasp",
            AssemblyPhase::PreAssembly => "pre_assembly",
            AssemblyPhase::DetectJoint => "detect_joint",
            AssemblyPhase::Displace => "displace",
            AssemblyPhase::Attach => "attach",
            AssemblyPhase::Done => "done",
            AssemblyPhase::Failed => "failed",
        }
    }

    /// The phase that follows on success.
    pub fn next(&self) -> Option<AssemblyPhase> {
        use AssemblyPhase::*;
        match self {
            GetPose => Some(Grasp),
            Grasp => Some(PreAssembly),
            PreAssembly => Some(DetectJoint),
            DetectJoint => Some(Displace),
            Displace => Some(Attach),
            Attach => Some(Done),
            Done | Failed => None,
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, AssemblyPhase::Done | AssemblyPhase::Failed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssemblyFailure {
    PoseDetectFail,
    GraspFail,
    JointNotVisible,
    AttachMisaligned,
}

impl AssemblyFailure {
    pub fn as_str(&self) -> &'static str {
        match self {
            AssemblyFailure::PoseDetectFail => "pose-detect-fail",
            AssemblyFailure::GraspFail => "grasp-fail",
            AssemblyFailure::JointNotVisible => "joint-not-visible",
            AssemblyFailure::AttachMisaligned => "attach-misaligned",
        }
    }
}

/// Assembly progress. Phases only move forward one step at a time, or to
/// `Failed` from any non-terminal phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssemblyState {
    pub phase: AssemblyPhase,
    pub part_id: Option<usize>,
    pub target_joint: Option<usize>,
    pub displacement: Option<RigidTransform>,
    pub failure: Option<AssemblyFailure>,
    /// Phase that was active when the run failed.
    pub failed_in: Option<AssemblyPhase>,
}

impl Default for AssemblyState {
    fn default() -> Self {
        Self {
            phase: AssemblyPhase::GetPose,
            part_id: None,
            target_joint: None,
            displacement: None,
            failure: None,
            failed_in: None,
        }
    }
}

impl AssemblyState {
    pub fn is_legal(from: AssemblyPhase, to: AssemblyPhase) -> bool {
        from.next() == Some(to) || (to == AssemblyPhase::Failed && !from.is_terminal())
    }

    pub fn advance(&mut self, to: AssemblyPhase) -> Result<()> {
        if !Self::is_legal(self.phase, to) {
            return Err(Error::IllegalTransition {
                from: self.phase.as_str().into(),
                to: to.as_str().into(),
            });
        }
        self.phase = to;
        Ok(())
    }

    pub fn fail(&mut self, code: AssemblyFailure) -> Result<()> {
        let from = self.phase;
        self.advance(AssemblyPhase::Failed)?;
        self.failure = Some(code);
        self.failed_in = Some(from);
        Ok(())
    }
}

/// Nearest hit of a world ray with the gripper's fingers or palm, opened
/// to `opening`.
pub fn gripper_intersect(hand: &HandGeometry, pose: &RigidTransform, opening: f64, o: &Point3, d: &Vec3) -> Option<f64> {
    let inv = pose.invert();
    let (lo, ld) = (inv.transform_point(o), inv.transform_vector(d));
    let (fd, fw, hh) = (hand.finger_depth, hand.finger_width, hand.hand_height);
    let half = opening / 2.0;
    let parts = [
        Primitive::new(
            Shape::Box {
                half: [fd / 2.0, fw / 2.0, hh / 2.0],
            },
            RigidTransform::from_translation(fd / 2.0, half + fw / 2.0, 0.0),
        ),
        Primitive::new(
            Shape::Box {
                half: [fd / 2.0, fw / 2.0, hh / 2.0],
            },
            RigidTransform::from_translation(fd / 2.0, -half - fw / 2.0, 0.0),
        ),
        Primitive::new(
            Shape::Box {
                half: [hand.palm_depth / 2.0, half + fw, hh / 2.0],
            },
            RigidTransform::from_translation(-hand.palm_depth / 2.0, 0.0, 0.0),
        ),
    ];
    parts
        .iter()
        .filter_map(|p| p.intersect(&lo, &ld))
        .fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.min(t))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    Visible,
    /// The plug face points away from the camera.
    FacingAway,
    /// Something lies between the camera and the plug.
    Occluded,
    OutOfView,
}

/// Whether `cam` can see the plug point of part `part_id`.
pub fn plug_visibility(
    scene: &Scene,
    arm: &ArmState,
    hand: &HandGeometry,
    part_id: usize,
    cam: &Camera,
    max_facing_deg: f64,
) -> Result<Visibility> {
    let part = scene
        .part(part_id)
        .ok_or_else(|| Error::Degenerate(format!("object {part_id} is not a robot part")))?;
    let plug = part
        .plug()
        .ok_or_else(|| Error::Degenerate(format!("part {part_id} has no plug")))?;
    let frame = part.attachment_world(plug);
    let p = frame.origin();
    let o = cam.center();
    let to_cam = o - p;
    let dist = to_cam.norm();
    let facing = frame.axis(2).angle(&to_cam).to_degrees();
    if facing >= max_facing_deg {
        return Ok(Visibility::FacingAway);
    }
    let px = cam.project_world(&p)?;
    if !cam.intrinsics.contains(px.u.round(), px.v.round()) {
        return Ok(Visibility::OutOfView);
    }
    let d = -to_cam / dist;
    let limit = dist - 0.5;
    let blocked = |t: Option<f64>| t.is_some_and(|t| t < limit);
    for obj in scene.objects() {
        let t = if obj.id() == part_id {
            part.intersect_except(&o, &d, Some(plug.primitive))
        } else {
            obj.intersect(&o, &d)
        };
        if blocked(t) {
            return Ok(Visibility::Occluded);
        }
    }
    if blocked(gripper_intersect(hand, &arm.pose, arm.opening, &o, &d)) {
        return Ok(Visibility::Occluded);
    }
    Ok(Visibility::Visible)
}

/// Roll about `axis` that turns `v` closest to `toward`.
fn facing_roll(axis: &Vec3, v: &Vec3, toward: &Vec3) -> f64 {
    let c = axis.normalize();
    let perp = v - c * c.dot(v);
    let w = c.cross(&perp);
    let t = toward.normalize();
    if perp.norm() < 1e-9 {
        return 0.0;
    }
    w.dot(&t).atan2(perp.dot(&t))
}

/// Depth reading of the plug point and its deprojection; `None` when the
/// sensor returns no depth there.
fn measure_plug(scene: &Scene, cam: &Camera, part_id: usize, cfg: &TaskConfig, seed: u64) -> Result<Option<Point3>> {
    let part = scene.part(part_id).expect("visibility checked the part");
    let plug = part.plug().expect("visibility checked the plug");
    let p = part.attachment_world(plug).origin();
    let px = cam.project_world(&p)?;
    let (u, v) = (px.u.round(), px.v.round());
    let idx = v as usize * cam.intrinsics.width as usize + u as usize;
    let d = cfg.sensor.measure(px.d, idx, seed);
    if d == 0 {
        return Ok(None);
    }
    Ok(Some(cam.deproject_world(PixelDepth::new(u, v, d as f64))?))
}

/// Assembly run on a copy of `scene`: locate the loose part and the free
/// body joints, grasp the part, show its plug to the base camera, then move
/// it so the measured plug lands on the estimated socket.
pub fn run_assembly_task(scene: &Scene, cfg: &TaskConfig, seed: u64) -> TrialReport {
    let mut report = TrialReport::new(TaskKind::Assemble, seed);
    if let Err(e) = cfg.validate() {
        report.failure = Some(e.to_string());
        return report;
    }
    let mut scene = scene.clone();
    let mut clock = Clock::default();
    let mut state = AssemblyState::default();
    let mut rec = AssemblyRecord {
        part_class: None,
        part_id: None,
        target_joint: None,
        phase_reached: AssemblyPhase::GetPose,
        failure: None,
        grasp_success: false,
        joint_detected: None,
        attached: false,
        attach_position_error: None,
        attach_angle_error_deg: None,
        final_plug: None,
        socket: None,
    };
    let outcome = assemble(&mut scene, cfg, seed, &mut state, &mut rec, &mut clock);
    if let Err((code, msg)) = outcome {
        clock.record(
            format!("{}/failed", state.phase.as_str()),
            0.0,
            Some(format!("{}: {msg}", code.as_str())),
        );
        rec.phase_reached = state.phase;
        state.fail(code).expect("failure is legal from any running phase");
        rec.failure = Some(code);
    } else {
        rec.phase_reached = AssemblyPhase::Done;
    }
    report.success = rec.attached;
    report.assembly = Some(rec);
    report.finish(clock);
    report
}

type StepResult<T> = std::result::Result<T, (AssemblyFailure, String)>;

fn assemble(
    scene: &mut Scene,
    cfg: &TaskConfig,
    seed: u64,
    state: &mut AssemblyState,
    rec: &mut AssemblyRecord,
    clock: &mut Clock,
) -> StepResult<()> {
    use AssemblyFailure::*;
    let t = cfg.params.timing;
    let p = &cfg.params;
    let step = |s: &mut AssemblyState, to: AssemblyPhase| s.advance(to).expect("forward step is legal");

    // Object poses from the base camera.
    let cam = scene.base_camera;
    let view = render_view(scene, &cam, &cfg.sensor, sub_seed(seed, 0));
    let dets = sort_by_mask_area(OracleDetector { sensor: cfg.sensor }.detect(&view, sub_seed(seed, 1))).detections;
    clock.record("get_pose", t.capture, None);
    let part_det = dets
        .iter()
        .find(|d| matches!(d.class, ObjectClass::Head | ObjectClass::Leg))
        .ok_or((PoseDetectFail, "no part detected".to_string()))?;
    let part_id = part_det.object_id.ok_or((PoseDetectFail, "detection without object".to_string()))?;
    rec.part_id = Some(part_id);
    rec.part_class = Some(part_det.class);
    state.part_id = Some(part_id);
    let part_pose = object_workspace_pose(part_det, &view.depth, &cam.intrinsics, &cam.pose, Some(&p.reach))
        .map_err(|e| (PoseDetectFail, e.to_string()))?;
    let pre = Point3::from(p.pre_assembly);
    let mut joints: Vec<(usize, Point3)> = dets
        .iter()
        .filter(|d| d.class == ObjectClass::BodyJoint)
        .filter_map(|d| {
            let pose = object_workspace_pose(d, &view.depth, &cam.intrinsics, &cam.pose, Some(&p.reach)).ok()?;
            Some((d.object_id?, pose.position))
        })
        .collect();
    joints.sort_by(|a, b| {
        let da = (a.1.x - pre.x).hypot(a.1.y - pre.y);
        let db = (b.1.x - pre.x).hypot(b.1.y - pre.y);
        da.total_cmp(&db).then(a.0.cmp(&b.0))
    });
    let &(joint_id, socket_estimate) = joints.first().ok_or((PoseDetectFail, "no free body joint".to_string()))?;
    rec.target_joint = Some(joint_id);
    state.target_joint = Some(joint_id);
    let (plane, _) = cloud_from_depth(&view.depth, &cam.intrinsics, &cam.pose, p.base_cloud_stride)
        .and_then(|c| fit_plane_ransac(&c, p.ransac.iterations, p.ransac.tolerance, sub_seed(seed, 2)))
        .map_err(|e| (PoseDetectFail, format!("plane fit: {e}")))?;

    step(state, AssemblyPhase::Grasp);
    let mut arm = ArmState::home(Point3::new(300.0, 0.0, 400.0), &cfg.hand, p.reach);
    let eye = part_pose.position + Vec3::new(0.0, 0.0, p.hand_camera_height);
    arm = move_to(&arm, scene, arm.pose.with_translation(eye.coords)).map_err(|e| (GraspFail, e.to_string()))?;
    let grasps = hand_camera_grasps(scene, &part_pose.position, &plane, cfg, sub_seed(seed, 3)).map_err(|e| (GraspFail, e.to_string()))?;
    clock.record("grasp_detection", t.travel(300.0) + t.capture + t.grasp_detection, None);
    let (held_arm, _) = grasp_first_that_holds(&arm, scene, &grasps, cfg).map_err(|e| (GraspFail, e))?;
    arm = held_arm;
    if arm.held.map(|h| h.object_id) != Some(part_id) {
        return Err((GraspFail, "grasped the wrong object".to_string()));
    }
    rec.grasp_success = true;
    clock.record("grasp", t.travel(p.pre_grasp_offset * 2.0) + t.gripper, None);

    step(state, AssemblyPhase::PreAssembly);
    // Roll the hand about its closing axis until the plug faces the camera.
    let plug_axis = {
        let part = scene.part(part_id).expect("held part exists");
        part.attachment_world(part.plug().expect("part has a plug")).axis(2)
    };
    let roll = facing_roll(&arm.pose.axis(1), &plug_axis, &(cam.center() - pre));
    let mut pose = arm.pose.compose(&RigidTransform::rot_y(roll));
    pose.translation = pre.coords;
    let dist = (pose.origin() - arm.pose.origin()).norm();
    arm = move_to(&arm, scene, pose).map_err(|e| (GraspFail, format!("pre-assembly: {e}")))?;
    clock.record("pre_assembly", t.travel(dist), None);

    step(state, AssemblyPhase::DetectJoint);
    let vis = plug_visibility(scene, &arm, &cfg.hand, part_id, &cam, p.max_facing_deg).map_err(|e| (JointNotVisible, e.to_string()))?;
    rec.joint_detected = Some(false);
    if vis != Visibility::Visible {
        return Err((JointNotVisible, format!("{vis:?}").to_lowercase()));
    }
    let measured = measure_plug(scene, &cam, part_id, cfg, sub_seed(seed, 4))
        .map_err(|e| (JointNotVisible, e.to_string()))?
        .ok_or((JointNotVisible, "no depth at plug".to_string()))?;
    rec.joint_detected = Some(true);
    clock.record("detect_joint", t.capture, None);

    step(state, AssemblyPhase::Displace);
    let part = scene.part(part_id).expect("part exists");
    let plug_true = part.attachment_world(part.plug().expect("part has a plug"));
    let joint = scene.part(joint_id).expect("joint exists");
    let socket_true = joint.attachment_world(joint.socket().expect("joint has a socket"));
    // Orientations are known from the models; positions are measured.
    let plug_meas = RigidTransform::new(plug_true.rotation, measured.coords).expect("rotation from a model");
    let socket_est = RigidTransform::new(socket_true.rotation, socket_estimate.coords).expect("rotation from a model");
    let displacement = socket_est.compose(&plug_meas.invert());
    state.displacement = Some(displacement);
    let target = displacement.compose(&arm.pose).renormalized();
    let dist = (target.origin() - arm.pose.origin()).norm();
    arm = move_to(&arm, scene, target).map_err(|e| (AttachMisaligned, e.to_string()))?;
    clock.record("displace", t.travel(dist), None);

    step(state, AssemblyPhase::Attach);
    let part = scene.part(part_id).expect("part exists");
    let plug_now = part.attachment_world(part.plug().expect("part has a plug"));
    let pos_err = (plug_now.origin() - socket_true.origin()).norm();
    let ang_err = plug_now.angle_to(&socket_true).to_degrees();
    rec.attach_position_error = Some(pos_err);
    rec.attach_angle_error_deg = Some(ang_err);
    rec.final_plug = Some(plug_now);
    rec.socket = Some(socket_true);
    if pos_err > p.attach_tolerance_mm || ang_err > p.attach_tolerance_deg {
        return Err((AttachMisaligned, format!("{pos_err:.2} mm, {ang_err:.2} deg")));
    }
    let _ = release(&arm, &cfg.hand);
    rec.attached = true;
    clock.record("attach", t.gripper, None);
    step(state, AssemblyPhase::Done);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transitions() {
        use AssemblyPhase::*;
        let mut s = AssemblyState::default();
        assert!(s.advance(PreAssembly).is_err());
        s.advance(Grasp).unwrap();
        s.fail(AssemblyFailure::GraspFail).unwrap();
        assert_eq!(s.phase, Failed);
        assert_eq!(s.failed_in, Some(Grasp));
        assert!(s.advance(Done).is_err());
        assert!(s.fail(AssemblyFailure::GraspFail).is_err());
        let all = [GetPose, Grasp, PreAssembly, DetectJoint, Displace, Attach, Done, Failed];
        for a in all {
            for b in all {
                let expected = a.next() == Some(b) || (b == Failed && a != Done && a != Failed);
                assert_eq!(AssemblyState::is_legal(a, b), expected, "{a:?} -> {b:?}");
            }
        }
    }

    #[test]
    fn roll_turns_plug_toward_camera() {
        let up = Vec3::z();
        let phi = facing_roll(&Vec3::y(), &-Vec3::z(), &up);
        let r = RigidTransform::from_axis_angle(&Vec3::y(), phi);
        assert!((r.transform_vector(&-Vec3::z()) - up).norm() < 1e-9);
        let phi = facing_roll(&Vec3::y(), &Vec3::x(), &up);
        let r = RigidTransform::from_axis_angle(&Vec3::y(), phi);
        assert!((r.transform_vector(&Vec3::x()) - up).norm() < 1e-9);
    }

    #[test]
    fn gripper_blocks_rays_through_fingers() {
        let hand = HandGeometry::default();
        let pose = RigidTransform::from_axes(&-Vec3::z(), &Vec3::y(), &Vec3::x(), &Point3::new(0.0, 0.0, 100.0));
        // From the side at mid finger depth, the outer finger face at y = 52.
        let o = Point3::new(0.0, 100.0, 75.0);
        let t = gripper_intersect(&hand, &pose, 80.0, &o, &-Vec3::y()).unwrap();
        assert!((t - 48.0).abs() < 1e-6);
        let between = Point3::new(0.0, 0.0, 500.0);
        // Straight down between the fingers the palm is hit first.
        let t = gripper_intersect(&hand, &pose, 80.0, &between, &-Vec3::z()).unwrap();
        assert!((t - 380.0).abs() < 1e-6);
        assert!(gripper_intersect(&hand, &pose, 80.0, &Point3::new(0.0, 80.0, 500.0), &-Vec3::z()).is_none());
    }
}
