use serde::{Deserialize, Serialize};

use super::arm::{execute_grasp, move_to, release, ArmState};
use super::report::{PairCount, RockRecord, TaskKind, TrialReport};
use super::{sub_seed, Clock, TaskConfig};
use crate::error::{Error, Result};
use crate::geometry::{Point3, Vec3};
use crate::grasp::{detect_grasps, GraspCandidate, HandGeometry};
use crate::mask::ObjectClass;
use crate::perception::{estimate_height, object_workspace_pose, pairwise_order_agreement, sort_by_mask_area, Detector, OracleDetector};
use crate::pointcloud::{cloud_from_depth, fit_plane_ransac, Plane, Workspace};
use crate::scene::{render_depth, render_view, rest_height, RockModel, Scene};

/// Rocks placed so far at the stacking spot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackState {
    pub target: [f64; 2],
    pub placed: Vec<usize>,
    /// Believed height of the stack top (mm).
    pub top_z: f64,
    pub alignment_errors: Vec<f64>,
}

impl StackState {
    pub fn new(target: [f64; 2], ground_z: f64) -> Self {
        Self {
            target,
            placed: Vec::new(),
            top_z: ground_z,
            alignment_errors: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Toppled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub object_id: usize,
    pub stability: Stability,
    /// Rock underneath, `None` for the first rock.
    pub support: Option<usize>,
    /// Horizontal distance between the rock's center and the support's
    /// center, or the stack target for the first rock (mm).
    pub alignment_error: f64,
}

/// Points on a `grid` lattice where the top rock's lower surface comes
/// within `band` of the closest approach to the support's upper surface.
pub fn contact_cells(top: &RockModel, support: &RockModel, grid: f64, band: f64) -> Result<Vec<[f64; 2]>> {
    let (tmin, tmax) = top.footprint_bounds();
    let (smin, smax) = support.footprint_bounds();
    let lo = [tmin[0].max(smin[0]), tmin[1].max(smin[1])];
    let hi = [tmax[0].min(smax[0]), tmax[1].min(smax[1])];
    let mut gaps = Vec::new();
    if lo[0] <= hi[0] && lo[1] <= hi[1] {
        // Lattice anchored at the world origin so results do not depend on
        // the bounding boxes.
        let (i0, i1) = ((lo[0] / grid).ceil() as i64, (hi[0] / grid).floor() as i64);
        let (j0, j1) = ((lo[1] / grid).ceil() as i64, (hi[1] / grid).floor() as i64);
        for i in i0..=i1 {
            let x = i as f64 * grid;
            for j in j0..=j1 {
                let y = j as f64 * grid;
                if let (Some(b), Some(t)) = (top.bottom_surface(x, y), support.top_surface(x, y)) {
                    gaps.push(([x, y], b - t));
                }
            }
        }
    }
    let min_gap = gaps.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
    if !(min_gap <= band) {
        return Err(Error::NoContact { gap: min_gap });
    }
    Ok(gaps.into_iter().filter(|g| g.1 <= min_gap + band).map(|g| g.0).collect())
}

/// Static stability of `top` resting on `support`: the center of mass must
/// project inside the convex hull of the contact region.
pub fn check_stack_stability(top: &RockModel, support: &RockModel, grid: f64, band: f64) -> Result<Stability> {
    let cells = contact_cells(top, support, grid, band)?;
    let com = top.com();
    Ok(if hull_contains(&cells, [com.x, com.y]) {
        Stability::Stable
    } else {
        Stability::Toppled
    })
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Monotone-chain hull, counter-clockwise, collinear points dropped.
fn convex_hull(pts: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut p = pts.to_vec();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull
}

fn hull_contains(pts: &[[f64; 2]], q: [f64; 2]) -> bool {
    let h = convex_hull(pts);
    match h.len() {
        0 => false,
        1 => h[0] == q,
        2 => {
            cross(h[0], h[1], q).abs() < 1e-12 && {
                let t = (q[0] - h[0][0]) * (h[1][0] - h[0][0]) + (q[1] - h[0][1]) * (h[1][1] - h[0][1]);
                let len2 = (h[1][0] - h[0][0]).powi(2) + (h[1][1] - h[0][1]).powi(2);
                (0.0..=len2).contains(&t)
            }
        }
        n => (0..n).all(|i| cross(h[i], h[(i + 1) % n], q) >= -1e-12),
    }
}

/// Carries the held rock over the stack, releases it, lets it drop and
/// checks whether it stays.
///
/// The release puts the rock's estimated top `release_clearance` rock
/// heights above the believed stack top. The estimated top sits above the
/// centroid of what the fingers closed on, so an off-center grasp shifts the
/// rock off the stack axis. A toppled rock is removed from the scene.
#[allow(clippy::too_many_arguments)]
pub fn place_on_stack(
    arm: &ArmState,
    scene: &mut Scene,
    stack: &StackState,
    rock_height: f64,
    support_z: f64,
    hand: &HandGeometry,
    params: &super::TaskParams,
) -> Result<(ArmState, StackState, Placement)> {
    let held = arm.held.ok_or(Error::NothingHeld)?;
    let id = held.object_id;
    if scene.rock(id).is_none() {
        return Err(Error::Degenerate(format!("held object {id} is not a rock")));
    }
    let cc = arm.pose.transform_point(&held.closing_centroid);
    let reference = Point3::new(cc.x, cc.y, support_z + rock_height);
    let goal = Point3::new(
        stack.target[0],
        stack.target[1],
        stack.top_z + rock_height * params.release_clearance,
    );
    let pose = arm.pose.with_translation(arm.pose.translation + (goal - reference));
    let arm = move_to(arm, scene, pose)?;
    let (arm, _) = release(&arm, hand)?;

    let z = {
        let rock = scene.rock(id).expect("checked above");
        rest_height(rock, |x, y| scene.support_height(x, y, Some(id)), 0.5)
    };
    let rock = scene.rock_mut(id).expect("checked above");
    rock.pose.translation.z = z;
    let rock = rock.clone();

    let support = stack.placed.last().copied();
    let (stability, alignment_error) = match support.and_then(|s| scene.rock(s)) {
        None => {
            let c = rock.center();
            (Stability::Stable, (c.x - stack.target[0]).hypot(c.y - stack.target[1]))
        }
        Some(below) => {
            let stability = match check_stack_stability(&rock, below, params.contact_grid, params.contact_band) {
                Ok(s) => s,
                Err(Error::NoContact { .. }) => Stability::Toppled,
                Err(e) => return Err(e),
            };
            let (a, b) = (rock.center(), below.center());
            (stability, (a.x - b.x).hypot(a.y - b.y))
        }
    };
    let mut next = stack.clone();
    if stability == Stability::Stable {
        next.placed.push(id);
        next.top_z = stack.top_z.max(stack.top_z + rock_height);
        next.alignment_errors.push(alignment_error);
    } else {
        scene.remove(id);
    }
    Ok((
        arm,
        next,
        Placement {
            object_id: id,
            stability,
            support,
            alignment_error,
        },
    ))
}

/// Grasps and places the best candidates in turn until one holds.
pub(crate) fn grasp_first_that_holds(
    arm: &ArmState,
    scene: &mut Scene,
    grasps: &[GraspCandidate],
    cfg: &TaskConfig,
) -> std::result::Result<(ArmState, GraspCandidate), String> {
    let mut last = String::from("no grasp candidates");
    for g in grasps.iter().take(cfg.params.grasp_attempts) {
        match execute_grasp(arm, scene, &cfg.hand, g, cfg.grasp.min_closing_points, cfg.params.pre_grasp_offset) {
            Ok(a) => return Ok((a, g.clone())),
            Err(e) => last = e.to_string(),
        }
    }
    Err(last)
}

/// Grasp candidates for the object imaged from `hand_camera_height` above
/// `position`, retrying once with a wider approach cone.
pub(crate) fn hand_camera_grasps(
    scene: &Scene,
    position: &Point3,
    plane: &Plane,
    cfg: &TaskConfig,
    seed: u64,
) -> Result<Vec<GraspCandidate>> {
    let eye = position + Vec3::new(0.0, 0.0, cfg.params.hand_camera_height);
    let cam = scene.hand_camera(eye, *position)?;
    let depth = render_depth(scene, &cam, &cfg.sensor, sub_seed(seed, 1));
    let cloud = cloud_from_depth(&depth, &cam.intrinsics, &cam.pose, 1)?;
    let mut gcfg = cfg.grasp.clone();
    let h = cfg.params.crop_half;
    gcfg.workspace = Some(Workspace::around(position, [h, h, h]));
    gcfg.seed = sub_seed(seed, 2);
    let grasps = detect_grasps(&cloud, &cfg.hand, &gcfg, Some(plane))?;
    if !grasps.is_empty() {
        return Ok(grasps);
    }
    detect_grasps(&cloud, &cfg.hand, &gcfg.widened(), Some(plane))
}

/// Full stacking run on a copy of `scene`: detect and sort the rocks with
/// the base camera, then pick each one and place it on the stack.
pub fn run_stacking_task(scene: &Scene, cfg: &TaskConfig, seed: u64) -> TrialReport {
    let mut report = TrialReport::new(TaskKind::Stack, seed);
    if let Err(e) = cfg.validate() {
        report.failure = Some(e.to_string());
        return report;
    }
    let mut scene = scene.clone();
    let n_rocks = scene.rocks.len();
    let mut clock = Clock::default();
    let t = cfg.params.timing;
    let home = Point3::new(300.0, 0.0, 400.0);
    let mut arm = ArmState::home(home, &cfg.hand, cfg.params.reach);

    let cam = scene.base_camera;
    let view = render_view(&scene, &cam, &cfg.sensor, sub_seed(seed, 0));
    let detections: Vec<_> = OracleDetector { sensor: cfg.sensor }
        .detect(&view, sub_seed(seed, 1))
        .into_iter()
        .filter(|d| d.class == ObjectClass::Rock)
        .collect();
    let sorted = sort_by_mask_area(detections);
    clock.record("detect", t.capture, None);

    let plane = cloud_from_depth(&view.depth, &cam.intrinsics, &cam.pose, cfg.params.base_cloud_stride)
        .and_then(|c| fit_plane_ransac(&c, cfg.params.ransac.iterations, cfg.params.ransac.tolerance, sub_seed(seed, 2)));
    let plane = match plane {
        Ok((p, _)) => p,
        Err(e) => {
            clock.record("plane_fit", 0.0, Some(e.to_string()));
            report.finish(clock);
            return report;
        }
    };
    clock.record("plane_fit", 0.0, None);

    let volumes: Vec<f64> = sorted
        .detections
        .iter()
        .map(|d| d.object_id.and_then(|id| scene.rock(id)).map_or(0.0, |r| r.true_volume))
        .collect();
    let (correct, total) = pairwise_order_agreement(&volumes);
    report.size_pairs = Some(PairCount { correct, total });
    let mut by_volume: Vec<usize> = (0..volumes.len()).collect();
    by_volume.sort_by(|&a, &b| volumes[b].total_cmp(&volumes[a]).then(a.cmp(&b)));

    let ground_z = plane.z_at(cfg.params.stack_target[0], cfg.params.stack_target[1]).unwrap_or(0.0);
    let mut stack = StackState::new(cfg.params.stack_target, ground_z);
    let mut all_ok = sorted.dropped_empty == 0;

    for (i, d) in sorted.detections.iter().enumerate() {
        let rseed = sub_seed(seed, 10 + i as u64);
        let truth = d.object_id.and_then(|id| scene.rock(id)).cloned();
        let mut rec = RockRecord {
            sorted_index: i,
            object_id: d.object_id,
            volume_order_correct: by_volume[i] == i,
            true_height: truth.as_ref().map(|r| r.height()),
            ..RockRecord::default()
        };
        let outcome = (|| -> std::result::Result<(), String> {
            let pose = object_workspace_pose(d, &view.depth, &cam.intrinsics, &cam.pose, Some(&cfg.params.reach))
                .map_err(|e| format!("pose: {e}"))?;
            let height = estimate_height(d, &view.depth, &cam.intrinsics, &cam.pose, &plane).map_err(|e| format!("height: {e}"))?;
            rec.height_estimate = Some(height);
            let support_z = plane.z_at(pose.position.x, pose.position.y).unwrap_or(0.0);

            let eye = pose.position + Vec3::new(0.0, 0.0, cfg.params.hand_camera_height);
            let dist = (eye - arm.pose.origin()).norm();
            arm = move_to(&arm, &mut scene, arm.pose.with_translation(eye.coords)).map_err(|e| format!("pre-grasp: {e}"))?;
            clock.record(format!("rock{i}/pre_grasp"), t.travel(dist) + t.capture, None);

            let grasps = hand_camera_grasps(&scene, &pose.position, &plane, cfg, rseed).map_err(|e| format!("grasp detection: {e}"))?;
            clock.record(format!("rock{i}/grasp_detection"), t.grasp_detection, None);
            let (held_arm, g) = grasp_first_that_holds(&arm, &mut scene, &grasps, cfg).map_err(|e| format!("grasp: {e}"))?;
            let dist = (held_arm.pose.origin() - arm.pose.origin()).norm() + cfg.params.pre_grasp_offset;
            arm = held_arm;
            clock.record(format!("rock{i}/grasp"), t.travel(dist) + t.gripper, None);
            rec.grasp_score = Some(g.score);
            if let Some(h) = arm.held {
                if let Some(r) = scene.rock(h.object_id) {
                    let cc = arm.pose.transform_point(&h.closing_centroid);
                    let c = r.com();
                    rec.grasp_offset = Some((cc.x - c.x).hypot(cc.y - c.y));
                }
            }

            let before = arm.pose.origin();
            let (a, s, placement) =
                place_on_stack(&arm, &mut scene, &stack, height, support_z, &cfg.hand, &cfg.params).map_err(|e| format!("place: {e}"))?;
            clock.record(
                format!("rock{i}/place"),
                t.travel((a.pose.origin() - before).norm()) + t.gripper,
                None,
            );
            arm = a;
            stack = s;
            rec.alignment_error = Some(placement.alignment_error);
            rec.on_rock = placement.support.is_some();
            rec.stability = Some(placement.stability);
            if placement.stability == Stability::Toppled {
                return Err("toppled".into());
            }
            Ok(())
        })();
        if let Err(msg) = outcome {
            all_ok = false;
            clock.record(format!("rock{i}/failed"), 0.0, Some(msg.clone()));
            rec.failure = Some(msg);
            // Whatever is still in the hand is dropped where it is.
            if let Ok((a, _)) = release(&arm, &cfg.hand) {
                arm = a;
            }
        }
        report.rocks.push(rec);
    }
    report.stack_count = stack.placed.len();
    report.success = all_ok && n_rocks > 0 && stack.placed.len() == n_rocks;
    report.finish(clock);
    report
}
