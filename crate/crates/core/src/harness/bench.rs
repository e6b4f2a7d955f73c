use statrs::distribution::{ContinuousCDF, Normal};

use crate::depth::DepthImage;
use crate::geometry::Vec3;
use crate::mask::{mask_centroid, ObjectClass};
use crate::perception::{object_workspace_pose, pose_stability_stats, Detection, Detector, OracleDetector, MEDIAN_RADIUS};
use crate::pointcloud::{cloud_from_depth, fit_plane_ransac};
use crate::scene::{trace, Scene, View};
use crate::task::{
    grasp_first_that_holds, hand_camera_grasps, move_to, sub_seed, ArmState, Clock, GraspBenchRecord, PoseBenchRecord, TaskConfig,
    TaskKind, TrialReport,
};

/// Repeated base-camera pose estimates of every visible object.
///
/// The scene is traced once. Each sample re-draws only the depth pixels
/// under the median window; since every pixel has its own noise stream this
/// equals rendering a fresh full frame with that sample's seed.
pub fn run_pose_bench(scene: &Scene, cfg: &TaskConfig, samples: usize, seed: u64) -> TrialReport {
    let mut report = TrialReport::new(TaskKind::PoseStability, seed);
    if let Err(e) = cfg.validate() {
        report.failure = Some(e.to_string());
        return report;
    }
    let mut clock = Clock::default();
    let cam = scene.base_camera;
    let intr = cam.intrinsics;
    let tr = trace(scene, &cam);
    let view = View {
        camera: cam,
        depth: tr.depth_image(&cfg.sensor, sub_seed(seed, 0)),
        masks: tr.masks(scene),
    };
    let detections = OracleDetector { sensor: cfg.sensor }.detect(&view, sub_seed(seed, 1));
    clock.record("detect", cfg.params.timing.capture, None);

    let mut scratch = DepthImage::new(intr.width, intr.height);
    for d in &detections {
        let Some(id) = d.object_id else { continue };
        let Ok((u, v)) = mask_centroid(&d.mask) else { continue };
        let window = window_pixels(&tr.depth, intr.width, intr.height, u, v);
        let mut poses = Vec::with_capacity(samples);
        for s in 0..samples {
            let sseed = sub_seed(seed, 1000 + s as u64);
            for &(i, true_depth) in &window {
                scratch.data_mut()[i] = cfg.sensor.measure(true_depth, i, sseed);
            }
            if let Ok(p) = object_workspace_pose(d, &scratch, &intr, &cam.pose, None) {
                poses.push(p.tagged(crate::perception::CameraId::Base, s as u64));
            }
        }
        for &(i, _) in &window {
            scratch.data_mut()[i] = 0;
        }
        let sigma = match pose_stability_stats(&poses) {
            Ok(s) => s,
            Err(e) => {
                clock.record(format!("object{id}"), 0.0, Some(e.to_string()));
                continue;
            }
        };
        let analytic = if cfg.sensor.dropout > 0.0 {
            None
        } else {
            let ray = Vec3::new((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0);
            let scale = (cam.pose.rotation * ray).z.abs();
            let depths: Vec<f64> = window.iter().map(|w| w.1).collect();
            median_reading_sigma(&depths, cfg.sensor.depth_noise).map(|s| s * scale)
        };
        report.pose_bench.push(PoseBenchRecord {
            object_id: id,
            class: d.class,
            samples: poses.len(),
            sigma,
            analytic_sigma_z: analytic,
        });
        clock.record(format!("object{id}"), poses.len() as f64 * cfg.params.timing.capture, None);
    }
    report.success = !report.pose_bench.is_empty();
    report.finish(clock);
    report
}

/// Indices and true depths of the valid pixels in the median window at the
/// pixel nearest `(u, v)`.
fn window_pixels(depth: &[f64], width: u32, height: u32, u: f64, v: f64) -> Vec<(usize, f64)> {
    let (cu, cv, r) = (u.round() as i64, v.round() as i64, MEDIAN_RADIUS as i64);
    let mut out = Vec::new();
    for y in (cv - r)..=(cv + r) {
        for x in (cu - r)..=(cu + r) {
            if x < 0 || y < 0 || x >= width as i64 || y >= height as i64 {
                continue;
            }
            let i = (y * width as i64 + x) as usize;
            if depth[i] > 0.0 {
                out.push((i, depth[i]));
            }
        }
    }
    out
}

/// Standard deviation of the median of readings `round(d_i + N(0, sigma²))`.
///
/// Exact for an odd count: the median is at most `k` iff at least
/// `(n + 1) / 2` readings are, a Poisson-binomial tail. `None` for an even
/// or empty set.
pub fn median_reading_sigma(depths: &[f64], sigma: f64) -> Option<f64> {
    let n = depths.len();
    if n == 0 || n.is_multiple_of(2) {
        return None;
    }
    if sigma == 0.0 {
        return Some(0.0);
    }
    let normal = Normal::new(0.0, sigma).ok()?;
    let need = n.div_ceil(2);
    let lo = depths.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = depths.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let k0 = (lo - 12.0 * sigma).floor() as i64 - 1;
    let k1 = (hi + 12.0 * sigma).ceil() as i64 + 1;
    let mut prev = 0.0;
    let (mut m1, mut m2) = (0.0, 0.0);
    let mut dp = vec![0.0; n + 1];
    for k in k0..=k1 {
        dp.iter_mut().for_each(|x| *x = 0.0);
        dp[0] = 1.0;
        for (j, &d) in depths.iter().enumerate() {
            let p = normal.cdf(k as f64 + 0.5 - d);
            for c in (0..=j + 1).rev() {
                let stay = dp[c] * (1.0 - p);
                let up = if c > 0 { dp[c - 1] * p } else { 0.0 };
                dp[c] = stay + up;
            }
        }
        let cdf: f64 = dp[need..].iter().sum();
        let pmf = cdf - prev;
        prev = cdf;
        // Center on `lo` to keep the moments well conditioned.
        let x = k as f64 - lo;
        m1 += pmf * x;
        m2 += pmf * x * x;
    }
    Some((m2 - m1 * m1).max(0.0).sqrt())
}

/// One grasp attempt on every rock and loose robot part seen by the base
/// camera, each from the untouched scene.
pub fn run_grasp_bench(scene: &Scene, cfg: &TaskConfig, seed: u64) -> TrialReport {
    let mut report = TrialReport::new(TaskKind::GraspBench, seed);
    if let Err(e) = cfg.validate() {
        report.failure = Some(e.to_string());
        return report;
    }
    let mut clock = Clock::default();
    let t = cfg.params.timing;
    let cam = scene.base_camera;
    let view = crate::scene::render_view(scene, &cam, &cfg.sensor, sub_seed(seed, 0));
    let detections: Vec<Detection> = OracleDetector { sensor: cfg.sensor }
        .detect(&view, sub_seed(seed, 1))
        .into_iter()
        .filter(|d| matches!(d.class, ObjectClass::Rock | ObjectClass::Head | ObjectClass::Leg))
        .collect();
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

    for (i, d) in detections.iter().enumerate() {
        let mut rec = GraspBenchRecord {
            object_id: d.object_id,
            class: d.class,
            candidates: 0,
            success: false,
            error: None,
        };
        let mut world = scene.clone();
        let outcome = (|| -> std::result::Result<(), String> {
            let pose = object_workspace_pose(d, &view.depth, &cam.intrinsics, &cam.pose, Some(&cfg.params.reach))
                .map_err(|e| format!("pose: {e}"))?;
            let eye = pose.position + Vec3::new(0.0, 0.0, cfg.params.hand_camera_height);
            let home = ArmState::home(eye, &cfg.hand, cfg.params.reach);
            let arm = move_to(&home, &mut world, home.pose).map_err(|e| format!("pre-grasp: {e}"))?;
            let grasps = hand_camera_grasps(&world, &pose.position, &plane, cfg, sub_seed(seed, 10 + i as u64))
                .map_err(|e| format!("grasp detection: {e}"))?;
            rec.candidates = grasps.len();
            let (held, _) = grasp_first_that_holds(&arm, &mut world, &grasps, cfg).map_err(|e| format!("grasp: {e}"))?;
            if held.held.map(|h| h.object_id) != d.object_id {
                return Err("grasp: picked a different object".into());
            }
            Ok(())
        })();
        rec.success = outcome.is_ok();
        let dur = t.capture + t.grasp_detection + t.gripper;
        clock.record(format!("object{i}"), dur, outcome.as_ref().err().cloned());
        rec.error = outcome.err();
        report.grasp_bench.push(rec);
    }
    report.success = !report.grasp_bench.is_empty() && report.grasp_bench.iter().all(|r| r.success);
    report.finish(clock);
    report
}
