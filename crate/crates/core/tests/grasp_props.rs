use lunarmanip_core::grasp::HandRegion;
use lunarmanip_core::{detect_grasps, GraspCandidate, GraspConfig, HandGeometry, Plane, Point3, PointCloud, RigidTransform, Vec3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Visible surface of a yawed box standing on z = 0, plus the ground around
/// it, sampled at about 2 mm with a little jitter.
fn box_cloud(size: [f64; 3], yaw: f64, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rot = RigidTransform::rot_z(yaw);
    let mut pts = Vec::new();
    let [hx, hy, h] = [size[0] / 2.0, size[1] / 2.0, size[2]];
    let mut jitter = |p: Vec3| {
        rot.transform_point(&Point3::from(
            p + Vec3::new(
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
                rng.random_range(-0.3..0.3),
            ),
        ))
    };
    let steps = |len: f64| (len / 2.0).ceil() as i64;
    for i in 0..=steps(2.0 * hx) {
        let x = -hx + 2.0 * hx * i as f64 / steps(2.0 * hx) as f64;
        for j in 0..=steps(2.0 * hy) {
            let y = -hy + 2.0 * hy * j as f64 / steps(2.0 * hy) as f64;
            pts.push(jitter(Vec3::new(x, y, h)));
        }
        for k in 0..steps(h) {
            let z = h * k as f64 / steps(h) as f64;
            pts.push(jitter(Vec3::new(x, -hy, z)));
            pts.push(jitter(Vec3::new(x, hy, z)));
        }
    }
    for j in 0..=steps(2.0 * hy) {
        let y = -hy + 2.0 * hy * j as f64 / steps(2.0 * hy) as f64;
        for k in 0..steps(h) {
            let z = h * k as f64 / steps(h) as f64;
            pts.push(jitter(Vec3::new(-hx, y, z)));
            pts.push(jitter(Vec3::new(hx, y, z)));
        }
    }
    for i in -40..=40 {
        for j in -40..=40 {
            let p = Vec3::new(i as f64 * 3.0, j as f64 * 3.0, 0.0);
            if p.x.abs() > hx + 1.0 || p.y.abs() > hy + 1.0 {
                pts.push(rot.transform_point(&Point3::from(p)));
            }
        }
    }
    PointCloud::new(pts).with_sensor_origin(Point3::new(0.0, 0.0, 600.0))
}

/// What the detector keeps after the plane filter.
fn above(c: &PointCloud, cfg: &GraspConfig) -> Vec<Point3> {
    c.points.iter().filter(|p| p.z > cfg.plane_margin).copied().collect()
}

fn check_sound(g: &GraspCandidate, pts: &[Point3], hand: &HandGeometry, cfg: &GraspConfig) -> Result<(), TestCaseError> {
    let mut closing = 0;
    for p in pts {
        match hand.region(HandGeometry::local(&g.pose, p)) {
            HandRegion::Finger | HandRegion::Palm => return Err(TestCaseError::fail(format!("point {p:?} inside the hand"))),
            HandRegion::Closing => closing += 1,
            HandRegion::Outside => {}
        }
    }
    prop_assert!(closing >= cfg.min_closing_points);
    prop_assert!(g.grasp_width >= 0.0 && g.grasp_width <= hand.max_aperture);
    prop_assert!(g.approach_angle_deg() <= cfg.approach_filter.cone_half_angle_deg + 1e-9);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn grasps_are_sound_sorted_and_bounded(
        sx in 15.0..70.0f64, sy in 15.0..70.0f64, sz in 15.0..60.0f64,
        yaw in 0.0..std::f64::consts::PI,
        seed in 0u64..1000,
        selected in 1usize..30,
    ) {
        let hand = HandGeometry::default();
        let cfg = GraspConfig { seed, num_selected: selected, ..GraspConfig::default() };
        let cloud = box_cloud([sx, sy, sz], yaw, seed);
        let grasps = detect_grasps(&cloud, &hand, &cfg, Some(&Plane::horizontal(0.0))).unwrap();
        prop_assert!(grasps.len() <= selected);
        prop_assert!(grasps.windows(2).all(|w| w[0].score >= w[1].score));
        let pts = above(&cloud, &cfg);
        for g in &grasps {
            check_sound(g, &pts, &hand, &cfg)?;
        }
    }

    #[test]
    fn translation_moves_grasps_rigidly(
        size in 20.0..60.0f64,
        tx in -800.0..800.0f64, ty in -800.0..800.0f64, tz in -300.0..300.0f64,
        seed in 0u64..1000,
    ) {
        let hand = HandGeometry::default();
        let cfg = GraspConfig { seed, ..GraspConfig::default() };
        let cloud = box_cloud([size, size * 0.8, size * 0.6], 0.3, seed);
        let t = Vec3::new(tx, ty, tz);
        let moved = cloud.transformed(&RigidTransform::from_translation(tx, ty, tz));
        let a = detect_grasps(&cloud, &hand, &cfg, Some(&Plane::horizontal(0.0))).unwrap();
        let b = detect_grasps(&moved, &hand, &cfg, Some(&Plane::horizontal(0.0).translated(&t))).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (ga, gb) in a.iter().zip(&b) {
            prop_assert_eq!(ga.tie_key(), gb.tie_key());
            prop_assert!(((ga.pose.translation + t) - gb.pose.translation).norm() < 1e-6);
            prop_assert!((ga.pose.rotation - gb.pose.rotation).abs().max() < 1e-6);
            prop_assert!((ga.score - gb.score).abs() < 1e-6);
        }
    }

    #[test]
    fn more_samples_keep_surviving_grasps(
        size in 20.0..60.0f64,
        seed in 0u64..1000,
        n in 10usize..60,
        extra in 1usize..80,
    ) {
        let hand = HandGeometry::default();
        let small = GraspConfig { seed, num_samples: n, ..GraspConfig::default() };
        let large = GraspConfig { num_samples: n + extra, ..small.clone() };
        let cloud = box_cloud([size, size, size * 0.7], 0.7, seed);
        let plane = Plane::horizontal(0.0);
        let a = detect_grasps(&cloud, &hand, &small, Some(&plane)).unwrap();
        let b = detect_grasps(&cloud, &hand, &large, Some(&plane)).unwrap();
        let full = b.len() == large.num_selected;
        // Selection order: score descending, then tie key ascending.
        let ranks_before = |g: &GraspCandidate, last: &GraspCandidate| {
            g.score > last.score || (g.score == last.score && g.tie_key() <= last.tie_key())
        };
        for g in &a {
            if !full || b.last().is_some_and(|last| ranks_before(g, last)) {
                prop_assert!(b.iter().any(|h| h.tie_key() == g.tie_key() && h.pose == g.pose), "lost {:?}", g.tie_key());
            }
        }
    }
}
