use lunarmanip_core::mask::mask_area;
use lunarmanip_core::perception::{object_workspace_pose, sort_by_mask_area, Detection, Detector, OracleDetector};
use lunarmanip_core::scene::{trace, View};
use lunarmanip_core::{generate_scene, Camera, InstanceMask, ObjectClass, SceneSpec, SensorModel};
use proptest::prelude::*;

fn detection() -> impl Strategy<Value = Detection> {
    prop::collection::vec((0u32..24, 0u32..24), 0..60)
        .prop_map(|px| Detection::new(InstanceMask::from_pixels(24, 24, ObjectClass::Rock, px), None))
}

proptest! {
    #[test]
    fn sorting_is_a_permutation_by_area(ds in prop::collection::vec(detection(), 0..12)) {
        let nonempty: Vec<&Detection> = ds.iter().filter(|d| mask_area(&d.mask) > 0).collect();
        let out = sort_by_mask_area(ds.clone());
        prop_assert_eq!(out.dropped_empty, ds.len() - nonempty.len());
        prop_assert_eq!(out.detections.len(), nonempty.len());
        prop_assert!(out.detections.windows(2).all(|w| w[0].area() >= w[1].area()));
        // Same multiset of masks.
        let mut want: Vec<Vec<u32>> = nonempty.iter().map(|d| d.mask.to_rle()).collect();
        let mut got: Vec<Vec<u32>> = out.detections.iter().map(|d| d.mask.to_rle()).collect();
        want.sort();
        got.sort();
        prop_assert_eq!(got, want);
    }
}

/// Median over rocks of the RMS distance between noisy and noiseless pose
/// estimates over several noise draws, per noise level. Depth is quantized
/// to 1 mm, so a single draw is too coarse to compare.
fn median_pose_errors(sigmas: [f64; 2], seeds: std::ops::Range<u64>, draws: u64) -> [f64; 2] {
    let mut errs = [Vec::new(), Vec::new()];
    for seed in seeds {
        let scene = generate_scene(&SceneSpec::default(), seed).unwrap();
        // Half resolution: the property does not depend on pixel count.
        let cam = Camera::new(scene.base_camera.intrinsics.scaled(0.5), scene.base_camera.pose);
        let tr = trace(&scene, &cam);
        let clean = tr.depth_image(&SensorModel::default(), seed);
        let view = View {
            camera: cam,
            depth: clean.clone(),
            masks: tr.masks(&scene),
        };
        let ds = OracleDetector::default().detect(&view, seed);
        let reference: Vec<_> = ds
            .iter()
            .map(|d| object_workspace_pose(d, &clean, &cam.intrinsics, &cam.pose, None).unwrap().position)
            .collect();
        for (sigma, out) in sigmas.iter().zip(&mut errs) {
            let sensor = SensorModel {
                depth_noise: *sigma,
                ..SensorModel::default()
            };
            let mut ss = vec![0.0; ds.len()];
            for k in 0..draws {
                let noisy = tr.depth_image(&sensor, seed * 1000 + k);
                for ((d, acc), a) in ds.iter().zip(&mut ss).zip(&reference) {
                    let b = object_workspace_pose(d, &noisy, &cam.intrinsics, &cam.pose, None).unwrap();
                    *acc += (a - b.position).norm_squared();
                }
            }
            out.extend(ss.into_iter().map(|s| (s / draws as f64).sqrt()));
        }
    }
    errs.map(|mut e| {
        e.sort_by(f64::total_cmp);
        e[e.len() / 2]
    })
}

#[test]
fn pose_error_scales_with_depth_noise() {
    let [e2, e4] = median_pose_errors([2.0, 4.0], 0..100, 6);
    let ratio = e4 / e2;
    assert!(e2 > 0.0);
    assert!(
        (2.0 * 0.8..=2.0 * 1.2).contains(&ratio),
        "doubling the noise scaled the error by {ratio:.2} ({e2:.3} -> {e4:.3} mm)"
    );
}
