//! Inputs shared by the benchmarks.

use lunarmanip_core::pointcloud::cloud_from_depth;
use lunarmanip_core::scene::render_depth;
use lunarmanip_core::{generate_scene, PointCloud, Scene, SceneSpec, SensorModel};

/// Default rock scene for `seed`.
pub fn rock_scene(seed: u64) -> Scene {
    generate_scene(&SceneSpec::default(), seed).expect("default scene generates")
}

/// About `n` points of the base-camera cloud of a rock scene, taken at an
/// even stride over the image.
pub fn base_cloud(seed: u64, n: usize) -> PointCloud {
    let scene = rock_scene(seed);
    let cam = scene.base_camera;
    let depth = render_depth(&scene, &cam, &SensorModel::nominal(), seed);
    let full = cloud_from_depth(&depth, &cam.intrinsics, &cam.pose, 1).expect("cloud has points");
    let step = (full.len() / n.max(1)).max(1);
    let idx: Vec<usize> = (0..full.len()).step_by(step).take(n).collect();
    full.subset(&idx)
}
