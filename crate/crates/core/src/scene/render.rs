use rand::Rng;
use rayon::prelude::*;

use super::{pixel_rng, Scene, SensorModel};
use crate::depth::DepthImage;
use crate::geometry::Camera;
use crate::mask::InstanceMask;

/// Noise-free ray-cast result.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub width: u32,
    pub height: u32,
    /// Optical-axis depth per pixel in mm; 0 where nothing was hit.
    pub depth: Vec<f64>,
    /// Id of the object seen at each pixel; `None` for terrain or sky.
    pub hit: Vec<Option<usize>>,
}

/// Ground-truth mask of one visible object.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedMask {
    pub object_id: usize,
    pub mask: InstanceMask,
}

/// Depth image and exact masks rendered from one camera.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub camera: Camera,
    pub depth: DepthImage,
    pub masks: Vec<RenderedMask>,
}

/// Casts one ray per pixel center against the terrain and every object.
pub fn trace(scene: &Scene, cam: &Camera) -> Trace {
    let intr = cam.intrinsics;
    let (w, h) = (intr.width, intr.height);
    let o = cam.center();
    let objects: Vec<_> = scene.objects().collect();
    let rows: Vec<(Vec<f64>, Vec<Option<usize>>)> = (0..h)
        .into_par_iter()
        .map(|v| {
            let mut depth = Vec::with_capacity(w as usize);
            let mut hit = Vec::with_capacity(w as usize);
            for u in 0..w {
                let (d, factor) = cam.world_ray(u as f64, v as f64);
                let mut best = scene.terrain.intersect(&o, &d);
                let mut id = None;
                for obj in &objects {
                    if let Some(t) = obj.intersect(&o, &d) {
                        if best.is_none_or(|b| t < b) {
                            best = Some(t);
                            id = Some(obj.id());
                        }
                    }
                }
                depth.push(best.map_or(0.0, |t| t * factor));
                hit.push(id);
            }
            (depth, hit)
        })
        .collect();
    let mut out = Trace {
        width: w,
        height: h,
        depth: Vec::with_capacity(intr.pixel_count()),
        hit: Vec::with_capacity(intr.pixel_count()),
    };
    for (d, hh) in rows {
        out.depth.extend(d);
        out.hit.extend(hh);
    }
    out
}

impl Trace {
    pub fn depth_image(&self, sensor: &SensorModel, seed: u64) -> DepthImage {
        let data = self
            .depth
            .par_iter()
            .enumerate()
            .map(|(i, &d)| sensor.measure(d, i, seed))
            .collect();
        DepthImage::from_vec(self.width, self.height, data).expect("trace size matches image")
    }

    /// One exact mask per visible object, ordered by object id.
    pub fn masks(&self, scene: &Scene) -> Vec<RenderedMask> {
        let mut out: Vec<RenderedMask> = Vec::new();
        for obj in scene.objects() {
            let id = obj.id();
            let mut m = InstanceMask::new(self.width, self.height, obj.class());
            let mut any = false;
            for (i, h) in self.hit.iter().enumerate() {
                if *h == Some(id) {
                    m.set_index(i, true);
                    any = true;
                }
            }
            if any {
                out.push(RenderedMask { object_id: id, mask: m });
            }
        }
        out.sort_by_key(|m| m.object_id);
        out
    }
}

/// Sensor-corrupted depth image seen from `cam`.
pub fn render_depth(scene: &Scene, cam: &Camera, sensor: &SensorModel, seed: u64) -> DepthImage {
    trace(scene, cam).depth_image(sensor, seed)
}

/// Exact, noise-free instance masks seen from `cam`.
pub fn render_instance_masks(scene: &Scene, cam: &Camera) -> Vec<RenderedMask> {
    trace(scene, cam).masks(scene)
}

/// Depth and masks from a single ray cast.
pub fn render_view(scene: &Scene, cam: &Camera, sensor: &SensorModel, seed: u64) -> View {
    let t = trace(scene, cam);
    View {
        camera: *cam,
        depth: t.depth_image(sensor, seed),
        masks: t.masks(scene),
    }
}

/// Applies segmentation imperfections to an exact mask: erosion by
/// `round(5 ε)` pixels, then independent flips of pixels on either side of
/// the eroded boundary.
pub fn degrade_mask(m: &InstanceMask, sensor: &SensorModel, seed: u64) -> InstanceMask {
    let mut out = m.eroded(sensor.erosion_radius());
    if sensor.flip_rate <= 0.0 {
        return out;
    }
    let (w, h) = (out.width(), out.height());
    let inner = out.boundary_pixels();
    let mut outer = Vec::new();
    for &(u, v) in &inner {
        let neighbors = [(u.wrapping_sub(1), v), (u + 1, v), (u, v.wrapping_sub(1)), (u, v + 1)];
        for (x, y) in neighbors {
            if x < w && y < h && !out.get(x, y) {
                outer.push((x, y));
            }
        }
    }
    outer.sort_unstable();
    outer.dedup();
    let flip = |u: u32, v: u32| {
        let idx = v as u64 * w as u64 + u as u64;
        pixel_rng(seed ^ 0x6d61_736b, idx).random::<f64>() < sensor.flip_rate
    };
    let off: Vec<_> = inner.into_iter().filter(|&(u, v)| flip(u, v)).collect();
    let on: Vec<_> = outer.into_iter().filter(|&(u, v)| flip(u, v)).collect();
    for (u, v) in off {
        out.set(u, v, false);
    }
    for (u, v) in on {
        out.set(u, v, true);
    }
    out
}
