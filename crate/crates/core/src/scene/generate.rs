use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::objects::{dims, RobotPartModel, RockModel};
use super::shapes::Superellipsoid;
use super::terrain::{Terrain, TerrainSpec};
use super::{rest_height, Scene};
use crate::error::{Error, Result};
use crate::geometry::{Camera, CameraIntrinsics, Point3, RigidTransform, Vec3};

const ATTEMPTS: usize = 100;

/// Rock population settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RockSpec {
    /// Inclusive range of rock counts.
    pub count: [usize; 2],
    /// Range of horizontal semi-axes (mm).
    pub axis_xy: [f64; 2],
    /// Range of vertical semi-axes (mm).
    pub axis_z: [f64; 2],
    pub e1: [f64; 2],
    pub e2: [f64; 2],
    /// Minimum pairwise xy distance between rock centers (mm).
    pub min_separation: f64,
    pub region_min: [f64; 2],
    pub region_max: [f64; 2],
    /// Required relative gap between any two cross-section areas, with
    /// volumes in the same order. Zero disables the constraint.
    pub area_separation: f64,
}

impl Default for RockSpec {
    fn default() -> Self {
        Self {
            count: [2, 4],
            axis_xy: [18.0, 32.0],
            axis_z: [10.0, 18.0],
            e1: [0.3, 0.7],
            e2: [0.5, 1.2],
            min_separation: 130.0,
            region_min: [250.0, -220.0],
            region_max: [500.0, 160.0],
            area_separation: 0.10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartKind {
    Head,
    Leg,
}

/// Body with four free joints plus one loose part to attach.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssemblySpec {
    pub part: PartKind,
    pub body_position: [f64; 2],
    pub part_region_min: [f64; 2],
    pub part_region_max: [f64; 2],
}

impl Default for AssemblySpec {
    fn default() -> Self {
        Self {
            part: PartKind::Head,
            body_position: [470.0, 220.0],
            part_region_min: [260.0, -200.0],
            part_region_max: [420.0, 40.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraSpec {
    pub eye: [f64; 3],
    pub target: [f64; 3],
    pub intrinsics: CameraIntrinsics,
}

impl Default for CameraSpec {
    fn default() -> Self {
        Self {
            eye: [375.0, 0.0, 800.0],
            target: [375.0, 0.0, 0.0],
            intrinsics: CameraIntrinsics::default(),
        }
    }
}

impl CameraSpec {
    pub fn camera(&self) -> Result<Camera> {
        Camera::looking_at(self.intrinsics, Point3::from(self.eye), Point3::from(self.target))
    }
}

/// Distribution parameters for [`generate_scene`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub rocks: RockSpec,
    pub assembly: Option<AssemblySpec>,
    pub terrain: TerrainSpec,
    pub base_camera: CameraSpec,
    pub hand_intrinsics: CameraIntrinsics,
    /// Discs `[x, y, radius]` kept free of objects (e.g. the stacking spot).
    pub reserved: Vec<[f64; 3]>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            rocks: RockSpec::default(),
            assembly: None,
            terrain: TerrainSpec::default(),
            base_camera: CameraSpec::default(),
            hand_intrinsics: CameraIntrinsics::new(300.0, 300.0, 160.0, 120.0, 320, 240).expect("valid default intrinsics"),
            reserved: vec![[375.0, 300.0, 60.0]],
        }
    }
}

impl SceneSpec {
    /// Assembly scene: body, four joints and one part; no rocks.
    pub fn assembly(part: PartKind) -> Self {
        Self {
            rocks: RockSpec {
                count: [0, 0],
                ..RockSpec::default()
            },
            assembly: Some(AssemblySpec {
                part,
                ..AssemblySpec::default()
            }),
            reserved: Vec::new(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.rocks;
        if r.count[0] > r.count[1] {
            return Err(Error::config("scene.rocks.count", "min exceeds max"));
        }
        if r.count[1] == 0 && self.assembly.is_none() {
            return Err(Error::config("scene.rocks.count", "scene needs at least one object"));
        }
        for (path, range) in [("scene.rocks.axis_xy", r.axis_xy), ("scene.rocks.axis_z", r.axis_z)] {
            if !(range[0] > 0.0 && range[1] >= range[0]) {
                return Err(Error::config(path, "need 0 < low <= high"));
            }
        }
        for (path, range) in [("scene.rocks.e1", r.e1), ("scene.rocks.e2", r.e2)] {
            if !(range[0] >= 0.3 && range[1] <= 2.0 && range[1] >= range[0]) {
                return Err(Error::config(path, "exponents must lie in [0.3, 2.0]"));
            }
        }
        if r.region_max[0] <= r.region_min[0] || r.region_max[1] <= r.region_min[1] {
            return Err(Error::config("scene.rocks.region_max", "must exceed region_min"));
        }
        if !(r.min_separation >= 0.0 && r.area_separation >= 0.0) {
            return Err(Error::config("scene.rocks", "separations must be non-negative"));
        }
        if let Some(a) = &self.assembly {
            if a.part_region_max[0] <= a.part_region_min[0] || a.part_region_max[1] <= a.part_region_min[1] {
                return Err(Error::config("scene.assembly.part_region_max", "must exceed part_region_min"));
            }
        }
        self.terrain.validate()?;
        self.base_camera.intrinsics.validate()?;
        self.hand_intrinsics.validate()?;
        Ok(())
    }
}

/// Builds a scene from `spec`; a pure function of `(spec, seed)`.
///
/// Rocks are dropped straight down onto the terrain. Placement is retried up
/// to 100 times per object before giving up.
pub fn generate_scene(spec: &SceneSpec, seed: u64) -> Result<Scene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terrain = Terrain::generate(&spec.terrain, &mut rng)?;
    let base_camera = spec.base_camera.camera()?;

    let rs = &spec.rocks;
    let count = if rs.count[1] == 0 {
        0
    } else {
        rng.random_range(rs.count[0]..=rs.count[1])
    };
    let shapes = sample_rock_shapes(rs, count, &mut rng)?;

    // Discs already taken: (x, y, radius).
    let mut taken: Vec<(f64, f64, f64)> = spec.reserved.iter().map(|r| (r[0], r[1], r[2])).collect();
    let mut parts = Vec::new();
    let mut next_id = count;
    if let Some(a) = &spec.assembly {
        let body_pose = settle_part_pose(&terrain, &RobotPartModel::body(0, RigidTransform::identity()), a.body_position, 0.0);
        let body = RobotPartModel::body(next_id, body_pose);
        next_id += 1;
        let top = body.pose.translation.z + 2.0 * dims::BODY_HALF[2];
        let br = dims::BODY_HALF[0].hypot(dims::BODY_HALF[1]);
        taken.push((a.body_position[0], a.body_position[1], br));
        let o = dims::BOSS_OFFSET;
        for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
            let p = body.pose.transform_point(&Point3::new(sx * o, sy * o, 0.0));
            let pose = RigidTransform::from_translation(p.x, p.y, top);
            parts.push(RobotPartModel::body_joint(next_id + parts.len(), pose));
        }
        parts.insert(0, body);
        next_id = count + parts.len();

        let proto = match a.part {
            PartKind::Head => RobotPartModel::head(0, RigidTransform::identity()),
            PartKind::Leg => RobotPartModel::leg(0, RigidTransform::identity()),
        };
        let radius = proto.bounding_radius();
        let mut placed = None;
        for _ in 0..ATTEMPTS {
            let x = rng.random_range(a.part_region_min[0]..=a.part_region_max[0]);
            let y = rng.random_range(a.part_region_min[1]..=a.part_region_max[1]);
            let yaw = rng.random_range(0.0..std::f64::consts::TAU);
            if taken.iter().all(|&(tx, ty, tr)| (x - tx).hypot(y - ty) >= tr + radius + 10.0) {
                placed = Some((x, y, yaw));
                break;
            }
        }
        let (x, y, yaw) = placed.ok_or(Error::PlacementFailure {
            object: next_id,
            attempts: ATTEMPTS,
        })?;
        taken.push((x, y, radius));
        let pose = settle_part_pose(&terrain, &proto, [x, y], yaw);
        let mut part = proto;
        part.id = next_id;
        part.pose = pose;
        parts.push(part);
    }

    let mut rocks: Vec<RockModel> = Vec::with_capacity(count);
    for (i, shape) in shapes.into_iter().enumerate() {
        let r = shape.footprint_radius();
        let mut placed = None;
        for _ in 0..ATTEMPTS {
            let x = rng.random_range(rs.region_min[0]..=rs.region_max[0]);
            let y = rng.random_range(rs.region_min[1]..=rs.region_max[1]);
            let yaw = rng.random_range(0.0..std::f64::consts::TAU);
            let clear_of_taken = taken.iter().all(|&(tx, ty, tr)| (x - tx).hypot(y - ty) >= tr + r + 2.0);
            let clear_of_rocks = rocks.iter().all(|o| {
                let c = o.center();
                let d = (x - c.x).hypot(y - c.y);
                d >= rs.min_separation && d >= r + o.shape.footprint_radius() + 2.0
            });
            if clear_of_taken && clear_of_rocks {
                placed = Some((x, y, yaw));
                break;
            }
        }
        let (x, y, yaw) = placed.ok_or(Error::PlacementFailure {
            object: i,
            attempts: ATTEMPTS,
        })?;
        let mut rock = RockModel::new(i, shape, RigidTransform::rot_z(yaw).with_translation(Vec3::new(x, y, 0.0)));
        let z = rest_height(&rock, |px, py| terrain.height(px, py), 0.5);
        rock.pose.translation.z = z;
        rocks.push(rock);
    }

    Ok(Scene {
        seed,
        terrain,
        rocks,
        parts,
        base_camera,
        hand_intrinsics: spec.hand_intrinsics,
    })
}

fn sample_rock_shapes(rs: &RockSpec, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Superellipsoid>> {
    let mut out: Vec<Superellipsoid> = Vec::with_capacity(count);
    for i in 0..count {
        let mut found = None;
        for _ in 0..ATTEMPTS {
            let s = Superellipsoid {
                axes: [
                    rng.random_range(rs.axis_xy[0]..=rs.axis_xy[1]),
                    rng.random_range(rs.axis_xy[0]..=rs.axis_xy[1]),
                    rng.random_range(rs.axis_z[0]..=rs.axis_z[1]),
                ],
                e1: rng.random_range(rs.e1[0]..=rs.e1[1]),
                e2: rng.random_range(rs.e2[0]..=rs.e2[1]),
            };
            if rs.area_separation == 0.0 || out.iter().all(|o| well_ordered(o, &s, rs.area_separation)) {
                found = Some(s);
                break;
            }
        }
        out.push(found.ok_or(Error::PlacementFailure {
            object: i,
            attempts: ATTEMPTS,
        })?);
    }
    Ok(out)
}

/// Areas differ by the required ratio and volumes agree with the area order.
fn well_ordered(a: &Superellipsoid, b: &Superellipsoid, sep: f64) -> bool {
    let (aa, ab) = (a.cross_section_area(), b.cross_section_area());
    let (big, small) = if aa >= ab { (aa, ab) } else { (ab, aa) };
    big >= small * (1.0 + sep) && (aa > ab) == (a.volume() > b.volume())
}

/// Pose of a part resting flat on the terrain at `xy` with the given yaw.
fn settle_part_pose(terrain: &Terrain, part: &RobotPartModel, xy: [f64; 2], yaw: f64) -> RigidTransform {
    let rot = RigidTransform::rot_z(yaw);
    let mut z = f64::NEG_INFINITY;
    for (c, h) in part.footprint_rects() {
        let nx = (2.0 * h[0]).ceil() as i64;
        let ny = (2.0 * h[1]).ceil() as i64;
        for i in 0..=nx {
            for j in 0..=ny {
                let l = Vec3::new(
                    c[0] - h[0] + (i as f64).min(2.0 * h[0]),
                    c[1] - h[1] + (j as f64).min(2.0 * h[1]),
                    0.0,
                );
                let w = rot.transform_vector(&l);
                z = z.max(terrain.height(xy[0] + w.x, xy[1] + w.y));
            }
        }
    }
    rot.with_translation(Vec3::new(xy[0], xy[1], z))
}
