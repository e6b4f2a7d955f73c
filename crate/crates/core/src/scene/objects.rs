use serde::{Deserialize, Serialize};

use super::shapes::{Primitive, Shape, Superellipsoid};
use crate::geometry::{Point3, RigidTransform, Vec3};
use crate::mask::ObjectClass;

/// A rock: an upright superellipsoid, possibly rotated about world z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RockModel {
    pub id: usize,
    pub shape: Superellipsoid,
    /// Rock frame (centered on the shape) to world.
    pub pose: RigidTransform,
    pub true_volume: f64,
}

impl RockModel {
    pub fn new(id: usize, shape: Superellipsoid, pose: RigidTransform) -> Self {
        Self {
            id,
            shape,
            pose,
            true_volume: shape.volume(),
        }
    }

    pub fn center(&self) -> Point3 {
        self.pose.origin()
    }

    /// Center of mass (uniform density).
    pub fn com(&self) -> Point3 {
        self.center()
    }

    pub fn cross_section_area(&self) -> f64 {
        self.shape.cross_section_area()
    }

    pub fn height(&self) -> f64 {
        self.shape.height()
    }

    pub fn top_z(&self) -> f64 {
        self.center().z + self.shape.axes[2]
    }

    pub fn bottom_z(&self) -> f64 {
        self.center().z - self.shape.axes[2]
    }

    fn local_xy(&self, x: f64, y: f64) -> (f64, f64) {
        let d = Vec3::new(x - self.pose.translation.x, y - self.pose.translation.y, 0.0);
        let l = self.pose.rotation.transpose() * d;
        (l.x, l.y)
    }

    /// Upper surface height over world `(x, y)`, if inside the footprint.
    pub fn top_surface(&self, x: f64, y: f64) -> Option<f64> {
        let (lx, ly) = self.local_xy(x, y);
        self.shape.half_height(lx, ly).map(|h| self.center().z + h)
    }

    /// Lower surface height over world `(x, y)`, if inside the footprint.
    pub fn bottom_surface(&self, x: f64, y: f64) -> Option<f64> {
        let (lx, ly) = self.local_xy(x, y);
        self.shape.half_height(lx, ly).map(|h| self.center().z - h)
    }

    pub fn contains(&self, p: &Point3) -> bool {
        self.shape.contains(&self.pose.invert().transform_point(p))
    }

    /// World-frame xy bounding rectangle `(min, max)`.
    pub fn footprint_bounds(&self) -> ([f64; 2], [f64; 2]) {
        let r = self.shape.footprint_radius();
        let c = self.center();
        ([c.x - r, c.y - r], [c.x + r, c.y + r])
    }
}

/// Named frame on a part: plugs are carried by parts, sockets by body joints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attachment {
    pub name: String,
    pub kind: AttachmentKind,
    /// Frame in the part frame; z points out of a plug and into a socket.
    pub frame: RigidTransform,
    /// Index of the primitive whose surface carries the frame origin.
    pub primitive: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttachmentKind {
    Plug,
    Socket,
}

/// A robot component built from primitives. The part frame sits at the
/// center of its resting footprint, z up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotPartModel {
    pub id: usize,
    pub class: ObjectClass,
    pub primitives: Vec<Primitive>,
    pub attachments: Vec<Attachment>,
    pub pose: RigidTransform,
}

/// Part dimensions shared by the generator and the tests.
pub mod dims {
    pub const HEAD_HALF: [f64; 3] = [18.0, 18.0, 15.0];
    pub const LEG_JOINT_RADIUS: f64 = 12.0;
    pub const LEG_JOINT_HALF_LENGTH: f64 = 15.0;
    pub const LEG_FOOT_HALF: [f64; 3] = [30.0, 14.0, 12.0];
    pub const BODY_HALF: [f64; 3] = [70.0, 70.0, 20.0];
    pub const BOSS_RADIUS: f64 = 10.0;
    pub const BOSS_HALF_HEIGHT: f64 = 4.0;
    pub const BOSS_OFFSET: f64 = 45.0;
}

impl RobotPartModel {
    /// Box head with its plug at the center of the bottom face, pointing down.
    pub fn head(id: usize, pose: RigidTransform) -> Self {
        let h = dims::HEAD_HALF;
        Self {
            id,
            class: ObjectClass::Head,
            primitives: vec![Primitive::new(
                Shape::Box { half: h },
                RigidTransform::from_translation(0.0, 0.0, h[2]),
            )],
            attachments: vec![Attachment {
                name: "neck".into(),
                kind: AttachmentKind::Plug,
                frame: RigidTransform::rot_x(std::f64::consts::PI),
                primitive: 0,
            }],
            pose,
        }
    }

    /// Leg lying on its side: a joint cylinder along local -x and a foot
    /// box. The plug is the free end face of the joint, pointing along -x.
    pub fn leg(id: usize, pose: RigidTransform) -> Self {
        let r = dims::LEG_JOINT_RADIUS;
        let hl = dims::LEG_JOINT_HALF_LENGTH;
        let f = dims::LEG_FOOT_HALF;
        let foot_x = f[0] - 25.0;
        let joint_x = foot_x - f[0] - hl;
        let end_x = joint_x - hl;
        let along_x = RigidTransform::rot_y(std::f64::consts::FRAC_PI_2);
        Self {
            id,
            class: ObjectClass::Leg,
            primitives: vec![
                Primitive::new(
                    Shape::Cylinder {
                        radius: r,
                        half_length: hl,
                    },
                    along_x.with_translation(Vec3::new(joint_x, 0.0, r)),
                ),
                Primitive::new(Shape::Box { half: f }, RigidTransform::from_translation(foot_x, 0.0, f[2])),
            ],
            attachments: vec![Attachment {
                name: "hip".into(),
                kind: AttachmentKind::Plug,
                frame: RigidTransform::from_axes(&Vec3::z(), &Vec3::y(), &-Vec3::x(), &Point3::new(end_x, 0.0, r)),
                primitive: 0,
            }],
            pose,
        }
    }

    pub fn body(id: usize, pose: RigidTransform) -> Self {
        let h = dims::BODY_HALF;
        Self {
            id,
            class: ObjectClass::Body,
            primitives: vec![Primitive::new(
                Shape::Box { half: h },
                RigidTransform::from_translation(0.0, 0.0, h[2]),
            )],
            attachments: Vec::new(),
            pose,
        }
    }

    /// Boss on the body top carrying a socket at its upper face center.
    /// The part frame is at the boss's base center.
    pub fn body_joint(id: usize, pose: RigidTransform) -> Self {
        let hh = dims::BOSS_HALF_HEIGHT;
        Self {
            id,
            class: ObjectClass::BodyJoint,
            primitives: vec![Primitive::new(
                Shape::Cylinder {
                    radius: dims::BOSS_RADIUS,
                    half_length: hh,
                },
                RigidTransform::from_translation(0.0, 0.0, hh),
            )],
            attachments: vec![Attachment {
                name: "socket".into(),
                kind: AttachmentKind::Socket,
                frame: RigidTransform::rot_x(std::f64::consts::PI).with_translation(Vec3::new(0.0, 0.0, 2.0 * hh)),
                primitive: 0,
            }],
            pose,
        }
    }

    pub fn plug(&self) -> Option<&Attachment> {
        self.attachments.iter().find(|a| a.kind == AttachmentKind::Plug)
    }

    pub fn socket(&self) -> Option<&Attachment> {
        self.attachments.iter().find(|a| a.kind == AttachmentKind::Socket)
    }

    /// World frame of an attachment.
    pub fn attachment_world(&self, a: &Attachment) -> RigidTransform {
        self.pose.compose(&a.frame)
    }

    pub fn contains(&self, p: &Point3) -> bool {
        let l = self.pose.invert().transform_point(p);
        self.primitives.iter().any(|pr| pr.contains(&l))
    }

    /// Nearest entry along a world ray, skipping primitive `skip`.
    pub fn intersect_except(&self, o: &Point3, d: &Vec3, skip: Option<usize>) -> Option<f64> {
        let inv = self.pose.invert();
        let (lo, ld) = (inv.transform_point(o), inv.transform_vector(d));
        self.primitives
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != skip)
            .filter_map(|(_, p)| p.intersect(&lo, &ld))
            .fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.min(t))))
    }

    /// Local xy rectangles `(center, half)` covering the resting footprint.
    pub fn footprint_rects(&self) -> Vec<([f64; 2], [f64; 2])> {
        self.primitives
            .iter()
            .map(|p| {
                let h = p.shape.half_extents();
                // Extent of the rotated local box projected on x and y.
                let r = p.local.rotation;
                let ex = (0..3).map(|k| r[(0, k)].abs() * h[k]).sum::<f64>();
                let ey = (0..3).map(|k| r[(1, k)].abs() * h[k]).sum::<f64>();
                ([p.local.translation.x, p.local.translation.y], [ex, ey])
            })
            .collect()
    }

    pub fn bounding_radius(&self) -> f64 {
        self.primitives
            .iter()
            .map(|p| p.local.translation.norm() + p.shape.bounding_radius())
            .fold(0.0, f64::max)
    }

    pub fn height(&self) -> f64 {
        self.primitives
            .iter()
            .map(|p| {
                let h = p.shape.half_extents();
                let r = p.local.rotation;
                p.local.translation.z + (0..3).map(|k| r[(2, k)].abs() * h[k]).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

/// Borrowed view of any scene object.
#[derive(Debug, Clone, Copy)]
pub enum ObjectRef<'a> {
    Rock(&'a RockModel),
    Part(&'a RobotPartModel),
}

impl ObjectRef<'_> {
    pub fn id(&self) -> usize {
        match self {
            ObjectRef::Rock(r) => r.id,
            ObjectRef::Part(p) => p.id,
        }
    }

    pub fn class(&self) -> ObjectClass {
        match self {
            ObjectRef::Rock(_) => ObjectClass::Rock,
            ObjectRef::Part(p) => p.class,
        }
    }

    pub fn pose(&self) -> &RigidTransform {
        match self {
            ObjectRef::Rock(r) => &r.pose,
            ObjectRef::Part(p) => &p.pose,
        }
    }

    pub fn contains(&self, p: &Point3) -> bool {
        match self {
            ObjectRef::Rock(r) => r.contains(p),
            ObjectRef::Part(q) => q.contains(p),
        }
    }

    /// World bounding sphere `(center, radius)`.
    pub fn bounding_sphere(&self) -> (Point3, f64) {
        match self {
            ObjectRef::Rock(r) => (r.center(), r.shape.axes.iter().map(|a| a * a).sum::<f64>().sqrt()),
            ObjectRef::Part(p) => (p.pose.origin(), p.bounding_radius()),
        }
    }

    pub fn intersect(&self, o: &Point3, d: &Vec3) -> Option<f64> {
        let (c, r) = self.bounding_sphere();
        let oc = o - c;
        let b = oc.dot(d);
        let disc = b * b - (oc.norm_squared() - r * r);
        if disc < 0.0 || -b + disc.sqrt() < 0.0 {
            return None;
        }
        match self {
            ObjectRef::Rock(rock) => {
                let inv = rock.pose.invert();
                Shape::Superellipsoid(rock.shape).intersect(&inv.transform_point(o), &inv.transform_vector(d))
            }
            ObjectRef::Part(p) => p.intersect_except(o, d, None),
        }
    }
}
