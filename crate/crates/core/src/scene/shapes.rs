use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::geometry::{Point3, RigidTransform, Vec3};

/// Upright superellipsoid centered at the origin of its frame.
///
/// Inside iff `(|x/ax|^(2/e2) + |y/ay|^(2/e2))^(e2/e1) + |z/az|^(2/e1) ≤ 1`.
/// `e2` shapes horizontal sections, `e1` the vertical profile; small `e1`
/// gives flat tops and bottoms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Superellipsoid {
    pub axes: [f64; 3],
    pub e1: f64,
    pub e2: f64,
}

impl Superellipsoid {
    pub fn new(axes: [f64; 3], e1: f64, e2: f64) -> Result<Self> {
        let s = Self { axes, e1, e2 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::config("rock.axes", "semi-axes must be positive"));
        }
        for (name, e) in [("e1", self.e1), ("e2", self.e2)] {
            if !(0.3..=2.0).contains(&e) {
                return Err(Error::config(format!("rock.{name}"), "shape exponent must lie in [0.3, 2.0]"));
            }
        }
        Ok(())
    }

    /// Inside-outside function; `≤ 1` inside.
    #[inline]
    pub fn implicit(&self, p: &Point3) -> f64 {
        let [a, b, c] = self.axes;
        let xy = (p.x / a).abs().powf(2.0 / self.e2) + (p.y / b).abs().powf(2.0 / self.e2);
        xy.powf(self.e2 / self.e1) + (p.z / c).abs().powf(2.0 / self.e1)
    }

    pub fn contains(&self, p: &Point3) -> bool {
        self.implicit(p) <= 1.0
    }

    /// Half of the vertical chord through local `(x, y)`, or `None` outside
    /// the footprint.
    #[inline]
    pub fn half_height(&self, x: f64, y: f64) -> Option<f64> {
        let [a, b, c] = self.axes;
        let xy = (x / a).abs().powf(2.0 / self.e2) + (y / b).abs().powf(2.0 / self.e2);
        if xy > 1.0 {
            return None;
        }
        let s = xy.powf(self.e2 / self.e1);
        Some(c * (1.0 - s).max(0.0).powf(self.e1 / 2.0))
    }

    pub fn volume(&self) -> f64 {
        let [a, b, c] = self.axes;
        let (e1, e2) = (self.e1, self.e2);
        2.0 * a * b * c * e1 * e2 * beta(e1 / 2.0 + 1.0, e1) * beta(e2 / 2.0, e2 / 2.0)
    }

    /// Area of the horizontal section through the center (the largest one).
    pub fn cross_section_area(&self) -> f64 {
        let [a, b, _] = self.axes;
        let e = self.e2;
        4.0 * a * b * gamma(1.0 + e / 2.0).powi(2) / gamma(1.0 + e)
    }

    pub fn height(&self) -> f64 {
        2.0 * self.axes[2]
    }

    /// Radius of the smallest vertical cylinder about z holding the shape.
    pub fn footprint_radius(&self) -> f64 {
        let [a, b, _] = self.axes;
        if self.e2 < 1.0 {
            // Squarer sections reach toward the box corners.
            (a * a + b * b).sqrt()
        } else {
            a.max(b)
        }
    }
}

/// Geometric primitive in its own frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Superellipsoid(Superellipsoid),
    /// Axis-aligned box with the given half-extents.
    Box {
        half: [f64; 3],
    },
    /// Cylinder along local z, centered.
    Cylinder {
        radius: f64,
        half_length: f64,
    },
    Sphere {
        radius: f64,
    },
}

impl Shape {
    pub fn contains(&self, p: &Point3) -> bool {
        match self {
            Shape::Superellipsoid(s) => s.contains(p),
            Shape::Box { half } => p.x.abs() <= half[0] && p.y.abs() <= half[1] && p.z.abs() <= half[2],
            Shape::Cylinder { radius, half_length } => p.z.abs() <= *half_length && p.x * p.x + p.y * p.y <= radius * radius,
            Shape::Sphere { radius } => p.coords.norm_squared() <= radius * radius,
        }
    }

    /// Half-extents of the local bounding box.
    pub fn half_extents(&self) -> [f64; 3] {
        match self {
            Shape::Superellipsoid(s) => s.axes,
            Shape::Box { half } => *half,
            Shape::Cylinder { radius, half_length } => [*radius, *radius, *half_length],
            Shape::Sphere { radius } => [*radius; 3],
        }
    }

    pub fn bounding_radius(&self) -> f64 {
        let [a, b, c] = self.half_extents();
        (a * a + b * b + c * c).sqrt()
    }

    /// Smallest `t ≥ 0` where the ray `o + t d` (unit `d`) enters the shape.
    pub fn intersect(&self, o: &Point3, d: &Vec3) -> Option<f64> {
        match self {
            Shape::Box { half } => slab(o, d, half).map(|(t0, _)| t0),
            Shape::Sphere { radius } => {
                let b = o.coords.dot(d);
                let c = o.coords.norm_squared() - radius * radius;
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let s = disc.sqrt();
                let (t0, t1) = (-b - s, -b + s);
                if t1 < 0.0 {
                    None
                } else {
                    Some(t0.max(0.0))
                }
            }
            Shape::Cylinder { radius, half_length } => cylinder(o, d, *radius, *half_length),
            Shape::Superellipsoid(s) => superellipsoid(s, o, d),
        }
    }
}

/// Ray/box slab test; returns the clipped parameter interval.
fn slab(o: &Point3, d: &Vec3, half: &[f64; 3]) -> Option<(f64, f64)> {
    let mut t0 = 0.0f64;
    let mut t1 = f64::INFINITY;
    for i in 0..3 {
        if d[i].abs() < 1e-15 {
            if o[i].abs() > half[i] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[i];
        let (mut a, mut b) = ((-half[i] - o[i]) * inv, (half[i] - o[i]) * inv);
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        t0 = t0.max(a);
        t1 = t1.min(b);
        if t0 > t1 {
            return None;
        }
    }
    Some((t0, t1))
}

fn cylinder(o: &Point3, d: &Vec3, r: f64, h: f64) -> Option<f64> {
    // Clip against the caps, then against the infinite side surface.
    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    if d.z.abs() < 1e-15 {
        if o.z.abs() > h {
            return None;
        }
    } else {
        let (mut a, mut b) = ((-h - o.z) / d.z, (h - o.z) / d.z);
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        t0 = t0.max(a);
        t1 = t1.min(b);
    }
    let qa = d.x * d.x + d.y * d.y;
    let qb = o.x * d.x + o.y * d.y;
    let qc = o.x * o.x + o.y * o.y - r * r;
    if qa < 1e-15 {
        if qc > 0.0 {
            return None;
        }
    } else {
        let disc = qb * qb - qa * qc;
        if disc < 0.0 {
            return None;
        }
        let s = disc.sqrt();
        t0 = t0.max((-qb - s) / qa);
        t1 = t1.min((-qb + s) / qa);
    }
    (t0 <= t1).then_some(t0)
}

fn superellipsoid(s: &Superellipsoid, o: &Point3, d: &Vec3) -> Option<f64> {
    let (t0, t1) = slab(o, d, &s.axes)?;
    let g = |t: f64| s.implicit(&(o + d * t)) - 1.0;
    if g(t0) <= 0.0 {
        return Some(t0);
    }
    let min_axis = s.axes.iter().cloned().fold(f64::INFINITY, f64::min);
    let step = (min_axis / 16.0).clamp(0.05, 0.5);
    let n = ((t1 - t0) / step).ceil().max(1.0) as usize;
    let mut prev = t0;
    for i in 1..=n {
        let t = (t0 + step * i as f64).min(t1);
        if g(t) <= 0.0 {
            let (mut lo, mut hi) = (prev, t);
            for _ in 0..48 {
                let mid = 0.5 * (lo + hi);
                if g(mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(hi);
        }
        prev = t;
    }
    None
}

/// A shape placed in a parent frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub shape: Shape,
    /// Primitive frame expressed in the parent frame.
    pub local: RigidTransform,
}

impl Primitive {
    pub fn new(shape: Shape, local: RigidTransform) -> Self {
        Self { shape, local }
    }

    pub fn contains(&self, p: &Point3) -> bool {
        self.shape.contains(&self.local.invert().transform_point(p))
    }

    pub fn intersect(&self, o: &Point3, d: &Vec3) -> Option<f64> {
        let inv = self.local.invert();
        self.shape.intersect(&inv.transform_point(o), &inv.transform_vector(d))
    }
}
