use nalgebra::{Rotation3, Unit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::frame::{any_perpendicular, local_frame_with};
use super::select::closing_stats;
use super::{GraspCandidate, GraspConfig, HandGeometry};
use crate::error::{Error, Result};
use crate::geometry::{RigidTransform, Vec3};
use crate::pointcloud::{GridIndex, PointCloud};

/// Draws `min(cfg.num_samples, |c|)` distinct point indices, uniformly
/// without replacement.
///
/// A partial Fisher-Yates shuffle: the first `m` draws for a given seed do
/// not depend on `num_samples`, so a larger request extends a smaller one.
pub fn sample_seeds(c: &PointCloud, cfg: &GraspConfig) -> Result<Vec<usize>> {
    if c.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(draw_indices(c.len(), cfg.num_samples, cfg.seed))
}

pub(crate) fn draw_indices(len: usize, n: usize, seed: u64) -> Vec<usize> {
    let m = n.min(len);
    let mut idx: Vec<usize> = (0..len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..m {
        let j = rng.random_range(i..len);
        idx.swap(i, j);
    }
    idx.truncate(m);
    idx
}

/// Collision-free candidates for every sampled seed and sweep orientation,
/// in (seed rank, orientation) order, scored with the configured friction
/// cone and expected point count.
///
/// The cloud must carry normals. Seeds whose neighborhood is too sparse for
/// a local frame produce no candidates. An empty cloud gives an empty list.
pub fn generate_candidates(c: &PointCloud, hand: &HandGeometry, cfg: &GraspConfig) -> Result<Vec<GraspCandidate>> {
    if c.is_empty() {
        return Ok(Vec::new());
    }
    let seeds = sample_seeds(c, cfg)?;
    candidates_for_seeds(c, &seeds, hand, cfg)
}

pub(crate) fn candidates_for_seeds(c: &PointCloud, seeds: &[usize], hand: &HandGeometry, cfg: &GraspConfig) -> Result<Vec<GraspCandidate>> {
    if c.normals.is_none() {
        return Err(Error::Degenerate("grasp generation needs normals".into()));
    }
    if let Some(&bad) = seeds.iter().find(|&&s| s >= c.len()) {
        return Err(Error::Degenerate(format!("seed index {bad} out of range")));
    }
    let frame_index = GridIndex::new(&c.points, cfg.frame_radius);
    let reach = sweep_radius(hand, cfg);
    let reach_index = GridIndex::new(&c.points, reach / 4.0);
    let sweep = cfg.hand_axis();

    let per_seed: Vec<Vec<GraspCandidate>> = seeds
        .par_iter()
        .enumerate()
        .map(|(rank, &s)| {
            let Ok(frame) = local_frame_with(c, &frame_index, s, cfg.frame_radius) else {
                return Vec::new();
            };
            let nbrs = reach_index.radius_unsorted(&c.points[s], reach);
            seed_candidates(c, s, rank, &frame, &nbrs, &sweep, hand, cfg)
        })
        .collect();
    Ok(per_seed.into_iter().flatten().collect())
}

/// Radius around a seed that contains every point the hand can touch while
/// it is pushed in from its start position.
fn sweep_radius(hand: &HandGeometry, cfg: &GraspConfig) -> f64 {
    let along = hand.finger_depth + 2.0 * cfg.push_step + hand.palm_depth;
    let across = hand.max_aperture + hand.finger_width;
    let up = hand.hand_height / 2.0;
    (along * along + across * across + up * up).sqrt() + 1.0
}

#[allow(clippy::too_many_arguments)]
fn seed_candidates(
    c: &PointCloud,
    s: usize,
    rank: usize,
    frame: &RigidTransform,
    nbrs: &[usize],
    sweep: &Vec3,
    hand: &HandGeometry,
    cfg: &GraspConfig,
) -> Vec<GraspCandidate> {
    let seed = c.points[s];
    let a = -frame.axis(2);
    let reference = {
        let x = frame.axis(0);
        let r = x - sweep * x.dot(sweep);
        r.try_normalize(1e-6).unwrap_or_else(|| any_perpendicular(sweep))
    };
    let axis = Unit::new_normalize(*sweep);
    let k_total = cfg.num_orientations;
    let mut out = Vec::new();
    let mut slab = Vec::with_capacity(nbrs.len());
    for k in 0..k_total {
        let theta = k as f64 * std::f64::consts::PI / k_total as f64;
        let r = Rotation3::from_axis_angle(&axis, theta) * reference;
        let Some(close) = (r - a * r.dot(&a)).try_normalize(1e-6) else {
            continue;
        };
        let h = a.cross(&close);
        slab.clear();
        for &i in nbrs {
            let q = c.points[i] - seed;
            if q.dot(&h).abs() <= hand.hand_height / 2.0 {
                slab.push((q.dot(&a), q.dot(&close)));
            }
        }
        let Some(fit) = fit_hand(&slab, hand, cfg) else {
            continue;
        };
        let origin = seed + a * fit.bottom + close * fit.lateral;
        let mut g = GraspCandidate {
            pose: RigidTransform::from_axes(&a, &close, &h, &origin),
            grasp_width: (fit.extent + cfg.width_clearance).min(hand.max_aperture),
            score: 0.0,
            closing_point_count: fit.count,
            antipodal_fraction: 0.0,
            seed_index: rank,
            orientation_index: k,
            seed_point: s,
        };
        // Every point of the closing region is within the sweep radius, so
        // the neighborhood gives the same counts as the whole cloud.
        let (count, frac) = closing_stats(c, nbrs.iter().copied(), &g, hand, cfg.friction_half_angle_deg);
        if count < cfg.min_closing_points {
            continue;
        }
        g.closing_point_count = count;
        g.antipodal_fraction = frac;
        g.score = frac * count as f64 / cfg.expected_closing_points;
        out.push(g);
    }
    out
}

#[derive(Debug, Clone, Copy)]
struct HandFit {
    bottom: f64,
    lateral: f64,
    count: usize,
    extent: f64,
}

/// Places the hand along the approach line through the seed.
///
/// `slab` holds `(along, across)` offsets from the seed of the points inside
/// the hand-height band. The hand starts with its fingertips just short of
/// the seed, centered on the nearby surface, and advances in `push_step`
/// increments while the fingers stay clear and the palm has not touched.
fn fit_hand(slab: &[(f64, f64)], hand: &HandGeometry, cfg: &GraspConfig) -> Option<HandFit> {
    let half = hand.max_aperture / 2.0;
    let outer = half + hand.finger_width;
    let fd = hand.finger_depth;
    let step = cfg.push_step;
    let b0 = -fd - step;

    let mut lateral = 0.0;
    for _ in 0..3 {
        let (lo, hi) = extent(
            slab.iter()
                .filter(|&&(qa, qc)| (0.0..=fd).contains(&qa) && (qc - lateral).abs() <= outer)
                .map(|&(_, qc)| qc),
        )?;
        lateral = ((lo + hi) / 2.0).clamp(-half, half);
    }

    let columns = Columns::new(slab, lateral, half, outer);
    if columns.fingers_hit(b0, fd) || columns.palm_hit(b0, hand.palm_depth) {
        return None;
    }
    let mut b = b0;
    let max_steps = ((fd + hand.palm_depth) / step).ceil() as usize + 4;
    for _ in 0..max_steps {
        let nb = b + step;
        if columns.fingers_hit(nb, fd) || columns.palm_hit(nb, hand.palm_depth) {
            break;
        }
        b = nb;
    }

    let closing = |lat: f64| {
        extent_count(
            slab.iter()
                .filter(|&&(qa, qc)| qa >= b && qa <= b + fd && (qc - lat).abs() <= half)
                .map(|&(_, qc)| qc - lat),
        )
    };
    let (lo, hi, count) = closing(lateral)?;
    if count < cfg.min_closing_points {
        return None;
    }
    let mut fit = HandFit {
        bottom: b,
        lateral,
        count,
        extent: hi - lo,
    };
    let recentered = (lateral + (lo + hi) / 2.0).clamp(-half, half);
    let moved = Columns::new(slab, recentered, half, outer);
    if !moved.fingers_hit(b, fd) && !moved.palm_hit(b, hand.palm_depth) {
        if let Some((lo2, hi2, count2)) = closing(recentered) {
            if count2 >= cfg.min_closing_points && count2 >= count {
                fit = HandFit {
                    bottom: b,
                    lateral: recentered,
                    count: count2,
                    extent: hi2 - lo2,
                };
            }
        }
    }
    Some(fit)
}

/// Along-axis offsets of slab points, sorted, split by hand column.
struct Columns {
    finger: Vec<f64>,
    any: Vec<f64>,
}

impl Columns {
    fn new(slab: &[(f64, f64)], lateral: f64, half: f64, outer: f64) -> Self {
        let mut finger = Vec::new();
        let mut any = Vec::new();
        for &(qa, qc) in slab {
            let d = (qc - lateral).abs();
            if d <= outer {
                any.push(qa);
                if d > half {
                    finger.push(qa);
                }
            }
        }
        finger.sort_by(f64::total_cmp);
        any.sort_by(f64::total_cmp);
        Self { finger, any }
    }

    /// Some finger-column point lies in `[b, b + depth]`.
    fn fingers_hit(&self, b: f64, depth: f64) -> bool {
        let i = self.finger.partition_point(|&x| x < b);
        i < self.finger.len() && self.finger[i] <= b + depth
    }

    /// Some point under the palm lies in `[b - depth, b)`.
    fn palm_hit(&self, b: f64, depth: f64) -> bool {
        let i = self.any.partition_point(|&x| x < b - depth);
        i < self.any.len() && self.any[i] < b
    }
}

fn extent(it: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    extent_count(it).map(|(lo, hi, _)| (lo, hi))
}

fn extent_count(it: impl Iterator<Item = f64>) -> Option<(f64, f64, usize)> {
    let mut n = 0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in it {
        lo = lo.min(v);
        hi = hi.max(v);
        n += 1;
    }
    (n > 0).then_some((lo, hi, n))
}
