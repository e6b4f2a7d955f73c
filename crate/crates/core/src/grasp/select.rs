use super::candidates::candidates_for_seeds;
use super::{sample_seeds, GraspCandidate, GraspConfig, HandGeometry, HandRegion};
use crate::error::{Error, Result};
use crate::pointcloud::{crop_workspace, estimate_normals, filter_above_plane, voxel_downsample, Plane, PointCloud};

/// Closing-region point count and the fraction of those points whose normal
/// lies within the friction cone about the closing axis (either sign).
pub fn antipodal_fraction(c: &PointCloud, g: &GraspCandidate, hand: &HandGeometry, friction_half_angle_deg: f64) -> (usize, f64) {
    closing_stats(c, 0..c.len(), g, hand, friction_half_angle_deg)
}

pub(crate) fn closing_stats(
    c: &PointCloud,
    idx: impl Iterator<Item = usize>,
    g: &GraspCandidate,
    hand: &HandGeometry,
    friction_half_angle_deg: f64,
) -> (usize, f64) {
    let close = g.closing_axis();
    let cos_limit = friction_half_angle_deg.to_radians().cos();
    let mut count = 0usize;
    let mut good = 0usize;
    for i in idx {
        let p = &c.points[i];
        if hand.region(HandGeometry::local(&g.pose, p)) != HandRegion::Closing {
            continue;
        }
        count += 1;
        if let Some(n) = c.normal(i) {
            if n.dot(&close).abs() >= cos_limit {
                good += 1;
            }
        }
    }
    let frac = if count == 0 { 0.0 } else { good as f64 / count as f64 };
    (count, frac)
}

/// Antipodal fraction weighted by how many points the fingers enclose,
/// relative to `expected_count`. Zero for an empty closing region.
pub fn score_candidate(c: &PointCloud, g: &GraspCandidate, hand: &HandGeometry, friction_half_angle_deg: f64, expected_count: f64) -> f64 {
    let (count, frac) = antipodal_fraction(c, g, hand, friction_half_angle_deg);
    frac * count as f64 / expected_count
}

/// Keeps candidates whose approach axis is within the cone about world `-z`.
/// Order is preserved. A disabled filter keeps everything.
pub fn filter_by_approach(cands: Vec<GraspCandidate>, cfg: &GraspConfig) -> Vec<GraspCandidate> {
    let filter = &cfg.approach_filter;
    if !filter.enabled {
        return cands;
    }
    let limit = filter.cone_half_angle_deg + 1e-9;
    cands.into_iter().filter(|g| g.approach_angle_deg() <= limit).collect()
}

/// Top `cfg.num_selected` by descending score; ties go to the lower seed
/// rank, then the lower orientation index.
pub fn select_grasps(mut cands: Vec<GraspCandidate>, cfg: &GraspConfig) -> Vec<GraspCandidate> {
    let n = cfg.num_selected;
    cands.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.tie_key().cmp(&b.tie_key())));
    cands.truncate(n);
    cands
}

/// Full pipeline: crop, drop the support plane, optional downsampling,
/// normals, seeding, generation, scoring, approach filtering, selection.
///
/// An empty input cloud is an error. A cloud that filtering empties yields
/// an empty list.
pub fn detect_grasps(cloud: &PointCloud, hand: &HandGeometry, cfg: &GraspConfig, plane: Option<&Plane>) -> Result<Vec<GraspCandidate>> {
    cfg.validate()?;
    hand.validate()?;
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let c = prepare_cloud(cloud, cfg, plane)?;
    let Some(c) = c else {
        return Ok(Vec::new());
    };
    let seeds = sample_seeds(&c, cfg)?;
    let cands = candidates_for_seeds(&c, &seeds, hand, cfg)?;
    let cands = filter_by_approach(cands, cfg);
    Ok(select_grasps(cands, cfg))
}

/// The cloud grasps are generated from, with normals; `None` when nothing
/// usable is left.
pub(crate) fn prepare_cloud(cloud: &PointCloud, cfg: &GraspConfig, plane: Option<&Plane>) -> Result<Option<PointCloud>> {
    let mut c = match &cfg.workspace {
        Some(w) => crop_workspace(cloud, w),
        None => cloud.clone(),
    };
    if let Some(p) = plane {
        c = filter_above_plane(&c, p, cfg.plane_margin);
    }
    if let Some(leaf) = cfg.voxel_leaf {
        c = voxel_downsample(&c, leaf)?;
    }
    if c.len() < cfg.normals_k.max(3) {
        return Ok(None);
    }
    if c.normals.is_none() {
        c = estimate_normals(&c, cfg.normals_k)?;
    }
    Ok(Some(c))
}
