use std::collections::HashMap;

use crate::geometry::Point3;

type CellKey = (i64, i64, i64);

/// Dense tables are used when the bounding grid has at most this many cells
/// per point (plus a small constant).
const DENSE_CELLS_PER_POINT: i64 = 8;

#[derive(Debug, Clone)]
enum Cells {
    Dense { dims: (i64, i64, i64), ranges: Vec<(u32, u32)> },
    Sparse(HashMap<CellKey, (u32, u32)>),
}

/// Uniform-grid spatial hash for radius and k-nearest-neighbor queries.
///
/// Point indices are stored per cell in ascending order, and every query
/// result is sorted by (distance, index), so results never depend on hash
/// iteration order.
#[derive(Debug, Clone)]
pub struct GridIndex<'a> {
    points: &'a [Point3],
    cell: f64,
    cells: Cells,
    occupied: usize,
    sorted: Vec<u32>,
    /// Points in `sorted` order, so cell scans read contiguous memory.
    local: Vec<Point3>,
    lo: CellKey,
    hi: CellKey,
}

impl<'a> GridIndex<'a> {
    pub fn new(points: &'a [Point3], cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "cell size must be positive");
        let mut keyed: Vec<(CellKey, u32)> = points.iter().enumerate().map(|(i, p)| (key(p, cell), i as u32)).collect();
        keyed.sort_unstable();
        let mut lo = (i64::MAX, i64::MAX, i64::MAX);
        let mut hi = (i64::MIN, i64::MIN, i64::MIN);
        for (k, _) in &keyed {
            lo = (lo.0.min(k.0), lo.1.min(k.1), lo.2.min(k.2));
            hi = (hi.0.max(k.0), hi.1.max(k.1), hi.2.max(k.2));
        }
        let mut runs = Vec::new();
        let mut start = 0usize;
        while start < keyed.len() {
            let k = keyed[start].0;
            let mut end = start;
            while end < keyed.len() && keyed[end].0 == k {
                end += 1;
            }
            runs.push((k, (start as u32, end as u32)));
            start = end;
        }
        let occupied = runs.len();
        let cells = if keyed.is_empty() {
            Cells::Sparse(HashMap::new())
        } else {
            let dims = (hi.0 - lo.0 + 1, hi.1 - lo.1 + 1, hi.2 - lo.2 + 1);
            let volume = dims.0.checked_mul(dims.1).and_then(|v| v.checked_mul(dims.2));
            match volume {
                Some(v) if v <= DENSE_CELLS_PER_POINT * keyed.len() as i64 + 4096 => {
                    // Empty slots get an empty range at the next run's start,
                    // so any z-span of one column is a single slice.
                    let mut ranges = Vec::with_capacity(v as usize);
                    let mut next = runs.iter().peekable();
                    let mut at = 0u32;
                    for slot in 0..v as usize {
                        match next.peek() {
                            Some((k, r)) if dense_slot(dims, lo, k) == slot => {
                                ranges.push(*r);
                                at = r.1;
                                next.next();
                            }
                            _ => ranges.push((at, at)),
                        }
                    }
                    Cells::Dense { dims, ranges }
                }
                _ => Cells::Sparse(runs.into_iter().collect()),
            }
        };
        let sorted: Vec<u32> = keyed.into_iter().map(|(_, i)| i).collect();
        let local = sorted.iter().map(|&i| points[i as usize]).collect();
        Self {
            points,
            cell,
            cells,
            occupied,
            sorted,
            local,
            lo,
            hi,
        }
    }

    /// Picks a cell size for `k`-nearest queries: a surface-like cloud holds
    /// about `k / 3` points per occupied cell.
    pub fn for_knn(points: &'a [Point3], k: usize) -> Self {
        let per_cell = (k as f64 / 3.0).max(1.0);
        let mut index = Self::new(points, suggested_cell(points, per_cell as usize));
        // The bounding box overstates the area of clustered clouds; shrink
        // the cell until occupied cells hold about the requested count.
        for _ in 0..6 {
            let avg = index.occupancy_per_point();
            if avg <= 2.0 * per_cell {
                break;
            }
            let cell = index.cell * (per_cell / avg).sqrt().max(0.25);
            index = Self::new(points, cell);
        }
        index
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    /// Mean size of the cell a point falls in.
    fn occupancy_per_point(&self) -> f64 {
        let sq = |&(s, e): &(u32, u32)| ((e - s) as f64).powi(2);
        let total: f64 = match &self.cells {
            Cells::Dense { ranges, .. } => ranges.iter().map(sq).sum(),
            Cells::Sparse(m) => m.values().map(sq).sum(),
        };
        total / self.points.len().max(1) as f64
    }

    /// Calls `f` on every point of cells `(x, y, z0..=z1)`, in cell order.
    #[inline]
    fn visit_column(&self, x: i64, y: i64, z0: i64, z1: i64, f: &mut impl FnMut(&Point3, usize)) {
        if x < self.lo.0 || x > self.hi.0 || y < self.lo.1 || y > self.hi.1 {
            return;
        }
        let (z0, z1) = (z0.max(self.lo.2), z1.min(self.hi.2));
        if z0 > z1 {
            return;
        }
        match &self.cells {
            Cells::Dense { dims, ranges } => {
                let s = ranges[dense_slot(*dims, self.lo, &(x, y, z0))].0 as usize;
                let e = ranges[dense_slot(*dims, self.lo, &(x, y, z1))].1 as usize;
                for j in s..e {
                    f(&self.local[j], self.sorted[j] as usize);
                }
            }
            Cells::Sparse(m) => {
                for z in z0..=z1 {
                    if let Some(&(s, e)) = m.get(&(x, y, z)) {
                        for j in s as usize..e as usize {
                            f(&self.local[j], self.sorted[j] as usize);
                        }
                    }
                }
            }
        }
    }

    /// Calls `f` on every point in cells overlapping the box `[lo, hi]`.
    fn for_each_in(&self, lo: CellKey, hi: CellKey, mut f: impl FnMut(&Point3, usize)) {
        for x in lo.0.max(self.lo.0)..=hi.0.min(self.hi.0) {
            for y in lo.1.max(self.lo.1)..=hi.1.min(self.hi.1) {
                self.visit_column(x, y, lo.2, hi.2, &mut f);
            }
        }
    }

    /// Indices within `radius` of `q` (inclusive) in cell order, which is
    /// deterministic but not sorted by distance.
    pub fn radius_unsorted(&self, q: &Point3, radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        let lo = key(&Point3::new(q.x - radius, q.y - radius, q.z - radius), self.cell);
        let hi = key(&Point3::new(q.x + radius, q.y + radius, q.z + radius), self.cell);
        let mut out = Vec::new();
        self.for_each_in(lo, hi, |p, i| {
            if (p - q).norm_squared() <= r2 {
                out.push(i);
            }
        });
        out
    }

    /// Indices within `radius` of `q` (inclusive), sorted by distance then index.
    pub fn radius(&self, q: &Point3, radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        let lo = key(&Point3::new(q.x - radius, q.y - radius, q.z - radius), self.cell);
        let hi = key(&Point3::new(q.x + radius, q.y + radius, q.z + radius), self.cell);
        let mut out: Vec<(f64, usize)> = Vec::new();
        self.for_each_in(lo, hi, |p, i| {
            let d2 = (p - q).norm_squared();
            if d2 <= r2 {
                out.push((d2, i));
            }
        });
        out.sort_unstable_by(by_distance);
        out.into_iter().map(|(_, i)| i).collect()
    }

    /// The `k` nearest indices to `q` (including a point at `q` itself),
    /// sorted by distance then index.
    pub fn knn(&self, q: &Point3, k: usize) -> Vec<usize> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        let c = key(q, self.cell);
        // Distance from q to the nearest face of its own cell.
        let inset = [q.x, q.y, q.z]
            .iter()
            .zip([c.0, c.1, c.2])
            .map(|(&v, ci)| {
                let f = v / self.cell - ci as f64;
                f.min(1.0 - f).max(0.0) * self.cell
            })
            .fold(f64::INFINITY, f64::min);
        let mut found: Vec<(f64, usize)> = Vec::with_capacity(4 * k);
        let mut ring: i64 = 0;
        let max_ring = self.max_ring(&c);
        // Grow rings until k points are known; their k-th distance bounds
        // the answer.
        loop {
            self.visit_ring(&c, ring, |p, i| {
                found.push(((p - q).norm_squared(), i));
            });
            if found.len() >= k || ring >= max_ring {
                break;
            }
            let side = 2 * ring + 3;
            if side * side * side > 4 * self.occupied as i64 + 27 {
                // Sparse grid: scanning everything is cheaper than more rings.
                return self.knn_brute(q, k);
            }
            ring += 1;
        }
        if found.len() > k {
            found.select_nth_unstable_by(k - 1, by_distance);
            found.truncate(k);
        }
        let worst = found.iter().map(|e| e.0).fold(0.0, f64::max);
        // Anything outside the visited cube is at least this far away.
        let bound = ring as f64 * self.cell + inset;
        if worst > bound * bound {
            // Points within the k-th distance may lie outside the cube:
            // rescan the box of that radius.
            let r = worst.sqrt();
            let lo = key(&Point3::new(q.x - r, q.y - r, q.z - r), self.cell);
            let hi = key(&Point3::new(q.x + r, q.y + r, q.z + r), self.cell);
            found.clear();
            self.for_each_in(lo, hi, |p, i| {
                let d2 = (p - q).norm_squared();
                if d2 <= worst {
                    found.push((d2, i));
                }
            });
            if found.len() > k {
                found.select_nth_unstable_by(k - 1, by_distance);
                found.truncate(k);
            }
        }
        found.sort_unstable_by(by_distance);
        found.into_iter().map(|(_, i)| i).collect()
    }

    fn knn_brute(&self, q: &Point3, k: usize) -> Vec<usize> {
        let mut all: Vec<(f64, usize)> = self.points.iter().enumerate().map(|(i, p)| ((p - q).norm_squared(), i)).collect();
        if all.len() > k {
            all.select_nth_unstable_by(k - 1, by_distance);
            all.truncate(k);
        }
        all.sort_unstable_by(by_distance);
        all.into_iter().map(|(_, i)| i).collect()
    }

    fn max_ring(&self, c: &CellKey) -> i64 {
        if self.occupied == 0 {
            return 0;
        }
        let span = |c: i64, lo: i64, hi: i64| (c - lo).abs().max((hi - c).abs());
        span(c.0, self.lo.0, self.hi.0)
            .max(span(c.1, self.lo.1, self.hi.1))
            .max(span(c.2, self.lo.2, self.hi.2))
    }

    fn visit_ring(&self, c: &CellKey, ring: i64, mut f: impl FnMut(&Point3, usize)) {
        for x in -ring..=ring {
            for y in -ring..=ring {
                let (cx, cy) = (c.0 + x, c.1 + y);
                if x.abs() == ring || y.abs() == ring {
                    self.visit_column(cx, cy, c.2 - ring, c.2 + ring, &mut f);
                } else {
                    self.visit_column(cx, cy, c.2 - ring, c.2 - ring, &mut f);
                    self.visit_column(cx, cy, c.2 + ring, c.2 + ring, &mut f);
                }
            }
        }
    }
}

#[inline]
fn by_distance(a: &(f64, usize), b: &(f64, usize)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

#[inline]
fn dense_slot(dims: (i64, i64, i64), lo: CellKey, k: &CellKey) -> usize {
    (((k.0 - lo.0) * dims.1 + (k.1 - lo.1)) * dims.2 + (k.2 - lo.2)) as usize
}

#[inline]
fn key(p: &Point3, cell: f64) -> CellKey {
    (
        (p.x / cell).floor() as i64,
        (p.y / cell).floor() as i64,
        (p.z / cell).floor() as i64,
    )
}

fn suggested_cell(points: &[Point3], per_cell: usize) -> f64 {
    if points.len() < 2 {
        return 1.0;
    }
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let mut ext = [hi.x - lo.x, hi.y - lo.y, hi.z - lo.z];
    ext.sort_by(|a, b| b.total_cmp(a));
    // Treat the cloud as a 2-D surface spanning its two largest extents.
    let area = (ext[0] * ext[1]).max(ext[0] * ext[0] * 1e-3).max(1e-6);
    let cell = (area * per_cell.max(1) as f64 / points.len() as f64).sqrt();
    cell.clamp(1e-3, ext[0].max(1e-3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_knn(points: &[Point3], q: &Point3, k: usize) -> Vec<usize> {
        let mut all: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, p)| ((p - q).norm_squared(), i)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.into_iter().take(k).map(|(_, i)| i).collect()
    }

    #[test]
    fn knn_and_radius_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Point3> = (0..2000)
            .map(|_| {
                Point3::new(
                    rng.random_range(-100.0..100.0),
                    rng.random_range(-100.0..100.0),
                    rng.random_range(-5.0..5.0),
                )
            })
            .collect();
        for cell in [2.0, 7.5, 40.0] {
            let idx = GridIndex::new(&pts, cell);
            for q in pts.iter().step_by(97) {
                assert_eq!(idx.knn(q, 15), brute_knn(&pts, q, 15));
                let r = idx.radius(q, 12.0);
                let mut want: Vec<(f64, usize)> = pts
                    .iter()
                    .enumerate()
                    .map(|(i, p)| ((p - q).norm_squared(), i))
                    .filter(|(d, _)| *d <= 144.0)
                    .collect();
                want.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                assert_eq!(r, want.into_iter().map(|(_, i)| i).collect::<Vec<_>>());
            }
        }
        let auto = GridIndex::for_knn(&pts, 15);
        assert_eq!(auto.knn(&pts[5], 15), brute_knn(&pts, &pts[5], 15));
    }

    #[test]
    fn knn_larger_than_cloud() {
        let pts = vec![Point3::origin(), Point3::new(1000.0, 0.0, 0.0)];
        let idx = GridIndex::new(&pts, 1.0);
        assert_eq!(idx.knn(&Point3::origin(), 5), vec![0, 1]);
    }
}
