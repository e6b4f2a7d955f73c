//! ASCII point-cloud files: `#` comment lines, then `x y z [nx ny nz]` per
//! line in millimeters. Two comment lines carry metadata when present:
//! `# frame <label>` and `# viewpoint <x> <y> <z>`. A file without a
//! viewpoint is assumed to be seen from 1 m above its centroid.

use std::io::{BufRead, Write};
use std::path::Path;

use super::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::{Point3, Vec3};

/// Formats `v` with six significant digits, trailing zeros trimmed.
pub fn fmt_sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() { "0".into() } else { v.to_string() };
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        // Rounding may carry into a new digit (9.999995 -> 10.00000).
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        let s = format!("{v:.5e}");
        let (mant, e) = s.split_once('e').expect("exponent form");
        let mant = if mant.contains('.') {
            mant.trim_end_matches('0').trim_end_matches('.')
        } else {
            mant
        };
        format!("{mant}e{e}")
    }
}

pub fn write_cloud<W: Write>(c: &PointCloud, mut w: W) -> std::io::Result<()> {
    writeln!(w, "# point cloud, {} points, millimeters", c.len())?;
    writeln!(w, "# frame {}", c.frame)?;
    let o = c.sensor_origin;
    writeln!(w, "# viewpoint {} {} {}", fmt_sig6(o.x), fmt_sig6(o.y), fmt_sig6(o.z))?;
    for (i, p) in c.points.iter().enumerate() {
        write!(w, "{} {} {}", fmt_sig6(p.x), fmt_sig6(p.y), fmt_sig6(p.z))?;
        if let Some(n) = c.normal(i) {
            write!(w, " {} {} {}", fmt_sig6(n.x), fmt_sig6(n.y), fmt_sig6(n.z))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_cloud<R: BufRead>(r: R) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut frame = None;
    let mut viewpoint = None;
    let mut with_normals: Option<bool> = None;
    for (lineno, line) in r.lines().enumerate() {
        let line = line.map_err(|e| bad(lineno, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let mut it = comment.split_whitespace();
            match it.next() {
                Some("frame") => frame = it.next().map(str::to_string),
                Some("viewpoint") => {
                    let v: Vec<f64> = it.filter_map(|t| t.parse().ok()).collect();
                    if v.len() == 3 {
                        viewpoint = Some(Point3::new(v[0], v[1], v[2]));
                    }
                }
                _ => {}
            }
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| bad(lineno, format!("not a number: {t:?}"))))
            .collect::<Result<_>>()?;
        let has_n = match vals.len() {
            3 => false,
            6 => true,
            n => return Err(bad(lineno, format!("expected 3 or 6 values, found {n}"))),
        };
        if *with_normals.get_or_insert(has_n) != has_n {
            return Err(bad(lineno, "mixed lines with and without normals".into()));
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(bad(lineno, "non-finite coordinate".into()));
        }
        points.push(Point3::new(vals[0], vals[1], vals[2]));
        if has_n {
            let n = Vec3::new(vals[3], vals[4], vals[5]);
            normals.push(n.try_normalize(1e-12).ok_or_else(|| bad(lineno, "zero normal".into()))?);
        }
    }
    let mut c = PointCloud::new(points);
    if with_normals == Some(true) {
        c.normals = Some(normals);
    }
    if let Some(f) = frame {
        c.frame = f;
    }
    // Without a viewpoint, assume an overhead sensor 1 m above the centroid.
    c.sensor_origin = match (viewpoint, c.centroid()) {
        (Some(v), _) => v,
        (None, Some(m)) => m + Vec3::new(0.0, 0.0, 1000.0),
        (None, None) => Point3::origin(),
    };
    Ok(c)
}

pub fn save_cloud(c: &PointCloud, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_cloud(c, std::io::BufWriter::new(f)).map_err(|e| Error::io(path, e))
}

pub fn load_cloud(path: &Path) -> Result<PointCloud> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_cloud(std::io::BufReader::new(f))
}

fn bad(lineno: usize, message: String) -> Error {
    Error::Format {
        what: "point cloud",
        message: format!("line {}: {message}", lineno + 1),
    }
}
