//! Binary instance masks and their image-space statistics.

use bitvec::vec::BitVec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Object categories known to the detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectClass {
    Rock,
    Head,
    Body,
    Leg,
    Joint,
    BodyJoint,
    Foot,
}

impl ObjectClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            ObjectClass::Rock => "rock",
            ObjectClass::Head => "head",
            ObjectClass::Body => "body",
            ObjectClass::Leg => "leg",
            ObjectClass::Joint => "joint",
            ObjectClass::BodyJoint => "body_joint",
            ObjectClass::Foot => "foot",
        }
    }
}

impl std::fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Tight pixel bounding box, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub u_min: u32,
    pub v_min: u32,
    pub u_max: u32,
    pub v_max: u32,
}

impl BBox {
    pub fn width(&self) -> u32 {
        self.u_max - self.u_min + 1
    }

    pub fn height(&self) -> u32 {
        self.v_max - self.v_min + 1
    }

    pub fn contains(&self, u: u32, v: u32) -> bool {
        u >= self.u_min && u <= self.u_max && v >= self.v_min && v <= self.v_max
    }
}

/// Per-object pixel set with a class label and confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMask {
    width: u32,
    height: u32,
    bits: BitVec,
    pub class: ObjectClass,
    pub confidence: f64,
}

impl InstanceMask {
    pub fn new(width: u32, height: u32, class: ObjectClass) -> Self {
        Self {
            width,
            height,
            bits: BitVec::repeat(false, width as usize * height as usize),
            class,
            confidence: 1.0,
        }
    }

    pub fn from_pixels(width: u32, height: u32, class: ObjectClass, pixels: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut m = Self::new(width, height, class);
        for (u, v) in pixels {
            m.set(u, v, true);
        }
        m
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence.clamp(0.0, 1.0);
        self
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    fn index(&self, u: u32, v: u32) -> usize {
        v as usize * self.width as usize + u as usize
    }

    #[inline]
    pub fn get(&self, u: u32, v: u32) -> bool {
        u < self.width && v < self.height && self.bits[self.index(u, v)]
    }

    #[inline]
    pub fn get_index(&self, idx: usize) -> bool {
        self.bits[idx]
    }

    pub fn set(&mut self, u: u32, v: u32, on: bool) {
        assert!(u < self.width && v < self.height, "pixel ({u}, {v}) out of mask");
        let i = self.index(u, v);
        self.bits.set(i, on);
    }

    pub fn set_index(&mut self, idx: usize, on: bool) {
        self.bits.set(idx, on);
    }

    pub fn is_empty(&self) -> bool {
        self.bits.not_any()
    }

    /// Set pixels in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.bits.iter_ones().map(move |i| ((i % w) as u32, (i / w) as u32))
    }

    pub fn bbox(&self) -> Option<BBox> {
        let mut it = self.pixels();
        let (u0, v0) = it.next()?;
        let mut b = BBox {
            u_min: u0,
            v_min: v0,
            u_max: u0,
            v_max: v0,
        };
        for (u, v) in it {
            b.u_min = b.u_min.min(u);
            b.u_max = b.u_max.max(u);
            b.v_max = b.v_max.max(v);
        }
        Some(b)
    }

    /// Pixels set in both masks.
    pub fn intersection_area(&self, other: &InstanceMask) -> usize {
        assert_eq!(self.bits.len(), other.bits.len());
        self.bits.iter_ones().filter(|&i| other.bits[i]).count()
    }

    /// Morphological erosion with a disk of the given pixel radius. Pixels
    /// outside the image count as background.
    pub fn eroded(&self, radius: u32) -> InstanceMask {
        if radius == 0 {
            return self.clone();
        }
        let r = radius as i64;
        let offsets: Vec<(i64, i64)> = (-r..=r)
            .flat_map(|dv| (-r..=r).map(move |du| (du, dv)))
            .filter(|(du, dv)| du * du + dv * dv <= r * r)
            .collect();
        let mut out = InstanceMask::new(self.width, self.height, self.class);
        out.confidence = self.confidence;
        let (w, h) = (self.width as i64, self.height as i64);
        for (u, v) in self.pixels() {
            let keep = offsets.iter().all(|&(du, dv)| {
                let (x, y) = (u as i64 + du, v as i64 + dv);
                x >= 0 && y >= 0 && x < w && y < h && self.bits[(y * w + x) as usize]
            });
            if keep {
                out.set(u, v, true);
            }
        }
        out
    }

    /// Set pixels with at least one 4-neighbor outside the mask.
    pub fn boundary_pixels(&self) -> Vec<(u32, u32)> {
        self.pixels()
            .filter(|&(u, v)| u == 0 || v == 0 || !self.get(u - 1, v) || !self.get(u, v - 1) || !self.get(u + 1, v) || !self.get(u, v + 1))
            .collect()
    }

    /// Row-major run lengths, starting with a (possibly zero) background run.
    pub fn to_rle(&self) -> Vec<u32> {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0u32;
        for b in self.bits.iter().by_vals() {
            if b == current {
                len += 1;
            } else {
                runs.push(len);
                current = b;
                len = 1;
            }
        }
        runs.push(len);
        runs
    }

    pub fn from_rle(width: u32, height: u32, class: ObjectClass, runs: &[u32]) -> Result<Self> {
        let total: u64 = runs.iter().map(|&r| r as u64).sum();
        if total != width as u64 * height as u64 {
            return Err(Error::Format {
                what: "mask RLE",
                message: format!("runs cover {total} pixels, expected {}", width as u64 * height as u64),
            });
        }
        let mut m = Self::new(width, height, class);
        let mut pos = 0usize;
        for (k, &run) in runs.iter().enumerate() {
            if k % 2 == 1 {
                for i in pos..pos + run as usize {
                    m.bits.set(i, true);
                }
            }
            pos += run as usize;
        }
        Ok(m)
    }
}

/// Number of set pixels.
pub fn mask_area(m: &InstanceMask) -> usize {
    m.bits.count_ones()
}

/// Mean (u, v) of the set pixels.
pub fn mask_centroid(m: &InstanceMask) -> Result<(f64, f64)> {
    let mut n = 0u64;
    let (mut su, mut sv) = (0u64, 0u64);
    for (u, v) in m.pixels() {
        n += 1;
        su += u as u64;
        sv += v as u64;
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    Ok((su as f64 / n as f64, sv as f64 / n as f64))
}

#[derive(Serialize, Deserialize)]
struct MaskRepr {
    width: u32,
    height: u32,
    class: ObjectClass,
    confidence: f64,
    rle: Vec<u32>,
}

impl Serialize for InstanceMask {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MaskRepr {
            width: self.width,
            height: self.height,
            class: self.class,
            confidence: self.confidence,
            rle: self.to_rle(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for InstanceMask {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = MaskRepr::deserialize(d)?;
        if !(0.0..=1.0).contains(&r.confidence) {
            return Err(serde::de::Error::custom("confidence outside [0, 1]"));
        }
        InstanceMask::from_rle(r.width, r.height, r.class, &r.rle)
            .map(|m| m.with_confidence(r.confidence))
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn full_three_by_three() {
        let m = InstanceMask::from_pixels(3, 3, ObjectClass::Rock, (0..3).flat_map(|v| (0..3).map(move |u| (u, v))));
        assert_eq!(mask_area(&m), 9);
        assert_eq!(mask_centroid(&m).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn single_pixel_and_pair() {
        let m = InstanceMask::from_pixels(20, 20, ObjectClass::Rock, [(5, 7)]);
        assert_eq!(mask_area(&m), 1);
        assert_eq!(mask_centroid(&m).unwrap(), (5.0, 7.0));
        let m = InstanceMask::from_pixels(20, 20, ObjectClass::Rock, [(0, 0), (10, 0)]);
        assert_eq!(mask_area(&m), 2);
        assert_eq!(mask_centroid(&m).unwrap(), (5.0, 0.0));
    }

    #[test]
    fn empty_centroid_fails() {
        let m = InstanceMask::new(4, 4, ObjectClass::Rock);
        assert!(matches!(mask_centroid(&m), Err(Error::EmptyMask)));
        assert!(m.bbox().is_none());
    }

    #[test]
    fn erosion_of_square() {
        let m = InstanceMask::from_pixels(10, 10, ObjectClass::Rock, (2..7).flat_map(|v| (2..7).map(move |u| (u, v))));
        let e = m.eroded(1);
        assert_eq!(mask_area(&e), 9);
        assert_eq!(
            e.bbox().unwrap(),
            BBox {
                u_min: 3,
                v_min: 3,
                u_max: 5,
                v_max: 5
            }
        );
        assert_eq!(mask_area(&m.eroded(3)), 0);
    }

    proptest! {
        #[test]
        fn area_matches_pixel_count(bits in proptest::collection::vec(any::<bool>(), 12 * 9)) {
            let mut m = InstanceMask::new(12, 9, ObjectClass::Rock);
            for (i, &b) in bits.iter().enumerate() {
                m.set_index(i, b);
            }
            let brute = bits.iter().filter(|&&b| b).count();
            prop_assert_eq!(mask_area(&m), brute);
            let back = InstanceMask::from_rle(12, 9, ObjectClass::Rock, &m.to_rle()).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
