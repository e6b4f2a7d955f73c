//! 16-bit depth images and the PGM/PBM file formats used to store them.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mask::InstanceMask;

/// Depth image in millimeters along the optical axis; 0 marks a hole.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthImage {
    width: u32,
    height: u32,
    data: Vec<u16>,
}

impl DepthImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0; width as usize * height as usize],
        }
    }

    pub fn from_vec(width: u32, height: u32, data: Vec<u16>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::Format {
                what: "depth image",
                message: format!("{} samples for {width}x{height}", data.len()),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: u32, height: u32, depth: u16) -> Self {
        Self {
            width,
            height,
            data: vec![depth; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u16] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, u: u32, v: u32) -> u16 {
        self.data[v as usize * self.width as usize + u as usize]
    }

    #[inline]
    pub fn set(&mut self, u: u32, v: u32, d: u16) {
        let w = self.width as usize;
        self.data[v as usize * w + u as usize] = d;
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|&&d| d > 0).count()
    }

    /// Median of the valid depths in a `(2r+1)²` window centered on the pixel
    /// nearest to (u, v). `None` when the window holds no valid sample.
    pub fn window_median(&self, u: f64, v: f64, radius: u32) -> Option<f64> {
        let cu = u.round() as i64;
        let cv = v.round() as i64;
        let r = radius as i64;
        let mut vals: Vec<u16> = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
        for y in (cv - r)..=(cv + r) {
            if y < 0 || y >= self.height as i64 {
                continue;
            }
            for x in (cu - r)..=(cu + r) {
                if x < 0 || x >= self.width as i64 {
                    continue;
                }
                let d = self.get(x as u32, y as u32);
                if d > 0 {
                    vals.push(d);
                }
            }
        }
        median_u16(&mut vals)
    }

    /// Binary PGM (P5, maxval 65535, big-endian samples).
    pub fn write_pgm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "P5\n{} {}\n65535\n", self.width, self.height)?;
        let mut buf = Vec::with_capacity(self.data.len() * 2);
        for &d in &self.data {
            buf.extend_from_slice(&d.to_be_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_pgm<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let magic = next_token(&mut r)?;
        if magic != "P5" {
            return Err(pgm_err(format!("expected P5, found {magic:?}")));
        }
        let width: u32 = parse_token(&mut r, "width")?;
        let height: u32 = parse_token(&mut r, "height")?;
        let maxval: u32 = parse_token(&mut r, "maxval")?;
        if maxval != 65535 {
            return Err(pgm_err(format!("maxval must be 65535, found {maxval}")));
        }
        let n = width as usize * height as usize;
        let mut raw = vec![0u8; n * 2];
        r.read_exact(&mut raw).map_err(|e| pgm_err(format!("truncated pixel data: {e}")))?;
        let data = raw.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
        Self::from_vec(width, height, data)
    }

    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_pgm(std::io::BufWriter::new(f)).map_err(|e| Error::io(path, e))
    }

    pub fn load_pgm(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_pgm(f)
    }
}

pub(crate) fn median_u16(vals: &mut [u16]) -> Option<f64> {
    if vals.is_empty() {
        return None;
    }
    vals.sort_unstable();
    let n = vals.len();
    Some(if n % 2 == 1 {
        vals[n / 2] as f64
    } else {
        (vals[n / 2 - 1] as f64 + vals[n / 2] as f64) / 2.0
    })
}

/// Binary PBM (P4) of a mask; set pixels are written as 1 (black).
pub fn write_pbm<W: Write>(mask: &InstanceMask, mut w: W) -> std::io::Result<()> {
    write!(w, "P4\n{} {}\n", mask.width(), mask.height())?;
    let row_bytes = (mask.width() as usize).div_ceil(8);
    let mut row = vec![0u8; row_bytes];
    for v in 0..mask.height() {
        row.iter_mut().for_each(|b| *b = 0);
        for u in 0..mask.width() {
            if mask.get(u, v) {
                row[u as usize / 8] |= 0x80 >> (u % 8);
            }
        }
        w.write_all(&row)?;
    }
    Ok(())
}

fn pgm_err(message: String) -> Error {
    Error::Format { what: "PGM", message }
}

fn next_token<R: BufRead>(r: &mut R) -> Result<String> {
    let mut tok = String::new();
    loop {
        let mut byte = [0u8; 1];
        if r.read(&mut byte).map_err(|e| pgm_err(e.to_string()))? == 0 {
            if tok.is_empty() {
                return Err(pgm_err("unexpected end of header".into()));
            }
            return Ok(tok);
        }
        let c = byte[0] as char;
        if c == '#' && tok.is_empty() {
            let mut skip = String::new();
            r.read_line(&mut skip).map_err(|e| pgm_err(e.to_string()))?;
            continue;
        }
        if c.is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            return Ok(tok);
        }
        tok.push(c);
    }
}

fn parse_token<R: BufRead, T: std::str::FromStr>(r: &mut R, what: &str) -> Result<T> {
    let tok = next_token(r)?;
    tok.parse().map_err(|_| pgm_err(format!("bad {what}: {tok:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::ObjectClass;

    #[test]
    fn pgm_round_trip() {
        let mut img = DepthImage::new(5, 3);
        img.set(0, 0, 1);
        img.set(4, 2, 65535);
        img.set(2, 1, 800);
        let mut buf = Vec::new();
        img.write_pgm(&mut buf).unwrap();
        assert!(buf.starts_with(b"P5\n5 3\n65535\n"));
        assert_eq!(buf.len(), 13 + 30);
        assert_eq!(DepthImage::read_pgm(&buf[..]).unwrap(), img);
    }

    #[test]
    fn pgm_rejects_wrong_maxval() {
        let buf = b"P5\n1 1\n255\n\x00";
        assert!(DepthImage::read_pgm(&buf[..]).is_err());
    }

    #[test]
    fn window_median_skips_holes() {
        let mut img = DepthImage::new(5, 5);
        img.set(2, 2, 500);
        img.set(1, 1, 510);
        img.set(3, 3, 490);
        assert_eq!(img.window_median(2.0, 2.0, 2), Some(500.0));
        assert_eq!(DepthImage::new(5, 5).window_median(2.0, 2.0, 2), None);
    }

    #[test]
    fn pbm_layout() {
        let m = InstanceMask::from_pixels(9, 1, ObjectClass::Rock, [(0, 0), (8, 0)]);
        let mut buf = Vec::new();
        write_pbm(&m, &mut buf).unwrap();
        assert_eq!(&buf[..], b"P4\n9 1\n\x80\x80");
    }
}
