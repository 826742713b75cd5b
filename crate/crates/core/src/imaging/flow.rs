use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Point2;

/// Magic tag of Middlebury `.flo` files ("PIEH" read as a little-endian f32).
pub const FLO_MAGIC: f32 = 202021.25;

/// Stored target (and `.flo` displacement) of invalid pixels.
pub const INVALID_FLOW: f64 = 1e10;

/// Displacements with a component above this magnitude are read as invalid.
pub const INVALID_THRESHOLD: f64 = 1e9;

/// Dense marker-to-reference correspondence: for every marker pixel, the
/// absolute coordinate of its match in the reference image, or nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    target: Vec<Point2>,
    valid: Vec<bool>,
}

impl FlowField {
    /// All pixels invalid.
    pub fn invalid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            target: vec![Point2::new(INVALID_FLOW, INVALID_FLOW); width * height],
            valid: vec![false; width * height],
        }
    }

    pub fn identity(width: usize, height: usize) -> Self {
        Self::from_fn(width, height, |x, y| Some(Point2::new(x as f64, y as f64)))
    }

    /// Non-finite targets returned by `f` are stored as invalid.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Option<Point2>) -> Self {
        let mut out = Self::invalid(width, height);
        for y in 0..height {
            for x in 0..width {
                out.set(x, y, f(x, y));
            }
        }
        out
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<Point2> {
        let i = y * self.width + x;
        self.valid[i].then_some(self.target[i])
    }

    #[inline]
    pub fn get_index(&self, i: usize) -> Option<Point2> {
        self.valid[i].then_some(self.target[i])
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, target: Option<Point2>) {
        let i = y * self.width + x;
        match target {
            Some(p) if p.is_finite() && p.x.abs() < INVALID_THRESHOLD && p.y.abs() < INVALID_THRESHOLD => {
                self.target[i] = p;
                self.valid[i] = true;
            }
            _ => {
                self.target[i] = Point2::new(INVALID_FLOW, INVALID_FLOW);
                self.valid[i] = false;
            }
        }
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Iterates `(x, y, target)` over valid pixels in row-major order.
    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, usize, Point2)> + '_ {
        let w = self.width;
        self.valid
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .map(move |(i, _)| (i % w, i / w, self.target[i]))
    }

    /// Adds a constant offset to every valid target.
    pub fn offset(&self, d: Point2) -> FlowField {
        let mut out = self.clone();
        for (t, v) in out.target.iter_mut().zip(&out.valid) {
            if *v {
                *t = *t + d;
            }
        }
        out
    }

    pub fn to_flo_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.width * self.height * 8);
        out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
        out.extend_from_slice(&(self.width as i32).to_le_bytes());
        out.extend_from_slice(&(self.height as i32).to_le_bytes());
        for y in 0..self.height {
            for x in 0..self.width {
                let (dx, dy) = match self.get(x, y) {
                    Some(t) => ((t.x - x as f64) as f32, (t.y - y as f64) as f32),
                    None => (INVALID_FLOW as f32, INVALID_FLOW as f32),
                };
                out.extend_from_slice(&dx.to_le_bytes());
                out.extend_from_slice(&dy.to_le_bytes());
            }
        }
        out
    }

    pub fn from_flo_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 {
            return Err(Error::Format("flow file shorter than its header".into()));
        }
        let word = |i: usize| -> [u8; 4] { bytes[i..i + 4].try_into().expect("4 bytes") };
        if f32::from_le_bytes(word(0)) != FLO_MAGIC {
            return Err(Error::Format("missing PIEH tag".into()));
        }
        let w = i32::from_le_bytes(word(4));
        let h = i32::from_le_bytes(word(8));
        if w < 0 || h < 0 {
            return Err(Error::Format(format!("negative flow size {w}x{h}")));
        }
        let (w, h) = (w as usize, h as usize);
        let expected = w
            .checked_mul(h)
            .and_then(|n| n.checked_mul(8))
            .and_then(|n| n.checked_add(12))
            .ok_or_else(|| Error::Format("flow size overflows".into()))?;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "flow file of {w}x{h} needs {expected} bytes, found {}",
                bytes.len()
            )));
        }
        let mut flow = FlowField::invalid(w, h);
        for y in 0..h {
            for x in 0..w {
                let i = 12 + (y * w + x) * 8;
                let dx = f32::from_le_bytes(word(i)) as f64;
                let dy = f32::from_le_bytes(word(i + 4)) as f64;
                if dx.is_finite() && dy.is_finite() && dx.abs() <= INVALID_THRESHOLD && dy.abs() <= INVALID_THRESHOLD {
                    flow.set(x, y, Some(Point2::new(x as f64 + dx, y as f64 + dy)));
                }
            }
        }
        Ok(flow)
    }

    pub fn write_flo(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(&self.to_flo_bytes())?;
        f.flush()?;
        Ok(())
    }

    pub fn read_flo(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_flo_bytes(&bytes)
    }

    /// Validity as an 8-bit single-channel mask (255 = valid).
    pub fn mask_image(&self) -> super::Image {
        super::Image::new(
            self.width,
            self.height,
            1,
            self.valid.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect(),
        )
        .expect("mask dimensions")
    }
}

/// Writes a single-channel little-endian PFM (32-bit float) image.
pub fn write_pfm(path: impl AsRef<Path>, width: usize, height: usize, values: &[f64]) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::mismatch(width * height, values.len()));
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "Pf\n{width} {height}\n-1.0\n")?;
    // PFM rows run bottom to top.
    for y in (0..height).rev() {
        for v in &values[y * width..(y + 1) * width] {
            f.write_all(&(*v as f32).to_le_bytes())?;
        }
    }
    f.flush()?;
    Ok(())
}
