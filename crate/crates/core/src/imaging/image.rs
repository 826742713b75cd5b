use std::path::Path;

use crate::error::{Error, Result};

/// Row-major interleaved image with `f64` intensities, nominally in `[0, 1]`.
///
/// Values outside `[0, 1]` are allowed in computation; they are clamped
/// only when quantized to 8 bits.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidInput(format!(
                "images have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::mismatch(width * height * channels, data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite pixel value".into()));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self::new(width, height, channels, vec![value; width * height * channels])
            .expect("valid fill")
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    /// Rec. 601 luma for 3-channel images; a copy for grayscale.
    pub fn to_gray(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect();
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    pub fn to_rgb(&self) -> Image {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        Image {
            width: self.width,
            height: self.height,
            channels: 3,
            data,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Bilinear resize mapping corner pixel centers onto corner pixel centers.
    pub fn resize(&self, width: usize, height: usize) -> Image {
        if (width, height) == self.size() {
            return self.clone();
        }
        let sx = if width > 1 {
            (self.width as f64 - 1.0) / (width as f64 - 1.0)
        } else {
            0.0
        };
        let sy = if height > 1 {
            (self.height as f64 - 1.0) / (height as f64 - 1.0)
        } else {
            0.0
        };
        // Box-prefilter when shrinking so the result does not alias.
        let src = if sx > 1.5 || sy > 1.5 {
            self.box_blur((sx / 2.0).floor() as usize, (sy / 2.0).floor() as usize)
        } else {
            self.clone()
        };
        let mut out = Image::filled(width, height, self.channels, 0.0);
        for y in 0..height {
            for x in 0..width {
                let p = crate::geometry::Point2::new(x as f64 * sx, y as f64 * sy);
                let v = super::bilinear_sample(&src, p).expect("resize samples inside");
                out.pixel_mut(x, y).copy_from_slice(&v[..self.channels]);
            }
        }
        out
    }

    fn box_blur(&self, rx: usize, ry: usize) -> Image {
        let (w, h, ch) = (self.width, self.height, self.channels);
        let mut tmp = self.clone();
        for y in 0..h {
            for x in 0..w {
                let (x0, x1) = (x.saturating_sub(rx), (x + rx).min(w - 1));
                for c in 0..ch {
                    let s: f64 = (x0..=x1).map(|xx| self.get(xx, y, c)).sum();
                    tmp.set(x, y, c, s / (x1 - x0 + 1) as f64);
                }
            }
        }
        let mut out = tmp.clone();
        for y in 0..h {
            let (y0, y1) = (y.saturating_sub(ry), (y + ry).min(h - 1));
            for x in 0..w {
                for c in 0..ch {
                    let s: f64 = (y0..=y1).map(|yy| tmp.get(x, yy, c)).sum();
                    out.set(x, y, c, s / (y1 - y0 + 1) as f64);
                }
            }
        }
        out
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn from_u8(width: usize, height: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(
            width,
            height,
            channels,
            bytes.iter().map(|&b| b as f64 / 255.0).collect(),
        )
    }

    /// Rounds every value through 8-bit storage.
    pub fn quantized(&self) -> Image {
        self.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0)
    }

    /// Loads an 8-bit PNG (or any format the decoder knows). Gray and
    /// gray+alpha load as 1 channel; everything else as RGB.
    pub fn load(path: impl AsRef<Path>) -> Result<Image> {
        let img = image::open(path.as_ref())?;
        match img.color() {
            image::ColorType::L8 | image::ColorType::La8 | image::ColorType::L16 | image::ColorType::La16 => {
                let g = img.to_luma8();
                Image::from_u8(g.width() as usize, g.height() as usize, 1, g.as_raw())
            }
            _ => {
                let rgb = img.to_rgb8();
                Image::from_u8(rgb.width() as usize, rgb.height() as usize, 3, rgb.as_raw())
            }
        }
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let color = if self.channels == 1 {
            image::ExtendedColorType::L8
        } else {
            image::ExtendedColorType::Rgb8
        };
        image::save_buffer_with_format(
            path.as_ref(),
            &self.to_u8(),
            self.width as u32,
            self.height as u32,
            color,
            image::ImageFormat::Png,
        )?;
        Ok(())
    }
}
