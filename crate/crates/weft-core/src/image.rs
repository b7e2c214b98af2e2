//! Linear radiance images and their two on-disk forms: PFM for lossless HDR
//! and gamma-encoded 8-bit PNG for inspection.

use crate::{Result, WeftError};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Row-major RGB radiance image, row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct RadianceImage {
    pub width: usize,
    pub height: usize,
    /// `pixels[y * width + x]` = linear RGB.
    pub pixels: Vec<[f32; 3]>,
}

impl RadianceImage {
    pub fn new(width: usize, height: usize) -> RadianceImage {
        RadianceImage { width, height, pixels: vec![[0.0; 3]; width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, px: [f32; 3]) {
        self.pixels[y * self.width + x] = px;
    }

    /// Box-filter down to `target × target`; source dimensions must be
    /// square multiples of the target.
    pub fn downsample(&self, target: usize) -> Result<RadianceImage> {
        if self.width != self.height || target == 0 || self.width % target != 0 {
            return Err(WeftError::ImageFormat(format!(
                "cannot box-downsample {}x{} to {target}x{target}",
                self.width, self.height
            )));
        }
        let k = self.width / target;
        let norm = 1.0 / (k * k) as f64;
        let mut out = RadianceImage::new(target, target);
        for ty in 0..target {
            for tx in 0..target {
                let mut acc = [0.0f64; 3];
                for dy in 0..k {
                    for dx in 0..k {
                        let p = self.get(tx * k + dx, ty * k + dy);
                        for c in 0..3 {
                            acc[c] += p[c] as f64;
                        }
                    }
                }
                out.set(tx, ty, [
                    (acc[0] * norm) as f32,
                    (acc[1] * norm) as f32,
                    (acc[2] * norm) as f32,
                ]);
            }
        }
        Ok(out)
    }

    pub fn transposed(&self) -> RadianceImage {
        let mut out = RadianceImage::new(self.height, self.width);
        for y in 0..self.height {
            for x in 0..self.width {
                out.set(y, x, self.get(x, y));
            }
        }
        out
    }
}

/// Write little-endian PFM (scale −1.0, scanlines bottom-to-top).
pub fn write_pfm(img: &RadianceImage, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    write!(w, "PF\n{} {}\n-1.0\n", img.width, img.height)?;
    for y in (0..img.height).rev() {
        for x in 0..img.width {
            for c in img.get(x, y) {
                w.write_all(&c.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a color PFM written by `write_pfm` (any negative scale accepted; the
/// stored values are returned as-is).
pub fn read_pfm(path: &Path) -> Result<RadianceImage> {
    let file = std::fs::File::open(path)?;
    let mut r = BufReader::new(file);
    let mut header = String::new();
    for _ in 0..3 {
        let mut line = String::new();
        r.read_line(&mut line)?;
        header.push_str(&line);
    }
    let mut tokens = header.split_ascii_whitespace();
    let magic = tokens.next().unwrap_or_default();
    if magic != "PF" {
        return Err(WeftError::ImageFormat(format!("not a color PFM (magic {magic:?})")));
    }
    let parse = |t: Option<&str>, what: &str| -> Result<f64> {
        t.and_then(|s| s.parse().ok())
            .ok_or_else(|| WeftError::ImageFormat(format!("bad {what} in PFM header")))
    };
    let width = parse(tokens.next(), "width")? as usize;
    let height = parse(tokens.next(), "height")? as usize;
    let scale = parse(tokens.next(), "scale")?;
    if scale >= 0.0 {
        return Err(WeftError::ImageFormat("big-endian PFM not supported".into()));
    }
    let mut data = vec![0u8; width * height * 12];
    r.read_exact(&mut data)?;
    let mut img = RadianceImage::new(width, height);
    let mut off = 0;
    for y in (0..height).rev() {
        for x in 0..width {
            let mut px = [0.0f32; 3];
            for c in &mut px {
                *c = f32::from_le_bytes(data[off..off + 4].try_into().unwrap());
                off += 4;
            }
            img.set(x, y, px);
        }
    }
    Ok(img)
}

/// Gamma-encode one linear value to the 8-bit PNG domain (γ = 1/2.2).
pub fn encode_srgbish(linear: f32) -> u8 {
    let c = linear.clamp(0.0, 1.0) as f64;
    (255.0 * c.powf(1.0 / 2.2)).round() as u8
}

/// Write the tone-mapped 8-bit preview.
pub fn write_png(img: &RadianceImage, path: &Path) -> Result<()> {
    let mut out = ::image::RgbImage::new(img.width as u32, img.height as u32);
    for y in 0..img.height {
        for x in 0..img.width {
            let p = img.get(x, y);
            out.put_pixel(
                x as u32,
                y as u32,
                ::image::Rgb([encode_srgbish(p[0]), encode_srgbish(p[1]), encode_srgbish(p[2])]),
            );
        }
    }
    out.save(path).map_err(|e| WeftError::ImageFormat(e.to_string()))
}
