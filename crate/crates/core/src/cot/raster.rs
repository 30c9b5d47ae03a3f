//! Indexed-color raster images with a fixed 16-entry palette, a few drawing
//! primitives, and 8-bit indexed PNG I/O.

use std::io::Cursor;

use serde::{Deserialize, Serialize};

use super::{CotError, Result};
use crate::envs::Task;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Paint {
    White = 0,
    LightGray,
    DarkSlate,
    Tan,
    DarkGray,
    Red,
    Blue,
    Green,
    Yellow,
    Purple,
    Cyan,
    Black,
    Gray,
    Orange,
    Magenta,
    DarkGreen,
}

pub const PALETTE: [(Paint, [u8; 3]); 16] = [
    (Paint::White, [255, 255, 255]),
    (Paint::LightGray, [200, 200, 200]),
    (Paint::DarkSlate, [47, 62, 78]),
    (Paint::Tan, [222, 196, 150]),
    (Paint::DarkGray, [90, 90, 90]),
    (Paint::Red, [220, 40, 40]),
    (Paint::Blue, [40, 90, 220]),
    (Paint::Green, [40, 170, 70]),
    (Paint::Yellow, [240, 210, 40]),
    (Paint::Purple, [140, 60, 180]),
    (Paint::Cyan, [40, 200, 210]),
    (Paint::Black, [0, 0, 0]),
    (Paint::Gray, [150, 150, 150]),
    (Paint::Orange, [245, 140, 30]),
    (Paint::Magenta, [230, 50, 180]),
    (Paint::DarkGreen, [20, 100, 40]),
];

impl Paint {
    pub fn from_index(i: u8) -> Option<Paint> {
        PALETTE.get(i as usize).map(|p| p.0)
    }
}

pub const MIN_RESOLUTION: u32 = 64;
pub const MAX_RESOLUTION: u32 = 1024;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageMeta {
    pub task: Task,
    /// Digest of the rendered symbolic state.
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    pub width: u32,
    pub height: u32,
    /// Row-major palette indices.
    pub pixels: Vec<u8>,
    pub meta: ImageMeta,
}

const META_KEY: &str = "visworld";

impl RasterImage {
    pub fn new(width: u32, height: u32, meta: ImageMeta) -> Result<Self> {
        for d in [width, height] {
            if !(MIN_RESOLUTION..=MAX_RESOLUTION).contains(&d) {
                return Err(CotError::Resolution(format!(
                    "{width}x{height} outside {MIN_RESOLUTION}..={MAX_RESOLUTION}"
                )));
            }
        }
        Ok(RasterImage {
            width,
            height,
            pixels: vec![Paint::White as u8; (width * height) as usize],
            meta,
        })
    }

    pub fn get(&self, x: i64, y: i64) -> Option<Paint> {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return None;
        }
        Paint::from_index(self.pixels[(y * self.width as i64 + x) as usize])
    }

    /// Like [`get`](Self::get) but out-of-range or unknown pixels are errors.
    pub fn at(&self, x: i64, y: i64) -> Result<Paint> {
        self.get(x, y)
            .ok_or_else(|| CotError::Decode(format!("pixel ({x}, {y}) is outside the image or off-palette")))
    }

    pub fn set(&mut self, x: i64, y: i64, p: Paint) {
        if x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64 {
            self.pixels[(y * self.width as i64 + x) as usize] = p as u8;
        }
    }

    /// Inclusive rectangle.
    pub fn fill_rect(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, p: Paint) {
        for y in y0..=y1 {
            for x in x0..=x1 {
                self.set(x, y, p);
            }
        }
    }

    pub fn hline(&mut self, x0: i64, x1: i64, y: i64, p: Paint) {
        self.fill_rect(x0, y, x1, y, p);
    }

    pub fn vline(&mut self, x: i64, y0: i64, y1: i64, p: Paint) {
        self.fill_rect(x, y0, x, y1, p);
    }

    pub fn line(&mut self, a: (i64, i64), b: (i64, i64), p: Paint) {
        for (x, y) in line_pixels(a, b) {
            self.set(x, y, p);
        }
    }

    pub fn disk(&mut self, cx: i64, cy: i64, r: i64, p: Paint) {
        for y in -r..=r {
            for x in -r..=r {
                if x * x + y * y <= r * r {
                    self.set(cx + x, cy + y, p);
                }
            }
        }
    }

    /// Paints the `true` cells of a square mask with its top-left at `(x0, y0)`.
    pub fn stamp(&mut self, x0: i64, y0: i64, mask: &Mask, p: Paint) {
        for v in 0..mask.size {
            for u in 0..mask.size {
                if mask.get(u, v) {
                    self.set(x0 + u as i64, y0 + v as i64, p);
                }
            }
        }
    }

    /// Pixels of color `p` inside the square at `(x0, y0)` as a mask.
    pub fn mask_of(&self, x0: i64, y0: i64, size: usize, p: Paint) -> Mask {
        let mut m = Mask::new(size);
        for v in 0..size {
            for u in 0..size {
                if self.get(x0 + u as i64, y0 + v as i64) == Some(p) {
                    m.set(u, v, true);
                }
            }
        }
        m
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width, self.height);
            enc.set_color(png::ColorType::Indexed);
            enc.set_depth(png::BitDepth::Eight);
            enc.set_compression(png::Compression::Balanced);
            let palette: Vec<u8> = PALETTE.iter().flat_map(|p| p.1).collect();
            enc.set_palette(palette);
            let meta = serde_json::to_string(&self.meta).map_err(|e| CotError::Png(e.to_string()))?;
            enc.add_text_chunk(META_KEY.to_string(), meta).map_err(|e| CotError::Png(e.to_string()))?;
            let mut w = enc.write_header().map_err(|e| CotError::Png(e.to_string()))?;
            w.write_image_data(&self.pixels).map_err(|e| CotError::Png(e.to_string()))?;
        }
        Ok(out)
    }

    pub fn from_png(bytes: &[u8]) -> Result<Self> {
        let mut dec = png::Decoder::new(Cursor::new(bytes));
        dec.set_transformations(png::Transformations::IDENTITY);
        let mut reader = dec.read_info().map_err(|e| CotError::Png(e.to_string()))?;
        let info = reader.info();
        if info.color_type != png::ColorType::Indexed || info.bit_depth != png::BitDepth::Eight {
            return Err(CotError::Decode("not an 8-bit indexed image".into()));
        }
        let palette: Vec<u8> = PALETTE.iter().flat_map(|p| p.1).collect();
        if info.palette.as_deref() != Some(palette.as_slice()) {
            return Err(CotError::Decode("unknown palette".into()));
        }
        let meta = info
            .uncompressed_latin1_text
            .iter()
            .find(|t| t.keyword == META_KEY)
            .ok_or_else(|| CotError::Decode("missing image metadata".into()))?;
        let meta: ImageMeta = serde_json::from_str(&meta.text).map_err(|e| CotError::Decode(e.to_string()))?;
        let (width, height) = (info.width, info.height);
        let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
        let frame = reader.next_frame(&mut buf).map_err(|e| CotError::Png(e.to_string()))?;
        buf.truncate(frame.buffer_size());
        if buf.iter().any(|&i| i as usize >= PALETTE.len()) {
            return Err(CotError::Decode("pixel outside the palette".into()));
        }
        Ok(RasterImage {
            width,
            height,
            pixels: buf,
            meta,
        })
    }
}

/// Bresenham segment from `a` to `b`, both ends included.
pub fn line_pixels((mut x0, mut y0): (i64, i64), (x1, y1): (i64, i64)) -> Vec<(i64, i64)> {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity(dx.max(-dy) as usize + 1);
    loop {
        out.push((x0, y0));
        if x0 == x1 && y0 == y1 {
            return out;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

/// Square boolean bitmap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub size: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(size: usize) -> Self {
        Mask {
            size,
            bits: vec![false; size * size],
        }
    }

    pub fn from_fn(size: usize, f: impl Fn(f64, f64) -> bool) -> Self {
        let mut m = Mask::new(size);
        for v in 0..size {
            for u in 0..size {
                // Pixel centers in [0, 1].
                let fu = (u as f64 + 0.5) / size as f64;
                let fv = (v as f64 + 0.5) / size as f64;
                m.set(u, v, f(fu, fv));
            }
        }
        m
    }

    pub fn get(&self, u: usize, v: usize) -> bool {
        self.bits[v * self.size + u]
    }

    pub fn set(&mut self, u: usize, v: usize, b: bool) {
        self.bits[v * self.size + u] = b;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> ImageMeta {
        ImageMeta {
            task: Task::Maze,
            digest: "00".into(),
        }
    }

    #[test]
    fn png_round_trip_is_exact() {
        let mut img = RasterImage::new(70, 64, meta()).unwrap();
        img.line((0, 0), (69, 63), Paint::Red);
        img.disk(30, 30, 5, Paint::DarkGreen);
        let bytes = img.to_png().unwrap();
        let back = RasterImage::from_png(&bytes).unwrap();
        assert_eq!(back, img);
        assert_eq!(bytes, back.to_png().unwrap());
    }

    #[test]
    fn resolution_limits() {
        assert!(RasterImage::new(63, 100, meta()).is_err());
        assert!(RasterImage::new(1025, 100, meta()).is_err());
    }
}
