//! Glyph masks and a tiny digit font.
//!
//! Masks are sampled at pixel centers, so a glyph of a given size is always
//! the same bitmap; decoders compare pixels against the re-rendered mask.

use super::raster::Mask;
use crate::envs::manip::Shape;
use crate::envs::paperfold::HoleShape;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Glyph {
    Square,
    Circle,
    Diamond,
    Triangle,
    Star,
    /// Upright rounded bar.
    Capsule,
}

impl Glyph {
    pub const ALL: [Glyph; 6] = [
        Glyph::Square,
        Glyph::Circle,
        Glyph::Diamond,
        Glyph::Triangle,
        Glyph::Star,
        Glyph::Capsule,
    ];

    pub fn mask(self, size: usize) -> Mask {
        match self {
            Glyph::Square => Mask::from_fn(size, |_, _| true),
            Glyph::Circle => Mask::from_fn(size, |u, v| (u - 0.5).powi(2) + (v - 0.5).powi(2) <= 0.25),
            Glyph::Diamond => Mask::from_fn(size, |u, v| (u - 0.5).abs() + (v - 0.5).abs() <= 0.5),
            Glyph::Triangle => Mask::from_fn(size, |u, v| 2.0 * (u - 0.5).abs() <= v),
            Glyph::Star => {
                let poly = star_polygon();
                Mask::from_fn(size, move |u, v| inside(&poly, u, v))
            }
            Glyph::Capsule => Mask::from_fn(size, |u, v| {
                let dx = (u - 0.5).abs();
                let cy = v.clamp(0.3, 0.7);
                dx <= 0.3 && dx * dx + (v - cy).powi(2) <= 0.09
            }),
        }
    }
}

impl From<HoleShape> for Glyph {
    fn from(s: HoleShape) -> Self {
        match s {
            HoleShape::Circle => Glyph::Circle,
            HoleShape::Triangle => Glyph::Triangle,
            HoleShape::Star => Glyph::Star,
            HoleShape::Diamond => Glyph::Diamond,
            HoleShape::Square => Glyph::Square,
        }
    }
}

impl From<Shape> for Glyph {
    fn from(s: Shape) -> Self {
        match s {
            Shape::Cube => Glyph::Square,
            Shape::Sphere => Glyph::Circle,
            Shape::Cylinder => Glyph::Capsule,
        }
    }
}

/// Offset and side of the glyph box inside a cell of side `cs`.
pub fn glyph_box(cs: i64) -> (i64, usize) {
    let g = (cs / 5).max(3);
    (g, (cs - 2 * g + 1) as usize)
}

fn star_polygon() -> Vec<(f64, f64)> {
    (0..10)
        .map(|i| {
            let r = if i % 2 == 0 { 0.5 } else { 0.2 };
            let a = std::f64::consts::PI * (i as f64 / 5.0 - 0.5);
            (0.5 + r * a.cos(), 0.55 + r * a.sin())
        })
        .collect()
}

/// Even-odd point-in-polygon.
fn inside(poly: &[(f64, f64)], x: f64, y: f64) -> bool {
    let mut c = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            c = !c;
        }
        j = i;
    }
    c
}

const DIGITS: [[u8; 5]; 10] = [
    [0b111, 0b101, 0b101, 0b101, 0b111],
    [0b010, 0b110, 0b010, 0b010, 0b111],
    [0b111, 0b001, 0b111, 0b100, 0b111],
    [0b111, 0b001, 0b111, 0b001, 0b111],
    [0b101, 0b101, 0b111, 0b001, 0b001],
    [0b111, 0b100, 0b111, 0b001, 0b111],
    [0b111, 0b100, 0b111, 0b101, 0b111],
    [0b111, 0b001, 0b001, 0b001, 0b001],
    [0b111, 0b101, 0b111, 0b101, 0b111],
    [0b111, 0b101, 0b111, 0b001, 0b111],
];

/// Lit pixels of digit `d` in a 3x5 font scaled by `scale`, relative to the
/// top-left corner.
pub fn digit_pixels(d: u8, scale: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for (row, bits) in DIGITS[d as usize % 10].iter().enumerate() {
        for col in 0..3 {
            if bits & (0b100 >> col) != 0 {
                for dy in 0..scale {
                    for dx in 0..scale {
                        out.push((col * scale + dx, row as i64 * scale + dy));
                    }
                }
            }
        }
    }
    out
}
