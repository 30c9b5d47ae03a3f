//! A point-mass ball in a rectangular box with numbered holes in the top
//! edge. Scene geometry is integral (pixels); the trajectory is traced
//! analytically from wall event to wall event.
//!
//! Coordinates: `x` to the right, `y` downwards, top edge at `y = 0`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Answer, EnvError, Result, REJECTION_BUDGET};

/// More wall events than this is treated as a runaway trajectory.
pub const MAX_REFLECTIONS: usize = 64;
/// Clearance, relative to `min(width, height)`, from hole edges and corners.
pub const GUARD_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wall {
    Top,
    Bottom,
    Left,
    Right,
}

impl Wall {
    pub fn name(self) -> &'static str {
        match self {
            Wall::Top => "top",
            Wall::Bottom => "bottom",
            Wall::Left => "left",
            Wall::Right => "right",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallScene {
    pub width: u32,
    pub height: u32,
    /// Open intervals `(a, b)` on the top edge, left to right; hole `k` is
    /// labeled `k + 1`.
    pub holes: Vec<(u32, u32)>,
    pub start: (u32, u32),
    /// Reduced integer direction (the green arrow).
    pub direction: (i32, i32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallEvent {
    pub point: (f64, f64),
    pub wall: Wall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Reflections, in order.
    pub reflections: Vec<WallEvent>,
    /// Where the ball crosses the top edge into the hole.
    pub exit: (f64, f64),
    /// 1-based hole label.
    pub hole: usize,
}

impl Trajectory {
    /// Polyline from the start through every reflection to the exit.
    pub fn polyline(&self, start: (f64, f64)) -> Vec<(f64, f64)> {
        let mut pts = vec![start];
        pts.extend(self.reflections.iter().map(|e| e.point));
        pts.push(self.exit);
        pts
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl BallScene {
    pub fn guard(&self) -> f64 {
        GUARD_FRACTION * self.width.min(self.height) as f64
    }

    pub fn unit_direction(&self) -> (f64, f64) {
        let (dx, dy) = (self.direction.0 as f64, self.direction.1 as f64);
        let n = dx.hypot(dy);
        (dx / n, dy / n)
    }

    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.width, self.height);
        if w < 16 || h < 16 {
            return Err(EnvError::Domain(format!("box {w}x{h} too small")));
        }
        if !(1..=9).contains(&self.holes.len()) {
            return Err(EnvError::Domain(format!("{} holes", self.holes.len())));
        }
        let mut prev = 0;
        for &(a, b) in &self.holes {
            // Holes keep at least one wall pixel on either side.
            if a <= prev || b <= a || b >= w {
                return Err(EnvError::Domain(format!("hole ({a}, {b}) overlaps or leaves the top edge")));
            }
            prev = b + 1;
        }
        let (sx, sy) = self.start;
        if sx == 0 || sy == 0 || sx >= w || sy >= h {
            return Err(EnvError::Domain(format!("start {:?} is not strictly inside", self.start)));
        }
        let (dx, dy) = self.direction;
        if (dx, dy) == (0, 0) || gcd(dx as i64, dy as i64) != 1 {
            return Err(EnvError::Domain(format!("direction {:?} is not a reduced nonzero vector", self.direction)));
        }
        Ok(())
    }

    /// Traces the ball until it leaves through a hole.
    pub fn simulate(&self) -> Result<Trajectory> {
        self.validate()?;
        let (w, h) = (self.width as f64, self.height as f64);
        let guard = self.guard();
        let (mut x, mut y) = (self.start.0 as f64, self.start.1 as f64);
        let (mut dx, mut dy) = self.unit_direction();
        let mut reflections = Vec::new();
        loop {
            let tx = if dx > 0.0 {
                (w - x) / dx
            } else if dx < 0.0 {
                -x / dx
            } else {
                f64::INFINITY
            };
            let ty = if dy > 0.0 {
                (h - y) / dy
            } else if dy < 0.0 {
                -y / dy
            } else {
                f64::INFINITY
            };
            let t = tx.min(ty);
            let (qx, qy) = if tx <= ty {
                (if dx > 0.0 { w } else { 0.0 }, y + t * dy)
            } else {
                (x + t * dx, if dy > 0.0 { h } else { 0.0 })
            };
            let near_corner = [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)]
                .iter()
                .any(|&(cx, cy)| (qx - cx).abs() < guard && (qy - cy).abs() < guard)
                || (tx - ty).abs() < guard;
            if near_corner {
                return Err(EnvError::Degenerate(format!("corner hit near ({qx:.3}, {qy:.3})")));
            }
            let wall = if tx < ty {
                if dx > 0.0 { Wall::Right } else { Wall::Left }
            } else if dy > 0.0 {
                Wall::Bottom
            } else {
                Wall::Top
            };
            if wall == Wall::Top {
                for (k, &(a, b)) in self.holes.iter().enumerate() {
                    let (a, b) = (a as f64, b as f64);
                    if (qx - a).abs() < guard || (qx - b).abs() < guard {
                        return Err(EnvError::Degenerate(format!("grazes the edge of hole {}", k + 1)));
                    }
                    if a < qx && qx < b {
                        return Ok(Trajectory {
                            reflections,
                            exit: (qx, qy),
                            hole: k + 1,
                        });
                    }
                }
            }
            if reflections.len() == MAX_REFLECTIONS {
                return Err(EnvError::Runaway(format!("more than {MAX_REFLECTIONS} reflections")));
            }
            reflections.push(WallEvent {
                point: (qx, qy),
                wall,
            });
            match wall {
                Wall::Left | Wall::Right => dx = -dx,
                Wall::Top | Wall::Bottom => dy = -dy,
            }
            (x, y) = (qx, qy);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallPuzzle {
    pub scene: BallScene,
    pub trajectory: Trajectory,
}

impl BallPuzzle {
    pub fn answer(&self) -> Result<Answer> {
        Ok(Answer::Integer(self.scene.simulate()?.hole as i64))
    }

    pub fn question(&self) -> String {
        format!(
            "A red ball starts at the red dot and moves at constant speed in the direction of the green arrow. \
             It reflects elastically off the solid walls of the box. The top wall has {} holes numbered 1 to {} from left to right. \
             Which hole does the ball enter first?",
            self.scene.holes.len(),
            self.scene.holes.len()
        )
    }
}

/// Shortest drawable trail segment, in pixels.
pub const MIN_SEGMENT: f64 = 8.0;
/// The first segment also has to clear the arrow (at most 24 px) and its tip.
pub const MIN_FIRST_SEGMENT: f64 = 32.0;
/// Parallel segments closer than this (with overlapping extent) would share
/// pixels once rasterized.
pub const MIN_PARALLEL_GAP: f64 = 3.0;

/// Whether every prefix of the trail is visibly different from the next one
/// once drawn: no near-corner stubs, and no segment retracing (or running
/// alongside) an earlier one.
pub fn legible(scene: &BallScene, t: &Trajectory) -> bool {
    let pts = t.polyline((scene.start.0 as f64, scene.start.1 as f64));
    let segs: Vec<((f64, f64), (f64, f64))> = pts.windows(2).map(|w| (w[0], w[1])).collect();
    for (i, &(a, b)) in segs.iter().enumerate() {
        let len = (b.0 - a.0).hypot(b.1 - a.1);
        if len < if i == 0 { MIN_FIRST_SEGMENT } else { MIN_SEGMENT } {
            return false;
        }
        let u = ((b.0 - a.0) / len, (b.1 - a.1) / len);
        for &(c, d) in &segs[..i] {
            let lv = (d.0 - c.0).hypot(d.1 - c.1);
            let v = ((d.0 - c.0) / lv, (d.1 - c.1) / lv);
            if (u.0 * v.1 - u.1 * v.0).abs() > 1e-9 {
                continue;
            }
            let gap = ((c.0 - a.0) * u.1 - (c.1 - a.1) * u.0).abs();
            let proj = |p: (f64, f64)| (p.0 - a.0) * u.0 + (p.1 - a.1) * u.1;
            let (lo, hi) = (proj(c).min(proj(d)), proj(c).max(proj(d)));
            if gap < MIN_PARALLEL_GAP && hi > -MIN_PARALLEL_GAP && lo < len + MIN_PARALLEL_GAP {
                return false;
            }
        }
    }
    true
}

/// Random scene with `holes` holes whose trajectory reflects at least once.
pub fn random_scene<R: Rng>(rng: &mut R, holes: usize) -> BallScene {
    let width = rng.gen_range(256..=960u32);
    let height = rng.gen_range(256..=960u32);
    let slot = width / holes as u32;
    let layout = (0..holes as u32)
        .map(|k| {
            let lo = k * slot + 6;
            let hi = (k + 1) * slot - 6;
            let len = rng.gen_range(16..=(hi - lo).clamp(16, 48));
            let a = rng.gen_range(lo..=hi - len);
            (a, a + len)
        })
        .collect();
    let start = (rng.gen_range(40..=width - 40), rng.gen_range(40..=height - 40));
    let direction = loop {
        let dx = rng.gen_range(-12..=12i32);
        let dy = rng.gen_range(-12..=12i32);
        if dx * dx + dy * dy >= 64 && gcd(dx as i64, dy as i64) == 1 {
            break (dx, dy);
        }
    };
    BallScene {
        width,
        height,
        holes: layout,
        start,
        direction,
    }
}

pub fn generate<R: Rng>(rng: &mut R, holes: usize) -> Result<BallPuzzle> {
    if !(4..=8).contains(&holes) {
        return Err(EnvError::Domain(format!("hole count {holes} outside 4..=8")));
    }
    let mut last = String::new();
    for _ in 0..REJECTION_BUDGET {
        let scene = random_scene(rng, holes);
        match scene.simulate() {
            Ok(t) if !t.reflections.is_empty() && legible(&scene, &t) => {
                return Ok(BallPuzzle { scene, trajectory: t });
            }
            Ok(t) if t.reflections.is_empty() => last = "no reflection".into(),
            Ok(_) => last = "trail segments would overlap when drawn".into(),
            Err(e) => last = e.to_string(),
        }
    }
    Err(EnvError::Degenerate(format!("rejection budget exhausted; last: {last}")))
}
