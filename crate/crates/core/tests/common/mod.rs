//! Independent reference implementations used as test oracles. None of them
//! calls the solver it checks.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use visworld::envs::ball::BallScene;
use visworld::envs::cube::{CubeColor, CubePuzzle};
use visworld::envs::paperfold::{FoldAction, FoldDirection, FoldPuzzle, FoldQuery, HoleShape};
use visworld::envs::sokoban::SokobanState;

// ---------------------------------------------------------------- paper folding

/// Hole layout by unfolding in reverse: every hole in the folded extent is
/// mirrored back across each fold line, last fold first.
pub fn reverse_replay(p: &FoldPuzzle) -> BTreeMap<(usize, usize), Vec<HoleShape>> {
    // Forward pass over extents only: (top, left, rows, cols) in sheet cells.
    let mut extents = vec![(0usize, 0usize, p.grid_size, p.grid_size)];
    for f in &p.folds {
        let (t, l, r, c) = *extents.last().unwrap();
        let k = f.line;
        extents.push(match f.direction {
            FoldDirection::LeftOver => (t, l + k, r, c - k),
            FoldDirection::RightOver => (t, l, r, k),
            FoldDirection::TopOver => (t + k, l, r - k, c),
            FoldDirection::BottomOver => (t, l, k, c),
        });
    }
    let (t, l, _, _) = *extents.last().unwrap();
    let mut holes: Vec<((usize, usize), HoleShape)> =
        p.punches.iter().map(|h| ((t + h.cell.0, l + h.cell.1), h.shape)).collect();
    for (i, f) in p.folds.iter().enumerate().rev() {
        let before = extents[i];
        let mut next = holes.clone();
        for &((r, c), s) in &holes {
            if let Some(m) = mirror(*f, before, (r, c)) {
                next.push((m, s));
            }
        }
        holes = next;
    }
    let mut out: BTreeMap<(usize, usize), Vec<HoleShape>> = BTreeMap::new();
    for (cell, s) in holes {
        out.entry(cell).or_default().push(s);
    }
    for v in out.values_mut() {
        v.sort();
    }
    out
}

/// Mirror of sheet cell `(r, c)` across the fold line, if it lies on the
/// paper before the fold.
fn mirror(f: FoldAction, (t, l, rows, cols): (usize, usize, usize, usize), (r, c): (usize, usize)) -> Option<(usize, usize)> {
    let (line, horizontal) = match f.direction {
        FoldDirection::LeftOver | FoldDirection::RightOver => ((l + f.line) as i64, false),
        FoldDirection::TopOver | FoldDirection::BottomOver => ((t + f.line) as i64, true),
    };
    let (r2, c2) = if horizontal {
        (2 * line - 1 - r as i64, c as i64)
    } else {
        (r as i64, 2 * line - 1 - c as i64)
    };
    let inside = r2 >= t as i64 && r2 < (t + rows) as i64 && c2 >= l as i64 && c2 < (l + cols) as i64;
    inside.then_some((r2 as usize, c2 as usize))
}

pub fn fold_query_answer(layout: &BTreeMap<(usize, usize), Vec<HoleShape>>, q: FoldQuery) -> i64 {
    let count = |s: HoleShape| layout.values().flatten().filter(|&&x| x == s).count() as i64;
    match q {
        FoldQuery::Total => layout.values().map(|v| v.len() as i64).sum(),
        FoldQuery::CountShape { shape } => count(shape),
        FoldQuery::Diff { first, second } => count(first) - count(second),
    }
}

// ---------------------------------------------------------------- ball

pub struct FineStepOutcome {
    pub hole: usize,
    pub reflections: usize,
    pub exit_x: f64,
}

/// Marches the ball in steps of `h` pixels, folding any overshoot back into
/// the box, until it crosses the top edge inside a hole.
pub fn fine_step_ball(s: &BallScene, h: f64) -> Option<FineStepOutcome> {
    let (w, ht) = (s.width as f64, s.height as f64);
    let n = (s.direction.0 as f64).hypot(s.direction.1 as f64);
    let (mut dx, mut dy) = (s.direction.0 as f64 / n, s.direction.1 as f64 / n);
    let (mut x, mut y) = (s.start.0 as f64, s.start.1 as f64);
    let mut reflections = 0;
    let max_steps = (200.0 * (w + ht) / h) as usize;
    for _ in 0..max_steps {
        let (nx, ny) = (x + h * dx, y + h * dy);
        if ny < 0.0 {
            // Where the segment meets y = 0.
            let cx = x + (nx - x) * (y / (y - ny));
            if let Some(k) = s.holes.iter().position(|&(a, b)| (a as f64) < cx && cx < b as f64) {
                return Some(FineStepOutcome {
                    hole: k + 1,
                    reflections,
                    exit_x: cx,
                });
            }
        }
        let (mut nx, mut ny) = (nx, ny);
        if nx < 0.0 {
            nx = -nx;
            dx = -dx;
            reflections += 1;
        } else if nx > w {
            nx = 2.0 * w - nx;
            dx = -dx;
            reflections += 1;
        }
        if ny < 0.0 {
            ny = -ny;
            dy = -dy;
            reflections += 1;
        } else if ny > ht {
            ny = 2.0 * ht - ny;
            dy = -dy;
            reflections += 1;
        }
        x = nx;
        y = ny;
    }
    None
}

// ---------------------------------------------------------------- sokoban

/// Fewest moves that put the box on the target, by plain BFS over
/// (player, box) positions.
pub fn sokoban_bfs(s: &SokobanState) -> Option<usize> {
    let n = s.size as i64;
    let free = |(r, c): (i64, i64)| r >= 0 && c >= 0 && r < n && c < n && !s.walls[(r * n + c) as usize];
    let start = ((s.player.0 as i64, s.player.1 as i64), (s.box_cell.0 as i64, s.box_cell.1 as i64));
    let target = (s.target.0 as i64, s.target.1 as i64);
    if start.1 == target {
        return Some(0);
    }
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([(start, 0usize)]);
    while let Some(((p, b), d)) = queue.pop_front() {
        for (dr, dc) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
            let np = (p.0 + dr, p.1 + dc);
            if !free(np) {
                continue;
            }
            let nb = if np == b { (b.0 + dr, b.1 + dc) } else { b };
            if nb != b && !free(nb) {
                continue;
            }
            if nb == target {
                return Some(d + 1);
            }
            if seen.insert((np, nb)) {
                queue.push_back(((np, nb), d + 1));
            }
        }
    }
    None
}

// ---------------------------------------------------------------- cube

fn connected(n: usize, h: &[u8]) -> bool {
    let cells: Vec<usize> = (0..n * n).filter(|&i| h[i] > 0).collect();
    let Some(&first) = cells.first() else { return false };
    let mut seen = HashSet::from([first]);
    let mut stack = vec![first];
    while let Some(i) = stack.pop() {
        let (x, y) = ((i / n) as i64, (i % n) as i64);
        for (a, b) in [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)] {
            if a >= 0 && b >= 0 && (a as usize) < n && (b as usize) < n {
                let j = a as usize * n + b as usize;
                if h[j] > 0 && seen.insert(j) {
                    stack.push(j);
                }
            }
        }
    }
    seen.len() == cells.len()
}

type Voxel = (usize, usize, usize);

/// All possible counts of the asked color in the query view, over every
/// connected heightmap and every coloring consistent with the given views.
pub fn cube_brute_force(p: &CubePuzzle) -> BTreeSet<i64> {
    let n = p.stack.n;
    let views: Vec<(Vec<Vec<Voxel>>, Vec<u8>)> = p
        .given
        .iter()
        .map(|&v| {
            let m = p.stack.project(v);
            let rays = (0..m.rows)
                .flat_map(|r| (0..m.cols).map(move |c| (r, c)))
                .map(|(r, c)| v.ray(n, r, c))
                .collect();
            (rays, m.cells)
        })
        .collect();
    let (qr, qc) = p.query.dims(n);
    let query_rays: Vec<Vec<Voxel>> = (0..qr).flat_map(|r| (0..qc).map(move |c| p.query.ray(n, r, c))).collect();
    let want = p.color.code();
    let mut out = BTreeSet::new();
    let total = (n + 1).pow((n * n) as u32);
    let mut h = vec![0u8; n * n];
    for code in 0..total {
        let mut k = code;
        for x in h.iter_mut() {
            *x = (k % (n + 1)) as u8;
            k /= n + 1;
        }
        let filled = |(x, y, z): Voxel| (z as u8) < h[x * n + y];
        // Shapes first, then colors pinned by what each view shows.
        let mut pinned: BTreeMap<Voxel, u8> = BTreeMap::new();
        let mut ok = true;
        'views: for (rays, cells) in &views {
            for (ray, &seen) in rays.iter().zip(cells) {
                let hit = ray.iter().copied().find(|&v| filled(v));
                match (hit, seen) {
                    (None, 0) => {}
                    (Some(v), c) if c != 0 => {
                        if *pinned.entry(v).or_insert(c) != c {
                            ok = false;
                            break 'views;
                        }
                    }
                    _ => {
                        ok = false;
                        break 'views;
                    }
                }
            }
        }
        if !ok || !connected(n, &h) {
            continue;
        }
        let visible: Vec<Voxel> = query_rays.iter().filter_map(|r| r.iter().copied().find(|&v| filled(v))).collect();
        let fixed = visible.iter().filter(|v| pinned.get(v) == Some(&want)).count();
        let free: Vec<&Voxel> = visible.iter().filter(|v| !pinned.contains_key(v)).collect();
        for mask in 0u32..(1 << free.len()) {
            let extra = (0..free.len())
                .filter(|&i| {
                    let color = if mask >> i & 1 == 0 { CubeColor::Red } else { CubeColor::Blue };
                    color.code() == want
                })
                .count();
            out.insert((fixed + extra) as i64);
        }
    }
    out
}

/// Swaps red and blue in a view matrix.
pub fn swap_colors(rows: &[String]) -> Vec<String> {
    rows.iter()
        .map(|r| {
            r.chars()
                .map(|ch| match ch {
                    'R' => 'B',
                    'B' => 'R',
                    c => c,
                })
                .collect()
        })
        .collect()
}
