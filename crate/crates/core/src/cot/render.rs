//! Rendering of symbolic states to palette images, and exact decoding back.
//!
//! Every grid-like state is drawn on a square canvas: cell side
//! `cs = (res - 1) / max(rows, cols)`, 1-pixel grid lines at multiples of
//! `cs`, and all cell content inset by at least two pixels. The decoder finds
//! the grid from row 0 / column 0 (the outer border) and the line count in
//! row 1 / column 1, then reads each cell at fixed sample points. The ball
//! scene is drawn at its native size instead.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::glyph::{digit_pixels, glyph_box, Glyph};
use super::raster::{line_pixels, ImageMeta, Paint, RasterImage};
use super::{CotError, Result};
use crate::envs::ball::BallScene;
use crate::envs::cube::{CubeColor, ViewMatrix};
use crate::envs::manip::{self, ManipScene, Object, Shape};
use crate::envs::maze::{Maze, Move};
use crate::envs::paperfold::{Extent, HoleShape, SheetView};
use crate::envs::sokoban::SokobanState;
use crate::envs::Task;

pub type Cell = (usize, usize);

/// A maze drawing: markers are optional so that bare layouts can be shown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MazeView {
    pub maze: Maze,
    pub start: Option<Cell>,
    pub goal: Option<Cell>,
    /// Path drawn so far, beginning at the start.
    pub path: Vec<Cell>,
}

/// A ball scene with the first `segments` pieces of its trajectory traced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallView {
    pub scene: BallScene,
    pub segments: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "state", rename_all = "snake_case")]
pub enum StateView {
    Sheet(SheetView),
    Scene(ManipScene),
    Ball(BallView),
    Maze(MazeView),
    Sokoban(SokobanState),
    Cube(ViewMatrix),
}

impl StateView {
    pub fn task(&self) -> Task {
        match self {
            StateView::Sheet(_) => Task::PaperFolding,
            StateView::Scene(_) => Task::MultihopManipulation,
            StateView::Ball(_) => Task::BallTracking,
            StateView::Maze(_) => Task::Maze,
            StateView::Sokoban(_) => Task::Sokoban,
            StateView::Cube(_) => Task::Cube3View,
        }
    }

    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("state serializes");
        hex::encode(&Sha256::digest(&json)[..8])
    }

    /// Canonical text matrix of the state, one string per row.
    pub fn to_matrix(&self) -> Vec<String> {
        match self {
            StateView::Sheet(s) => {
                let mut rows = s.coverage_matrix();
                rows.push("--".into());
                rows.extend(s.shape_matrix());
                rows
            }
            StateView::Scene(s) => scene_matrix(s),
            StateView::Ball(b) => {
                let s = &b.scene;
                let holes: Vec<String> = s.holes.iter().map(|(a, b)| format!("{a}-{b}")).collect();
                vec![
                    format!("box {} {}", s.width, s.height),
                    format!("holes {}", holes.join(" ")),
                    format!("start {} {}", s.start.0, s.start.1),
                    format!("direction {} {}", s.direction.0, s.direction.1),
                    format!("trail {}", b.segments),
                ]
            }
            StateView::Maze(m) => maze_matrix(m),
            StateView::Sokoban(s) => s.to_matrix(),
            StateView::Cube(v) => v.to_matrix(),
        }
    }
}

fn scene_matrix(s: &ManipScene) -> Vec<String> {
    (0..manip::LATTICE)
        .rev()
        .map(|z| {
            (0..manip::LATTICE)
                .map(|x| match s.objects.iter().find(|o| o.pos == (x, z)) {
                    Some(o) => format!("{}_{}", o.color.name(), o.shape.name()),
                    None => ".".into(),
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

/// `(2n+1)`-square character grid: `#` wall, `S`/`G` markers, `*` path.
fn maze_matrix(m: &MazeView) -> Vec<String> {
    let n = m.maze.size;
    let on_path: HashSet<Cell> = m.path.iter().copied().collect();
    let path_edges: HashSet<(Cell, Cell)> = m.path.windows(2).flat_map(|w| [(w[0], w[1]), (w[1], w[0])]).collect();
    let mut g = vec![vec!['#'; 2 * n + 1]; 2 * n + 1];
    for r in 0..n {
        for c in 0..n {
            g[2 * r + 1][2 * c + 1] = if Some((r, c)) == m.start {
                'S'
            } else if Some((r, c)) == m.goal {
                'G'
            } else if on_path.contains(&(r, c)) {
                '*'
            } else {
                '.'
            };
            for (dr, dc, other) in [(0, 1, (r, c + 1)), (1, 0, (r + 1, c))] {
                if other.0 < n && other.1 < n && !m.maze.wall_between((r, c), other) {
                    g[2 * r + 1 + dr][2 * c + 1 + dc] = if path_edges.contains(&((r, c), other)) { '*' } else { '.' };
                }
            }
        }
    }
    g.into_iter().map(|row| row.into_iter().collect()).collect()
}

/// Smallest cell side each grid renderer accepts.
pub fn min_cell(task: Task) -> i64 {
    match task {
        Task::Sokoban => 16,
        Task::Cube3View => 8,
        _ => 12,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Grid {
    rows: usize,
    cols: usize,
    cs: i64,
}

impl Grid {
    fn layout(rows: usize, cols: usize, res: u32, task: Task) -> Result<Grid> {
        let cs = (res as i64 - 1) / rows.max(cols) as i64;
        if cs < min_cell(task) {
            return Err(CotError::Resolution(format!(
                "{res} px gives {cs} px cells for a {rows}x{cols} grid; {task} needs at least {}",
                min_cell(task)
            )));
        }
        Ok(Grid { rows, cols, cs })
    }

    fn origin(&self, r: usize, c: usize) -> (i64, i64) {
        (c as i64 * self.cs, r as i64 * self.cs)
    }

    fn center(&self, r: usize, c: usize) -> (i64, i64) {
        let (x, y) = self.origin(r, c);
        (x + self.cs / 2, y + self.cs / 2)
    }

    fn draw(&self, img: &mut RasterImage, p: Paint) {
        let (w, h) = (self.cols as i64 * self.cs, self.rows as i64 * self.cs);
        for j in 0..=self.cols as i64 {
            img.vline(j * self.cs, 0, h, p);
        }
        for i in 0..=self.rows as i64 {
            img.hline(0, w, i * self.cs, p);
        }
    }

    /// Fill a cell inset by `k` pixels.
    fn fill(&self, img: &mut RasterImage, r: usize, c: usize, k: i64, p: Paint) {
        let (x, y) = self.origin(r, c);
        img.fill_rect(x + k, y + k, x + self.cs - k, y + self.cs - k, p);
    }

    fn detect(img: &RasterImage) -> Result<Grid> {
        let bad = |why: &str| CotError::Decode(format!("grid not found: {why}"));
        if img.width != img.height {
            return Err(bad("canvas is not square"));
        }
        let ink = |x: i64, y: i64| img.get(x, y).is_some_and(|p| p != Paint::White);
        let run = |horizontal: bool| (0..img.width as i64).take_while(|&i| if horizontal { ink(i, 0) } else { ink(0, i) }).count() as i64;
        let (lx, ly) = (run(true), run(false));
        if lx < 2 || ly < 2 {
            return Err(bad("no outer border"));
        }
        let count_runs = |horizontal: bool, len: i64| {
            let mut runs = 0;
            let mut prev = false;
            for i in 0..len {
                let cur = if horizontal { ink(i, 1) } else { ink(1, i) };
                if cur && !prev {
                    runs += 1;
                }
                prev = cur;
            }
            runs
        };
        let cols = count_runs(true, lx) - 1;
        let rows = count_runs(false, ly) - 1;
        if cols < 1 || rows < 1 || (lx - 1) % cols != 0 {
            return Err(bad("inconsistent line count"));
        }
        let cs = (lx - 1) / cols;
        if rows * cs + 1 != ly || cs != (img.width as i64 - 1) / rows.max(cols) {
            return Err(bad("inconsistent cell size"));
        }
        Ok(Grid {
            rows: rows as usize,
            cols: cols as usize,
            cs,
        })
    }
}

fn canvas(state: &StateView, w: u32, h: u32) -> Result<RasterImage> {
    RasterImage::new(
        w,
        h,
        ImageMeta {
            task: state.task(),
            digest: state.digest(),
        },
    )
}

/// Renders `state` on a `resolution`-pixel square canvas. Ball scenes ignore
/// `resolution` and use their native size.
pub fn render(state: &StateView, resolution: u32) -> Result<RasterImage> {
    match state {
        StateView::Sheet(s) => render_sheet(state, s, resolution),
        StateView::Scene(s) => render_scene(state, s, resolution),
        StateView::Ball(b) => render_ball(state, b),
        StateView::Maze(m) => render_maze(state, m, resolution),
        StateView::Sokoban(s) => render_sokoban(state, s, resolution),
        StateView::Cube(v) => render_cube(state, v, resolution),
    }
}

/// Inverse of [`render`], dispatched on the task stored in the image.
pub fn decode(img: &RasterImage) -> Result<StateView> {
    match img.meta.task {
        Task::PaperFolding => decode_sheet(img).map(StateView::Sheet),
        Task::MultihopManipulation => decode_scene(img).map(StateView::Scene),
        Task::BallTracking => decode_ball(img).map(StateView::Ball),
        Task::Maze => decode_maze(img).map(StateView::Maze),
        Task::Sokoban => decode_sokoban(img).map(StateView::Sokoban),
        Task::Cube3View => decode_cube(img).map(StateView::Cube),
    }
}

/// Exact match of the `p`-colored pixels in a glyph box against `candidates`.
fn classify<T: Copy + Into<Glyph>>(img: &RasterImage, g: &Grid, r: usize, c: usize, p: Paint, candidates: &[T]) -> Result<Option<T>> {
    let (x, y) = g.origin(r, c);
    let (off, size) = glyph_box(g.cs);
    let found = img.mask_of(x + off, y + off, size, p);
    if found.count() == 0 {
        return Ok(None);
    }
    let hits: Vec<T> = candidates.iter().copied().filter(|&t| t.into().mask(size) == found).collect();
    match hits.as_slice() {
        [one] => Ok(Some(*one)),
        _ => Err(CotError::Decode(format!("unrecognized glyph in cell ({r}, {c})"))),
    }
}

fn stamp_glyph(img: &mut RasterImage, g: &Grid, r: usize, c: usize, glyph: Glyph, p: Paint) {
    let (x, y) = g.origin(r, c);
    let (off, size) = glyph_box(g.cs);
    img.stamp(x + off, y + off, &glyph.mask(size), p);
}

// ---- paper folding ----

fn render_sheet(state: &StateView, s: &SheetView, res: u32) -> Result<RasterImage> {
    let n = s.grid_size;
    if let Some((cell, _)) = s.holes.iter().find(|(&(r, c), _)| !s.extent.contains(r, c)) {
        return Err(CotError::Render(format!("hole at {cell:?} is off the paper")));
    }
    let g = Grid::layout(n, n, res, Task::PaperFolding)?;
    let mut img = canvas(state, res, res)?;
    for r in 0..n {
        for c in 0..n {
            if s.extent.contains(r, c) {
                g.fill(&mut img, r, c, 2, Paint::Tan);
            }
        }
    }
    for (&(r, c), &shape) in &s.holes {
        stamp_glyph(&mut img, &g, r, c, shape.into(), Paint::Black);
    }
    g.draw(&mut img, Paint::LightGray);
    Ok(img)
}

fn decode_sheet(img: &RasterImage) -> Result<SheetView> {
    let g = Grid::detect(img)?;
    if g.rows != g.cols {
        return Err(CotError::Decode("sheet grid is not square".into()));
    }
    let mut covered = BTreeSet::new();
    let mut holes = BTreeMap::new();
    for r in 0..g.rows {
        for c in 0..g.cols {
            let (x, y) = g.origin(r, c);
            match img.at(x + 2, y + 2)? {
                Paint::Tan => {
                    covered.insert((r, c));
                }
                Paint::White => {}
                p => return Err(CotError::Decode(format!("unexpected {p:?} in sheet cell ({r}, {c})"))),
            }
            if let Some(shape) = classify(img, &g, r, c, Paint::Black, &HoleShape::ALL)? {
                holes.insert((r, c), shape);
            }
        }
    }
    let (Some(top), Some(bottom)) = (covered.iter().map(|p| p.0).min(), covered.iter().map(|p| p.0).max()) else {
        return Err(CotError::Decode("sheet has no paper".into()));
    };
    let left = covered.iter().map(|p| p.1).min().expect("non-empty");
    let right = covered.iter().map(|p| p.1).max().expect("non-empty");
    let extent = Extent {
        top,
        left,
        rows: bottom - top + 1,
        cols: right - left + 1,
    };
    if covered.len() != extent.rows * extent.cols {
        return Err(CotError::Decode("paper is not a rectangle".into()));
    }
    Ok(SheetView {
        grid_size: g.rows,
        extent,
        holes,
    })
}

// ---- manipulation scenes (top-down) ----

fn object_paint(c: manip::Color) -> Paint {
    match c {
        manip::Color::Red => Paint::Red,
        manip::Color::Blue => Paint::Blue,
        manip::Color::Green => Paint::Green,
        manip::Color::Yellow => Paint::Yellow,
        manip::Color::Purple => Paint::Purple,
        manip::Color::Cyan => Paint::Cyan,
        manip::Color::Black => Paint::Black,
        manip::Color::Gray => Paint::Gray,
    }
}

/// Lattice point `(x, z)` to grid cell: row 0 is the back row.
fn lattice_cell((x, z): (i32, i32)) -> Cell {
    ((manip::LATTICE - 1 - z) as usize, x as usize)
}

fn render_scene(state: &StateView, s: &ManipScene, res: u32) -> Result<RasterImage> {
    s.validate().map_err(|e| CotError::Render(e.to_string()))?;
    let n = manip::LATTICE as usize;
    let g = Grid::layout(n, n, res, Task::MultihopManipulation)?;
    let mut img = canvas(state, res, res)?;
    g.draw(&mut img, Paint::LightGray);
    for o in &s.objects {
        let (r, c) = lattice_cell(o.pos);
        stamp_glyph(&mut img, &g, r, c, o.shape.into(), object_paint(o.color));
    }
    Ok(img)
}

fn decode_scene(img: &RasterImage) -> Result<ManipScene> {
    let g = Grid::detect(img)?;
    let n = manip::LATTICE as usize;
    if (g.rows, g.cols) != (n, n) {
        return Err(CotError::Decode(format!("scene grid is {}x{}, expected {n}x{n}", g.rows, g.cols)));
    }
    let mut objects = Vec::new();
    for r in 0..n {
        for c in 0..n {
            let (x, y) = g.origin(r, c);
            let mut inks = BTreeSet::new();
            for yy in y + 2..=y + g.cs - 2 {
                for xx in x + 2..=x + g.cs - 2 {
                    let p = img.at(xx, yy)?;
                    if p != Paint::White {
                        inks.insert(p);
                    }
                }
            }
            let Some(&ink) = inks.iter().next() else { continue };
            let color = manip::Color::ALL
                .into_iter()
                .find(|&k| object_paint(k) == ink)
                .filter(|_| inks.len() == 1)
                .ok_or_else(|| CotError::Decode(format!("unrecognized colors in cell ({r}, {c})")))?;
            let shape = classify(img, &g, r, c, ink, &Shape::ALL)?.expect("ink present");
            objects.push(Object {
                shape,
                color,
                pos: (c as i32, manip::LATTICE - 1 - r as i32),
            });
        }
    }
    ManipScene::new(objects).map_err(|e| CotError::Decode(e.to_string()))
}

// ---- maze ----

fn render_maze(state: &StateView, m: &MazeView, res: u32) -> Result<RasterImage> {
    let n = m.maze.size;
    if n < 2 || m.path.iter().chain(m.start.iter()).chain(m.goal.iter()).any(|&(r, c)| r >= n || c >= n) {
        return Err(CotError::Render("maze marker outside the grid".into()));
    }
    if m.start.is_some() && m.start == m.goal {
        return Err(CotError::Render("start and goal coincide".into()));
    }
    if let Some(&first) = m.path.first() {
        if Some(first) != m.start {
            return Err(CotError::Render("path does not begin at the start".into()));
        }
    }
    let mut seen = HashSet::new();
    for w in m.path.windows(2) {
        if Move::between(w[0], w[1]).is_none() || m.maze.wall_between(w[0], w[1]) {
            return Err(CotError::Render(format!("path step {:?} -> {:?} is not an open move", w[0], w[1])));
        }
    }
    if !m.path.iter().all(|c| seen.insert(*c)) {
        return Err(CotError::Render("path revisits a cell".into()));
    }
    let g = Grid::layout(n, n, res, Task::Maze)?;
    let mut img = canvas(state, res, res)?;
    g.draw(&mut img, Paint::LightGray);
    let side = n as i64 * g.cs;
    for i in [0, side] {
        img.vline(i, 0, side, Paint::DarkSlate);
        img.hline(0, side, i, Paint::DarkSlate);
    }
    if let Some((r, c)) = m.start {
        g.fill(&mut img, r, c, 3, Paint::Red);
    }
    if let Some((r, c)) = m.goal {
        g.fill(&mut img, r, c, 3, Paint::Green);
    }
    for r in 0..n {
        for c in 0..n {
            let (x, y) = g.origin(r, c);
            if c + 1 < n && m.maze.v_walls[r][c] {
                let xx = x + g.cs;
                img.fill_rect(xx - 1, y, xx + 1, y + g.cs, Paint::DarkSlate);
            }
            if r + 1 < n && m.maze.h_walls[r][c] {
                let yy = y + g.cs;
                img.fill_rect(x, yy - 1, x + g.cs, yy + 1, Paint::DarkSlate);
            }
        }
    }
    for w in m.path.windows(2) {
        let (a, b) = (g.center(w[0].0, w[0].1), g.center(w[1].0, w[1].1));
        img.fill_rect(a.0.min(b.0) - 1, a.1.min(b.1) - 1, a.0.max(b.0) + 1, a.1.max(b.1) + 1, Paint::Blue);
    }
    for &(r, c) in &m.path {
        let (cx, cy) = g.center(r, c);
        img.disk(cx, cy, (g.cs / 8).max(2), Paint::Blue);
    }
    Ok(img)
}

fn decode_maze(img: &RasterImage) -> Result<MazeView> {
    let g = Grid::detect(img)?;
    if g.rows != g.cols {
        return Err(CotError::Decode("maze grid is not square".into()));
    }
    let n = g.rows;
    let mut maze = Maze::open(n);
    let (mut starts, mut goals, mut path_cells) = (Vec::new(), Vec::new(), HashSet::new());
    // Edge sample: wall, path, or neither.
    let edge = |x: i64, y: i64, mid: (i64, i64)| -> Result<(bool, bool)> {
        let wall = match img.at(x, y)? {
            Paint::DarkSlate => true,
            Paint::LightGray | Paint::Blue => false,
            p => return Err(CotError::Decode(format!("unexpected {p:?} on a maze edge"))),
        };
        Ok((wall, img.at(mid.0, mid.1)? == Paint::Blue))
    };
    let mut path_edges = HashSet::new();
    for r in 0..n {
        for c in 0..n {
            let (x, y) = g.origin(r, c);
            match img.at(x + 4, y + 4)? {
                Paint::Red => starts.push((r, c)),
                Paint::Green => goals.push((r, c)),
                _ => {}
            }
            let (cx, cy) = g.center(r, c);
            if img.at(cx, cy)? == Paint::Blue {
                path_cells.insert((r, c));
            }
            if c + 1 < n {
                let xx = x + g.cs;
                let (wall, path) = edge(xx, y + g.cs / 4, (xx, cy))?;
                maze.v_walls[r][c] = wall;
                if path {
                    path_edges.insert(((r, c), (r, c + 1)));
                }
            }
            if r + 1 < n {
                let yy = y + g.cs;
                let (wall, path) = edge(x + g.cs / 4, yy, (cx, yy))?;
                maze.h_walls[r][c] = wall;
                if path {
                    path_edges.insert(((r, c), (r + 1, c)));
                }
            }
        }
    }
    let (&[start], &[goal]) = (starts.as_slice(), goals.as_slice()) else {
        return Err(CotError::Decode(format!(
            "expected one start and one goal marker, found {} and {}",
            starts.len(),
            goals.len()
        )));
    };
    let mut path = Vec::new();
    if !path_cells.is_empty() {
        if !path_cells.contains(&start) {
            return Err(CotError::Decode("path does not begin at the start".into()));
        }
        path.push(start);
        let linked = |a: Cell, b: Cell| path_edges.contains(&(a, b)) || path_edges.contains(&(b, a));
        loop {
            let cur = *path.last().expect("non-empty");
            let prev = path.len().checked_sub(2).map(|i| path[i]);
            let next: Vec<Cell> = path_cells.iter().copied().filter(|&p| Some(p) != prev && linked(cur, p)).collect();
            match next.as_slice() {
                [] => break,
                [one] => path.push(*one),
                _ => return Err(CotError::Decode("path branches".into())),
            }
            if path.len() > path_cells.len() {
                return Err(CotError::Decode("path loops".into()));
            }
        }
        if path.len() != path_cells.len() || path_edges.len() != path.len() - 1 {
            return Err(CotError::Decode("path is not one connected chain".into()));
        }
    } else if !path_edges.is_empty() {
        return Err(CotError::Decode("path edges without path cells".into()));
    }
    Ok(MazeView {
        maze,
        start: Some(start),
        goal: Some(goal),
        path,
    })
}

// ---- sokoban ----

fn render_sokoban(state: &StateView, s: &SokobanState, res: u32) -> Result<RasterImage> {
    s.validate().map_err(|e| CotError::Render(e.to_string()))?;
    let n = s.size;
    let g = Grid::layout(n, n, res, Task::Sokoban)?;
    let mut img = canvas(state, res, res)?;
    g.draw(&mut img, Paint::LightGray);
    for r in 0..n {
        for c in 0..n {
            if s.is_wall((r, c)) {
                g.fill(&mut img, r, c, 2, Paint::DarkSlate);
            }
        }
    }
    let (tr, tc) = s.target;
    g.fill(&mut img, tr, tc, 3, Paint::Red);
    g.fill(&mut img, tr, tc, 5, Paint::White);
    g.fill(&mut img, s.box_cell.0, s.box_cell.1, 6, Paint::Orange);
    let (px, py) = g.center(s.player.0, s.player.1);
    img.disk(px, py, (g.cs - 12) / 2, Paint::Blue);
    Ok(img)
}

fn decode_sokoban(img: &RasterImage) -> Result<SokobanState> {
    let g = Grid::detect(img)?;
    if g.rows != g.cols {
        return Err(CotError::Decode("board is not square".into()));
    }
    let n = g.rows;
    let mut walls = vec![false; n * n];
    let (mut players, mut boxes, mut targets) = (Vec::new(), Vec::new(), Vec::new());
    for r in 0..n {
        for c in 0..n {
            let (x, y) = g.origin(r, c);
            let (cx, cy) = g.center(r, c);
            let corner = img.at(x + 3, y + 3)?;
            match img.at(cx, cy)? {
                Paint::DarkSlate if corner == Paint::DarkSlate => walls[r * n + c] = true,
                Paint::Orange => boxes.push((r, c)),
                Paint::Blue => players.push((r, c)),
                Paint::White => {}
                p => return Err(CotError::Decode(format!("unexpected {p:?} in board cell ({r}, {c})"))),
            }
            match corner {
                Paint::Red => targets.push((r, c)),
                Paint::White | Paint::DarkSlate => {}
                p => return Err(CotError::Decode(format!("unexpected {p:?} in board cell ({r}, {c})"))),
            }
        }
    }
    let (&[player], &[box_cell], &[target]) = (players.as_slice(), boxes.as_slice(), targets.as_slice()) else {
        return Err(CotError::Decode(format!(
            "expected one player, box and target, found {}, {} and {}",
            players.len(),
            boxes.len(),
            targets.len()
        )));
    };
    let s = SokobanState {
        size: n,
        walls,
        player,
        box_cell,
        target,
    };
    s.validate().map_err(|e| CotError::Decode(e.to_string()))?;
    Ok(s)
}

// ---- cube views ----

fn cube_paint(code: u8) -> Option<Paint> {
    match CubeColor::from_code(code)? {
        CubeColor::Red => Some(Paint::Red),
        CubeColor::Blue => Some(Paint::Blue),
        CubeColor::Aux => Some(Paint::Gray),
    }
}

fn render_cube(state: &StateView, v: &ViewMatrix, res: u32) -> Result<RasterImage> {
    if v.rows == 0 || v.cols == 0 || v.cells.len() != v.rows * v.cols {
        return Err(CotError::Render("malformed view matrix".into()));
    }
    let g = Grid::layout(v.rows, v.cols, res, Task::Cube3View)?;
    let mut img = canvas(state, res, res)?;
    g.draw(&mut img, Paint::LightGray);
    for r in 0..v.rows {
        for c in 0..v.cols {
            match v.get(r, c) {
                0 => {}
                code => {
                    let p = cube_paint(code).ok_or_else(|| CotError::Render(format!("unknown cell code {code}")))?;
                    g.fill(&mut img, r, c, 2, p);
                }
            }
        }
    }
    Ok(img)
}

fn decode_cube(img: &RasterImage) -> Result<ViewMatrix> {
    let g = Grid::detect(img)?;
    let mut cells = Vec::with_capacity(g.rows * g.cols);
    for r in 0..g.rows {
        for c in 0..g.cols {
            let (cx, cy) = g.center(r, c);
            cells.push(match img.at(cx, cy)? {
                Paint::White => 0,
                Paint::Red => CubeColor::Red.code(),
                Paint::Blue => CubeColor::Blue.code(),
                Paint::Gray => CubeColor::Aux.code(),
                p => return Err(CotError::Decode(format!("unexpected {p:?} in view cell ({r}, {c})"))),
            });
        }
    }
    Ok(ViewMatrix {
        rows: g.rows,
        cols: g.cols,
        cells,
    })
}

// ---- ball tracking (native size) ----

/// Margin around the box interior; walls are the two pixels just outside it.
const BALL_MARGIN: i64 = 32;
const BALL_RADIUS: i64 = 4;

fn ball_px((x, y): (f64, f64)) -> (i64, i64) {
    (BALL_MARGIN + x.round() as i64, BALL_MARGIN + y.round() as i64)
}

/// Arrow tip offset multiple: largest `k` with `7 <= |k d| <= 24` whose 3x3
/// tip stays inside the box.
fn arrow_multiple(s: &BallScene) -> Option<i64> {
    let (dx, dy) = (s.direction.0 as i64, s.direction.1 as i64);
    let (sx, sy) = (s.start.0 as i64, s.start.1 as i64);
    (1..=24)
        .rev()
        .find(|&k| {
            let len2 = k * k * (dx * dx + dy * dy);
            let (tx, ty) = (sx + k * dx, sy + k * dy);
            (49..=576).contains(&len2) && tx >= 1 && ty >= 1 && tx < s.width as i64 && ty < s.height as i64
        })
}

struct BallLayers {
    segments: Vec<Vec<(i64, i64)>>,
    /// Pixels drawn over the trail.
    covered: HashSet<(i64, i64)>,
    tip: (i64, i64),
    start: (i64, i64),
}

fn ball_layers(s: &BallScene) -> Result<BallLayers> {
    let t = s.simulate().map_err(|e| CotError::Render(e.to_string()))?;
    let (sx, sy) = (s.start.0 as i64, s.start.1 as i64);
    if sx < 8 || sy < 8 || sx > s.width as i64 - 8 || sy > s.height as i64 - 8 {
        return Err(CotError::Render("start is too close to a wall to draw".into()));
    }
    if s.holes.iter().any(|&(a, b)| b - a < 2) {
        return Err(CotError::Render("hole narrower than two pixels".into()));
    }
    let k = arrow_multiple(s).ok_or_else(|| CotError::Render("no room for the direction arrow".into()))?;
    let start = (BALL_MARGIN + sx, BALL_MARGIN + sy);
    let tip = (start.0 + k * s.direction.0 as i64, start.1 + k * s.direction.1 as i64);
    let pts = t.polyline((sx as f64, sy as f64));
    let segments = pts.windows(2).map(|w| line_pixels(ball_px(w[0]), ball_px(w[1]))).collect();
    let mut covered: HashSet<(i64, i64)> = line_pixels(start, tip).into_iter().collect();
    for dy in -1..=1 {
        for dx in -1..=1 {
            covered.insert((tip.0 + dx, tip.1 + dy));
        }
    }
    for dy in -BALL_RADIUS..=BALL_RADIUS {
        for dx in -BALL_RADIUS..=BALL_RADIUS {
            if dx * dx + dy * dy <= BALL_RADIUS * BALL_RADIUS {
                covered.insert((start.0 + dx, start.1 + dy));
            }
        }
    }
    Ok(BallLayers {
        segments,
        covered,
        tip,
        start,
    })
}

fn render_ball(state: &StateView, b: &BallView) -> Result<RasterImage> {
    let s = &b.scene;
    let layers = ball_layers(s)?;
    if b.segments > layers.segments.len() {
        return Err(CotError::Render(format!(
            "trail of {} segments but the trajectory has {}",
            b.segments,
            layers.segments.len()
        )));
    }
    let (w, h) = (s.width as i64, s.height as i64);
    let mut img = canvas(state, (w + 2 * BALL_MARGIN) as u32, (h + 2 * BALL_MARGIN) as u32)?;
    let (l, t, r, btm) = (BALL_MARGIN, BALL_MARGIN, BALL_MARGIN + w, BALL_MARGIN + h);
    img.fill_rect(l - 2, t - 2, r + 2, t - 1, Paint::DarkSlate);
    img.fill_rect(l - 2, btm + 1, r + 2, btm + 2, Paint::DarkSlate);
    img.fill_rect(l - 2, t - 2, l - 1, btm + 2, Paint::DarkSlate);
    img.fill_rect(r + 1, t - 2, r + 2, btm + 2, Paint::DarkSlate);
    for (i, &(a, b)) in s.holes.iter().enumerate() {
        img.fill_rect(l + a as i64 + 1, t - 2, l + b as i64 - 1, t - 1, Paint::White);
        let label = (i + 1) as u8;
        let cx = l + (a + b) as i64 / 2;
        for (px, py) in digit_pixels(label, 2) {
            img.set(cx - 3 + px, 14 + py, Paint::Black);
        }
    }
    for seg in &layers.segments[..b.segments] {
        for &(x, y) in seg {
            img.set(x, y, Paint::Orange);
        }
    }
    img.line(layers.start, layers.tip, Paint::Green);
    img.fill_rect(layers.tip.0 - 1, layers.tip.1 - 1, layers.tip.0 + 1, layers.tip.1 + 1, Paint::DarkGreen);
    img.disk(layers.start.0, layers.start.1, BALL_RADIUS, Paint::Red);
    Ok(img)
}

fn centroid(img: &RasterImage, p: Paint) -> Option<((i64, i64), usize)> {
    let (mut sx, mut sy, mut n) = (0i64, 0i64, 0usize);
    for y in 0..img.height as i64 {
        for x in 0..img.width as i64 {
            if img.get(x, y) == Some(p) {
                sx += x;
                sy += y;
                n += 1;
            }
        }
    }
    (n > 0 && sx % n as i64 == 0 && sy % n as i64 == 0).then(|| ((sx / n as i64, sy / n as i64), n))
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn decode_ball(img: &RasterImage) -> Result<BallView> {
    let bad = |why: &str| CotError::Decode(format!("ball scene: {why}"));
    let m = BALL_MARGIN;
    let slate = |x: i64, y: i64| img.get(x, y) == Some(Paint::DarkSlate);
    // Left wall column gives the height, bottom wall row the width.
    let hl = (m - 2..img.height as i64).take_while(|&y| slate(m - 2, y)).count() as i64;
    let h = hl - 5;
    let wl = (m - 2..img.width as i64).take_while(|&x| slate(x, m + h + 2)).count() as i64;
    let w = wl - 5;
    if h < 16 || w < 16 || img.width as i64 != w + 2 * m || img.height as i64 != h + 2 * m {
        return Err(bad("box walls not found"));
    }
    let mut holes = Vec::new();
    let mut x = m - 2;
    while x <= m + w + 2 {
        if slate(x, m - 2) {
            x += 1;
            continue;
        }
        let from = x;
        while x <= m + w + 2 && !slate(x, m - 2) {
            x += 1;
        }
        holes.push(((from - m - 1) as u32, (x - 1 - m + 1) as u32));
    }
    let ((sx, sy), red) = centroid(img, Paint::Red).ok_or_else(|| bad("no ball"))?;
    let ((tx, ty), tip) = centroid(img, Paint::DarkGreen).ok_or_else(|| bad("no arrow tip"))?;
    if tip != 9 || red == 0 {
        return Err(bad("arrow tip is not a 3x3 square"));
    }
    let (dx, dy) = (tx - sx, ty - sy);
    let k = gcd(dx, dy);
    if k == 0 {
        return Err(bad("arrow has no direction"));
    }
    let scene = BallScene {
        width: w as u32,
        height: h as u32,
        holes,
        start: ((sx - m) as u32, (sy - m) as u32),
        direction: ((dx / k) as i32, (dy / k) as i32),
    };
    let layers = ball_layers(&scene)?;
    if layers.tip != (tx, ty) {
        return Err(bad("arrow length is not canonical"));
    }
    let drawn = |seg: &Vec<(i64, i64)>| {
        seg.iter()
            .filter(|p| !layers.covered.contains(p))
            .all(|&(x, y)| img.get(x, y) == Some(Paint::Orange))
    };
    let segments = layers.segments.iter().take_while(|s| drawn(s)).count();
    let view = BallView { scene, segments };
    // Anything orange beyond the decoded trail means a different drawing.
    let expected = render_ball(&StateView::Ball(view.clone()), &view)?;
    if expected.pixels != img.pixels {
        return Err(bad("pixels do not match the decoded scene"));
    }
    Ok(view)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{cube, maze, paperfold, sokoban};

    fn round_trip(state: StateView, res: u32) {
        let img = render(&state, res).unwrap();
        let png = img.to_png().unwrap();
        let back = decode(&RasterImage::from_png(&png).unwrap()).unwrap();
        assert_eq!(back, state);
    }

    #[test]
    fn sheets_round_trip() {
        let mut rng = crate::seed::rng(3);
        for (n, f) in [(3, 1), (5, 3), (8, 4)] {
            let p = paperfold::generate(&mut rng, n, f).unwrap();
            for v in p.unfolding_views().unwrap() {
                round_trip(StateView::Sheet(v), 480);
            }
        }
    }

    #[test]
    fn scenes_round_trip() {
        let mut rng = crate::seed::rng(4);
        for _ in 0..5 {
            let p = manip::generate(&mut rng, 6, 3).unwrap();
            for s in p.scenes().unwrap() {
                round_trip(StateView::Scene(s), 256);
            }
        }
    }

    #[test]
    fn mazes_round_trip_with_partial_paths() {
        let mut rng = crate::seed::rng(5);
        let p = maze::generate(&mut rng);
        let path = p.path().unwrap();
        for k in 0..=path.len() {
            let v = MazeView {
                maze: p.maze.clone(),
                start: Some(p.start),
                goal: Some(p.goal),
                path: path[..k].to_vec(),
            };
            round_trip(StateView::Maze(v), 120);
        }
    }

    #[test]
    fn maze_without_markers_does_not_decode() {
        let v = MazeView {
            maze: Maze::open(5),
            start: None,
            goal: None,
            path: vec![],
        };
        let img = render(&StateView::Maze(v), 256).unwrap();
        assert!(decode(&img).is_err());
    }

    #[test]
    fn sokoban_round_trip_including_target_overlaps() {
        let mut rng = crate::seed::rng(6);
        let p = sokoban::generate(&mut rng, 8).unwrap();
        for k in p.key_steps() {
            round_trip(StateView::Sokoban(k.state), 480);
        }
    }

    #[test]
    fn cube_views_round_trip() {
        let mut rng = crate::seed::rng(7);
        let s = cube::random_stack(&mut rng, 5);
        for v in cube::ViewKind::ALL {
            round_trip(StateView::Cube(s.project(v)), 480);
        }
    }

    #[test]
    fn ball_round_trip_for_every_trail_length() {
        let mut rng = crate::seed::rng(8);
        for _ in 0..3 {
            let p = crate::envs::ball::generate(&mut rng, 5).unwrap();
            for k in 0..=p.trajectory.reflections.len() + 1 {
                round_trip(
                    StateView::Ball(BallView {
                        scene: p.scene.clone(),
                        segments: k,
                    }),
                    0,
                );
            }
        }
    }

    #[test]
    fn small_resolution_is_rejected() {
        let v = StateView::Sokoban(sokoban::generate(&mut crate::seed::rng(1), 10).unwrap().initial);
        assert!(matches!(render(&v, 120), Err(CotError::Resolution(_))));
    }

    #[test]
    fn blank_image_does_not_decode() {
        for task in Task::ALL {
            let img = RasterImage::new(
                200,
                200,
                ImageMeta {
                    task,
                    digest: String::new(),
                },
            )
            .unwrap();
            assert!(decode(&img).is_err(), "{task}");
        }
    }
}
