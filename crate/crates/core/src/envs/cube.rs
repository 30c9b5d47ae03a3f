//! Stacks of red and blue unit cubes on an `n x n` base, their orthographic
//! and isometric views, and the set of counts consistent with three views.
//!
//! Coordinates: `x` to the right, `y` away from the front, `z` up. Columns are
//! solid from the ground and heights never exceed `n`. Every view cell is
//! the color of the nearest voxel on its viewing ray.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Answer, CountMode, EnvError, Result, REJECTION_BUDGET};

/// Search nodes allowed per ambiguity query before the generator resamples.
pub const NODE_BUDGET: u64 = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CubeColor {
    Red,
    Blue,
    /// Reserved for marking possibly hidden cubes in CoT views.
    Aux,
}

impl CubeColor {
    pub fn name(self) -> &'static str {
        match self {
            CubeColor::Red => "red",
            CubeColor::Blue => "blue",
            CubeColor::Aux => "gray",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            CubeColor::Red => 1,
            CubeColor::Blue => 2,
            CubeColor::Aux => 3,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            1 => Some(CubeColor::Red),
            2 => Some(CubeColor::Blue),
            3 => Some(CubeColor::Aux),
            _ => None,
        }
    }

    pub fn symbol(c: u8) -> char {
        match c {
            1 => 'R',
            2 => 'B',
            3 => 'X',
            _ => '.',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewKind {
    Front,
    Back,
    Left,
    Right,
    Top,
    IsoFrontLeft,
    IsoFrontRight,
}

impl ViewKind {
    pub const ORTHO: [ViewKind; 5] = [ViewKind::Front, ViewKind::Back, ViewKind::Left, ViewKind::Right, ViewKind::Top];
    pub const ALL: [ViewKind; 7] = [
        ViewKind::Front,
        ViewKind::Back,
        ViewKind::Left,
        ViewKind::Right,
        ViewKind::Top,
        ViewKind::IsoFrontLeft,
        ViewKind::IsoFrontRight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ViewKind::Front => "front",
            ViewKind::Back => "back",
            ViewKind::Left => "left",
            ViewKind::Right => "right",
            ViewKind::Top => "top",
            ViewKind::IsoFrontLeft => "isometric front-left",
            ViewKind::IsoFrontRight => "isometric front-right",
        }
    }

    pub fn is_iso(self) -> bool {
        matches!(self, ViewKind::IsoFrontLeft | ViewKind::IsoFrontRight)
    }

    /// `(rows, cols)` for base `n` (max height `n`).
    pub fn dims(self, n: usize) -> (usize, usize) {
        match self {
            ViewKind::Top => (n, n),
            ViewKind::IsoFrontLeft | ViewKind::IsoFrontRight => (4 * n - 3, 2 * n - 1),
            _ => (n, n),
        }
    }

    /// Voxels `(x, y, z)` seen through cell `(row, col)`, nearest first.
    pub fn ray(self, n: usize, row: usize, col: usize) -> Vec<(usize, usize, usize)> {
        let last = n - 1;
        match self {
            ViewKind::Front => (0..n).map(|y| (col, y, last - row)).collect(),
            ViewKind::Back => (0..n).rev().map(|y| (last - col, y, last - row)).collect(),
            ViewKind::Left => (0..n).map(|x| (x, last - col, last - row)).collect(),
            ViewKind::Right => (0..n).rev().map(|x| (x, col, last - row)).collect(),
            ViewKind::Top => (0..n).rev().map(|z| (col, last - row, z)).collect(),
            ViewKind::IsoFrontLeft | ViewKind::IsoFrontRight => {
                // Screen axes: p = x - y (or x + y), v = x + y + 2z (or y - x + 2z).
                let v = (4 * n - 4 - row) as i64;
                let p = col as i64 - last as i64;
                let mut out = Vec::new();
                for x in 0..n as i64 {
                    let (y, twice_z) = if self == ViewKind::IsoFrontLeft {
                        let y = x - p;
                        (y, v - x - y)
                    } else {
                        let y = p + last as i64 - x;
                        (y, v - y + x - last as i64)
                    };
                    if (0..n as i64).contains(&y) && twice_z >= 0 && twice_z % 2 == 0 && twice_z / 2 < n as i64 {
                        out.push((x as usize, y as usize, (twice_z / 2) as usize));
                    }
                }
                // Front-left looks along +x, front-right along -x.
                if self == ViewKind::IsoFrontRight {
                    out.reverse();
                }
                out
            }
        }
    }
}

impl fmt::Display for ViewKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ViewMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major codes: 0 empty, then [`CubeColor::code`].
    pub cells: Vec<u8>,
}

impl ViewMatrix {
    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.cells[r * self.cols + c]
    }

    pub fn count(&self, color: CubeColor) -> i64 {
        self.cells.iter().filter(|&&c| c == color.code()).count() as i64
    }

    pub fn to_matrix(&self) -> Vec<String> {
        self.cells
            .chunks(self.cols)
            .map(|row| row.iter().map(|&c| CubeColor::symbol(c)).collect())
            .collect()
    }

    pub fn from_matrix(rows: &[String]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.chars().count());
        let mut cells = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.chars().count() != cols {
                return Err(EnvError::Domain("ragged view matrix".into()));
            }
            for ch in r.chars() {
                cells.push(match ch {
                    '.' => 0,
                    'R' => 1,
                    'B' => 2,
                    'X' => 3,
                    _ => return Err(EnvError::Domain(format!("unknown view symbol '{ch}'"))),
                });
            }
        }
        Ok(ViewMatrix {
            rows: rows.len(),
            cols,
            cells,
        })
    }

    /// Occupancy only: which cells hold a cube.
    pub fn shape_mask(&self) -> Vec<bool> {
        self.cells.iter().map(|&c| c != 0).collect()
    }

    /// Left-right mirror image.
    pub fn mirrored(&self) -> ViewMatrix {
        let mut cells = self.cells.clone();
        for row in cells.chunks_mut(self.cols) {
            row.reverse();
        }
        ViewMatrix { cells, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CubeStack {
    pub n: usize,
    /// `heights[x * n + y]`, each at most `n`.
    pub heights: Vec<u8>,
    /// `colors[(x * n + y) * n + z]`: 0 red, 1 blue; ignored above the column.
    pub colors: Vec<u8>,
}

impl CubeStack {
    pub fn single() -> Self {
        CubeStack {
            n: 1,
            heights: vec![1],
            colors: vec![0],
        }
    }

    pub fn height(&self, x: usize, y: usize) -> usize {
        self.heights[x * self.n + y] as usize
    }

    pub fn filled(&self, (x, y, z): (usize, usize, usize)) -> bool {
        z < self.height(x, y)
    }

    pub fn color(&self, (x, y, z): (usize, usize, usize)) -> CubeColor {
        if self.colors[(x * self.n + y) * self.n + z] == 0 {
            CubeColor::Red
        } else {
            CubeColor::Blue
        }
    }

    pub fn voxel_count(&self) -> usize {
        self.heights.iter().map(|&h| h as usize).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 || self.heights.len() != n * n || self.colors.len() != n * n * n {
            return Err(EnvError::Domain("malformed stack".into()));
        }
        if self.heights.iter().any(|&h| h as usize > n) {
            return Err(EnvError::Domain(format!("column taller than {n}")));
        }
        if self.voxel_count() == 0 {
            return Err(EnvError::Domain("empty stack".into()));
        }
        if !footprint_connected(n, &self.heights) {
            return Err(EnvError::Domain("stack is not connected".into()));
        }
        Ok(())
    }

    pub fn project(&self, view: ViewKind) -> ViewMatrix {
        let (rows, cols) = view.dims(self.n);
        let mut cells = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let seen = view.ray(self.n, r, c).into_iter().find(|&v| self.filled(v));
                cells.push(seen.map_or(0, |v| self.color(v).code()));
            }
        }
        ViewMatrix { rows, cols, cells }
    }
}

/// Solid columns touch along the ground, so connectivity is footprint
/// connectivity.
fn footprint_connected(n: usize, heights: &[u8]) -> bool {
    let cells: Vec<usize> = (0..n * n).filter(|&i| heights[i] > 0).collect();
    let Some(&first) = cells.first() else { return false };
    let mut seen = vec![false; n * n];
    seen[first] = true;
    let mut queue = VecDeque::from([first]);
    let mut reached = 1;
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i / n, i % n);
        let mut nb = Vec::with_capacity(4);
        if x > 0 {
            nb.push(i - n);
        }
        if x + 1 < n {
            nb.push(i + n);
        }
        if y > 0 {
            nb.push(i - 1);
        }
        if y + 1 < n {
            nb.push(i + 1);
        }
        for j in nb {
            if heights[j] > 0 && !seen[j] {
                seen[j] = true;
                reached += 1;
                queue.push_back(j);
            }
        }
    }
    reached == cells.len()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ambiguity {
    /// Possible numbers of cubes of the asked color in the query view.
    pub counts: BTreeSet<i64>,
    /// Number of consistent heightmaps.
    pub heightmaps: u64,
    /// Per query cell: bit 0 empty, bit 1 red, bit 2 blue, over all completions.
    pub cell_states: Vec<u8>,
    pub query_dims: (usize, usize),
}

impl Ambiguity {
    /// The query view with every uncertain cell marked in the auxiliary
    /// color.
    pub fn marked_view(&self) -> ViewMatrix {
        let cells = self
            .cell_states
            .iter()
            .map(|&m| match m {
                1 => 0,
                2 => CubeColor::Red.code(),
                4 => CubeColor::Blue.code(),
                _ => CubeColor::Aux.code(),
            })
            .collect();
        ViewMatrix {
            rows: self.query_dims.0,
            cols: self.query_dims.1,
            cells,
        }
    }
}

struct Ray {
    /// `(column index, z)`, nearest first.
    voxels: Vec<(usize, usize)>,
    /// Required color code, 0 for an empty cell.
    want: u8,
}

/// Every connected stack on base `n` whose `given` views match, and the
/// possible counts of `color` in the `query` view.
pub fn ambiguity(
    n: usize,
    given: &[(ViewKind, ViewMatrix)],
    query: ViewKind,
    color: CubeColor,
    budget: u64,
) -> Result<Ambiguity> {
    if color == CubeColor::Aux {
        return Err(EnvError::Domain("the auxiliary color is never counted".into()));
    }
    let mut rays: Vec<Ray> = Vec::new();
    for (view, m) in given {
        let dims = view.dims(n);
        if (m.rows, m.cols) != dims {
            return Err(EnvError::Domain(format!("{view} view must be {}x{}", dims.0, dims.1)));
        }
        for r in 0..m.rows {
            for c in 0..m.cols {
                let want = m.get(r, c);
                if want == CubeColor::Aux.code() || want > 3 {
                    return Err(EnvError::Domain("given views only hold red and blue".into()));
                }
                let voxels: Vec<(usize, usize)> = view.ray(n, r, c).into_iter().map(|(x, y, z)| (x * n + y, z)).collect();
                if voxels.is_empty() && want != 0 {
                    return Err(EnvError::Inconsistent(format!("{view} cell ({r}, {c}) cannot hold a cube")));
                }
                rays.push(Ray { voxels, want });
            }
        }
    }
    // A voxel may exist only if no empty view cell looks through it.
    let mut bound = vec![n as u8; n * n];
    for ray in rays.iter().filter(|r| r.want == 0) {
        for &(col, z) in &ray.voxels {
            bound[col] = bound[col].min(z as u8);
        }
    }
    // Columns are assigned in index order. After each assignment, every
    // filled ray through that column must still be able to hit a voxel.
    let mut checks: Vec<Vec<usize>> = vec![vec![]; n * n];
    for (i, ray) in rays.iter().enumerate() {
        if ray.want != 0 {
            let mut cols: Vec<usize> = ray.voxels.iter().map(|v| v.0).collect();
            cols.dedup();
            for c in cols {
                checks[c].push(i);
            }
        }
    }
    let (qr, qc) = query.dims(n);
    let query_rays: Vec<Vec<(usize, usize)>> = (0..qr)
        .flat_map(|r| (0..qc).map(move |c| (r, c)))
        .map(|(r, c)| query.ray(n, r, c).into_iter().map(|(x, y, z)| (x * n + y, z)).collect())
        .collect();

    let mut search = Search {
        n,
        rays: &rays,
        checks: &checks,
        bound: &bound,
        query_rays: &query_rays,
        color,
        heights: vec![0; n * n],
        nodes: 0,
        budget,
        result: Ambiguity {
            counts: BTreeSet::new(),
            heightmaps: 0,
            cell_states: vec![0; qr * qc],
            query_dims: (qr, qc),
        },
    };
    search.assign(0)?;
    if search.result.heightmaps == 0 {
        return Err(EnvError::Inconsistent("no stack matches the given views".into()));
    }
    Ok(search.result)
}

struct Search<'a> {
    n: usize,
    rays: &'a [Ray],
    checks: &'a [Vec<usize>],
    bound: &'a [u8],
    query_rays: &'a [Vec<(usize, usize)>],
    color: CubeColor,
    heights: Vec<u8>,
    nodes: u64,
    budget: u64,
    result: Ambiguity,
}

impl Search<'_> {
    fn assign(&mut self, col: usize) -> Result<()> {
        if col == self.n * self.n {
            self.complete();
            return Ok(());
        }
        for h in 0..=self.bound[col] {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(EnvError::Domain(format!("ambiguity search exceeded {} nodes", self.budget)));
            }
            self.heights[col] = h;
            let ok = self.checks[col].iter().all(|&i| {
                self.rays[i].voxels.iter().any(|&(c, z)| {
                    if c <= col {
                        z < self.heights[c] as usize
                    } else {
                        z < self.bound[c] as usize
                    }
                })
            });
            if ok {
                self.assign(col + 1)?;
            }
        }
        self.heights[col] = 0;
        Ok(())
    }

    fn complete(&mut self) {
        if !footprint_connected(self.n, &self.heights) {
            return;
        }
        let n = self.n;
        // Colors forced by the given views; conflicting demands reject.
        let mut forced: Vec<u8> = vec![0; n * n * n];
        for ray in self.rays.iter().filter(|r| r.want != 0) {
            let &(c, z) = ray
                .voxels
                .iter()
                .find(|&&(c, z)| z < self.heights[c] as usize)
                .expect("checked during search");
            let slot = &mut forced[c * n + z];
            if *slot != 0 && *slot != ray.want {
                return;
            }
            *slot = ray.want;
        }
        self.result.heightmaps += 1;
        let (mut fixed, mut free) = (0i64, 0i64);
        for (cell, ray) in self.query_rays.iter().enumerate() {
            let seen = ray.iter().find(|&&(c, z)| z < self.heights[c] as usize);
            let state = match seen {
                None => 1,
                Some(&(c, z)) => match forced[c * n + z] {
                    0 => {
                        free += 1;
                        6
                    }
                    code => {
                        if code == self.color.code() {
                            fixed += 1;
                        }
                        1 << code
                    }
                },
            };
            self.result.cell_states[cell] |= state;
        }
        for j in 0..=free {
            self.result.counts.insert(fixed + j);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubePuzzle {
    pub stack: CubeStack,
    /// One isometric view followed by two orthographic views.
    pub given: Vec<ViewKind>,
    pub query: ViewKind,
    pub color: CubeColor,
    pub mode: CountMode,
}

impl CubePuzzle {
    pub fn given_views(&self) -> Vec<(ViewKind, ViewMatrix)> {
        self.given.iter().map(|&v| (v, self.stack.project(v))).collect()
    }

    pub fn ambiguity(&self) -> Result<Ambiguity> {
        ambiguity(self.stack.n, &self.given_views(), self.query, self.color, u64::MAX)
    }

    pub fn answer(&self) -> Result<Answer> {
        Ok(Answer::IntegerSet(self.ambiguity()?.counts))
    }

    pub fn question(&self) -> String {
        let n = self.stack.n;
        let views: Vec<&str> = self.given.iter().map(|v| v.name()).collect();
        let ask = match self.mode {
            CountMode::Possible => "Because some cubes may be hidden, give one possible count.",
            CountMode::AllPossible => "Because some cubes may be hidden, list all possible counts separated by commas.",
        };
        format!(
            "The images show the {}, {} and {} views of a connected stack of red and blue unit cubes on a {n}x{n} base; \
             every column rests on the ground and no column is taller than {n}. \
             How many {} cubes are visible in the {} view? {ask}",
            views[0],
            views[1],
            views[2],
            self.color.name(),
            self.query.name()
        )
    }
}

/// Random connected stack: a grown footprint with random heights and colors.
pub fn random_stack<R: Rng>(rng: &mut R, n: usize) -> CubeStack {
    let target = rng.gen_range(n..=(n * n * 3 / 4).max(n));
    let mut heights = vec![0u8; n * n];
    let start = rng.gen_range(0..n * n);
    heights[start] = 1;
    let mut placed = 1;
    while placed < target {
        let frontier: Vec<usize> = (0..n * n)
            .filter(|&i| heights[i] == 0)
            .filter(|&i| {
                let (x, y) = (i / n, i % n);
                (x > 0 && heights[i - n] > 0)
                    || (x + 1 < n && heights[i + n] > 0)
                    || (y > 0 && heights[i - 1] > 0)
                    || (y + 1 < n && heights[i + 1] > 0)
            })
            .collect();
        let &i = frontier.choose(rng).expect("grid not full");
        heights[i] = 1;
        placed += 1;
    }
    for h in heights.iter_mut().filter(|h| **h > 0) {
        *h = rng.gen_range(1..=n as u8);
    }
    let colors = (0..n * n * n).map(|_| rng.gen_range(0..2u8)).collect();
    CubeStack { n, heights, colors }
}

pub fn generate<R: Rng>(rng: &mut R, n: usize, mode: CountMode) -> Result<CubePuzzle> {
    if !(3..=6).contains(&n) {
        return Err(EnvError::Domain(format!("cube base {n} outside 3..=6")));
    }
    let mut last = String::new();
    for _ in 0..REJECTION_BUDGET {
        let stack = random_stack(rng, n);
        let iso = if rng.gen_bool(0.5) { ViewKind::IsoFrontLeft } else { ViewKind::IsoFrontRight };
        let mut ortho = ViewKind::ORTHO.to_vec();
        ortho.shuffle(rng);
        let given = vec![iso, ortho[0], ortho[1]];
        let query = ortho[2];
        let color = if rng.gen_bool(0.5) { CubeColor::Red } else { CubeColor::Blue };
        let puzzle = CubePuzzle {
            stack,
            given,
            query,
            color,
            mode,
        };
        match ambiguity(n, &puzzle.given_views(), query, color, NODE_BUDGET) {
            Ok(_) => return Ok(puzzle),
            Err(e) => last = e.to_string(),
        }
    }
    Err(EnvError::Domain(format!("no tractable stack within the rejection budget; last: {last}")))
}
