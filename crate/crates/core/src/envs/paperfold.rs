//! Paper folding: axis-aligned folds along interior grid lines, then hole
//! punching through every layer, then counting holes after unfolding.
//!
//! The folded paper stays in the frame of the original sheet: the stationary
//! part never moves and the flap is mirrored onto it. Each layer maps the
//! cells of the current extent to original cells (or to nothing where the
//! layer does not reach).

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EnvError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoleShape {
    Circle,
    Triangle,
    Star,
    Diamond,
    Square,
}

impl HoleShape {
    pub const ALL: [HoleShape; 5] = [
        HoleShape::Circle,
        HoleShape::Triangle,
        HoleShape::Star,
        HoleShape::Diamond,
        HoleShape::Square,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HoleShape::Circle => "circle",
            HoleShape::Triangle => "triangle",
            HoleShape::Star => "star",
            HoleShape::Diamond => "diamond",
            HoleShape::Square => "square",
        }
    }

    pub fn letter(self) -> char {
        match self {
            HoleShape::Circle => 'C',
            HoleShape::Triangle => 'T',
            HoleShape::Star => 'S',
            HoleShape::Diamond => 'D',
            HoleShape::Square => 'Q',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.letter() == c)
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| EnvError::Domain(format!("unknown hole shape '{name}'")))
    }
}

impl fmt::Display for HoleShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldDirection {
    LeftOver,
    RightOver,
    TopOver,
    BottomOver,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldAxis {
    VerticalLine,
    HorizontalLine,
}

/// Folds the part on one side of an interior grid line over the other side.
/// `line` counts grid lines from the top-left of the current extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAction {
    pub direction: FoldDirection,
    pub line: usize,
}

impl FoldAction {
    pub fn axis(&self) -> FoldAxis {
        match self.direction {
            FoldDirection::LeftOver | FoldDirection::RightOver => FoldAxis::VerticalLine,
            _ => FoldAxis::HorizontalLine,
        }
    }

    pub fn describe(&self) -> String {
        let (part, side) = match self.direction {
            FoldDirection::LeftOver => ("left", "right"),
            FoldDirection::RightOver => ("right", "left"),
            FoldDirection::TopOver => ("top", "bottom"),
            FoldDirection::BottomOver => ("bottom", "top"),
        };
        let kind = match self.axis() {
            FoldAxis::VerticalLine => "vertical",
            FoldAxis::HorizontalLine => "horizontal",
        };
        format!("fold the {part} part over the {side} part along {kind} line {}", self.line)
    }
}

/// Rectangle `[top, top + rows) x [left, left + cols)` in sheet coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extent {
    pub top: usize,
    pub left: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Extent {
    pub fn contains(&self, r: usize, c: usize) -> bool {
        r >= self.top && r < self.top + self.rows && c >= self.left && c < self.left + self.cols
    }
}

pub type Cell = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Punch {
    /// Relative to the current extent.
    pub cell: Cell,
    pub shape: HoleShape,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldState {
    pub grid_size: usize,
    pub extent: Extent,
    /// Bottom layer first; `layer[r * cols + c]` is the original cell under
    /// extent cell `(r, c)`.
    pub layers: Vec<Vec<Option<Cell>>>,
    pub punches: Vec<Punch>,
    pub fold_log: Vec<FoldAction>,
}

/// Original cell -> shapes punched there (a multiset, kept sorted).
pub type HoleLayout = BTreeMap<Cell, Vec<HoleShape>>;

impl FoldState {
    pub fn new(grid_size: usize) -> Result<Self> {
        if !(1..=64).contains(&grid_size) {
            return Err(EnvError::Domain(format!("grid size {grid_size} out of range")));
        }
        let layer = (0..grid_size * grid_size)
            .map(|i| Some((i / grid_size, i % grid_size)))
            .collect();
        Ok(FoldState {
            grid_size,
            extent: Extent {
                top: 0,
                left: 0,
                rows: grid_size,
                cols: grid_size,
            },
            layers: vec![layer],
            punches: vec![],
            fold_log: vec![],
        })
    }

    /// Folds that keep the flap on the paper.
    pub fn legal_folds(&self) -> Vec<FoldAction> {
        let Extent { rows, cols, .. } = self.extent;
        let mut out = Vec::new();
        for line in 1..cols {
            if line <= cols - line {
                out.push(FoldAction {
                    direction: FoldDirection::LeftOver,
                    line,
                });
            }
            if cols - line <= line {
                out.push(FoldAction {
                    direction: FoldDirection::RightOver,
                    line,
                });
            }
        }
        for line in 1..rows {
            if line <= rows - line {
                out.push(FoldAction {
                    direction: FoldDirection::TopOver,
                    line,
                });
            }
            if rows - line <= line {
                out.push(FoldAction {
                    direction: FoldDirection::BottomOver,
                    line,
                });
            }
        }
        out
    }

    pub fn apply(&self, action: FoldAction) -> Result<FoldState> {
        if !self.punches.is_empty() {
            return Err(EnvError::Domain("cannot fold after punching".into()));
        }
        if !self.legal_folds().contains(&action) {
            return Err(EnvError::Domain(format!(
                "fold {action:?} does not fit the {}x{} extent",
                self.extent.rows, self.extent.cols
            )));
        }
        let e = self.extent;
        let k = action.line;
        // New extent, plus maps from new cells to the stationary and flap
        // cells of the old extent.
        let (extent, stationary, flap): (Extent, Box<dyn Fn(usize, usize) -> Cell>, Box<dyn Fn(usize, usize) -> Option<Cell>>) =
            match action.direction {
                FoldDirection::LeftOver => (
                    Extent {
                        left: e.left + k,
                        cols: e.cols - k,
                        ..e
                    },
                    Box::new(move |r, c| (r, c + k)),
                    Box::new(move |r, c| (c < k).then(|| (r, k - 1 - c))),
                ),
                FoldDirection::RightOver => (
                    Extent { cols: k, ..e },
                    Box::new(|r, c| (r, c)),
                    Box::new(move |r, c| (2 * k - 1 - c < e.cols).then(|| (r, 2 * k - 1 - c))),
                ),
                FoldDirection::TopOver => (
                    Extent {
                        top: e.top + k,
                        rows: e.rows - k,
                        ..e
                    },
                    Box::new(move |r, c| (r + k, c)),
                    Box::new(move |r, c| (r < k).then(|| (k - 1 - r, c))),
                ),
                FoldDirection::BottomOver => (
                    Extent { rows: k, ..e },
                    Box::new(|r, c| (r, c)),
                    Box::new(move |r, c| (2 * k - 1 - r < e.rows).then(|| (2 * k - 1 - r, c))),
                ),
            };
        let old = |layer: &Vec<Option<Cell>>, (r, c): Cell| layer[r * e.cols + c];
        let mut layers = Vec::with_capacity(self.layers.len() * 2);
        for layer in &self.layers {
            let mapped: Vec<Option<Cell>> = (0..extent.rows * extent.cols)
                .map(|i| old(layer, stationary(i / extent.cols, i % extent.cols)))
                .collect();
            layers.push(mapped);
        }
        // The flap turns over: its top layer ends up lowest of the flipped part.
        for layer in self.layers.iter().rev() {
            let mapped: Vec<Option<Cell>> = (0..extent.rows * extent.cols)
                .map(|i| flap(i / extent.cols, i % extent.cols).and_then(|cell| old(layer, cell)))
                .collect();
            layers.push(mapped);
        }
        layers.retain(|l| l.iter().any(Option::is_some));
        let mut fold_log = self.fold_log.clone();
        fold_log.push(action);
        Ok(FoldState {
            grid_size: self.grid_size,
            extent,
            layers,
            punches: vec![],
            fold_log,
        })
    }

    pub fn punch(&self, cell: Cell, shape: HoleShape) -> Result<FoldState> {
        if cell.0 >= self.extent.rows || cell.1 >= self.extent.cols {
            return Err(EnvError::Domain(format!(
                "punch at {cell:?} outside the {}x{} extent",
                self.extent.rows, self.extent.cols
            )));
        }
        if self.punches.iter().any(|p| p.cell == cell) {
            return Err(EnvError::Domain(format!("cell {cell:?} is already punched")));
        }
        let mut next = self.clone();
        next.punches.push(Punch { cell, shape });
        Ok(next)
    }

    /// Number of layers covering an extent cell.
    pub fn depth(&self, cell: Cell) -> usize {
        let i = cell.0 * self.extent.cols + cell.1;
        self.layers.iter().filter(|l| l[i].is_some()).count()
    }

    pub fn unfold(&self) -> HoleLayout {
        let mut layout = HoleLayout::new();
        for p in &self.punches {
            let i = p.cell.0 * self.extent.cols + p.cell.1;
            for layer in &self.layers {
                if let Some(orig) = layer[i] {
                    layout.entry(orig).or_default().push(p.shape);
                }
            }
        }
        for v in layout.values_mut() {
            v.sort();
        }
        layout
    }

    /// Where each original cell currently sits, in sheet coordinates.
    pub fn positions(&self) -> BTreeMap<Cell, Cell> {
        let mut out = BTreeMap::new();
        for layer in &self.layers {
            for (i, cell) in layer.iter().enumerate() {
                if let Some(orig) = cell {
                    let (r, c) = (i / self.extent.cols, i % self.extent.cols);
                    out.insert(*orig, (self.extent.top + r, self.extent.left + c));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FoldQuery {
    Total,
    CountShape { shape: HoleShape },
    Diff { first: HoleShape, second: HoleShape },
}

impl FoldQuery {
    pub fn text(&self) -> String {
        match self {
            FoldQuery::Total => "How many holes are there in total?".into(),
            FoldQuery::CountShape { shape } => format!("How many {shape} holes are there?"),
            FoldQuery::Diff { first, second } => format!(
                "What is the number of {first} holes minus the number of {second} holes?"
            ),
        }
    }
}

pub fn count(layout: &HoleLayout, shape: HoleShape) -> i64 {
    layout.values().flatten().filter(|&&s| s == shape).count() as i64
}

pub fn answer(layout: &HoleLayout, query: FoldQuery) -> i64 {
    match query {
        FoldQuery::Total => layout.values().map(|v| v.len() as i64).sum(),
        FoldQuery::CountShape { shape } => count(layout, shape),
        FoldQuery::Diff { first, second } => count(layout, first) - count(layout, second),
    }
}

/// A sheet snapshot while unfolding: extent plus holes in sheet coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SheetView {
    pub grid_size: usize,
    pub extent: Extent,
    #[serde(with = "cell_pairs")]
    pub holes: BTreeMap<Cell, HoleShape>,
}

/// JSON object keys must be strings, so cell maps travel as pair lists.
mod cell_pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::{Cell, HoleShape};

    pub fn serialize<S: Serializer>(m: &BTreeMap<Cell, HoleShape>, s: S) -> Result<S::Ok, S::Error> {
        m.iter().collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<Cell, HoleShape>, D::Error> {
        Ok(Vec::<(Cell, HoleShape)>::deserialize(d)?.into_iter().collect())
    }
}

impl SheetView {
    /// Coverage matrix (`1` paper, `0` none).
    pub fn coverage_matrix(&self) -> Vec<String> {
        (0..self.grid_size)
            .map(|r| {
                (0..self.grid_size)
                    .map(|c| if self.extent.contains(r, c) { "1" } else { "0" })
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect()
    }

    /// Hole shape letters, `.` where there is no hole.
    pub fn shape_matrix(&self) -> Vec<String> {
        (0..self.grid_size)
            .map(|r| {
                (0..self.grid_size)
                    .map(|c| self.holes.get(&(r, c)).map_or('.', |s| s.letter()).to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPuzzle {
    pub grid_size: usize,
    pub folds: Vec<FoldAction>,
    pub punches: Vec<Punch>,
    pub query: FoldQuery,
}

impl FoldPuzzle {
    /// Folded states after 0, 1, ..., F folds (the last one punched).
    pub fn states(&self) -> Result<Vec<FoldState>> {
        let mut out = vec![FoldState::new(self.grid_size)?];
        for f in &self.folds {
            let next = out.last().expect("non-empty").apply(*f)?;
            out.push(next);
        }
        let mut last = out.pop().expect("non-empty");
        for p in &self.punches {
            last = last.punch(p.cell, p.shape)?;
        }
        out.push(last);
        Ok(out)
    }

    pub fn final_state(&self) -> Result<FoldState> {
        Ok(self.states()?.pop().expect("non-empty"))
    }

    pub fn layout(&self) -> Result<HoleLayout> {
        Ok(self.final_state()?.unfold())
    }

    pub fn answer(&self) -> Result<i64> {
        Ok(answer(&self.layout()?, self.query))
    }

    /// Sheet snapshots while unfolding: fully folded and punched first, then
    /// one per undone fold, ending with the flat sheet.
    pub fn unfolding_views(&self) -> Result<Vec<SheetView>> {
        let states = self.states()?;
        let punched: Vec<(Cell, HoleShape)> = {
            let last = states.last().expect("non-empty");
            let mut v = Vec::new();
            for p in &last.punches {
                let i = p.cell.0 * last.extent.cols + p.cell.1;
                for layer in &last.layers {
                    if let Some(orig) = layer[i] {
                        v.push((orig, p.shape));
                    }
                }
            }
            v
        };
        let mut views = Vec::new();
        for st in states.iter().rev() {
            let pos = st.positions();
            let holes = punched.iter().map(|(orig, s)| (pos[orig], *s)).collect();
            views.push(SheetView {
                grid_size: self.grid_size,
                extent: st.extent,
                holes,
            });
        }
        Ok(views)
    }

    pub fn question(&self) -> String {
        let n = self.grid_size;
        let mut q = format!("A square sheet of paper is divided into a {n}x{n} grid. ");
        let steps: Vec<String> = self
            .folds
            .iter()
            .enumerate()
            .map(|(i, f)| format!("({}) {}", i + 1, f.describe()))
            .collect();
        q += &format!("It is folded {} time(s): {}. ", self.folds.len(), steps.join("; "));
        let holes: Vec<String> = self
            .punches
            .iter()
            .map(|p| format!("a {} at row {}, column {}", p.shape, p.cell.0, p.cell.1))
            .collect();
        q += &format!(
            "Then holes are punched through all layers of the folded paper ({}; rows and columns count from the top-left of the folded paper, starting at 0). ",
            holes.join(", ")
        );
        q += "After the paper is completely unfolded, ";
        let t = self.query.text();
        q += &(t[..1].to_lowercase() + &t[1..]);
        q
    }
}

/// Random puzzle with `folds` folds on a `grid_size` sheet.
pub fn generate<R: Rng>(rng: &mut R, grid_size: usize, folds: usize) -> Result<FoldPuzzle> {
    if !(3..=8).contains(&grid_size) || !(1..=4).contains(&folds) {
        return Err(EnvError::Domain(format!(
            "paper folding needs grid 3..=8 and 1..=4 folds, got {grid_size} and {folds}"
        )));
    }
    let mut state = FoldState::new(grid_size)?;
    for _ in 0..folds {
        let legal = state.legal_folds();
        let action = *legal
            .choose(rng)
            .ok_or_else(|| EnvError::Domain(format!("no legal fold left on grid {grid_size}")))?;
        state = state.apply(action)?;
    }
    let cells: Vec<Cell> = (0..state.extent.rows)
        .flat_map(|r| (0..state.extent.cols).map(move |c| (r, c)))
        .collect();
    let k = rng.gen_range(1..=3.min(cells.len()));
    let chosen: Vec<Cell> = cells.choose_multiple(rng, k).copied().collect();
    let punches: Vec<Punch> = chosen
        .into_iter()
        .map(|cell| Punch {
            cell,
            shape: *HoleShape::ALL.choose(rng).expect("non-empty"),
        })
        .collect();
    let query = match rng.gen_range(0..3) {
        0 => FoldQuery::Total,
        1 => FoldQuery::CountShape {
            shape: *HoleShape::ALL.choose(rng).expect("non-empty"),
        },
        _ => {
            let pair: Vec<HoleShape> = HoleShape::ALL.choose_multiple(rng, 2).copied().collect();
            FoldQuery::Diff {
                first: pair[0],
                second: pair[1],
            }
        }
    };
    Ok(FoldPuzzle {
        grid_size,
        folds: state.fold_log,
        punches,
        query,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fold(direction: FoldDirection, line: usize) -> FoldAction {
        FoldAction { direction, line }
    }

    #[test]
    fn zero_folds_is_identity() {
        let s = FoldState::new(4).unwrap();
        assert_eq!(s.layers.len(), 1);
        for (i, c) in s.layers[0].iter().enumerate() {
            assert_eq!(*c, Some((i / 4, i % 4)));
        }
    }

    #[test]
    fn left_fold_stacks_two_layers_on_right_half() {
        let s = FoldState::new(4).unwrap().apply(fold(FoldDirection::LeftOver, 2)).unwrap();
        assert_eq!((s.extent.rows, s.extent.cols, s.extent.left), (4, 2, 2));
        assert_eq!(s.layers.len(), 2);
        // Explicit layer tracking: stationary (r, 2 + c), flap (r, 1 - c).
        for r in 0..4 {
            for c in 0..2 {
                assert_eq!(s.layers[0][r * 2 + c], Some((r, 2 + c)));
                assert_eq!(s.layers[1][r * 2 + c], Some((r, 1 - c)));
            }
        }
    }

    #[test]
    fn opposite_folds_double_layers_twice() {
        let s = FoldState::new(4).unwrap();
        let a = s.apply(fold(FoldDirection::LeftOver, 2)).unwrap();
        let b = a.apply(fold(FoldDirection::RightOver, 1)).unwrap();
        assert_eq!((a.layers.len(), b.layers.len()), (2, 4));
        assert_eq!(b.extent.cols, 1);
        assert_eq!(b.depth((0, 0)), 4);
    }

    #[test]
    fn uneven_fold_leaves_partial_layer() {
        let s = FoldState::new(5).unwrap().apply(fold(FoldDirection::LeftOver, 2)).unwrap();
        assert_eq!(s.extent.cols, 3);
        assert_eq!(s.depth((0, 0)), 2);
        assert_eq!(s.depth((0, 2)), 1);
        let bad = s.apply(fold(FoldDirection::LeftOver, 2));
        assert!(matches!(bad, Err(EnvError::Domain(_))));
    }

    #[test]
    fn punch_examples() {
        let s = FoldState::new(3).unwrap().punch((0, 0), HoleShape::Circle).unwrap();
        assert_eq!(s.unfold(), HoleLayout::from([((0, 0), vec![HoleShape::Circle])]));

        let s = FoldState::new(4)
            .unwrap()
            .apply(fold(FoldDirection::LeftOver, 2))
            .unwrap()
            .punch((0, 1), HoleShape::Star)
            .unwrap();
        let layout = s.unfold();
        assert_eq!(layout.len(), 2);
        assert_eq!(layout[&(0, 3)], vec![HoleShape::Star]);
        assert_eq!(layout[&(0, 0)], vec![HoleShape::Star]);

        assert!(s.punch((4, 0), HoleShape::Star).is_err());
        assert!(s.apply(fold(FoldDirection::TopOver, 1)).is_err());
    }

    #[test]
    fn unfolded_sheet_holds_every_hole() {
        let mut rng = crate::seed::rng(5);
        for _ in 0..20 {
            let p = generate(&mut rng, 6, 3).unwrap();
            let views = p.unfolding_views().unwrap();
            assert_eq!(views.len(), 4);
            let flat = views.last().unwrap();
            let layout = p.layout().unwrap();
            let holes: BTreeMap<Cell, HoleShape> = layout.iter().map(|(c, v)| (*c, v[0])).collect();
            assert_eq!(flat.holes, holes);
        }
    }

    #[test]
    fn answers_and_unknown_shape() {
        let layout = HoleLayout::from([
            ((0, 0), vec![HoleShape::Circle]),
            ((1, 0), vec![HoleShape::Circle]),
            ((2, 2), vec![HoleShape::Star]),
        ]);
        assert_eq!(answer(&HoleLayout::new(), FoldQuery::Total), 0);
        assert_eq!(answer(&layout, FoldQuery::CountShape { shape: HoleShape::Circle }), 2);
        assert_eq!(
            answer(
                &layout,
                FoldQuery::Diff {
                    first: HoleShape::Star,
                    second: HoleShape::Circle
                }
            ),
            -1
        );
        assert!(HoleShape::parse("hexagon").is_err());
    }
}
