//! Chain-of-thought construction in three world-model formats.
//!
//! A trace is built once per task as a list of pieces (prose, coordinates,
//! observed states) and then lowered to a format:
//!
//! | piece        | implicit        | verbal          | visual     |
//! |--------------|-----------------|-----------------|------------|
//! | text         | text            | text            | text       |
//! | coordinate   | mask token      | literal         | literal    |
//! | observation  | dropped         | `<matrix>` block| image      |
//! | picture      | dropped         | dropped         | image      |
//!
//! Maze and Sokoban states are verbalized through coordinates only, so their
//! intermediate states are pictures rather than observations.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::render::{BallView, MazeView, StateView};
use super::{CotError, Result};
use crate::envs::ball::Wall;
use crate::envs::cube::CubeColor;
use crate::envs::manip::{self, Query, QueryResult};
use crate::envs::maze::Move;
use crate::envs::paperfold::{self, FoldQuery, HoleShape};
use crate::envs::sokoban::{KeyKind, StepEffect, StepRole};
use crate::envs::{Answer, CountMode, TaskInstance, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WmFormat {
    Implicit,
    Verbal,
    Visual,
}

impl WmFormat {
    pub const ALL: [WmFormat; 3] = [WmFormat::Implicit, WmFormat::Verbal, WmFormat::Visual];

    pub fn name(self) -> &'static str {
        match self {
            WmFormat::Implicit => "implicit",
            WmFormat::Verbal => "verbal",
            WmFormat::Visual => "visual",
        }
    }
}

impl fmt::Display for WmFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WmFormat {
    type Err = CotError;

    fn from_str(s: &str) -> Result<Self> {
        WmFormat::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| CotError::Config(format!("unknown format '{s}' (expected implicit, verbal or visual)")))
    }
}

pub const MASK_TOKEN: &str = "[masked]";
pub const IMAGE_TOKEN: &str = "<image>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum CotSegment {
    Text(String),
    /// Path of the image relative to the dataset root (or `#k` before binding).
    ImageRef(String),
    VerbalMatrix(Vec<String>),
    MaskedPoint(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CotTrace {
    pub format: WmFormat,
    pub segments: Vec<CotSegment>,
}

impl CotTrace {
    /// Flat text with `<image>` placeholders and `<matrix>` blocks.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for s in &self.segments {
            match s {
                CotSegment::Text(t) | CotSegment::MaskedPoint(t) => out += t,
                CotSegment::ImageRef(_) => {
                    out += IMAGE_TOKEN;
                    out += "\n";
                }
                CotSegment::VerbalMatrix(rows) => {
                    out += "<matrix>\n";
                    for r in rows {
                        out += r;
                        out += "\n";
                    }
                    out += "</matrix>\n";
                }
            }
        }
        out
    }

    pub fn image_refs(&self) -> Vec<&str> {
        self.segments
            .iter()
            .filter_map(|s| match s {
                CotSegment::ImageRef(p) => Some(p.as_str()),
                _ => None,
            })
            .collect()
    }

    /// Intermediate-state observations (matrices and images), in order.
    pub fn observations(&self) -> Vec<&CotSegment> {
        self.segments
            .iter()
            .filter(|s| matches!(s, CotSegment::ImageRef(_) | CotSegment::VerbalMatrix(_)))
            .collect()
    }

    pub fn masked_points(&self) -> usize {
        self.segments.iter().filter(|s| matches!(s, CotSegment::MaskedPoint(_))).count()
    }

    /// Replaces the `k`-th image reference with `paths[k]`.
    pub fn bind_images(&mut self, paths: &[String]) -> Result<()> {
        let mut it = paths.iter();
        for s in &mut self.segments {
            if let CotSegment::ImageRef(p) = s {
                *p = it.next().ok_or_else(|| CotError::Config("fewer image paths than references".into()))?.clone();
            }
        }
        if it.next().is_some() {
            return Err(CotError::Config("more image paths than references".into()));
        }
        Ok(())
    }
}

/// A lowered trace plus the states its image references point to.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltCot {
    pub trace: CotTrace,
    pub images: Vec<StateView>,
}

#[derive(Clone, Copy)]
enum PointStyle {
    Tagged,
    Bare,
}

enum Piece {
    Text(String),
    Point(PointStyle, (usize, usize)),
    Obs(StateView),
    Picture(StateView),
}

#[derive(Default)]
struct Builder {
    pieces: Vec<Piece>,
}

impl Builder {
    fn text(&mut self, s: impl Into<String>) -> &mut Self {
        self.pieces.push(Piece::Text(s.into()));
        self
    }

    fn point(&mut self, style: PointStyle, c: (usize, usize)) -> &mut Self {
        self.pieces.push(Piece::Point(style, c));
        self
    }

    fn obs(&mut self, v: StateView) -> &mut Self {
        self.pieces.push(Piece::Obs(v));
        self
    }

    fn picture(&mut self, v: StateView) -> &mut Self {
        self.pieces.push(Piece::Picture(v));
        self
    }

    fn lower(self, format: WmFormat) -> BuiltCot {
        let mut segments: Vec<CotSegment> = Vec::new();
        let mut images = Vec::new();
        let push_text = |segments: &mut Vec<CotSegment>, t: String| match segments.last_mut() {
            Some(CotSegment::Text(prev)) => *prev += &t,
            _ => segments.push(CotSegment::Text(t)),
        };
        for p in self.pieces {
            match p {
                Piece::Text(t) => push_text(&mut segments, t),
                Piece::Point(style, (r, c)) => {
                    let (open, close) = match style {
                        PointStyle::Tagged => ("<point>", "</point>"),
                        PointStyle::Bare => ("", ""),
                    };
                    if format == WmFormat::Implicit {
                        segments.push(CotSegment::MaskedPoint(format!("{open}{MASK_TOKEN}{close}")));
                    } else {
                        push_text(&mut segments, format!("{open}({r}, {c}){close}"));
                    }
                }
                Piece::Obs(v) | Piece::Picture(v) if format == WmFormat::Visual => {
                    segments.push(CotSegment::ImageRef(format!("#{}", images.len())));
                    images.push(v);
                }
                Piece::Obs(v) if format == WmFormat::Verbal => segments.push(CotSegment::VerbalMatrix(v.to_matrix())),
                Piece::Obs(_) | Piece::Picture(_) => {}
            }
        }
        BuiltCot {
            trace: CotTrace { format, segments },
            images,
        }
    }
}

/// States shown to the solver alongside the question.
pub fn input_states(world: &World) -> Result<Vec<StateView>> {
    Ok(match world {
        World::PaperFolding(p) => vec![StateView::Sheet(p.unfolding_views()?.swap_remove(0))],
        World::MultihopManipulation(p) => vec![StateView::Scene(p.initial.clone())],
        World::BallTracking(p) => vec![StateView::Ball(BallView {
            scene: p.scene.clone(),
            segments: 0,
        })],
        World::Maze(p) => vec![StateView::Maze(MazeView {
            maze: p.maze.clone(),
            start: Some(p.start),
            goal: Some(p.goal),
            path: vec![],
        })],
        World::Sokoban(p) => vec![StateView::Sokoban(p.initial.clone())],
        World::Cube3View(p) => p.given_views().into_iter().map(|(_, v)| StateView::Cube(v)).collect(),
    })
}

/// The question with one `<image>` placeholder per input image.
pub fn prompt(inst: &TaskInstance, inputs: usize) -> String {
    format!("{}{}", format!("{IMAGE_TOKEN}\n").repeat(inputs), inst.question)
}

/// The literal the trace ends with (`Answer: ...`).
pub fn answer_literal(inst: &TaskInstance) -> Result<String> {
    Ok(match (&inst.answer, &inst.world) {
        (Answer::IntegerSet(set), World::Cube3View(p)) => match p.mode {
            CountMode::Possible => p.stack.project(p.query).count(p.color).to_string(),
            CountMode::AllPossible => set.iter().map(i64::to_string).collect::<Vec<_>>().join(", "),
        },
        (a, _) => a.to_string(),
    })
}

fn plural(n: usize, one: &str, many: &str) -> String {
    format!("{n} {}", if n == 1 { one } else { many })
}

pub fn build_cot(inst: &TaskInstance, format: WmFormat) -> Result<BuiltCot> {
    if format == WmFormat::Verbal && !inst.task.supports_verbal() {
        return Err(CotError::Config(format!("{} has no verbal world-model format", inst.task)));
    }
    let mut b = Builder::default();
    match &inst.world {
        World::PaperFolding(p) => paper_folding(&mut b, p)?,
        World::MultihopManipulation(p) => manipulation(&mut b, p)?,
        World::BallTracking(p) => ball(&mut b, p)?,
        World::Maze(p) => maze(&mut b, p)?,
        World::Sokoban(p) => sokoban(&mut b, p)?,
        World::Cube3View(p) => cube(&mut b, p)?,
    }
    b.text(format!("Answer: {}", answer_literal(inst)?));
    Ok(b.lower(format))
}

fn shape_counts(holes: impl Iterator<Item = HoleShape>) -> String {
    let mut counts = [0usize; 5];
    for s in holes {
        counts[HoleShape::ALL.iter().position(|&x| x == s).expect("listed")] += 1;
    }
    let parts: Vec<String> = HoleShape::ALL
        .iter()
        .zip(counts)
        .filter(|(_, n)| *n > 0)
        .map(|(s, n)| plural(n, s.name(), &format!("{}s", s.name())))
        .collect();
    parts.join(", ")
}

fn paper_folding(b: &mut Builder, p: &paperfold::FoldPuzzle) -> Result<()> {
    let views = p.unfolding_views()?;
    let f = p.folds.len();
    b.text(format!(
        "Start from the folded sheet with {} punched through it, and undo the folds in reverse order.\n",
        plural(views[0].holes.len(), "hole", "holes")
    ));
    for k in 1..=f {
        b.text(format!(
            "Unfold step {k}: undo \"{}\". The flap swings back across the fold line and every hole on it is mirrored, giving {}.\n",
            p.folds[f - k].describe(),
            plural(views[k].holes.len(), "hole", "holes")
        ));
        b.obs(StateView::Sheet(views[k].clone()));
    }
    let layout = p.layout()?;
    let flat = views.last().expect("non-empty");
    b.text(format!(
        "The sheet is fully unfolded with {}: {}.\n",
        plural(flat.holes.len(), "hole", "holes"),
        shape_counts(flat.holes.values().copied())
    ));
    let n = paperfold::answer(&layout, p.query);
    b.text(match p.query {
        FoldQuery::Total => format!("In total there are {n} holes.\n"),
        FoldQuery::CountShape { shape } => format!("There are {n} {shape} holes.\n"),
        FoldQuery::Diff { first, second } => format!(
            "{} {first} holes minus {} {second} holes gives {n}.\n",
            paperfold::count(&layout, first),
            paperfold::count(&layout, second)
        ),
    });
    Ok(())
}

fn manipulation(b: &mut Builder, p: &manip::ManipPuzzle) -> Result<()> {
    let scenes = p.scenes()?;
    b.text("Start from the scene in the image and apply the operations one at a time.\n");
    for (k, op) in p.ops.iter().enumerate() {
        b.text(format!(
            "Step {}: {} The scene now holds {}.\n",
            k + 1,
            op.describe(),
            plural(scenes[k + 1].objects.len(), "object", "objects")
        ));
        b.picture(StateView::Scene(scenes[k + 1].clone()));
    }
    let last = scenes.last().expect("non-empty");
    let letter = p.answer()?.to_string();
    b.text(match (p.query, p.result()?) {
        (Query::CountShape { shape }, QueryResult::Count(n)) => {
            let names: Vec<String> = last
                .objects
                .iter()
                .filter(|o| o.shape == shape)
                .map(|o| o.key().to_string())
                .collect();
            if names.is_empty() {
                format!("The final scene has no {}.\n", shape.plural())
            } else {
                format!("The final scene has {n} {}: {}.\n", shape.plural(), names.join(", "))
            }
        }
        (Query::DirectionBetween { a, b: other }, QueryResult::Direction(d)) => {
            let (pa, pb) = (last.find(a)?.pos, last.find(other)?.pos);
            let (dx, dz) = (pa.0 - pb.0, pa.1 - pb.1);
            let side_x = if dx >= 0 { "right" } else { "left" };
            let side_z = if dz >= 0 { "behind" } else { "in front" };
            format!(
                "In the final scene {a} is {} to the {side_x} and {} {side_z} relative to {other}; the larger offset points {}, which is option {letter}.\n",
                plural(dx.unsigned_abs() as usize, "unit", "units"),
                plural(dz.unsigned_abs() as usize, "unit", "units"),
                d.name()
            )
        }
        (Query::ObjectInDirection { of, dir }, QueryResult::Object(found)) => match found {
            Some(o) => format!(
                "Of the objects {} {of}, the nearest is {o}, which is option {letter}.\n",
                dir.phrase()
            ),
            None => format!("No object is {} {of}, so the answer is option {letter}.\n", dir.phrase()),
        },
        _ => return Err(CotError::Config("query and result disagree".into())),
    });
    Ok(())
}

fn heading(dx: f64, dy: f64) -> String {
    let v = if dy < 0.0 { Some("up") } else if dy > 0.0 { Some("down") } else { None };
    let h = if dx < 0.0 { Some("left") } else if dx > 0.0 { Some("right") } else { None };
    match (v, h) {
        (Some(v), Some(h)) => format!("{v} and to the {h}"),
        (Some(v), None) => v.into(),
        (None, Some(h)) => format!("to the {h}"),
        (None, None) => "nowhere".into(),
    }
}

fn ball(b: &mut Builder, p: &crate::envs::ball::BallPuzzle) -> Result<()> {
    let t = p.scene.simulate()?;
    let (mut dx, mut dy) = p.scene.unit_direction();
    b.text("The ball starts at the red dot and moves in the direction of the green arrow.\n");
    for (k, ev) in t.reflections.iter().enumerate() {
        let flipped = match ev.wall {
            Wall::Left | Wall::Right => "horizontal",
            Wall::Top | Wall::Bottom => "vertical",
        };
        b.text(format!(
            "It travels {} and hits the {} wall, where its {flipped} velocity reverses.\n",
            heading(dx, dy),
            ev.wall.name()
        ));
        b.picture(StateView::Ball(BallView {
            scene: p.scene.clone(),
            segments: k + 1,
        }));
        match ev.wall {
            Wall::Left | Wall::Right => dx = -dx,
            Wall::Top | Wall::Bottom => dy = -dy,
        }
    }
    b.text(format!(
        "It then travels {} and leaves through hole {} in the top wall.\n",
        heading(dx, dy),
        t.hole
    ));
    b.picture(StateView::Ball(BallView {
        scene: p.scene.clone(),
        segments: t.reflections.len() + 1,
    }));
    Ok(())
}

fn maze(b: &mut Builder, p: &crate::envs::maze::MazePuzzle) -> Result<()> {
    let path = p.path()?;
    b.text("Start at ").point(PointStyle::Tagged, p.start).text(".\n");
    let mut from = 0;
    for i in p.turning_points()? {
        let m = Move::between(path[from], path[from + 1]).expect("adjacent");
        b.text(format!("Move {} {} to ", m.name(), plural(i - from, "step", "steps")))
            .point(PointStyle::Tagged, path[i])
            .text(".\n");
        b.picture(StateView::Maze(MazeView {
            maze: p.maze.clone(),
            start: Some(p.start),
            goal: Some(p.goal),
            path: path[..=i].to_vec(),
        }));
        from = i;
    }
    b.text(format!("The goal is reached after {}.\n", plural(path.len() - 1, "move", "moves")));
    Ok(())
}

fn sokoban(b: &mut Builder, p: &crate::envs::sokoban::SokobanPuzzle) -> Result<()> {
    let keys = p.key_steps();
    let bare = PointStyle::Bare;
    let mut s = p.initial.clone();
    b.text("The player starts at ")
        .point(bare, s.player)
        .text(", the box at ")
        .point(bare, s.box_cell)
        .text(" and the target at ")
        .point(bare, s.target)
        .text(".\n");
    let aug = &p.augmented;
    let (mut i, mut sol) = (0, 0);
    while i < aug.len() {
        let first = aug[i];
        if first.role == StepRole::Solution {
            if let Some(k) = keys.iter().find(|k| k.index == sol && k.kind != KeyKind::Final) {
                let dir = k.push.expect("push starts here").name();
                b.text(match k.kind {
                    KeyKind::Contact => format!("The player is now next to the box and can push it {dir}.\n"),
                    _ => format!("The box has to change direction: the player lines up to push it {dir}.\n"),
                });
                b.picture(StateView::Sokoban(s.clone()));
            }
        }
        let effect = s.step(first.mv).1;
        let mut run = 0;
        while i < aug.len() && aug[i].role == first.role && aug[i].mv == first.mv {
            let (next, e) = s.step(aug[i].mv);
            if e != effect {
                break;
            }
            // Key states interrupt a solution run.
            if run > 0 && first.role == StepRole::Solution && keys.iter().any(|k| k.index == sol && k.kind != KeyKind::Final) {
                break;
            }
            s = next;
            run += 1;
            i += 1;
            if first.role == StepRole::Solution {
                sol += 1;
            }
        }
        let dir = first.mv.name();
        let times = plural(run, "time", "times");
        match (first.role, effect) {
            (StepRole::Solution, StepEffect::Push) => {
                b.text(format!("Push the box {dir} {times}; it is now at ")).point(bare, s.box_cell).text(".\n");
            }
            (StepRole::Solution, _) => {
                b.text(format!("Move {dir} {times} to ")).point(bare, s.player).text(".\n");
            }
            (StepRole::Detour, _) => {
                b.text(format!("Try moving {dir} {times} to ")).point(bare, s.player).text(".\n");
            }
            (StepRole::Bump, _) => {
                b.text(format!("Moving {dir} again runs into a wall, so the player stays at "))
                    .point(bare, s.player)
                    .text(". This way leads nowhere; turn back.\n");
            }
            (StepRole::Backtrack, _) => {
                b.text(format!("Go back {dir} {times} to ")).point(bare, s.player).text(".\n");
            }
        }
    }
    let detoured = aug.len() != p.solution.len();
    b.text("The box is on the target.\n");
    b.picture(StateView::Sokoban(s));
    b.text(format!(
        "The shortest solution takes {}{}.\n",
        plural(p.solution.len(), "move", "moves"),
        if detoured { "; the detours above do not count" } else { "" }
    ));
    Ok(())
}

fn cube(b: &mut Builder, p: &crate::envs::cube::CubePuzzle) -> Result<()> {
    let amb = p.ambiguity()?;
    let bit = match p.color {
        CubeColor::Red => 2,
        _ => 4,
    };
    let certain = amb.cell_states.iter().filter(|&&m| m == bit).count();
    let maybe = amb.cell_states.iter().filter(|&&m| m != bit && m & bit != 0).count();
    let given: Vec<&str> = p.given.iter().map(|v| v.name()).collect();
    b.text(format!(
        "Reconstruct the stack from the {} views and project it to the {} view. Cells that the given views do not determine are marked gray.\n",
        given.join(", "),
        p.query.name()
    ));
    b.obs(StateView::Cube(amb.marked_view()));
    let counts: Vec<String> = amb.counts.iter().map(i64::to_string).collect();
    b.text(format!(
        "In the {} view, {} certainly {} and {} could also be {}, so the possible counts are {}.\n",
        p.query.name(),
        plural(certain, "cell is", "cells are"),
        p.color.name(),
        plural(maybe, "cell", "more cells"),
        p.color.name(),
        counts.join(", ")
    ));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{generate, Params, Split, Task};

    /// Occurrences of "(digits, digits)", spaces allowed inside.
    fn coordinate_literals(s: &str) -> usize {
        s.match_indices('(')
            .filter(|(i, _)| {
                let rest = &s[i + 1..];
                let Some(close) = rest.find(')') else { return false };
                let inner: String = rest[..close].chars().filter(|c| !c.is_whitespace()).collect();
                inner.split_once(',').is_some_and(|(a, c)| {
                    [a, c].iter().all(|t| !t.is_empty() && t.chars().all(|x| x.is_ascii_digit()))
                })
            })
            .count()
    }

    #[test]
    fn implicit_traces_leak_no_state() {
        for task in Task::ALL {
            for seed in 0..4 {
                let inst = generate(task, Split::Train, seed, &Params::default()).unwrap();
                let t = build_cot(&inst, WmFormat::Implicit).unwrap().trace.text();
                assert_eq!(coordinate_literals(&t), 0, "{task}: {t}");
                assert!(!t.contains("<matrix>") && !t.contains(IMAGE_TOKEN), "{task}");
                assert!(t.ends_with(&format!("Answer: {}", answer_literal(&inst).unwrap())));
            }
        }
    }

    #[test]
    fn mask_tokens_replace_coordinates_one_for_one() {
        for task in [Task::Maze, Task::Sokoban] {
            for seed in 0..5 {
                let inst = generate(task, Split::Test, seed, &Params::default()).unwrap();
                let implicit = build_cot(&inst, WmFormat::Implicit).unwrap().trace;
                let verbal = build_cot(&inst, WmFormat::Verbal).unwrap().trace.text();
                let literal = coordinate_literals(&verbal);
                assert!(literal >= 2);
                assert_eq!(implicit.masked_points(), literal, "{task} seed {seed}");
            }
        }
    }

    #[test]
    fn verbal_is_rejected_for_visual_only_tasks() {
        for task in [Task::MultihopManipulation, Task::BallTracking] {
            let inst = generate(task, Split::Train, 1, &Params::default()).unwrap();
            assert!(matches!(build_cot(&inst, WmFormat::Verbal), Err(CotError::Config(_))));
        }
    }

    #[test]
    fn cube_visual_trace_has_one_marked_view() {
        let inst = generate(Task::Cube3View, Split::Train, 2, &Params::default()).unwrap();
        let built = build_cot(&inst, WmFormat::Visual).unwrap();
        assert_eq!(built.images.len(), 1);
        assert_eq!(built.trace.image_refs().len(), 1);
    }

    #[test]
    fn bind_images_checks_counts() {
        let inst = generate(Task::Maze, Split::Train, 3, &Params::default()).unwrap();
        let mut built = build_cot(&inst, WmFormat::Visual).unwrap();
        let paths: Vec<String> = (0..built.images.len()).map(|k| format!("img{k}.png")).collect();
        assert!(built.trace.bind_images(&paths[1..]).is_err());
        let mut t = built.trace.clone();
        t.bind_images(&paths).unwrap();
        assert_eq!(t.image_refs(), paths.iter().map(String::as_str).collect::<Vec<_>>());
        built.trace = t;
    }
}
