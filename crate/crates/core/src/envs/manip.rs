//! Multi-hop manipulation of colored objects on an integer ground lattice.
//!
//! The camera frame is fixed: `+x` is right, `+z` is behind (away from the
//! camera), `-z` is front. Objects are named by their unique color/shape pair.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{option_letter, Answer, EnvError, Result, REJECTION_BUDGET};

pub const LATTICE: i32 = 8;
pub const MAX_OBJECTS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Cube,
    Sphere,
    Cylinder,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Cube, Shape::Sphere, Shape::Cylinder];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Cube => "cube",
            Shape::Sphere => "sphere",
            Shape::Cylinder => "cylinder",
        }
    }

    pub fn plural(self) -> &'static str {
        match self {
            Shape::Cube => "cubes",
            Shape::Sphere => "spheres",
            Shape::Cylinder => "cylinders",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Color {
    Red,
    Blue,
    Green,
    Yellow,
    Purple,
    Cyan,
    Black,
    Gray,
}

impl Color {
    pub const ALL: [Color; 8] = [
        Color::Red,
        Color::Blue,
        Color::Green,
        Color::Yellow,
        Color::Purple,
        Color::Cyan,
        Color::Black,
        Color::Gray,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Blue => "blue",
            Color::Green => "green",
            Color::Yellow => "yellow",
            Color::Purple => "purple",
            Color::Cyan => "cyan",
            Color::Black => "black",
            Color::Gray => "gray",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Left,
    Right,
    Front,
    Behind,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Left, Direction::Right, Direction::Front, Direction::Behind];

    pub fn name(self) -> &'static str {
        match self {
            Direction::Left => "left",
            Direction::Right => "right",
            Direction::Front => "front",
            Direction::Behind => "behind",
        }
    }

    pub fn step(self) -> (i32, i32) {
        match self {
            Direction::Left => (-1, 0),
            Direction::Right => (1, 0),
            Direction::Front => (0, -1),
            Direction::Behind => (0, 1),
        }
    }

    /// `p` lies strictly on this side of `of`.
    pub fn contains(self, of: (i32, i32), p: (i32, i32)) -> bool {
        match self {
            Direction::Left => p.0 < of.0,
            Direction::Right => p.0 > of.0,
            Direction::Front => p.1 < of.1,
            Direction::Behind => p.1 > of.1,
        }
    }

    pub fn phrase(self) -> &'static str {
        match self {
            Direction::Left => "to the left of",
            Direction::Right => "to the right of",
            Direction::Front => "in front of",
            Direction::Behind => "behind",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjRef {
    pub color: Color,
    pub shape: Shape,
}

impl fmt::Display for ObjRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "the {} {}", self.color.name(), self.shape.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Object {
    pub shape: Shape,
    pub color: Color,
    /// `(x, z)` on the lattice.
    pub pos: (i32, i32),
}

impl Object {
    pub fn key(&self) -> ObjRef {
        ObjRef {
            color: self.color,
            shape: self.shape,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManipScene {
    /// Kept sorted by `(x, z)`.
    pub objects: Vec<Object>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Placement {
    Between { a: ObjRef, b: ObjRef },
    Beside { of: ObjRef, dir: Direction },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Op {
    ChangeColor { target: ObjRef, to: Color },
    ChangeShape { target: ObjRef, to: Shape },
    SwapColors { a: ObjRef, b: ObjRef },
    SwapShapes { a: ObjRef, b: ObjRef },
    Add { color: Color, shape: Shape, at: Placement },
    Remove { target: ObjRef },
}

impl Op {
    pub fn describe(&self) -> String {
        match self {
            Op::ChangeColor { target, to } => format!("Change the color of {target} to {}.", to.name()),
            Op::ChangeShape { target, to } => format!("Change {target} into a {}.", to.name()),
            Op::SwapColors { a, b } => format!("Swap the colors of {a} and {b}."),
            Op::SwapShapes { a, b } => format!("Swap the shapes of {a} and {b}."),
            Op::Add { color, shape, at } => {
                let what = format!("a {} {}", color.name(), shape.name());
                match at {
                    Placement::Between { a, b } => format!("Place {what} between {a} and {b}."),
                    Placement::Beside { of, dir } => format!("Place {what} {} {of}.", dir.phrase()),
                }
            }
            Op::Remove { target } => format!("Remove {target}."),
        }
    }
}

impl ManipScene {
    pub fn new(mut objects: Vec<Object>) -> Result<Self> {
        objects.sort_by_key(|o| o.pos);
        let s = ManipScene { objects };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.objects.len() > MAX_OBJECTS {
            return Err(EnvError::Domain(format!("{} objects exceed {MAX_OBJECTS}", self.objects.len())));
        }
        for (i, a) in self.objects.iter().enumerate() {
            if !(0..LATTICE).contains(&a.pos.0) || !(0..LATTICE).contains(&a.pos.1) {
                return Err(EnvError::Domain(format!("{} is off the lattice", a.key())));
            }
            for b in &self.objects[i + 1..] {
                if a.key() == b.key() {
                    return Err(EnvError::Domain(format!("{} appears twice", a.key())));
                }
                if a.pos == b.pos {
                    return Err(EnvError::Domain(format!("two objects at {:?}", a.pos)));
                }
            }
        }
        Ok(())
    }

    pub fn find(&self, r: ObjRef) -> Result<&Object> {
        self.objects
            .iter()
            .find(|o| o.key() == r)
            .ok_or_else(|| EnvError::Resolution(format!("no {} in the scene", r.to_string().trim_start_matches("the "))))
    }

    fn index(&self, r: ObjRef) -> Result<usize> {
        let o = self.find(r)?;
        Ok(self.objects.iter().position(|x| x == o).expect("found"))
    }

    pub fn occupied(&self, p: (i32, i32)) -> bool {
        self.objects.iter().any(|o| o.pos == p)
    }

    pub fn resolve(&self, at: Placement) -> Result<(i32, i32)> {
        match at {
            Placement::Between { a, b } => {
                let (pa, pb) = (self.find(a)?.pos, self.find(b)?.pos);
                let (sx, sz) = (pa.0 + pb.0, pa.1 + pb.1);
                let mut best: Option<((i32, i32, i32), (i32, i32))> = None;
                for x in 0..LATTICE {
                    for z in 0..LATTICE {
                        if self.occupied((x, z)) {
                            continue;
                        }
                        // Doubled coordinates keep the midpoint integral.
                        let d = (2 * x - sx).pow(2) + (2 * z - sz).pow(2);
                        let key = (d, x, z);
                        if best.is_none_or(|(k, _)| key < k) {
                            best = Some((key, (x, z)));
                        }
                    }
                }
                best.map(|(_, p)| p)
                    .ok_or_else(|| EnvError::Placement(format!("no free point between {a} and {b}")))
            }
            Placement::Beside { of, dir } => {
                let mut p = self.find(of)?.pos;
                let (dx, dz) = dir.step();
                loop {
                    p = (p.0 + dx, p.1 + dz);
                    if !(0..LATTICE).contains(&p.0) || !(0..LATTICE).contains(&p.1) {
                        return Err(EnvError::Placement(format!("no free point {} {of}", dir.phrase())));
                    }
                    if !self.occupied(p) {
                        return Ok(p);
                    }
                }
            }
        }
    }

    pub fn apply(&self, op: &Op) -> Result<ManipScene> {
        let mut objects = self.objects.clone();
        match *op {
            Op::ChangeColor { target, to } => objects[self.index(target)?].color = to,
            Op::ChangeShape { target, to } => objects[self.index(target)?].shape = to,
            Op::SwapColors { a, b } => {
                let (i, j) = (self.index(a)?, self.index(b)?);
                let c = objects[i].color;
                objects[i].color = objects[j].color;
                objects[j].color = c;
            }
            Op::SwapShapes { a, b } => {
                let (i, j) = (self.index(a)?, self.index(b)?);
                let s = objects[i].shape;
                objects[i].shape = objects[j].shape;
                objects[j].shape = s;
            }
            Op::Add { color, shape, at } => {
                let pos = self.resolve(at)?;
                objects.push(Object { shape, color, pos });
            }
            Op::Remove { target } => {
                objects.remove(self.index(target)?);
            }
        }
        ManipScene::new(objects)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Query {
    CountShape { shape: Shape },
    /// Where `a` is relative to `b`.
    DirectionBetween { a: ObjRef, b: ObjRef },
    /// Nearest object strictly on the `dir` side of `of`.
    ObjectInDirection { of: ObjRef, dir: Direction },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryResult {
    Count(i64),
    Direction(Direction),
    Object(Option<ObjRef>),
}

pub fn evaluate(scene: &ManipScene, q: Query) -> Result<QueryResult> {
    match q {
        Query::CountShape { shape } => Ok(QueryResult::Count(
            scene.objects.iter().filter(|o| o.shape == shape).count() as i64,
        )),
        Query::DirectionBetween { a, b } => {
            let (pa, pb) = (scene.find(a)?.pos, scene.find(b)?.pos);
            let (dx, dz) = (pa.0 - pb.0, pa.1 - pb.1);
            if dx.abs() == dz.abs() {
                return Err(EnvError::Domain(format!("{a} is diagonal to {b}; no dominant axis")));
            }
            Ok(QueryResult::Direction(if dx.abs() > dz.abs() {
                if dx > 0 { Direction::Right } else { Direction::Left }
            } else if dz > 0 {
                Direction::Behind
            } else {
                Direction::Front
            }))
        }
        Query::ObjectInDirection { of, dir } => {
            let p = scene.find(of)?.pos;
            let mut cands: Vec<(i32, ObjRef)> = scene
                .objects
                .iter()
                .filter(|o| dir.contains(p, o.pos))
                .map(|o| ((o.pos.0 - p.0).pow(2) + (o.pos.1 - p.1).pow(2), o.key()))
                .collect();
            cands.sort();
            if cands.len() > 1 && cands[0].0 == cands[1].0 {
                return Err(EnvError::Domain(format!("two objects equally near {} {of}", dir.phrase())));
            }
            Ok(QueryResult::Object(cands.first().map(|c| c.1)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManipPuzzle {
    pub initial: ManipScene,
    pub ops: Vec<Op>,
    pub query: Query,
    /// Multiple-choice options for object queries (last one is "none").
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
}

pub const NONE_OPTION: &str = "none";

impl ManipPuzzle {
    /// Scenes after 0, 1, ..., k operations.
    pub fn scenes(&self) -> Result<Vec<ManipScene>> {
        let mut out = vec![self.initial.clone()];
        for op in &self.ops {
            let next = out.last().expect("non-empty").apply(op)?;
            out.push(next);
        }
        Ok(out)
    }

    pub fn final_scene(&self) -> Result<ManipScene> {
        Ok(self.scenes()?.pop().expect("non-empty"))
    }

    pub fn result(&self) -> Result<QueryResult> {
        evaluate(&self.final_scene()?, self.query)
    }

    pub fn answer(&self) -> Result<Answer> {
        Ok(match self.result()? {
            QueryResult::Count(n) => Answer::Integer(n),
            QueryResult::Direction(d) => {
                Answer::Choice(option_letter(Direction::ALL.iter().position(|&x| x == d).expect("listed")))
            }
            QueryResult::Object(o) => {
                let name = o.map_or(NONE_OPTION.to_string(), |r| r.to_string());
                let i = self
                    .options
                    .iter()
                    .position(|x| *x == name)
                    .ok_or_else(|| EnvError::Domain(format!("'{name}' is not among the options")))?;
                Answer::Choice(option_letter(i))
            }
        })
    }

    fn choices(&self) -> Vec<String> {
        match self.query {
            Query::CountShape { .. } => vec![],
            Query::DirectionBetween { .. } => Direction::ALL.iter().map(|d| d.name().to_string()).collect(),
            Query::ObjectInDirection { .. } => self.options.clone(),
        }
    }

    pub fn question(&self) -> String {
        let mut q = String::from(
            "The image shows a scene viewed from above on an 8x8 ground grid; right is +x and behind (away from the camera) is toward the top of the image. \
             Objects are identified by color and shape. Apply these operations in order:",
        );
        for (i, op) in self.ops.iter().enumerate() {
            q += &format!(" ({}) {}", i + 1, op.describe());
        }
        q += " ";
        q += &match self.query {
            Query::CountShape { shape } => format!("How many {} are in the final scene?", shape.plural()),
            Query::DirectionBetween { a, b } => {
                let a = a.to_string();
                format!(
                    "In the final scene, in which direction is {} from {b}, judged by the larger of the two axis offsets?",
                    a
                )
            }
            Query::ObjectInDirection { of, dir } => {
                format!("In the final scene, which object is nearest to {of} among those {} it?", dir.phrase())
            }
        };
        let choices = self.choices();
        if !choices.is_empty() {
            let listed: Vec<String> = choices
                .iter()
                .enumerate()
                .map(|(i, c)| format!("{}. {c}", option_letter(i)))
                .collect();
            q += &format!(" Options: {}.", listed.join(" "));
        }
        q
    }
}

fn random_ref<R: Rng>(scene: &ManipScene, rng: &mut R) -> ObjRef {
    scene.objects.choose(rng).expect("non-empty scene").key()
}

fn random_op<R: Rng>(scene: &ManipScene, rng: &mut R) -> Op {
    let a = random_ref(scene, rng);
    let b = random_ref(scene, rng);
    match rng.gen_range(0..6) {
        0 => Op::ChangeColor {
            target: a,
            to: *Color::ALL.choose(rng).expect("non-empty"),
        },
        1 => Op::ChangeShape {
            target: a,
            to: *Shape::ALL.choose(rng).expect("non-empty"),
        },
        2 => Op::SwapColors { a, b },
        3 => Op::SwapShapes { a, b },
        4 => Op::Add {
            color: *Color::ALL.choose(rng).expect("non-empty"),
            shape: *Shape::ALL.choose(rng).expect("non-empty"),
            at: if rng.gen_bool(0.5) {
                Placement::Between { a, b }
            } else {
                Placement::Beside {
                    of: a,
                    dir: *Direction::ALL.choose(rng).expect("non-empty"),
                }
            },
        },
        _ => Op::Remove { target: a },
    }
}

/// Ops that change nothing or name the same object twice are not useful.
fn meaningful(scene: &ManipScene, op: &Op) -> bool {
    match *op {
        Op::ChangeColor { target, to } => target.color != to,
        Op::ChangeShape { target, to } => target.shape != to,
        Op::SwapColors { a, b } => a.color != b.color,
        Op::SwapShapes { a, b } => a.shape != b.shape,
        Op::Add { at: Placement::Between { a, b }, .. } => a != b,
        Op::Remove { .. } => scene.objects.len() > 1,
        _ => true,
    }
}

fn random_scene<R: Rng>(rng: &mut R, count: usize) -> ManipScene {
    let mut keys: Vec<ObjRef> = Color::ALL
        .iter()
        .flat_map(|&color| Shape::ALL.iter().map(move |&shape| ObjRef { color, shape }))
        .collect();
    keys.shuffle(rng);
    let mut cells: Vec<(i32, i32)> = (0..LATTICE).flat_map(|x| (0..LATTICE).map(move |z| (x, z))).collect();
    cells.shuffle(rng);
    let objects = keys
        .into_iter()
        .zip(cells)
        .take(count)
        .map(|(k, pos)| Object {
            shape: k.shape,
            color: k.color,
            pos,
        })
        .collect();
    ManipScene::new(objects).expect("distinct keys and cells")
}

pub fn generate<R: Rng>(rng: &mut R, objects: usize, operations: usize) -> Result<ManipPuzzle> {
    if !(1..=MAX_OBJECTS).contains(&objects) || operations > 8 {
        return Err(EnvError::Domain(format!("{objects} objects / {operations} operations")));
    }
    let initial = random_scene(rng, objects);
    let mut scene = initial.clone();
    let mut ops = Vec::with_capacity(operations);
    let mut budget = REJECTION_BUDGET;
    while ops.len() < operations {
        if budget == 0 {
            return Err(EnvError::Placement("no valid operation within the rejection budget".into()));
        }
        budget -= 1;
        let op = random_op(&scene, rng);
        if !meaningful(&scene, &op) {
            continue;
        }
        // Any uniqueness or placement failure is a rejection.
        if let Ok(next) = scene.apply(&op) {
            scene = next;
            ops.push(op);
        }
    }
    for _ in 0..REJECTION_BUDGET {
        let query = match rng.gen_range(0..3) {
            0 => Query::CountShape {
                shape: *Shape::ALL.choose(rng).expect("non-empty"),
            },
            1 => Query::DirectionBetween {
                a: random_ref(&scene, rng),
                b: random_ref(&scene, rng),
            },
            _ => Query::ObjectInDirection {
                of: random_ref(&scene, rng),
                dir: *Direction::ALL.choose(rng).expect("non-empty"),
            },
        };
        if let Query::DirectionBetween { a, b } = query {
            if a == b {
                continue;
            }
        }
        let Ok(result) = evaluate(&scene, query) else { continue };
        let mut options = vec![];
        if let (Query::ObjectInDirection { of, .. }, QueryResult::Object(found)) = (query, &result) {
            let mut others: Vec<String> = scene
                .objects
                .iter()
                .map(|o| o.key())
                .filter(|k| *k != of && Some(*k) != *found)
                .map(|k| k.to_string())
                .collect();
            others.shuffle(rng);
            let want = if found.is_some() { 2 } else { 3 };
            options = others.into_iter().take(want).collect();
            if let Some(k) = found {
                options.push(k.to_string());
            }
            options.shuffle(rng);
            options.push(NONE_OPTION.to_string());
        }
        return Ok(ManipPuzzle {
            initial,
            ops,
            query,
            options,
        });
    }
    Err(EnvError::Domain("no unambiguous query within the rejection budget".into()))
}
