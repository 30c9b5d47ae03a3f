//! The six task worlds: exact simulators, seeded generators and solver
//! oracles. Every generator is a pure function of `(seed, params)`.

pub mod ball;
pub mod cube;
pub mod manip;
pub mod maze;
pub mod paperfold;
pub mod sokoban;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

/// Resampling attempts before a generator gives up.
pub const REJECTION_BUDGET: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unresolved reference: {0}")]
    Resolution(String),
    #[error("no free placement: {0}")]
    Placement(String),
    #[error("degenerate trajectory: {0}")]
    Degenerate(String),
    #[error("runaway trajectory: {0}")]
    Runaway(String),
    #[error("unsolvable: {0}")]
    Unsolvable(String),
    #[error("inconsistent views: {0}")]
    Inconsistent(String),
    #[error("generation failed for {task} (seed {seed:#x}): {reason}")]
    Generation { task: Task, seed: u64, reason: String },
}

pub type Result<T> = std::result::Result<T, EnvError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    PaperFolding,
    MultihopManipulation,
    BallTracking,
    Maze,
    Sokoban,
    Cube3View,
}

impl Task {
    pub const ALL: [Task; 6] = [
        Task::PaperFolding,
        Task::MultihopManipulation,
        Task::BallTracking,
        Task::Maze,
        Task::Sokoban,
        Task::Cube3View,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::PaperFolding => "paper_folding",
            Task::MultihopManipulation => "multihop_manipulation",
            Task::BallTracking => "ball_tracking",
            Task::Maze => "maze",
            Task::Sokoban => "sokoban",
            Task::Cube3View => "cube_3view",
        }
    }

    /// Verbal states make little sense for free-form scenes and continuous
    /// trajectories, so those two tasks have no verbal format.
    pub fn supports_verbal(self) -> bool {
        !matches!(self, Task::MultihopManipulation | Task::BallTracking)
    }

    /// Test-split size of the reference benchmark.
    pub fn test_target(self) -> usize {
        match self {
            Task::BallTracking => 1024,
            _ => 480,
        }
    }

    pub(crate) fn stream(self) -> u32 {
        Task::ALL.iter().position(|&t| t == self).expect("listed") as u32
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| EnvError::Domain(format!("unknown task '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            _ => Err(EnvError::Domain(format!("unknown split '{s}'"))),
        }
    }
}

/// Whether an integer-set answer asks for one possible value or all of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    Possible,
    AllPossible,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Answer {
    Integer(i64),
    Choice(String),
    IntegerSet(BTreeSet<i64>),
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::Integer(v) => write!(f, "{v}"),
            Answer::Choice(c) => f.write_str(c),
            Answer::IntegerSet(s) => {
                let items: Vec<String> = s.iter().map(i64::to_string).collect();
                write!(f, "{{{}}}", items.join(", "))
            }
        }
    }
}

/// Difficulty record. Unset fields in a request are drawn by the generator;
/// every emitted instance has the fields of its task filled in.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objects: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stack_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count_mode: Option<CountMode>,
}

impl Params {
    /// Stable `name=value` listing used as the stratum key in reports.
    pub fn stratum(&self) -> String {
        let mut parts = BTreeMap::new();
        let mut put = |k: &str, v: Option<usize>| {
            if let Some(v) = v {
                parts.insert(k.to_string(), v.to_string());
            }
        };
        put("grid_size", self.grid_size);
        put("folds", self.folds);
        put("objects", self.objects);
        put("operations", self.operations);
        put("holes", self.holes);
        put("stack_size", self.stack_size);
        if let Some(m) = self.count_mode {
            parts.insert("count_mode".into(), format!("{m:?}").to_lowercase());
        }
        if parts.is_empty() {
            return "default".into();
        }
        parts.into_iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",")
    }
}

/// Task-specific solved world, enough to rebuild every state of the CoT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", content = "puzzle", rename_all = "snake_case")]
pub enum World {
    PaperFolding(paperfold::FoldPuzzle),
    MultihopManipulation(manip::ManipPuzzle),
    BallTracking(ball::BallPuzzle),
    Maze(maze::MazePuzzle),
    Sokoban(sokoban::SokobanPuzzle),
    Cube3View(cube::CubePuzzle),
}

impl World {
    pub fn task(&self) -> Task {
        match self {
            World::PaperFolding(_) => Task::PaperFolding,
            World::MultihopManipulation(_) => Task::MultihopManipulation,
            World::BallTracking(_) => Task::BallTracking,
            World::Maze(_) => Task::Maze,
            World::Sokoban(_) => Task::Sokoban,
            World::Cube3View(_) => Task::Cube3View,
        }
    }

    /// Re-runs the task oracle.
    pub fn solve(&self) -> Result<Answer> {
        match self {
            World::PaperFolding(p) => p.answer().map(Answer::Integer),
            World::MultihopManipulation(p) => p.answer(),
            World::BallTracking(p) => p.answer(),
            World::Maze(p) => p.answer(),
            World::Sokoban(p) => p.answer(),
            World::Cube3View(p) => p.answer(),
        }
    }

    pub fn question(&self) -> String {
        match self {
            World::PaperFolding(p) => p.question(),
            World::MultihopManipulation(p) => p.question(),
            World::BallTracking(p) => p.question(),
            World::Maze(p) => p.question(),
            World::Sokoban(p) => p.question(),
            World::Cube3View(p) => p.question(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub id: String,
    pub task: Task,
    pub split: Split,
    pub params: Params,
    pub question: String,
    pub answer: Answer,
    pub seed: u64,
    #[serde(default)]
    pub input_images: Vec<String>,
    pub world: World,
}

impl TaskInstance {
    /// The recorded answer agrees with a fresh oracle run.
    pub fn reproduce(&self) -> Result<bool> {
        let again = generate(self.task, self.split, self.seed, &self.params)?;
        Ok(again.answer == self.answer && again.world == self.world)
    }
}

fn draw(rng: &mut ChaCha8Rng, fixed: Option<usize>, lo: usize, hi: usize) -> usize {
    fixed.unwrap_or_else(|| rng.gen_range(lo..=hi))
}

fn check_range(name: &str, v: usize, lo: usize, hi: usize) -> Result<()> {
    if (lo..=hi).contains(&v) {
        Ok(())
    } else {
        Err(EnvError::Domain(format!("{name} = {v} outside {lo}..={hi}")))
    }
}

/// Fills in the unset difficulty fields for `task`, checking set ones.
pub fn resolve_params(task: Task, split: Split, seed: u64, request: &Params) -> Result<Params> {
    let mut rng = seed::rng(seed::derive(seed, 0, task.stream()));
    let r = request;
    let mut p = Params::default();
    match task {
        Task::PaperFolding => {
            let (g, f) = match split {
                Split::Test => (r.grid_size.unwrap_or(8), r.folds.unwrap_or(4)),
                Split::Train => (draw(&mut rng, r.grid_size, 3, 8), draw(&mut rng, r.folds, 1, 4)),
            };
            check_range("grid_size", g, 3, 8)?;
            check_range("folds", f, 1, 4)?;
            p.grid_size = Some(g);
            p.folds = Some(f);
        }
        Task::MultihopManipulation => {
            let o = draw(&mut rng, r.objects, 3, 6);
            let k = draw(&mut rng, r.operations, 1, 5);
            check_range("objects", o, 3, 6)?;
            check_range("operations", k, 1, 5)?;
            p.objects = Some(o);
            p.operations = Some(k);
        }
        Task::BallTracking => {
            let h = draw(&mut rng, r.holes, 4, 8);
            check_range("holes", h, 4, 8)?;
            p.holes = Some(h);
        }
        Task::Maze => {
            let g = r.grid_size.unwrap_or(maze::MAZE_SIZE);
            check_range("grid_size", g, maze::MAZE_SIZE, maze::MAZE_SIZE)?;
            p.grid_size = Some(g);
        }
        Task::Sokoban => {
            let g = draw(&mut rng, r.grid_size, 6, 10);
            check_range("grid_size", g, 6, 10)?;
            p.grid_size = Some(g);
        }
        Task::Cube3View => {
            let s = draw(&mut rng, r.stack_size, 3, 5);
            // Size 6 is the out-of-distribution mode.
            check_range("stack_size", s, 3, 6)?;
            p.stack_size = Some(s);
            p.count_mode = Some(r.count_mode.unwrap_or(if rng.gen_bool(0.5) {
                CountMode::Possible
            } else {
                CountMode::AllPossible
            }));
        }
    }
    for (name, set) in [
        ("grid_size", r.grid_size.is_some() && p.grid_size.is_none()),
        ("folds", r.folds.is_some() && p.folds.is_none()),
        ("objects", r.objects.is_some() && p.objects.is_none()),
        ("operations", r.operations.is_some() && p.operations.is_none()),
        ("holes", r.holes.is_some() && p.holes.is_none()),
        ("stack_size", r.stack_size.is_some() && p.stack_size.is_none()),
        ("count_mode", r.count_mode.is_some() && p.count_mode.is_none()),
    ] {
        if set {
            return Err(EnvError::Domain(format!("{task} has no parameter '{name}'")));
        }
    }
    Ok(p)
}

/// One instance of `task`. The generator stream is independent of the
/// parameter stream, so `(seed, resolved params)` reproduces the instance.
pub fn generate(task: Task, split: Split, seed: u64, request: &Params) -> Result<TaskInstance> {
    let params = resolve_params(task, split, seed, request)?;
    let mut rng = seed::rng(seed::derive(seed, 1, task.stream()));
    let fail = |e: EnvError| match e {
        EnvError::Generation { .. } | EnvError::Domain(_) => e,
        other => EnvError::Generation {
            task,
            seed,
            reason: other.to_string(),
        },
    };
    let world = match task {
        Task::PaperFolding => World::PaperFolding(paperfold::generate(
            &mut rng,
            params.grid_size.expect("resolved"),
            params.folds.expect("resolved"),
        )?),
        Task::MultihopManipulation => World::MultihopManipulation(
            manip::generate(&mut rng, params.objects.expect("resolved"), params.operations.expect("resolved"))
                .map_err(fail)?,
        ),
        Task::BallTracking => {
            World::BallTracking(ball::generate(&mut rng, params.holes.expect("resolved")).map_err(fail)?)
        }
        Task::Maze => World::Maze(maze::generate(&mut rng)),
        Task::Sokoban => World::Sokoban(sokoban::generate(&mut rng, params.grid_size.expect("resolved")).map_err(fail)?),
        Task::Cube3View => World::Cube3View(
            cube::generate(&mut rng, params.stack_size.expect("resolved"), params.count_mode.expect("resolved"))
                .map_err(fail)?,
        ),
    };
    let answer = world.solve()?;
    Ok(TaskInstance {
        id: format!("{}-{seed:016x}", task.name()),
        task,
        split,
        params,
        question: world.question(),
        answer,
        seed,
        input_images: vec![],
        world,
    })
}

/// Letters used for multiple-choice options.
pub(crate) fn option_letter(i: usize) -> String {
    ((b'A' + i as u8) as char).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_split_rules() {
        let p = resolve_params(Task::PaperFolding, Split::Test, 1, &Params::default()).unwrap();
        assert_eq!((p.grid_size, p.folds), (Some(8), Some(4)));
        let m = resolve_params(Task::Maze, Split::Train, 1, &Params::default()).unwrap();
        assert_eq!(m.grid_size, Some(5));
        let bad = Params {
            holes: Some(3),
            ..Params::default()
        };
        assert!(resolve_params(Task::BallTracking, Split::Test, 1, &bad).is_err());
        let foreign = Params {
            holes: Some(5),
            ..Params::default()
        };
        assert!(resolve_params(Task::Maze, Split::Test, 1, &foreign).is_err());
    }

    #[test]
    fn every_task_reproduces_from_seed() {
        for task in Task::ALL {
            for s in 0..3u64 {
                let inst = generate(task, Split::Test, s, &Params::default()).unwrap();
                assert!(inst.reproduce().unwrap(), "{task} seed {s}");
                assert_eq!(inst.world.solve().unwrap(), inst.answer);
            }
        }
    }

    #[test]
    fn stratum_key_is_stable() {
        let p = Params {
            folds: Some(4),
            grid_size: Some(8),
            ..Params::default()
        };
        assert_eq!(p.stratum(), "folds=4,grid_size=8");
        assert_eq!(Params::default().stratum(), "default");
    }
}
