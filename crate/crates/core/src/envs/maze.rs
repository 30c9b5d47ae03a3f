//! 5x5 perfect mazes: randomized depth-first carving, BFS solving.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Answer, EnvError, Result};

pub const MAZE_SIZE: usize = 5;

pub type Cell = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Move {
    Up,
    Down,
    Left,
    Right,
}

impl Move {
    /// Fixed expansion order for every search in this crate.
    pub const ORDER: [Move; 4] = [Move::Up, Move::Down, Move::Left, Move::Right];

    pub fn delta(self) -> (isize, isize) {
        match self {
            Move::Up => (-1, 0),
            Move::Down => (1, 0),
            Move::Left => (0, -1),
            Move::Right => (0, 1),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Move::Up => "up",
            Move::Down => "down",
            Move::Left => "left",
            Move::Right => "right",
        }
    }

    pub fn opposite(self) -> Move {
        match self {
            Move::Up => Move::Down,
            Move::Down => Move::Up,
            Move::Left => Move::Right,
            Move::Right => Move::Left,
        }
    }

    pub fn between(a: Cell, b: Cell) -> Option<Move> {
        Move::ORDER.into_iter().find(|m| offset(a, *m, usize::MAX) == Some(b))
    }
}

/// `cell + move`, if it stays inside `[0, size)^2`.
pub fn offset(cell: Cell, m: Move, size: usize) -> Option<Cell> {
    let (dr, dc) = m.delta();
    let r = cell.0.checked_add_signed(dr)?;
    let c = cell.1.checked_add_signed(dc)?;
    (r < size && c < size).then_some((r, c))
}

/// Interior walls only; the border is always closed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Maze {
    pub size: usize,
    /// `h_walls[r][c]`: wall between `(r, c)` and `(r + 1, c)`.
    pub h_walls: Vec<Vec<bool>>,
    /// `v_walls[r][c]`: wall between `(r, c)` and `(r, c + 1)`.
    pub v_walls: Vec<Vec<bool>>,
}

impl Maze {
    pub fn open(size: usize) -> Self {
        Maze {
            size,
            h_walls: vec![vec![false; size]; size.saturating_sub(1)],
            v_walls: vec![vec![false; size.saturating_sub(1)]; size],
        }
    }

    pub fn closed(size: usize) -> Self {
        Maze {
            size,
            h_walls: vec![vec![true; size]; size.saturating_sub(1)],
            v_walls: vec![vec![true; size.saturating_sub(1)]; size],
        }
    }

    pub fn wall_between(&self, a: Cell, b: Cell) -> bool {
        match Move::between(a, b) {
            Some(Move::Down) => self.h_walls[a.0][a.1],
            Some(Move::Up) => self.h_walls[b.0][b.1],
            Some(Move::Right) => self.v_walls[a.0][a.1],
            Some(Move::Left) => self.v_walls[b.0][b.1],
            None => true,
        }
    }

    fn set_wall(&mut self, a: Cell, b: Cell, wall: bool) {
        match Move::between(a, b) {
            Some(Move::Down) => self.h_walls[a.0][a.1] = wall,
            Some(Move::Up) => self.h_walls[b.0][b.1] = wall,
            Some(Move::Right) => self.v_walls[a.0][a.1] = wall,
            Some(Move::Left) => self.v_walls[b.0][b.1] = wall,
            None => {}
        }
    }

    pub fn step(&self, cell: Cell, m: Move) -> Option<Cell> {
        offset(cell, m, self.size).filter(|&n| !self.wall_between(cell, n))
    }

    pub fn wall_count(&self) -> usize {
        self.h_walls.iter().chain(&self.v_walls).flatten().filter(|&&w| w).count()
    }

    /// Shortest path, expanding moves in [`Move::ORDER`].
    pub fn solve(&self, start: Cell, goal: Cell) -> Option<Vec<Cell>> {
        let n = self.size;
        let mut prev: Vec<Option<Cell>> = vec![None; n * n];
        let mut seen = vec![false; n * n];
        let mut queue = VecDeque::from([start]);
        seen[start.0 * n + start.1] = true;
        while let Some(cell) = queue.pop_front() {
            if cell == goal {
                let mut path = vec![goal];
                let mut cur = goal;
                while let Some(p) = prev[cur.0 * n + cur.1] {
                    path.push(p);
                    cur = p;
                }
                path.reverse();
                return Some(path);
            }
            for m in Move::ORDER {
                if let Some(next) = self.step(cell, m) {
                    if !seen[next.0 * n + next.1] {
                        seen[next.0 * n + next.1] = true;
                        prev[next.0 * n + next.1] = Some(cell);
                        queue.push_back(next);
                    }
                }
            }
        }
        None
    }

    /// Successor table `next[state][action]` with state `r * size + c` and
    /// actions in [`Move::ORDER`]; blocked moves stay put.
    pub fn successor_table(&self) -> Vec<Vec<usize>> {
        let n = self.size;
        (0..n * n)
            .map(|s| {
                let cell = (s / n, s % n);
                Move::ORDER
                    .iter()
                    .map(|&m| self.step(cell, m).map_or(s, |(r, c)| r * n + c))
                    .collect()
            })
            .collect()
    }
}

/// Randomized depth-first carving from a random cell.
pub fn carve<R: Rng>(rng: &mut R, size: usize) -> Maze {
    let mut maze = Maze::closed(size);
    let mut visited = vec![false; size * size];
    let start = (rng.gen_range(0..size), rng.gen_range(0..size));
    visited[start.0 * size + start.1] = true;
    let mut stack = vec![start];
    while let Some(&cell) = stack.last() {
        let mut options: Vec<Cell> = Move::ORDER
            .iter()
            .filter_map(|&m| offset(cell, m, size))
            .filter(|n| !visited[n.0 * size + n.1])
            .collect();
        if options.is_empty() {
            stack.pop();
            continue;
        }
        options.shuffle(rng);
        let next = options[0];
        maze.set_wall(cell, next, false);
        visited[next.0 * size + next.1] = true;
        stack.push(next);
    }
    maze
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MazePuzzle {
    pub maze: Maze,
    pub start: Cell,
    pub goal: Cell,
}

impl MazePuzzle {
    pub fn path(&self) -> Result<Vec<Cell>> {
        self.maze
            .solve(self.start, self.goal)
            .ok_or_else(|| EnvError::Unsolvable("goal is not reachable".into()))
    }

    /// Number of moves along the unique path.
    pub fn answer(&self) -> Result<Answer> {
        Ok(Answer::Integer(self.path()?.len() as i64 - 1))
    }

    pub fn question(&self) -> String {
        format!(
            "The image shows a {n}x{n} maze. The red square marks the start and the green square marks the goal; dark lines are walls. \
             What is the minimum number of moves (up, down, left or right, one cell each) needed to go from the start to the goal?",
            n = self.maze.size
        )
    }

    /// Path cells where the direction changes, plus the goal.
    pub fn turning_points(&self) -> Result<Vec<usize>> {
        let path = self.path()?;
        let mut out = Vec::new();
        for i in 1..path.len() {
            let last = i + 1 == path.len();
            if last || Move::between(path[i - 1], path[i]) != Move::between(path[i], path[i + 1]) {
                out.push(i);
            }
        }
        Ok(out)
    }
}

pub fn generate<R: Rng>(rng: &mut R) -> MazePuzzle {
    let maze = carve(rng, MAZE_SIZE);
    let cells = MAZE_SIZE * MAZE_SIZE;
    let s = rng.gen_range(0..cells);
    let mut g = rng.gen_range(0..cells - 1);
    if g >= s {
        g += 1;
    }
    MazePuzzle {
        maze,
        start: (s / MAZE_SIZE, s % MAZE_SIZE),
        goal: (g / MAZE_SIZE, g % MAZE_SIZE),
    }
}
