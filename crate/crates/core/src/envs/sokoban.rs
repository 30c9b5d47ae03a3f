//! Single-box Sokoban with a move-optimal BFS solver, key-step extraction and
//! wall-bump detours.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::maze::{offset, Move};
use super::{Answer, EnvError, Result, REJECTION_BUDGET};

pub type Cell = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SokobanState {
    pub size: usize,
    /// Row-major, `size * size`.
    pub walls: Vec<bool>,
    pub player: Cell,
    pub box_cell: Cell,
    pub target: Cell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepEffect {
    Walk,
    Push,
    /// Blocked: nothing moves.
    Bump,
}

impl SokobanState {
    pub fn is_wall(&self, c: Cell) -> bool {
        self.walls[c.0 * self.size + c.1]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.size;
        if !(3..=16).contains(&n) || self.walls.len() != n * n {
            return Err(EnvError::Domain(format!("bad board size {n}")));
        }
        for (name, c) in [("player", self.player), ("box", self.box_cell), ("target", self.target)] {
            if c.0 >= n || c.1 >= n || self.is_wall(c) {
                return Err(EnvError::Domain(format!("{name} at {c:?} is off the floor")));
            }
        }
        if self.player == self.box_cell {
            return Err(EnvError::Domain("player stands on the box".into()));
        }
        Ok(())
    }

    pub fn solved(&self) -> bool {
        self.box_cell == self.target
    }

    fn free(&self, c: Option<Cell>) -> Option<Cell> {
        c.filter(|&c| !self.is_wall(c))
    }

    pub fn step(&self, m: Move) -> (SokobanState, StepEffect) {
        let Some(next) = self.free(offset(self.player, m, self.size)) else {
            return (self.clone(), StepEffect::Bump);
        };
        if next != self.box_cell {
            let mut s = self.clone();
            s.player = next;
            return (s, StepEffect::Walk);
        }
        match self.free(offset(self.box_cell, m, self.size)) {
            Some(b) => {
                let mut s = self.clone();
                s.player = next;
                s.box_cell = b;
                (s, StepEffect::Push)
            }
            None => (self.clone(), StepEffect::Bump),
        }
    }

    pub fn run(&self, moves: &[Move]) -> SokobanState {
        moves.iter().fold(self.clone(), |s, &m| s.step(m).0)
    }

    /// Every cell, row-major: `#` wall, `.` floor, `T` target, `B` box,
    /// `*` box on target, `P` player, `+` player on target.
    pub fn to_matrix(&self) -> Vec<String> {
        (0..self.size)
            .map(|r| {
                (0..self.size)
                    .map(|c| {
                        let cell = (r, c);
                        let t = cell == self.target;
                        if self.is_wall(cell) {
                            '#'
                        } else if cell == self.box_cell {
                            if t { '*' } else { 'B' }
                        } else if cell == self.player {
                            if t { '+' } else { 'P' }
                        } else if t {
                            'T'
                        } else {
                            '.'
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Move-optimal solution, BFS over `(player, box)` expanding U, D, L, R.
/// Empty iff the box already sits on the target.
pub fn solve(state: &SokobanState) -> Result<Vec<Move>> {
    state.validate()?;
    let n = state.size;
    let key = |s: &SokobanState| (s.player.0 * n + s.player.1) * n * n + s.box_cell.0 * n + s.box_cell.1;
    let mut prev: Vec<Option<(usize, Move)>> = vec![None; n.pow(4)];
    let mut seen = vec![false; n.pow(4)];
    seen[key(state)] = true;
    let mut queue = VecDeque::from([state.clone()]);
    while let Some(s) = queue.pop_front() {
        if s.solved() {
            let mut moves = Vec::new();
            let mut k = key(&s);
            while let Some((p, m)) = prev[k] {
                moves.push(m);
                k = p;
            }
            moves.reverse();
            return Ok(moves);
        }
        for m in Move::ORDER {
            let (t, effect) = s.step(m);
            if effect == StepEffect::Bump {
                continue;
            }
            let k = key(&t);
            if !seen[k] {
                seen[k] = true;
                prev[k] = Some((key(&s), m));
                queue.push_back(t);
            }
        }
    }
    Err(EnvError::Unsolvable("box cannot reach the target".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyKind {
    /// Player next to the box, about to push for the first time.
    Contact,
    /// About to push in a new direction.
    Turn,
    Final,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyStep {
    /// Moves executed before this state.
    pub index: usize,
    pub kind: KeyKind,
    pub state: SokobanState,
    /// Push direction starting here (none for the final state).
    pub push: Option<Move>,
}

pub fn key_steps(state: &SokobanState, solution: &[Move]) -> Vec<KeyStep> {
    let mut out = Vec::new();
    let mut s = state.clone();
    let mut last_push: Option<Move> = None;
    for (i, &m) in solution.iter().enumerate() {
        let (t, effect) = s.step(m);
        if effect == StepEffect::Push {
            if last_push != Some(m) {
                out.push(KeyStep {
                    index: i,
                    kind: if last_push.is_none() { KeyKind::Contact } else { KeyKind::Turn },
                    state: s.clone(),
                    push: Some(m),
                });
            }
            last_push = Some(m);
        }
        s = t;
    }
    out.push(KeyStep {
        index: solution.len(),
        kind: KeyKind::Final,
        state: s,
        push: None,
    });
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRole {
    Solution,
    Detour,
    /// Walks into a wall; annotated as the moment to reflect and turn back.
    Bump,
    Backtrack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedMove {
    pub mv: Move,
    pub role: StepRole,
}

/// Inserts 0-2 detours at random points of the solution: walk straight to a
/// wall, bump into it, walk back to where the detour began.
pub fn add_detours<R: Rng>(state: &SokobanState, solution: &[Move], rng: &mut R) -> Vec<AnnotatedMove> {
    let count = rng.gen_range(0..=2usize);
    let mut points: Vec<usize> = (0..=solution.len()).collect();
    points.shuffle(rng);
    let mut chosen: Vec<usize> = points.into_iter().take(count).collect();
    chosen.sort_unstable();

    let mut out = Vec::new();
    let mut s = state.clone();
    for i in 0..=solution.len() {
        if chosen.contains(&i) {
            if let Some(excursion) = detour_at(&s, rng) {
                out.extend(excursion);
            }
        }
        if let Some(&m) = solution.get(i) {
            out.push(AnnotatedMove {
                mv: m,
                role: StepRole::Solution,
            });
            s = s.step(m).0;
        }
    }
    out
}

fn detour_at<R: Rng>(s: &SokobanState, rng: &mut R) -> Option<Vec<AnnotatedMove>> {
    let mut dirs = Move::ORDER;
    dirs.shuffle(rng);
    for m in dirs {
        let mut walk = 0;
        let mut cur = s.player;
        let blocked_by_wall = loop {
            match offset(cur, m, s.size) {
                Some(n) if n == s.box_cell => break false,
                Some(n) if !s.is_wall(n) => {
                    cur = n;
                    walk += 1;
                }
                _ => break true,
            }
        };
        if !blocked_by_wall {
            continue;
        }
        let mut v: Vec<AnnotatedMove> = (0..walk)
            .map(|_| AnnotatedMove {
                mv: m,
                role: StepRole::Detour,
            })
            .collect();
        v.push(AnnotatedMove {
            mv: m,
            role: StepRole::Bump,
        });
        v.extend((0..walk).map(|_| AnnotatedMove {
            mv: m.opposite(),
            role: StepRole::Backtrack,
        }));
        return Some(v);
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SokobanPuzzle {
    pub initial: SokobanState,
    pub solution: Vec<Move>,
    /// Solution with detours spliced in, as used for the CoT.
    pub augmented: Vec<AnnotatedMove>,
}

impl SokobanPuzzle {
    pub fn answer(&self) -> Result<Answer> {
        Ok(Answer::Integer(solve(&self.initial)?.len() as i64))
    }

    pub fn question(&self) -> String {
        let n = self.initial.size;
        format!(
            "The image shows a {n}x{n} Sokoban board: the blue circle is the player, the orange square is the box, the red frame is the target and dark cells are walls. \
             The player moves up, down, left or right and pushes the box by walking into it. \
             What is the minimum number of moves needed to push the box onto the target?"
        )
    }

    pub fn key_steps(&self) -> Vec<KeyStep> {
        key_steps(&self.initial, &self.solution)
    }
}

pub fn random_board<R: Rng>(rng: &mut R, size: usize) -> Option<SokobanState> {
    let mut walls = vec![false; size * size];
    for r in 0..size {
        for c in 0..size {
            if r == 0 || c == 0 || r + 1 == size || c + 1 == size {
                walls[r * size + c] = true;
            }
        }
    }
    let mut interior: Vec<Cell> = (1..size - 1).flat_map(|r| (1..size - 1).map(move |c| (r, c))).collect();
    interior.shuffle(rng);
    let density = rng.gen_range(0.10..=0.25);
    let k = (density * interior.len() as f64).round() as usize;
    for &(r, c) in &interior[..k] {
        walls[r * size + c] = true;
    }
    let floor = &interior[k..];
    if floor.len() < 3 {
        return None;
    }
    Some(SokobanState {
        size,
        walls,
        player: floor[0],
        box_cell: floor[1],
        target: floor[2],
    })
}

pub fn generate<R: Rng>(rng: &mut R, size: usize) -> Result<SokobanPuzzle> {
    if !(6..=10).contains(&size) {
        return Err(EnvError::Domain(format!("sokoban grid {size} outside 6..=10")));
    }
    for _ in 0..REJECTION_BUDGET {
        let Some(state) = random_board(rng, size) else { continue };
        let Ok(solution) = solve(&state) else { continue };
        let augmented = add_detours(&state, &solution, rng);
        return Ok(SokobanPuzzle {
            initial: state,
            solution,
            augmented,
        });
    }
    Err(EnvError::Unsolvable(format!("no solvable {size}x{size} board within the rejection budget")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corridor() -> SokobanState {
        // 3 floor cells in a row: player, box, target.
        let size = 5;
        let mut walls = vec![true; 25];
        for c in 1..4 {
            walls[2 * size + c] = false;
        }
        SokobanState {
            size,
            walls,
            player: (2, 1),
            box_cell: (2, 2),
            target: (2, 3),
        }
    }

    #[test]
    fn box_on_target_needs_nothing() {
        let mut s = corridor();
        s.box_cell = (2, 3);
        assert!(solve(&s).unwrap().is_empty());
        assert_eq!(key_steps(&s, &[]).len(), 1);
    }

    #[test]
    fn single_push_in_corridor() {
        let s = corridor();
        let sol = solve(&s).unwrap();
        assert_eq!(sol, vec![Move::Right]);
        let keys = key_steps(&s, &sol);
        assert_eq!(keys.iter().map(|k| k.kind).collect::<Vec<_>>(), vec![KeyKind::Contact, KeyKind::Final]);
    }

    #[test]
    fn l_shaped_push_has_one_turn() {
        let size = 6;
        let mut walls = vec![true; 36];
        for (r, c) in [(2, 1), (2, 2), (2, 3), (1, 2), (1, 3), (3, 3), (4, 3)] {
            walls[r * size + c] = false;
        }
        let s = SokobanState {
            size,
            walls,
            player: (2, 1),
            box_cell: (2, 2),
            target: (4, 3),
        };
        let sol = solve(&s).unwrap();
        assert_eq!(s.run(&sol).box_cell, (4, 3));
        let keys = key_steps(&s, &sol);
        let kinds: Vec<KeyKind> = keys.iter().map(|k| k.kind).collect();
        assert_eq!(kinds, vec![KeyKind::Contact, KeyKind::Turn, KeyKind::Final]);
    }

    #[test]
    fn box_against_the_end_wall_is_stuck() {
        let mut t = corridor();
        t.player = (2, 1);
        t.box_cell = (2, 3);
        t.target = (2, 2);
        assert!(matches!(solve(&t), Err(EnvError::Unsolvable(_))));
    }

    #[test]
    fn detours_rejoin_the_solution() {
        let mut rng = crate::seed::rng(29);
        for _ in 0..30 {
            let p = generate(&mut rng, 8).unwrap();
            let moves: Vec<Move> = p.augmented.iter().map(|a| a.mv).collect();
            assert_eq!(p.initial.run(&moves), p.initial.run(&p.solution));
            let plain: Vec<Move> = p
                .augmented
                .iter()
                .filter(|a| a.role == StepRole::Solution)
                .map(|a| a.mv)
                .collect();
            assert_eq!(plain, p.solution);
            let mut s = p.initial.clone();
            for a in &p.augmented {
                let (t, effect) = s.step(a.mv);
                assert_eq!(a.role == StepRole::Bump, effect == StepEffect::Bump);
                s = t;
            }
        }
    }

    #[test]
    fn zero_detours_leave_solution_alone() {
        // Seeds whose first draw is zero detours.
        for seed in 0..50 {
            let mut rng = crate::seed::rng(seed);
            let mut probe = crate::seed::rng(seed);
            if probe.gen_range(0..=2usize) != 0 {
                continue;
            }
            let s = corridor();
            let sol = solve(&s).unwrap();
            let aug = add_detours(&s, &sol, &mut rng);
            assert_eq!(aug.len(), sol.len());
            return;
        }
        panic!("no zero-detour seed found");
    }
}
