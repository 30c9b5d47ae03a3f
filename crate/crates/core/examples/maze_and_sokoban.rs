//! Grid navigation: a maze with its turning points, and a Sokoban board with
//! its key steps and detour-augmented move sequence.

use visworld::envs::{self, Params, Split, Task, World};

fn main() {
    let inst = envs::generate(Task::Maze, Split::Test, 1, &Params::default()).unwrap();
    let World::Maze(m) = &inst.world else { unreachable!() };
    let path = m.path().unwrap();
    println!("maze {}x{}: {:?} -> {:?}, {} moves", m.maze.size, m.maze.size, m.start, m.goal, inst.answer);
    let turns: Vec<_> = m.turning_points().unwrap().iter().map(|&i| path[i]).collect();
    println!("turning points: {turns:?}\n");

    let inst = envs::generate(Task::Sokoban, Split::Test, 2, &Params { grid_size: Some(7), ..Params::default() }).unwrap();
    let World::Sokoban(s) = &inst.world else { unreachable!() };
    for row in s.initial.to_matrix() {
        println!("  {row}");
    }
    let moves: Vec<&str> = s.solution.iter().map(|m| m.name()).collect();
    println!("optimal ({} moves): {}", moves.len(), moves.join(" "));
    for k in s.key_steps() {
        println!("  key step after {} moves: {:?}, push {:?}", k.index, k.kind, k.push.map(|m| m.name()));
    }
    let detours = s.augmented.len() - s.solution.len();
    println!("CoT walk: {} moves ({} of them detours)", s.augmented.len(), detours);
}
