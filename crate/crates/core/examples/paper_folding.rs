//! Fold a sheet, punch it, and unfold it again, printing every snapshot.

use visworld::envs::paperfold::{FoldAction, FoldDirection, FoldPuzzle, FoldQuery, HoleShape, Punch};
use visworld::envs::{self, Params, Split, Task, World};

fn main() {
    // A hand-built puzzle: two folds on a 6x6 sheet, two punches.
    let p = FoldPuzzle {
        grid_size: 6,
        folds: vec![
            FoldAction { direction: FoldDirection::LeftOver, line: 3 },
            FoldAction { direction: FoldDirection::TopOver, line: 2 },
        ],
        punches: vec![
            Punch { cell: (0, 0), shape: HoleShape::Star },
            Punch { cell: (3, 2), shape: HoleShape::Circle },
        ],
        query: FoldQuery::Diff { first: HoleShape::Star, second: HoleShape::Circle },
    };
    println!("{}\n", p.question());
    for (k, view) in p.unfolding_views().unwrap().iter().enumerate() {
        println!("snapshot {k}:");
        for (cov, shapes) in view.coverage_matrix().iter().zip(view.shape_matrix()) {
            println!("  {cov}   {shapes}");
        }
    }
    println!("answer: {}\n", p.answer().unwrap());

    // Generated instances: the test split is the hard setting.
    let inst = envs::generate(Task::PaperFolding, Split::Test, 3, &Params::default()).unwrap();
    let World::PaperFolding(g) = &inst.world else { unreachable!() };
    println!("generated: grid {}, {} folds, answer {}", g.grid_size, g.folds.len(), inst.answer);
}
