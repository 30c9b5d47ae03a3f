mod common;

use visworld::envs::paperfold::{FoldPuzzle, FoldQuery, FoldState, HoleShape, Punch};
use visworld::envs::{self, Answer, Params, Split, Task, World};
use visworld::seed::derive;

fn instance(task: Task, split: Split, i: u32, params: &Params) -> World {
    envs::generate(task, split, derive(0x0AC1E, 40, i), params).unwrap().world
}

#[test]
fn paper_folding_matches_reverse_replay() {
    for i in 0..200 {
        let split = if i % 2 == 0 { Split::Train } else { Split::Test };
        let World::PaperFolding(p) = instance(Task::PaperFolding, split, i, &Params::default()) else { unreachable!() };
        let oracle = common::reverse_replay(&p);
        assert_eq!(p.layout().unwrap(), oracle, "{p:?}");
        assert_eq!(p.answer().unwrap(), common::fold_query_answer(&oracle, p.query));
    }
}

/// Every fold sequence of length <= 2 on a 3x3 sheet, every single punch
/// and every pair of punches with mixed shapes.
#[test]
fn paper_folding_exhaustive_small_grid() {
    let mut sequences = vec![vec![]];
    let root = FoldState::new(3).unwrap();
    for a in root.legal_folds() {
        sequences.push(vec![a]);
        for b in root.apply(a).unwrap().legal_folds() {
            sequences.push(vec![a, b]);
        }
    }
    let mut checked = 0;
    for folds in sequences {
        let mut s = root.clone();
        for f in &folds {
            s = s.apply(*f).unwrap();
        }
        let cells: Vec<(usize, usize)> = (0..s.extent.rows)
            .flat_map(|r| (0..s.extent.cols).map(move |c| (r, c)))
            .collect();
        let mut punch_sets: Vec<Vec<Punch>> = Vec::new();
        for (i, &a) in cells.iter().enumerate() {
            for shape in HoleShape::ALL {
                punch_sets.push(vec![Punch { cell: a, shape }]);
            }
            for &b in &cells[i + 1..] {
                punch_sets.push(vec![
                    Punch { cell: a, shape: HoleShape::Circle },
                    Punch { cell: b, shape: HoleShape::Star },
                ]);
            }
        }
        for punches in punch_sets {
            let p = FoldPuzzle {
                grid_size: 3,
                folds: folds.clone(),
                punches,
                query: FoldQuery::Total,
            };
            assert_eq!(p.layout().unwrap(), common::reverse_replay(&p), "{p:?}");
            checked += 1;
        }
    }
    assert!(checked > 500);
}

#[test]
fn ball_matches_fine_step_integration() {
    for i in 0..200 {
        let World::BallTracking(b) = instance(Task::BallTracking, Split::Test, i, &Params::default()) else { unreachable!() };
        let fine = common::fine_step_ball(&b.scene, 0.05).expect("fine-step run leaves through a hole");
        assert_eq!(fine.hole, b.trajectory.hole, "{:?}", b.scene);
        assert_eq!(fine.reflections, b.trajectory.reflections.len(), "{:?}", b.scene);
        assert!((fine.exit_x - b.trajectory.exit.0).abs() < 1e-6);
        assert!(fine.reflections >= 1);
    }
}

#[test]
fn sokoban_matches_plain_bfs() {
    for i in 0..100 {
        let params = Params {
            grid_size: Some(6 + i as usize % 3),
            ..Params::default()
        };
        let World::Sokoban(s) = instance(Task::Sokoban, Split::Test, i, &params) else { unreachable!() };
        let best = common::sokoban_bfs(&s.initial).expect("solvable");
        assert_eq!(s.answer().unwrap(), Answer::Integer(best as i64));
        assert_eq!(s.solution.len(), best);
        let end = s.initial.run(&s.solution);
        assert!(end.solved());
    }
}

#[test]
fn cube_matches_brute_force() {
    for i in 0..10 {
        let params = Params {
            stack_size: Some(3),
            ..Params::default()
        };
        let World::Cube3View(c) = instance(Task::Cube3View, Split::Test, i, &params) else { unreachable!() };
        let Answer::IntegerSet(counts) = c.answer().unwrap() else { unreachable!() };
        assert_eq!(counts, common::cube_brute_force(&c), "{c:?}");
        assert!(counts.contains(&c.stack.project(c.query).count(c.color)));
    }
}
