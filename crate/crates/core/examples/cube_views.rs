//! Cube stacks seen from several sides, and how ambiguous the hidden part
//! leaves a query view.

use visworld::envs::cube::ViewKind;
use visworld::envs::{self, CountMode, Params, Split, Task, World};

fn main() {
    let params = Params {
        stack_size: Some(3),
        count_mode: Some(CountMode::AllPossible),
        ..Params::default()
    };
    // First instance whose given views leave the query genuinely ambiguous.
    let (inst, p) = (0u64..)
        .map(|seed| envs::generate(Task::Cube3View, Split::Test, seed, &params).unwrap())
        .find_map(|inst| match &inst.world {
            World::Cube3View(p) if p.ambiguity().is_ok_and(|a| a.counts.len() > 1) => Some((inst.clone(), p.clone())),
            _ => None,
        })
        .unwrap();
    for v in ViewKind::ALL {
        let mark = if p.given.contains(&v) {
            "given"
        } else if v == p.query {
            "query"
        } else {
            ""
        };
        println!("{} {mark}", v.name());
        for row in p.stack.project(v).to_matrix() {
            println!("    {row}");
        }
    }
    let amb = p.ambiguity().unwrap();
    println!("{}", inst.question);
    println!("{} consistent heightmaps; possible counts {:?}", amb.heightmaps, amb.counts);
    println!("query view with possibly-hidden cubes marked X:");
    for row in amb.marked_view().to_matrix() {
        println!("    {row}");
    }
}
