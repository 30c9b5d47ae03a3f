//! A multi-hop object manipulation puzzle: every operation is resolved
//! against the scene it is applied to.

use visworld::envs::{self, Params, Split, Task, World};

fn main() {
    let params = Params {
        objects: Some(4),
        operations: Some(3),
        ..Params::default()
    };
    let inst = envs::generate(Task::MultihopManipulation, Split::Train, 11, &params).unwrap();
    let World::MultihopManipulation(p) = &inst.world else { unreachable!() };
    println!("{}\n", inst.question);
    for (k, scene) in p.scenes().unwrap().iter().enumerate() {
        let objs: Vec<String> = scene
            .objects
            .iter()
            .map(|o| format!("{} {} @ {:?}", o.color.name(), o.shape.name(), o.pos))
            .collect();
        let how = if k == 0 { "initial".to_string() } else { p.ops[k - 1].describe() };
        println!("{how}:\n    {}", objs.join("\n    "));
    }
    println!("\nanswer: {}", inst.answer);
}
