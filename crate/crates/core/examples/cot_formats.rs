//! The same instance as an implicit, verbal and visual chain of thought.

use visworld::cot::{build_cot, WmFormat};
use visworld::envs::{self, Params, Split, Task};

fn main() {
    let task: Task = std::env::args().nth(1).map_or(Task::Maze, |s| s.parse().expect("task name"));
    let inst = envs::generate(task, Split::Test, 7, &Params::default()).unwrap();
    println!("{}\n", inst.question);
    for format in WmFormat::ALL {
        match build_cot(&inst, format) {
            Ok(built) => {
                println!("==== {format} ({} images)", built.images.len());
                println!("{}\n", built.trace.text());
            }
            Err(e) => println!("==== {format}: {e}"),
        }
    }
}
