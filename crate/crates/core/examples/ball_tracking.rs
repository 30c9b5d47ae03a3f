//! Trace a ball through its reflections to the hole it leaves by, then draw
//! the scene with the full trail.

use visworld::cot::{render, BallView, StateView};
use visworld::envs::ball::{BallScene, Wall};

fn main() {
    let scene = BallScene {
        width: 480,
        height: 320,
        holes: vec![(30, 70), (150, 200), (290, 330), (400, 450)],
        start: (120, 240),
        direction: (5, -3),
    };
    let t = scene.simulate().unwrap();
    for e in &t.reflections {
        let wall = match e.wall {
            Wall::Left => "left",
            Wall::Right => "right",
            Wall::Top => "top",
            Wall::Bottom => "bottom",
        };
        println!("reflect off the {wall} wall at ({:.2}, {:.2})", e.point.0, e.point.1);
    }
    println!("exits through hole {} at x = {:.2}", t.hole, t.exit.0);

    let view = StateView::Ball(BallView {
        segments: t.reflections.len() + 1,
        scene,
    });
    let img = render(&view, 0).unwrap();
    let path = std::env::temp_dir().join("ball_tracking.png");
    std::fs::write(&path, img.to_png().unwrap()).unwrap();
    println!("{}x{} image written to {}", img.width, img.height, path.display());
}
