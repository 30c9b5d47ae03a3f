//! Render states to palette PNGs and decode them back exactly.

use visworld::cot::{decode, input_states, render, RasterImage};
use visworld::envs::{self, Params, Split, Task};

fn main() {
    for task in Task::ALL {
        let inst = envs::generate(task, Split::Test, 21, &Params::default()).unwrap();
        for state in input_states(&inst.world).unwrap() {
            let png = render(&state, 320).unwrap().to_png().unwrap();
            let img = RasterImage::from_png(&png).unwrap();
            let back = decode(&img).unwrap();
            assert_eq!(back, state);
            println!(
                "{task:<22} {}x{} px, {:>6} bytes, digest {} -> decoded identically",
                img.width,
                img.height,
                png.len(),
                state.digest()
            );
        }
    }
}
