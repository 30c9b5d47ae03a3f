//! Build a small multi-observable MDP, observe it through different
//! slice/render channels, and enumerate the exact trajectory distribution.

use visworld::momdp::{enumerate_joint, DiscreteMomdp, Modality, Render, Slice, UniformPolicy, DEFAULT_SUPPORT_CAP};

fn main() {
    // A 4-cell corridor: action 0 steps left, action 1 steps right.
    let next = vec![vec![0, 1], vec![0, 2], vec![1, 3], vec![2, 3]];
    // Slice 1 keeps only which half of the corridor we are in.
    let slices = vec![Slice::identity(4), Slice::from_table("half", vec![0, 0, 1, 1]).unwrap()];
    let renders = vec![Render::identity(Modality::Verbal, 4), Render::identity(Modality::Visual, 4)];
    let m = DiscreteMomdp::deterministic(&next, vec![1.0, 0.0, 0.0, 0.0], slices, renders, 3).unwrap();

    for s in 0..4 {
        let full = m.observe(s, 0, 0).unwrap();
        let half = m.observe(s, 1, 1).unwrap();
        println!("state {s}: verbal/full = {:?}, visual/half = {:?}", full.symbol, half.symbol);
    }

    let joint = enumerate_joint(&m, &UniformPolicy::default(), DEFAULT_SUPPORT_CAP).unwrap();
    println!("{} trajectories, total mass {:.12}", joint.atoms.len(), joint.total_mass());
    for t in 0..=3 {
        println!("P(s_{t}) = {:?}", joint.state_marginal(t, 4));
    }
}
