//! One oracle chain-of-thought process, one perturbed model: the KL between
//! them splits exactly into a reasoning term and a world-model term, and
//! each observation step reduces answer uncertainty by a bounded amount.

use visworld::theory::{
    check_theorem1, reasoning_uncertainty_gain, FactoredCoTModel, OracleCoTProcess, OracleLimits, Perturbation,
};

fn main() {
    let how = Perturbation {
        strength: 0.5,
        mixing: 0.0,
        positions: None,
    };
    // Many small oracles have uninformative observations; take the first seed
    // where both the world-model term and some step's gain are non-trivial.
    let (seed, oracle, joint, r) = (0u64..)
        .find_map(|seed| {
            let oracle = OracleCoTProcess::random(seed, OracleLimits::default());
            let joint = oracle.enumerate().ok()?;
            let model = FactoredCoTModel::perturbed(&joint, seed, &how).ok()?;
            let r = check_theorem1(&oracle, &model).ok()?;
            let informative = (1..=joint.layout.horizon + 1)
                .any(|i| reasoning_uncertainty_gain(&oracle, i).is_ok_and(|g| g.get("gain") > 1e-3));
            (r.get("world_model_error") > 1e-3 && informative).then_some((seed, oracle, joint, r))
        })
        .unwrap();
    println!("oracle seed {seed}, horizon {}", joint.layout.horizon);
    println!(
        "KL = {:.6} = reasoning {:.6} + world model {:.6}   (answer-marginal KL {:.6})",
        r.get("joint_kl"),
        r.get("reasoning_error"),
        r.get("world_model_error"),
        r.get("marginal_answer_kl")
    );
    for i in 1..=joint.layout.horizon + 1 {
        let g = reasoning_uncertainty_gain(&oracle, i).unwrap();
        println!(
            "step {i}: gain {:.4} <= I(o;s) {:.4}, <= required {:.4}",
            g.get("gain"),
            g.get("observation_information"),
            g.get("required_information")
        );
    }
}
