//! Transfer bounds on a 1-D grid problem: how far the target optimum drifts
//! from the source optimum, and the bias of fine-tuning inside a ball.

use visworld::theory::{check_transfer_bounds, random_transfer_problem};

fn main() {
    for (tv, zero_bias) in [(0.05, false), (0.2, false), (0.2, true)] {
        let p = random_transfer_problem(7, 1, tv, zero_bias).unwrap();
        let r = check_transfer_bounds(&p, 200, 7, 20).unwrap();
        println!(
            "TV {:.2}  r {:.3}  drift {:.3} <= {:.3}  bias {:.4} <= {:.4}  max excess {:.4}  passed {}",
            r.get("tv"),
            r.get("radius"),
            r.get("drift"),
            r.get("drift_bound"),
            r.get("bias"),
            r.get("bias_bound"),
            r.get("max_excess_risk"),
            r.passed
        );
    }
}
