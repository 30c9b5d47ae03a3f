//! Run the seeded certificate ensembles and print the tightest slack seen for
//! every bound. Pass a trial count as the first argument (default 20).

use visworld::theory::{corollary_ensemble, kl_ensemble, mi_ensemble, transfer_ensemble};

fn main() {
    let trials: usize = std::env::args().nth(1).map_or(20, |s| s.parse().expect("trial count"));
    for report in [
        kl_ensemble(0, trials),
        mi_ensemble(0, trials),
        corollary_ensemble(0, trials),
        transfer_ensemble(0, trials),
    ] {
        println!("{:<10} passed={} partial={}", report.check, report.passed, report.partial);
        for (gap, slack) in &report.worst_slack {
            println!("    {gap:<20} worst slack {slack:+.3e}");
        }
    }
}
