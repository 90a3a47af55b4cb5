//! Sweep frame counts over seeds for all three algorithms, then print
//! MCFS-2L minus each baseline.
//!
//! cargo run --release --example frame_count_sweep -- out

use tsn_sched::experiment::{compare, run_scenario, write_deltas, Scenario};

fn main() -> tsn_sched::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "out".into());
    let sc = Scenario {
        name: "sweep".into(),
        n_values: vec![100, 200, 300],
        seeds: (1..=5).collect(),
        ..Default::default()
    };
    let res = run_scenario(&sc, &out)?;
    for r in &res.summary {
        println!(
            "{:<7} n={:<4} critical {:.3}±{:.3}  noncritical {:.3}±{:.3}",
            r.algorithm,
            r.n_frames,
            r.critical_acceptance_mean,
            r.critical_acceptance_std,
            r.noncritical_acceptance_mean,
            r.noncritical_acceptance_std
        );
    }
    println!();
    write_deltas(&compare(&[res.dir])?, std::io::stdout().lock())
}
