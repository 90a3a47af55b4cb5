//! Run MCFS-2L, NWTT and R-NWTT on one workload and print their metrics.
//!
//! cargo run --release --example compare_baselines -- 300 11

use std::time::Duration;

use tsn_sched::metrics::compute_metrics;
use tsn_sched::verify::replay_verify;
use tsn_sched::workload::{generate, WorkloadParams};
use tsn_sched::{Algorithm, AggregationOptions, SchedulerConfig, Topology};

fn main() -> tsn_sched::Result<()> {
    let mut args = std::env::args().skip(1);
    let n = args.next().and_then(|s| s.parse().ok()).unwrap_or(300);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);

    let topo = Topology::automotive_star();
    let flows = generate(&WorkloadParams::with(n, seed), &topo)?;
    let cfg = SchedulerConfig { rng_seed: seed, ..Default::default() };

    println!("{:<8} {:>9} {:>9} {:>9} {:>9}", "algo", "critical", "noncrit", "bandwidth", "ms");
    for algo in Algorithm::ALL {
        let (s, elapsed) = algo.run(&flows, &topo, &cfg, &AggregationOptions::default());
        if let Err(v) = replay_verify(&s, &topo) {
            panic!("{algo}: {}", v[0]);
        }
        let m = compute_metrics(&s, &flows, &topo, seed, Duration::ZERO);
        println!(
            "{:<8} {:>9.4} {:>9.4} {:>9.4} {:>9.1}",
            algo.name(),
            m.critical_acceptance,
            m.noncritical_acceptance,
            m.bandwidth_utilization,
            elapsed.as_secs_f64() * 1e3
        );
    }
    Ok(())
}
