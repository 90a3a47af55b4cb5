//! Generate a seeded flow set, save it, and load it back.
//!
//! cargo run --example generate_workload -- 200 7

use std::collections::BTreeMap;

use tsn_sched::model::NS_PER_MS;
use tsn_sched::workload::{generate, load_flows, save_flows, WorkloadParams};
use tsn_sched::Topology;

fn main() -> tsn_sched::Result<()> {
    let mut args = std::env::args().skip(1);
    let n = args.next().and_then(|s| s.parse().ok()).unwrap_or(100);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);

    let topo = Topology::automotive_star();
    let flows = generate(&WorkloadParams::with(n, seed), &topo)?;

    let mut by_period: BTreeMap<u64, (usize, usize)> = BTreeMap::new();
    for f in &flows {
        let e = by_period.entry(f.period / NS_PER_MS).or_default();
        e.0 += 1;
        e.1 += f.criticality.is_critical() as usize;
    }
    println!("{n} flows, seed {seed}");
    for (ms, (count, crit)) in &by_period {
        println!("  {ms:>3} ms: {count:>4} flows ({crit} critical)");
    }

    let path = std::env::temp_dir().join(format!("flows-{n}-{seed}.json"));
    save_flows(&flows, &path)?;
    assert_eq!(load_flows(&path)?, flows);
    println!("saved to {}", path.display());
    Ok(())
}
