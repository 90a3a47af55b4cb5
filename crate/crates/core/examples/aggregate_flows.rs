//! Pack flows into shared frames and print the clusters as JSON.
//!
//! Pass `--equal` to only merge flows with identical periods.

use tsn_sched::aggregation::FrameIds;
use tsn_sched::workload::{generate, WorkloadParams};
use tsn_sched::{aggregate_all, AggregationOptions, Topology};

fn main() -> tsn_sched::Result<()> {
    let equal = std::env::args().any(|a| a == "--equal");
    let flows = generate(&WorkloadParams::with(40, 3), &Topology::automotive_star())?;
    let opts = AggregationOptions {
        equal_periods_only: equal,
        ..Default::default()
    };
    let agg = aggregate_all(&flows, &opts, &mut FrameIds::default());
    for f in &agg.frames {
        f.check()?;
    }
    eprintln!("{} flows -> {} frames", flows.len(), agg.frames.len());
    println!("{}", serde_json::to_string_pretty(&agg.report())?);
    Ok(())
}
