//! Schedule a workload, replay it, and write the gate control list as CSV.
//!
//! cargo run --example verify_and_gcl -- gcl.csv

use std::fs::File;

use tsn_sched::gcl::{emit_gcl, open_windows, read_gcl_csv, write_gcl_csv};
use tsn_sched::verify::{materialize_windows, replay_verify, schedule_cycle};
use tsn_sched::workload::{generate, WorkloadParams};
use tsn_sched::{Algorithm, AggregationOptions, SchedulerConfig, Topology};

fn main() -> tsn_sched::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "gcl.csv".into());
    let topo = Topology::automotive_star();
    let flows = generate(&WorkloadParams::with(80, 2), &topo)?;
    let (s, _) = Algorithm::Mcfs2l.run(&flows, &topo, &SchedulerConfig::default(), &AggregationOptions::default());

    match replay_verify(&s, &topo) {
        Ok(()) => println!("replay: ok, {} frames", s.accepted.len()),
        Err(v) => {
            for x in &v {
                eprintln!("{x}");
            }
            std::process::exit(3);
        }
    }

    let cycle = schedule_cycle(&s).expect("something was accepted");
    let gcl = emit_gcl(&s, &topo, cycle);
    write_gcl_csv(&gcl, File::create(&path).map_err(tsn_sched::Error::io(&path))?)?;

    // the CSV carries exactly the windows the replay saw
    let back = read_gcl_csv(File::open(&path).map_err(tsn_sched::Error::io(&path))?)?;
    let mut replayed: Vec<_> = materialize_windows(&s, &topo, cycle).into_iter().map(|w| (w.link, w.start, w.end)).collect();
    let mut gated = open_windows(&back);
    replayed.sort();
    gated.sort();
    assert_eq!(replayed, gated);
    println!("{} gcl entries over a {} ns cycle -> {path}", back.len(), cycle);
    Ok(())
}
