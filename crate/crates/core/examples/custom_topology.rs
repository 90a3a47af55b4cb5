//! Schedule over a topology read from JSON: two switches in a line with a
//! slow middle hop.

use tsn_sched::workload::{generate, load_topology, WorkloadParams};
use tsn_sched::verify::replay_verify;
use tsn_sched::{Algorithm, AggregationOptions, SchedulerConfig};

const TOPOLOGY: &str = r#"{
  "nodes": [
    {"id": "cam", "kind": "endpoint"},
    {"id": "radar", "kind": "endpoint"},
    {"id": "ecu", "kind": "endpoint"},
    {"id": "sw1", "kind": "switch"},
    {"id": "sw2", "kind": "switch"}
  ],
  "links": [
    {"id": "cam-sw1", "src": "cam", "dst": "sw1", "rate_bps": 100000000},
    {"id": "radar-sw1", "src": "radar", "dst": "sw1", "rate_bps": 100000000},
    {"id": "sw1-sw2", "src": "sw1", "dst": "sw2", "rate_bps": 100000000, "prop_delay_ns": 5000},
    {"id": "sw2-ecu", "src": "sw2", "dst": "ecu", "rate_bps": 100000000}
  ]
}"#;

fn main() -> tsn_sched::Result<()> {
    let path = std::env::temp_dir().join("line-topology.json");
    std::fs::write(&path, TOPOLOGY).map_err(tsn_sched::Error::io(&path))?;
    let topo = load_topology(&path)?;

    let params = WorkloadParams {
        sources: vec!["cam".into(), "radar".into()],
        destinations: vec!["ecu".into()],
        ..WorkloadParams::with(400, 4)
    };
    let flows = generate(&params, &topo)?;
    for algo in Algorithm::ALL {
        let (s, _) = algo.run(&flows, &topo, &SchedulerConfig::default(), &AggregationOptions::default());
        replay_verify(&s, &topo).expect("sound schedule");
        println!("{algo}: {} of {} flows accepted", s.accepted_flows().len(), flows.len());
    }
    Ok(())
}
