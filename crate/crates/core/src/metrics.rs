use std::collections::BTreeSet;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::model::{hyperperiod, Flow, Nanos, Topology};
use crate::schedule::Schedule;

/// Outcome of one scheduler run.
///
/// `bandwidth_utilization` sums wire time over every accepted frame, every
/// instance in the hyperperiod and every route link, then divides by the
/// hyperperiod. It is not divided by link count and can exceed 1 on busy
/// multi-link topologies; `bandwidth_per_link` is the per-link mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub algorithm: String,
    pub n_frames: usize,
    pub seed: u64,
    pub critical_accepted: usize,
    pub critical_total: usize,
    pub noncritical_accepted: usize,
    pub noncritical_total: usize,
    pub critical_acceptance: f64,
    pub noncritical_acceptance: f64,
    pub bandwidth_utilization: f64,
    pub bandwidth_per_link: f64,
    pub execution_time: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    // an empty class has nothing to miss
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Metrics for `schedule` against the full input `flows`. Acceptance is
/// counted per original flow, through aggregate membership.
pub fn compute_metrics(schedule: &Schedule, flows: &[Flow], topo: &Topology, seed: u64, elapsed: Duration) -> RunMetrics {
    let accepted = schedule.accepted_flows();
    let (mut ca, mut ct, mut na, mut nt) = (0, 0, 0, 0);
    for f in flows {
        let hit = usize::from(accepted.contains(&f.id));
        if f.criticality.is_critical() {
            ca += hit;
            ct += 1;
        } else {
            na += hit;
            nt += 1;
        }
    }

    let cycle = hyperperiod(flows.iter().map(|f| f.period)).unwrap_or(1);
    let mut busy: u128 = 0;
    for s in schedule.accepted.values() {
        let per_instance: Nanos = s
            .offsets
            .iter()
            .map(|o| topo.link(&o.link).expect("schedule link in topology").duration(s.frame.payload))
            .sum();
        busy += u128::from(cycle / s.frame.period) * u128::from(per_instance);
    }
    let utilization = busy as f64 / cycle as f64;
    let used: BTreeSet<_> = flows.iter().flat_map(|f| f.route.links()).collect();

    RunMetrics {
        algorithm: schedule.algorithm.clone(),
        n_frames: flows.len(),
        seed,
        critical_accepted: ca,
        critical_total: ct,
        noncritical_accepted: na,
        noncritical_total: nt,
        critical_acceptance: ratio(ca, ct),
        noncritical_acceptance: ratio(na, nt),
        bandwidth_utilization: utilization,
        bandwidth_per_link: utilization / used.len().max(1) as f64,
        execution_time: elapsed.as_secs_f64(),
    }
}
