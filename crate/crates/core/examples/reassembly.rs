//! A mixed aggregate that misses its deadline behind a critical flow.
//! MCFS-2L sheds the non-critical members until the rest fits, then tries
//! the shed flows again on their own.

use tsn_sched::model::{Criticality, FlowId, FrameId, Route, NS_PER_MS, NS_PER_US};
use tsn_sched::scheduler::schedule_mcfs2l;
use tsn_sched::verify::replay_verify;
use tsn_sched::{AggregateFrame, AggregationOptions, Flow, SchedulerConfig, Topology};

fn flow(id: u32, src: &str, deadline_us: u64, payload: u32, critical: bool) -> Flow {
    Flow {
        id: FlowId(id),
        criticality: if critical { Criticality::Critical } else { Criticality::NonCritical },
        period: 20 * NS_PER_MS,
        deadline: deadline_us * NS_PER_US,
        payload,
        src: src.into(),
        dst: "dcu2".into(),
        route: Route(vec![format!("{src}-sw").as_str().into(), "sw-dcu2".into()]),
    }
}

fn main() -> tsn_sched::Result<()> {
    let topo = Topology::automotive_star();
    // 658 B takes 56 us per hop
    let blocker = AggregateFrame::singleton(FrameId(0), flow(0, "dcu3", 120, 658, true));
    let mixed = AggregateFrame::from_members(
        FrameId(1),
        vec![flow(1, "dcu1", 150, 300, true), flow(2, "dcu1", 150, 400, false), flow(3, "dcu1", 150, 200, false)],
    );
    let cfg = SchedulerConfig { step: 1, ..Default::default() };
    let s = schedule_mcfs2l(&[blocker, mixed], &topo, &cfg, &AggregationOptions::default());
    replay_verify(&s, &topo).expect("schedule replays cleanly");

    for sf in s.accepted.values() {
        let ids: Vec<u32> = sf.frame.member_ids().map(|f| f.0).collect();
        let offs: Vec<String> = sf.offsets.iter().map(|o| format!("{}@{}", o.link.0, o.offset)).collect();
        println!("frame {:>2} flows {ids:?} {}", sf.frame.id.0, offs.join(" "));
    }
    for e in &s.reassembly {
        println!("shed flow {} from frame {}", e.flow.0, e.aggregate.0);
    }
    for r in &s.rejected {
        println!("rejected flow {} ({:?})", r.flow.0, r.reason);
    }
    Ok(())
}
