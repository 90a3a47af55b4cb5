//! Small builders shared by unit tests.

use crate::model::{AggregateFrame, Criticality, Flow, FlowId, FrameId, Nanos, Route};

pub fn flow(id: u32, src: &str, period: Nanos, deadline: Nanos, payload: u32, critical: bool) -> Flow {
    Flow {
        id: FlowId(id),
        criticality: if critical {
            Criticality::Critical
        } else {
            Criticality::NonCritical
        },
        period,
        deadline,
        payload,
        src: src.into(),
        dst: "dcu2".into(),
        route: Route(vec![format!("{src}-sw").as_str().into(), "sw-dcu2".into()]),
    }
}

pub fn single(id: u32, src: &str, period: Nanos, deadline: Nanos, payload: u32, critical: bool) -> AggregateFrame {
    AggregateFrame::singleton(FrameId(id), flow(id, src, period, deadline, payload, critical))
}

/// Payload whose frame takes exactly `us` microseconds at 100 Mbit/s.
pub fn payload_for_us(us: u64) -> u32 {
    assert!((us * 1000).is_multiple_of(80) && us * 1000 / 80 > 42);
    (us * 1000 / 80 - 42) as u32
}
