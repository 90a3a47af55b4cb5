//! Gate control lists for the time-triggered queue.
//!
//! Each egress port gets a cycle-long timetable for queue 7: one `open`
//! entry per transmission window and `closed` entries covering every gap.
//! Back-to-back windows stay separate entries so the windows can be read
//! back exactly.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{LinkId, Nanos, Topology, TT_QUEUE};
use crate::schedule::Schedule;
use crate::verify::materialize_windows;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateState {
    Open,
    Closed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GclEntry {
    pub port: LinkId,
    pub queue: u8,
    pub start_ns: Nanos,
    pub end_ns: Nanos,
    pub state: GateState,
}

/// Entries for every link of `topo`, in link declaration order, over
/// `[0, cycle)`.
pub fn emit_gcl(schedule: &Schedule, topo: &Topology, cycle: Nanos) -> Vec<GclEntry> {
    let windows = materialize_windows(schedule, topo, cycle);
    let mut out = Vec::new();
    for link in topo.links() {
        let entry = |start_ns, end_ns, state| GclEntry {
            port: link.id.clone(),
            queue: TT_QUEUE,
            start_ns,
            end_ns,
            state,
        };
        let mut at = 0;
        for w in windows.iter().filter(|w| w.link == link.id) {
            debug_assert!(w.end <= cycle, "window crosses the cycle boundary");
            if w.start > at {
                out.push(entry(at, w.start, GateState::Closed));
            }
            out.push(entry(w.start, w.end, GateState::Open));
            at = w.end;
        }
        if at < cycle {
            out.push(entry(at, cycle, GateState::Closed));
        }
    }
    out
}

/// Open intervals as `(port, start, end)`, in entry order.
pub fn open_windows(entries: &[GclEntry]) -> Vec<(LinkId, Nanos, Nanos)> {
    entries
        .iter()
        .filter(|e| e.state == GateState::Open)
        .map(|e| (e.port.clone(), e.start_ns, e.end_ns))
        .collect()
}

/// CSV with header `port,queue,start_ns,end_ns,state`.
pub fn write_gcl_csv(entries: &[GclEntry], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for e in entries {
        w.serialize(e)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_gcl_csv(input: impl std::io::Read) -> Result<Vec<GclEntry>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}
