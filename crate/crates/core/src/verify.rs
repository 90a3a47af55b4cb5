//! Replay verification of a finished schedule.
//!
//! Every window of every accepted frame is laid out explicitly over one
//! hyperperiod and checked by a sort-and-sweep per link. Nothing here reuses
//! the scheduler's modular conflict arithmetic, so the two can be checked
//! against each other.

use std::collections::BTreeMap;

use crate::model::{hyperperiod, LinkId, Nanos, Topology, TransmissionWindow};
use crate::schedule::{ConstraintViolation, Schedule, ViolationKind};

/// Cycle of the accepted frames, or `None` for an empty schedule.
pub fn schedule_cycle(schedule: &Schedule) -> Option<Nanos> {
    hyperperiod(schedule.accepted.values().map(|s| s.frame.period)).ok()
}

/// All windows of all accepted frames in `[0, horizon)`, sorted by link
/// declaration order then start time.
pub fn materialize_windows(schedule: &Schedule, topo: &Topology, horizon: Nanos) -> Vec<TransmissionWindow> {
    let mut out = Vec::new();
    for s in schedule.accepted.values() {
        let f = &s.frame;
        for o in &s.offsets {
            let Some(link) = topo.link(&o.link) else { continue };
            let len = link.duration(f.payload);
            let mut k = 0;
            while k * f.period < horizon {
                let start = k * f.period + o.offset;
                out.push(TransmissionWindow {
                    link: o.link.clone(),
                    frame: f.id,
                    instance: k,
                    start,
                    end: start + len,
                });
                k += 1;
            }
        }
    }
    out.sort_by_key(|w| (topo.link_position(&w.link), w.start, w.end, w.frame));
    out
}

/// Checks every accepted frame for deadline, forwarding and link
/// constraints; returns all violations, ordered by link then time.
pub fn replay_verify(schedule: &Schedule, topo: &Topology) -> Result<(), Vec<ConstraintViolation>> {
    let mut violations = Vec::new();
    let Some(cycle) = schedule_cycle(schedule) else {
        return Ok(());
    };
    let v = |kind, frame, link: Option<&LinkId>, instance, at| ConstraintViolation {
        kind,
        frame,
        link: link.cloned(),
        instance,
        other: None,
        at,
    };

    // per-frame structure, chaining and per-member deadlines
    for s in schedule.accepted.values() {
        let f = &s.frame;
        // a malformed aggregate cannot vouch for its members' deadlines
        if f.check().is_err() {
            violations.push(v(ViolationKind::Deadline, f.id, None, None, None));
            continue;
        }
        let route_ok = s.offsets.len() == f.route.len()
            && s.offsets.iter().zip(f.route.links()).all(|(o, l)| &o.link == l && topo.link(l).is_some());
        if !route_ok {
            violations.push(v(ViolationKind::Forwarding, f.id, None, None, None));
            continue;
        }
        for k in 0..cycle / f.period {
            let release = k * f.period;
            let mut arrival = None::<(Nanos, &LinkId)>;
            for o in &s.offsets {
                let link = topo.link(&o.link).unwrap();
                let start = release + o.offset;
                if let Some((ready, _)) = arrival {
                    if start < ready {
                        violations.push(v(ViolationKind::Forwarding, f.id, Some(&o.link), Some(k), Some(start)));
                    }
                }
                arrival = Some((start + link.duration(f.payload) + link.prop_delay_ns, &o.link));
            }
            let (done, last) = arrival.unwrap();
            for m in &f.members {
                if release % m.period == 0 && done > release + m.deadline {
                    violations.push(v(ViolationKind::Deadline, f.id, Some(last), Some(k), Some(done)));
                    break;
                }
            }
        }
    }

    // link sweep; the cycle repeats, so windows spilling past its end are
    // also compared against the start of the next cycle
    let windows = materialize_windows(schedule, topo, cycle);
    let mut by_link: BTreeMap<usize, Vec<&TransmissionWindow>> = BTreeMap::new();
    for w in &windows {
        by_link.entry(topo.link_position(&w.link).unwrap()).or_default().push(w);
    }
    for ws in by_link.values() {
        let mut reach: Option<&TransmissionWindow> = None;
        for w in ws {
            if let Some(r) = reach {
                if w.start < r.end {
                    violations.push(ConstraintViolation {
                        other: Some(r.frame),
                        ..v(ViolationKind::LinkConflict, w.frame, Some(&w.link), Some(w.instance), Some(w.start))
                    });
                }
            }
            if reach.is_none_or(|r| w.end > r.end) {
                reach = Some(w);
            }
        }
        if let (Some(last), Some(first)) = (reach, ws.first()) {
            if last.end > cycle && last.end - cycle > first.start {
                violations.push(ConstraintViolation {
                    other: Some(last.frame),
                    ..v(ViolationKind::LinkConflict, first.frame, Some(&first.link), Some(first.instance), Some(first.start))
                });
            }
        }
    }

    if violations.is_empty() {
        Ok(())
    } else {
        violations.sort_by(|a, b| {
            let pos = |x: &ConstraintViolation| x.link.as_ref().and_then(|l| topo.link_position(l));
            (pos(a), a.at, a.frame, a.kind).cmp(&(pos(b), b.at, b.frame, b.kind))
        });
        Err(violations)
    }
}
