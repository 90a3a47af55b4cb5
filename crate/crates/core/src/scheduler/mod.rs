//! Offset synthesis with dynamic reassembly.
//!
//! Frames are taken in deadline order. Each frame is placed link by link at
//! the earliest conflict-free offset that respects store-and-forward
//! chaining; a frame that cannot meet its deadline sheds non-critical
//! members (largest payload first) until the remainder fits or only critical
//! members are left. Shed flows are re-aggregated and scheduled after every
//! first-pass frame.

pub(crate) mod timeline;

use std::cmp::Reverse;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::aggregation::{aggregate_all, AggregationOptions, FrameIds};
use crate::error::{Error, Result};
use crate::model::{AggregateFrame, Flow, Nanos, Topology, NS_PER_US};
use crate::schedule::{ConstraintViolation, Extraction, RejectReason, Schedule, ViolationKind};
use timeline::{Occupant, Timeline};

pub const MCFS2L: &str = "mcfs2l";

/// Where R-NWTT draws candidate start phases from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseRange {
    /// `[0, deadline - no-wait latency]`: every candidate can meet the deadline.
    #[default]
    Feasible,
    /// `[0, deadline]`.
    Deadline,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchedulerConfig {
    /// Offset search granularity.
    pub step: Nanos,
    /// Jump to the end of a blocking window instead of stepping through it.
    /// The jump target is rounded up to the step grid, so results match
    /// plain stepping exactly.
    pub fast_forward: bool,
    pub rng_seed: u64,
    pub phase_range: PhaseRange,
    /// R-NWTT sample budget per flow; `None` exhausts the grid.
    pub max_attempts: Option<u64>,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            step: NS_PER_US,
            fast_forward: true,
            rng_seed: 0,
            phase_range: PhaseRange::default(),
            max_attempts: None,
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.step == 0 {
            return Err(Error::InvalidParameter("step must be positive".into()));
        }
        if self.max_attempts == Some(0) {
            return Err(Error::InvalidParameter("max_attempts must be positive".into()));
        }
        Ok(())
    }

    /// Smallest `anchor + k*step` that is `>= t`.
    pub(crate) fn round_up(&self, anchor: Nanos, t: Nanos) -> Nanos {
        anchor + (t - anchor).div_ceil(self.step) * self.step
    }
}

/// Deadline ascending, then critical-bearing frames first, then frame id.
pub fn order_frames(mut frames: Vec<AggregateFrame>) -> Vec<AggregateFrame> {
    frames.sort_by_key(|f| (f.deadline, !f.contains_critical, f.id));
    frames
}

/// Per-link durations and propagation delays along the frame's route.
pub(crate) struct Hops {
    pub links: Vec<usize>,
    pub durations: Vec<Nanos>,
    pub delays: Vec<Nanos>,
}

impl Hops {
    pub fn new(frame: &AggregateFrame, topo: &Topology) -> Self {
        let links: Vec<usize> = frame
            .route
            .links()
            .iter()
            .map(|l| topo.link_position(l).expect("route link in topology"))
            .collect();
        let durations = links.iter().map(|&i| topo.links()[i].duration(frame.payload)).collect();
        let delays = links.iter().map(|&i| topo.links()[i].prop_delay_ns).collect();
        Hops {
            links,
            durations,
            delays,
        }
    }

    /// Time from the start of hop `i` to arrival at the destination when
    /// nothing waits.
    pub fn tail(&self, i: usize) -> Nanos {
        (i..self.links.len())
            .map(|k| self.durations[k] + self.delays[k])
            .sum()
    }
}

/// Validates a candidate placement against the committed schedule.
///
/// Checks, in order: the deadline on the last hop, store-and-forward
/// chaining between hops, then collisions with every committed frame over
/// all instance pairs in `lcm(period_f, period_g)`.
pub fn check_constraints(
    offsets: &[Nanos],
    frame: &AggregateFrame,
    committed: &Schedule,
    topo: &Topology,
) -> Result<(), ConstraintViolation> {
    let violation = |kind, link: Option<usize>| ConstraintViolation {
        kind,
        frame: frame.id,
        link: link.map(|i| frame.route.links()[i].clone()),
        instance: None,
        other: None,
        at: None,
    };
    let hops = Hops::new(frame, topo);
    assert_eq!(offsets.len(), hops.links.len(), "one offset per route link");
    let last = offsets.len() - 1;

    if offsets[last] + hops.durations[last] + hops.delays[last] > frame.deadline {
        return Err(violation(ViolationKind::Deadline, Some(last)));
    }
    for i in 0..last {
        if offsets[i + 1] < offsets[i] + hops.durations[i] + hops.delays[i] {
            return Err(violation(ViolationKind::Forwarding, Some(i + 1)));
        }
    }
    for (i, link) in frame.route.links().iter().enumerate() {
        let (start, dur) = (offsets[i], hops.durations[i]);
        for other in committed.accepted.values() {
            let Some(o) = other.offsets.iter().find(|o| &o.link == link) else {
                continue;
            };
            let other_dur = topo.links()[hops.links[i]].duration(other.frame.payload);
            let h = frame.period.lcm(&other.frame.period);
            for a in 0..h / frame.period {
                let s1 = i128::from(start + a * frame.period);
                for b in 0..h / other.frame.period {
                    let s2 = i128::from(o.offset + b * other.frame.period);
                    // windows near the cycle edge can meet the neighbouring cycle
                    let hit = [-1i128, 0, 1].iter().any(|k| {
                        let s2 = s2 + k * i128::from(h);
                        s1 < s2 + i128::from(other_dur) && s2 < s1 + i128::from(dur)
                    });
                    if hit {
                        return Err(ConstraintViolation {
                            other: Some(other.frame.id),
                            instance: Some(a),
                            at: Some(start + a * frame.period),
                            ..violation(ViolationKind::LinkConflict, Some(i))
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

/// Outcome of an offset search that did not succeed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Unschedulable(pub RejectReason);

pub(crate) fn search_offsets(
    frame: &AggregateFrame,
    hops: &Hops,
    timeline: &Timeline,
    cfg: &SchedulerConfig,
) -> Result<Vec<Nanos>, Unschedulable> {
    if hops.tail(0) > frame.deadline {
        return Err(Unschedulable(RejectReason::Deadline));
    }
    let mut offsets = Vec::with_capacity(hops.links.len());
    let mut earliest = 0;
    for (i, &link) in hops.links.iter().enumerate() {
        let dur = hops.durations[i];
        let tail = hops.tail(i);
        let mut at = earliest;
        loop {
            if at + tail > frame.deadline {
                return Err(Unschedulable(RejectReason::LinkConflict));
            }
            match timeline.blocking_end(link, frame.period, at, dur) {
                None => break,
                Some(end) if cfg.fast_forward => at = cfg.round_up(earliest, end),
                Some(_) => at += cfg.step,
            }
        }
        offsets.push(at);
        earliest = at + dur + hops.delays[i];
    }
    Ok(offsets)
}

pub(crate) fn commit(timeline: &mut Timeline, frame: &AggregateFrame, hops: &Hops, offsets: &[Nanos]) {
    for (i, &link) in hops.links.iter().enumerate() {
        timeline.commit(
            link,
            Occupant {
                period: frame.period,
                offset: offsets[i],
                duration: hops.durations[i],
            },
        );
    }
}

/// Earliest per-link offsets for `frame` against `committed`, or why none
/// exist before the deadline.
pub fn find_offsets(
    frame: &AggregateFrame,
    committed: &Schedule,
    topo: &Topology,
    cfg: &SchedulerConfig,
) -> Result<Vec<Nanos>, Unschedulable> {
    let timeline = Timeline::from_schedule(committed, topo);
    search_offsets(frame, &Hops::new(frame, topo), &timeline, cfg)
}

/// Removes the largest non-critical member (ties: lowest flow id). The
/// remainder keeps the frame id; `None` when nothing remains.
pub fn disaggregate_step(frame: &AggregateFrame) -> Result<(Option<AggregateFrame>, Flow)> {
    let (idx, _) = frame
        .members
        .iter()
        .enumerate()
        .filter(|(_, f)| !f.criticality.is_critical())
        .min_by_key(|(_, f)| (Reverse(f.payload), f.id))
        .ok_or(Error::NothingToExtract(frame.id))?;
    let mut rest = frame.members.clone();
    let extracted = rest.remove(idx);
    let reduced = (!rest.is_empty()).then(|| AggregateFrame::from_members(frame.id, rest));
    Ok((reduced, extracted))
}

/// Schedules pre-aggregated frames with dynamic reassembly. `agg` governs
/// how shed flows are re-clustered.
pub fn schedule_mcfs2l(
    frames: &[AggregateFrame],
    topo: &Topology,
    cfg: &SchedulerConfig,
    agg: &AggregationOptions,
) -> Schedule {
    let mut schedule = Schedule::new(MCFS2L);
    let mut timeline = Timeline::new(topo);
    let next = frames.iter().map(|f| f.id.0 + 1).max().unwrap_or(0);
    let mut ids = FrameIds::starting_at(next);

    let mut try_place = |frame: &AggregateFrame, schedule: &mut Schedule| -> Result<(), RejectReason> {
        let hops = Hops::new(frame, topo);
        let offsets = search_offsets(frame, &hops, &timeline, cfg).map_err(|u| u.0)?;
        commit(&mut timeline, frame, &hops, &offsets);
        schedule.accept(frame.clone(), offsets);
        Ok(())
    };

    let mut shed: Vec<Flow> = Vec::new();
    for frame in order_frames(frames.to_vec()) {
        let mut current = frame;
        while let Err(reason) = try_place(&current, &mut schedule) {
            if current.non_critical_count() == 0 {
                schedule.reject_frame(&current, reason);
                break;
            }
            let (reduced, flow) = disaggregate_step(&current).expect("has non-critical member");
            schedule.reassembly.push(Extraction {
                aggregate: current.id,
                flow: flow.id,
            });
            shed.push(flow);
            match reduced {
                Some(r) => current = r,
                None => break,
            }
        }
    }

    let second = aggregate_all(&shed, agg, &mut ids);
    for frame in order_frames(second.frames) {
        let Err(reason) = try_place(&frame, &mut schedule) else {
            continue;
        };
        if frame.members.len() == 1 {
            schedule.reject_frame(&frame, reason);
            continue;
        }
        for flow in &frame.members {
            let single = AggregateFrame::singleton(ids.next_id(), flow.clone());
            if let Err(reason) = try_place(&single, &mut schedule) {
                schedule.reject_frame(&single, reason);
            }
        }
    }
    schedule
}
