//! No-wait comparison schedulers on the raw flow set.
//!
//! Both place every flow as its own frame (frame id = flow id) and chain its
//! hops back to back: hop `i+1` starts exactly when hop `i` arrives. Only the
//! start phase on the first hop is searched.
//!
//! * NWTT takes the earliest conflict-free phase.
//! * R-NWTT samples phases uniformly without replacement from the step grid
//!   and keeps the first conflict-free one.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{AggregateFrame, Flow, FrameId, Nanos, Topology, MAX_PAYLOAD};
use crate::schedule::{RejectReason, Rejection, Schedule};
use crate::scheduler::timeline::{is_blocked, Timeline};
use crate::scheduler::{commit, order_frames, Hops, PhaseRange, SchedulerConfig};

pub const NWTT: &str = "nwtt";
pub const RNWTT: &str = "rnwtt";

/// Offsets of every hop for start phase `phi` under no-wait chaining.
fn chain(hops: &Hops, phi: Nanos) -> Vec<Nanos> {
    let mut at = phi;
    hops.durations
        .iter()
        .zip(&hops.delays)
        .map(|(d, p)| {
            let o = at;
            at += d + p;
            o
        })
        .collect()
}

fn singletons(flows: &[Flow], schedule: &mut Schedule) -> Vec<AggregateFrame> {
    let mut frames = Vec::with_capacity(flows.len());
    for f in flows {
        if f.payload > MAX_PAYLOAD {
            schedule.rejected.push(Rejection {
                flow: f.id,
                frame: None,
                reason: RejectReason::Oversize,
            });
        } else {
            frames.push(AggregateFrame::singleton(FrameId(f.id.0), f.clone()));
        }
    }
    order_frames(frames)
}

fn nwtt_phase(frame: &AggregateFrame, hops: &Hops, timeline: &Timeline, cfg: &SchedulerConfig) -> Result<Nanos, RejectReason> {
    let latency = hops.tail(0);
    if latency > frame.deadline {
        return Err(RejectReason::Deadline);
    }
    let last = frame.deadline - latency;
    let mut phi = 0;
    'search: while phi <= last {
        for (i, o) in chain(hops, phi).into_iter().enumerate() {
            if let Some(end) = timeline.blocking_end(hops.links[i], frame.period, o, hops.durations[i]) {
                phi = if cfg.fast_forward {
                    cfg.round_up(0, phi + (end - o))
                } else {
                    phi + cfg.step
                };
                continue 'search;
            }
        }
        return Ok(phi);
    }
    Err(RejectReason::LinkConflict)
}

pub fn schedule_nwtt(flows: &[Flow], topo: &Topology, cfg: &SchedulerConfig) -> Schedule {
    let mut schedule = Schedule::new(NWTT);
    let mut timeline = Timeline::new(topo);
    for frame in singletons(flows, &mut schedule) {
        let hops = Hops::new(&frame, topo);
        match nwtt_phase(&frame, &hops, &timeline, cfg) {
            Ok(phi) => {
                let offsets = chain(&hops, phi);
                commit(&mut timeline, &frame, &hops, &offsets);
                schedule.accept(frame, offsets);
            }
            Err(reason) => schedule.reject_frame(&frame, reason),
        }
    }
    schedule
}

/// Uniform sampling without replacement over `0..n` (lazy Fisher-Yates).
struct Shuffle {
    n: u64,
    drawn: u64,
    swapped: HashMap<u64, u64>,
}

impl Shuffle {
    fn new(n: u64) -> Self {
        Shuffle {
            n,
            drawn: 0,
            swapped: HashMap::new(),
        }
    }

    fn next(&mut self, rng: &mut impl Rng) -> Option<u64> {
        if self.drawn == self.n {
            return None;
        }
        let j = rng.gen_range(self.drawn..self.n);
        let at = |m: &HashMap<u64, u64>, k: u64| *m.get(&k).unwrap_or(&k);
        let picked = at(&self.swapped, j);
        let head = at(&self.swapped, self.drawn);
        self.swapped.insert(j, head);
        self.drawn += 1;
        Some(picked)
    }
}

fn rnwtt_phase(
    frame: &AggregateFrame,
    hops: &Hops,
    timeline: &Timeline,
    cfg: &SchedulerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Nanos, RejectReason> {
    let latency = hops.tail(0);
    if latency > frame.deadline {
        return Err(RejectReason::Deadline);
    }
    let feasible_max = frame.deadline - latency;
    let range_max = match cfg.phase_range {
        PhaseRange::Feasible => feasible_max,
        PhaseRange::Deadline => frame.deadline,
    };
    // blocked phase sets per hop, so each sample costs O(hops * log n)
    let blocked: Vec<_> = chain(hops, 0)
        .iter()
        .enumerate()
        .map(|(i, &shift)| {
            timeline.blocked_phases(hops.links[i], frame.period, hops.durations[i], shift, range_max)
        })
        .collect();
    let free = |phi: Nanos| {
        phi <= feasible_max && blocked.iter().all(|b| !is_blocked(b, i128::from(phi)))
    };

    let grid = range_max / cfg.step + 1;
    if cfg.max_attempts.is_none() && first_free(&blocked, feasible_max, cfg.step).is_none() {
        // exhausting the grid cannot succeed; skip the draws
        return Err(RejectReason::LinkConflict);
    }
    let budget = cfg.max_attempts.unwrap_or(grid).min(grid);
    let mut order = Shuffle::new(grid);
    for _ in 0..budget {
        let phi = order.next(rng).expect("budget within grid") * cfg.step;
        if free(phi) {
            return Ok(phi);
        }
    }
    Err(RejectReason::LinkConflict)
}

/// Smallest grid phase in `[0, max]` outside every blocked set.
fn first_free(blocked: &[Vec<(i128, i128)>], max: Nanos, step: Nanos) -> Option<Nanos> {
    let mut phi: i128 = 0;
    let step = i128::from(step);
    'scan: while phi <= i128::from(max) {
        for b in blocked {
            let i = b.partition_point(|&(a, _)| a < phi);
            if i > 0 && phi < b[i - 1].1 {
                let end = b[i - 1].1;
                phi += (end - phi + step - 1) / step * step;
                continue 'scan;
            }
        }
        return Some(phi as Nanos);
    }
    None
}

pub fn schedule_rnwtt(flows: &[Flow], topo: &Topology, cfg: &SchedulerConfig) -> Schedule {
    let mut schedule = Schedule::new(RNWTT);
    let mut timeline = Timeline::new(topo);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    for frame in singletons(flows, &mut schedule) {
        let hops = Hops::new(&frame, topo);
        match rnwtt_phase(&frame, &hops, &timeline, cfg, &mut rng) {
            Ok(phi) => {
                let offsets = chain(&hops, phi);
                commit(&mut timeline, &frame, &hops, &offsets);
                schedule.accept(frame, offsets);
            }
            Err(reason) => schedule.reject_frame(&frame, reason),
        }
    }
    schedule
}
