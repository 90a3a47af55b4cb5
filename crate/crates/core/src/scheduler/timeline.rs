//! Per-link occupancy of committed strictly periodic windows.
//!
//! Two periodic windows `[a + i*p, a + i*p + c)` and `[b + j*q, b + j*q + d)`
//! collide for some `(i, j)` iff `(b - a) mod gcd(p, q)` falls in
//! `[0, c) ∪ (g - d, g)`. Checks are O(1) per committed frame.

use num_integer::Integer;

use crate::model::{Nanos, Topology};
use crate::schedule::Schedule;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Occupant {
    pub period: Nanos,
    pub offset: Nanos,
    pub duration: Nanos,
}

#[derive(Clone, Debug)]
pub(crate) struct Timeline {
    links: Vec<Vec<Occupant>>,
}

impl Timeline {
    pub fn new(topo: &Topology) -> Self {
        Timeline {
            links: vec![Vec::new(); topo.links().len()],
        }
    }

    pub fn from_schedule(schedule: &Schedule, topo: &Topology) -> Self {
        let mut t = Timeline::new(topo);
        for s in schedule.accepted.values() {
            for o in &s.offsets {
                let pos = topo.link_position(&o.link).expect("schedule link in topology");
                let duration = topo.links()[pos].duration(s.frame.payload);
                t.links[pos].push(Occupant {
                    period: s.frame.period,
                    offset: o.offset,
                    duration,
                });
            }
        }
        t
    }

    pub fn commit(&mut self, link: usize, occ: Occupant) {
        self.links[link].push(occ);
    }

    /// Latest end, relative to the candidate's own instance, among committed
    /// windows that collide with `[offset, offset + duration)`.
    pub fn blocking_end(&self, link: usize, period: Nanos, offset: Nanos, duration: Nanos) -> Option<Nanos> {
        let mut end = None;
        for occ in &self.links[link] {
            let g = period.gcd(&occ.period);
            let delta = (occ.offset % g + g - offset % g) % g;
            let e = if delta < duration {
                offset + delta + occ.duration
            } else if delta + occ.duration > g {
                offset + delta + occ.duration - g
            } else {
                continue;
            };
            end = Some(end.map_or(e, |m: Nanos| m.max(e)));
        }
        end
    }

    /// Open intervals of `phi` in `[0, limit]` for which a window at
    /// `phi + shift` collides with something committed on `link`. Sorted and
    /// merged.
    pub fn blocked_phases(
        &self,
        link: usize,
        period: Nanos,
        duration: Nanos,
        shift: Nanos,
        limit: Nanos,
    ) -> Vec<(i128, i128)> {
        let mut out = Vec::new();
        let (shift, limit) = (i128::from(shift), i128::from(limit));
        for occ in &self.links[link] {
            let g = i128::from(period.gcd(&occ.period));
            // phi blocked iff phi + shift ∈ (b - c + m g, b + d + m g)
            let lo = i128::from(occ.offset) - i128::from(duration) - shift;
            let hi = i128::from(occ.offset) + i128::from(occ.duration) - shift;
            let mut m = (-hi).div_euclid(g);
            loop {
                let (a, b) = (lo + m * g, hi + m * g);
                if a > limit {
                    break;
                }
                if b > 0 {
                    out.push((a, b));
                }
                m += 1;
            }
        }
        out.sort_unstable();
        let mut merged: Vec<(i128, i128)> = Vec::with_capacity(out.len());
        for (a, b) in out {
            match merged.last_mut() {
                // open intervals sharing an endpoint leave that point free
                Some(last) if a < last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        merged
    }
}

/// Phase set lookup over merged open intervals.
pub(crate) fn is_blocked(merged: &[(i128, i128)], phi: i128) -> bool {
    let i = merged.partition_point(|&(a, _)| a < phi);
    // candidate interval is the last one starting strictly before phi
    i > 0 && phi < merged[i - 1].1
}
