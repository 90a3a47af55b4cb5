//! Time-triggered schedule synthesis for mixed-criticality TSN traffic.
//!
//! The pipeline is: [`workload`] produces flows, [`aggregation`] packs
//! compatible flows into shared frames, [`scheduler`] places frames on the
//! links (shedding non-critical members from frames that do not fit), and
//! [`verify`] replays the result independently. [`metrics`] and [`gcl`]
//! turn a verified schedule into acceptance/bandwidth figures and gate
//! control lists. [`baselines`] holds the two no-wait comparison
//! schedulers, and [`experiment`] drives frame-count sweeps over all three.

pub mod aggregation;
pub mod baselines;
pub mod error;
pub mod experiment;
pub mod gcl;
pub mod metrics;
pub mod model;
pub mod schedule;
pub mod scheduler;
pub mod verify;
pub mod workload;

#[cfg(test)]
mod testutil;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use aggregation::{aggregate_all, AggregationOptions};
pub use error::{Error, Result};
pub use model::{AggregateFrame, Flow, Nanos, Topology};
pub use schedule::Schedule;
pub use scheduler::SchedulerConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Mcfs2l,
    Nwtt,
    Rnwtt,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Mcfs2l, Algorithm::Nwtt, Algorithm::Rnwtt];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Mcfs2l => scheduler::MCFS2L,
            Algorithm::Nwtt => baselines::NWTT,
            Algorithm::Rnwtt => baselines::RNWTT,
        }
    }

    /// Runs the algorithm end to end on raw flows. The returned duration
    /// covers aggregation and scheduling only.
    pub fn run(self, flows: &[Flow], topo: &Topology, cfg: &SchedulerConfig, agg: &AggregationOptions) -> (Schedule, Duration) {
        let t0 = Instant::now();
        let schedule = match self {
            Algorithm::Mcfs2l => {
                let a = aggregate_all(flows, agg, &mut aggregation::FrameIds::default());
                let mut s = scheduler::schedule_mcfs2l(&a.frames, topo, cfg, agg);
                for flow in a.oversize {
                    s.rejected.push(schedule::Rejection {
                        flow,
                        frame: None,
                        reason: schedule::RejectReason::Oversize,
                    });
                }
                s
            }
            Algorithm::Nwtt => baselines::schedule_nwtt(flows, topo, cfg),
            Algorithm::Rnwtt => baselines::schedule_rnwtt(flows, topo, cfg),
        };
        (schedule, t0.elapsed())
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s) || s.eq_ignore_ascii_case("mcfs-2l") && *a == Algorithm::Mcfs2l)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown algorithm `{s}`")))
    }
}
