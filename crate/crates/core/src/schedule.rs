use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::model::{AggregateFrame, FlowId, FrameId, LinkId, Nanos};

/// Offsets are relative to each release `k * period` of the frame.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkOffset {
    pub link: LinkId,
    pub offset: Nanos,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledFrame {
    pub frame: AggregateFrame,
    /// One entry per route link, in route order.
    pub offsets: Vec<LinkOffset>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Deadline,
    Forwarding,
    LinkConflict,
    Oversize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub flow: FlowId,
    /// Frame the flow was last attempted in; absent for oversize flows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<FrameId>,
    pub reason: RejectReason,
}

/// A non-critical flow pulled out of an unschedulable aggregate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extraction {
    pub aggregate: FrameId,
    pub flow: FlowId,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub algorithm: String,
    #[serde(serialize_with = "as_list", deserialize_with = "from_list")]
    pub accepted: BTreeMap<FrameId, ScheduledFrame>,
    pub rejected: Vec<Rejection>,
    #[serde(default)]
    pub reassembly: Vec<Extraction>,
}

impl Schedule {
    pub fn new(algorithm: impl Into<String>) -> Self {
        Schedule {
            algorithm: algorithm.into(),
            ..Default::default()
        }
    }

    pub fn offset(&self, frame: FrameId, link: &LinkId) -> Option<Nanos> {
        self.accepted
            .get(&frame)?
            .offsets
            .iter()
            .find(|o| &o.link == link)
            .map(|o| o.offset)
    }

    pub fn accept(&mut self, frame: AggregateFrame, offsets: Vec<Nanos>) {
        let offsets = frame
            .route
            .links()
            .iter()
            .zip(offsets)
            .map(|(link, offset)| LinkOffset {
                link: link.clone(),
                offset,
            })
            .collect();
        self.accepted.insert(frame.id, ScheduledFrame { frame, offsets });
    }

    pub fn reject_frame(&mut self, frame: &AggregateFrame, reason: RejectReason) {
        for id in frame.member_ids() {
            self.rejected.push(Rejection {
                flow: id,
                frame: Some(frame.id),
                reason,
            });
        }
    }

    pub fn accepted_flows(&self) -> BTreeSet<FlowId> {
        self.accepted
            .values()
            .flat_map(|s| s.frame.member_ids())
            .collect()
    }

    pub fn rejected_flows(&self) -> BTreeSet<FlowId> {
        self.rejected.iter().map(|r| r.flow).collect()
    }

    pub fn rejected_frames(&self) -> BTreeSet<FrameId> {
        self.rejected.iter().filter_map(|r| r.frame).collect()
    }

    /// Structural invariants: one offset per route link, and no frame or
    /// flow both accepted and rejected.
    pub fn is_well_formed(&self) -> bool {
        let offsets_ok = self.accepted.iter().all(|(id, s)| {
            *id == s.frame.id
                && s.offsets.len() == s.frame.route.len()
                && s.offsets
                    .iter()
                    .zip(s.frame.route.links())
                    .all(|(o, l)| &o.link == l)
        });
        let frames = self.rejected_frames();
        let flows = self.rejected_flows();
        offsets_ok
            && self.accepted.keys().all(|id| !frames.contains(id))
            && self.accepted_flows().is_disjoint(&flows)
    }
}

fn as_list<S: Serializer>(
    map: &BTreeMap<FrameId, ScheduledFrame>,
    s: S,
) -> Result<S::Ok, S::Error> {
    s.collect_seq(map.values())
}

fn from_list<'de, D: Deserializer<'de>>(
    d: D,
) -> Result<BTreeMap<FrameId, ScheduledFrame>, D::Error> {
    let list = Vec::<ScheduledFrame>::deserialize(d)?;
    Ok(list.into_iter().map(|s| (s.frame.id, s)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Deadline,
    Forwarding,
    LinkConflict,
}

impl From<ViolationKind> for RejectReason {
    fn from(k: ViolationKind) -> Self {
        match k {
            ViolationKind::Deadline => RejectReason::Deadline,
            ViolationKind::Forwarding => RejectReason::Forwarding,
            ViolationKind::LinkConflict => RejectReason::LinkConflict,
        }
    }
}

/// A broken deadline, forwarding or link constraint.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConstraintViolation {
    pub kind: ViolationKind,
    pub frame: FrameId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<LinkId>,
    /// Instance of `frame`, when the violation is tied to one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<u64>,
    /// The other frame in a link conflict.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub other: Option<FrameId>,
    /// Absolute time the violation was observed at, if known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<Nanos>,
}

impl std::fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?} frame {}", self.kind, self.frame)?;
        if let Some(l) = &self.link {
            write!(f, " link {l}")?;
        }
        if let Some(k) = self.instance {
            write!(f, " instance {k}")?;
        }
        if let Some(o) = self.other {
            write!(f, " vs frame {o}")?;
        }
        if let Some(t) = self.at {
            write!(f, " at {t} ns")?;
        }
        Ok(())
    }
}
