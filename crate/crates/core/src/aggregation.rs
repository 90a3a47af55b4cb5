//! Mixed-criticality frame aggregation.
//!
//! Flows sharing source, destination and route are packed first-fit
//! decreasing (payload descending, flow id ascending) into clusters. A flow
//! joins an open cluster only if the payload cap still holds and its period
//! divides, or is divided by, every period already in the cluster. Each
//! cluster then becomes one [`AggregateFrame`] with gcd period, min deadline
//! and summed payload.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{AggregateFrame, Flow, FlowId, FrameId, Nanos, NodeId, Route, MAX_PAYLOAD};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AggregationOptions {
    pub max_payload: u32,
    /// Only cluster flows with identical periods.
    pub equal_periods_only: bool,
}

impl Default for AggregationOptions {
    fn default() -> Self {
        AggregationOptions {
            max_payload: MAX_PAYLOAD,
            equal_periods_only: false,
        }
    }
}

impl AggregationOptions {
    fn admits(&self, cluster: &Cluster, flow: &Flow) -> bool {
        if cluster.total_payload() + flow.payload > self.max_payload {
            return false;
        }
        cluster.flows.iter().all(|f| {
            let (a, b) = (f.period, flow.period);
            if self.equal_periods_only {
                a == b
            } else {
                a % b == 0 || b % a == 0
            }
        })
    }
}

/// Flows that may travel together in one frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cluster {
    flows: Vec<Flow>,
}

impl Cluster {
    pub fn flows(&self) -> &[Flow] {
        &self.flows
    }

    pub fn flow_ids(&self) -> Vec<FlowId> {
        self.flows.iter().map(|f| f.id).collect()
    }

    pub fn total_payload(&self) -> u32 {
        self.flows.iter().map(|f| f.payload).sum()
    }

    pub fn period_set(&self) -> BTreeSet<Nanos> {
        self.flows.iter().map(|f| f.period).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Clustering {
    pub clusters: Vec<Cluster>,
    /// Flows whose payload alone exceeds the cap.
    pub oversize: Vec<FlowId>,
}

type GroupKey<'a> = (&'a NodeId, &'a NodeId, &'a Route);

pub fn cluster_flows(flows: &[Flow], opts: &AggregationOptions) -> Clustering {
    let mut groups: BTreeMap<GroupKey<'_>, Vec<&Flow>> = BTreeMap::new();
    let mut oversize = Vec::new();
    for f in flows {
        if f.payload > opts.max_payload {
            oversize.push(f.id);
        } else {
            groups.entry((&f.src, &f.dst, &f.route)).or_default().push(f);
        }
    }

    let mut clusters = Vec::new();
    for (_, mut members) in groups {
        members.sort_by(|a, b| b.payload.cmp(&a.payload).then(a.id.cmp(&b.id)));
        let mut open: Vec<Cluster> = Vec::new();
        for f in members {
            match open.iter_mut().find(|c| opts.admits(c, f)) {
                Some(c) => c.flows.push(f.clone()),
                None => open.push(Cluster {
                    flows: vec![f.clone()],
                }),
            }
        }
        clusters.extend(open);
    }
    Clustering { clusters, oversize }
}

pub fn build_aggregate(cluster: &Cluster, id: FrameId) -> AggregateFrame {
    AggregateFrame::from_members(id, cluster.flows.clone())
}

/// Hands out fresh, increasing frame ids.
#[derive(Clone, Debug, Default)]
pub struct FrameIds(u32);

impl FrameIds {
    pub fn starting_at(first: u32) -> Self {
        FrameIds(first)
    }

    pub fn next_id(&mut self) -> FrameId {
        let id = FrameId(self.0);
        self.0 += 1;
        id
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Aggregation {
    pub frames: Vec<AggregateFrame>,
    pub oversize: Vec<FlowId>,
}

impl Aggregation {
    pub fn report(&self) -> AggregationReport {
        AggregationReport {
            clusters: self
                .frames
                .iter()
                .map(|f| ClusterReport {
                    frame: f.id,
                    members: f.member_ids().collect(),
                    period: f.period,
                    deadline: f.deadline,
                    payload: f.payload,
                    contains_critical: f.contains_critical,
                })
                .collect(),
            oversize: self.oversize.clone(),
        }
    }
}

pub fn aggregate_all(flows: &[Flow], opts: &AggregationOptions, ids: &mut FrameIds) -> Aggregation {
    let clustering = cluster_flows(flows, opts);
    Aggregation {
        frames: clustering
            .clusters
            .iter()
            .map(|c| build_aggregate(c, ids.next_id()))
            .collect(),
        oversize: clustering.oversize,
    }
}

/// Audit view of an aggregation pass.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregationReport {
    pub clusters: Vec<ClusterReport>,
    pub oversize: Vec<FlowId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub frame: FrameId,
    pub members: Vec<FlowId>,
    pub period: Nanos,
    pub deadline: Nanos,
    pub payload: u32,
    pub contains_critical: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Criticality, NS_PER_MS, NS_PER_US};

    fn flow(id: u32, src: &str, period_ms: u64, deadline_us: u64, payload: u32, crit: bool) -> Flow {
        Flow {
            id: FlowId(id),
            criticality: if crit {
                Criticality::Critical
            } else {
                Criticality::NonCritical
            },
            period: period_ms * NS_PER_MS,
            deadline: deadline_us * NS_PER_US,
            payload,
            src: src.into(),
            dst: "dcu2".into(),
            route: Route(vec![format!("{src}-sw").as_str().into(), "sw-dcu2".into()]),
        }
    }

    fn opts() -> AggregationOptions {
        AggregationOptions::default()
    }

    #[test]
    fn harmonic_pair_clusters() {
        let flows = [flow(1, "dcu1", 20, 500, 400, true), flow(2, "dcu1", 40, 300, 600, false)];
        let c = cluster_flows(&flows, &opts());
        assert_eq!(c.clusters.len(), 1);
        assert_eq!(c.clusters[0].total_payload(), 1000);
        let agg = build_aggregate(&c.clusters[0], FrameId(0));
        assert_eq!(agg.period, 20 * NS_PER_MS);
        assert_eq!(agg.deadline, 300 * NS_PER_US);
        assert_eq!(agg.payload, 1000);
        assert!(agg.contains_critical);
        agg.check().unwrap();
    }

    #[test]
    fn non_harmonic_pair_stays_apart() {
        let flows = [flow(1, "dcu1", 20, 500, 400, true), flow(2, "dcu1", 30, 300, 600, false)];
        let c = cluster_flows(&flows, &opts());
        assert_eq!(c.clusters.len(), 2);
        assert!(c.clusters.iter().all(|c| c.flows().len() == 1));
    }

    /// Every way of splitting three items into bins of capacity 1500 that
    /// keeps 1400 and 200 apart; first-fit decreasing must land on one.
    #[test]
    fn largest_first_packing() {
        let payloads = [1400u32, 200, 100];
        let mut feasible_with_1400_200 = false;
        for mask in 0u8..8 {
            // bin 0 gets items whose bit is set
            let bin0: u32 = (0..3).filter(|i| mask >> i & 1 == 1).map(|i| payloads[i]).sum();
            let bin1: u32 = payloads.iter().sum::<u32>() - bin0;
            let together = (mask & 1) == (mask >> 1 & 1);
            if bin0 <= 1500 && bin1 <= 1500 && together {
                feasible_with_1400_200 = true;
            }
        }
        assert!(!feasible_with_1400_200);

        let flows = [
            flow(1, "dcu1", 20, 500, 1400, true),
            flow(2, "dcu1", 20, 500, 200, true),
            flow(3, "dcu1", 40, 500, 100, false),
        ];
        let c = cluster_flows(&flows, &opts());
        let ids: Vec<Vec<u32>> = c
            .clusters
            .iter()
            .map(|c| c.flow_ids().iter().map(|f| f.0).collect())
            .collect();
        assert_eq!(ids, vec![vec![1, 3], vec![2]]);
    }

    #[test]
    fn equal_payload_ties_break_on_id() {
        let flows = [flow(9, "dcu1", 20, 500, 800, true), flow(4, "dcu1", 20, 500, 800, true)];
        let c = cluster_flows(&flows, &opts());
        assert_eq!(c.clusters[0].flow_ids(), vec![FlowId(4)]);
        assert_eq!(c.clusters[1].flow_ids(), vec![FlowId(9)]);
    }

    #[test]
    fn singleton_is_identity() {
        let f = flow(7, "dcu3", 50, 250, 321, false);
        let a = aggregate_all(std::slice::from_ref(&f), &opts(), &mut FrameIds::default());
        let agg = &a.frames[0];
        assert_eq!(
            (agg.period, agg.deadline, agg.payload, &agg.route, agg.contains_critical),
            (f.period, f.deadline, f.payload, &f.route, false)
        );
        assert_eq!(agg.members, vec![f]);
    }

    #[test]
    fn gcd_of_harmonic_set_is_min() {
        let flows = [
            flow(1, "dcu1", 40, 500, 100, true),
            flow(2, "dcu1", 40, 500, 100, true),
            flow(3, "dcu1", 80, 500, 100, true),
        ];
        let a = aggregate_all(&flows, &opts(), &mut FrameIds::default());
        assert_eq!(a.frames.len(), 1);
        assert_eq!(a.frames[0].period, 40 * NS_PER_MS);
    }

    #[test]
    fn empty_and_distinct_sources() {
        assert!(aggregate_all(&[], &opts(), &mut FrameIds::default()).frames.is_empty());
        let flows = [flow(1, "dcu1", 20, 500, 100, true), flow(2, "dcu3", 20, 500, 100, true)];
        assert_eq!(aggregate_all(&flows, &opts(), &mut FrameIds::default()).frames.len(), 2);
    }

    #[test]
    fn mixed_criticality_three_members() {
        // Two critical frames and one non-critical frame, all compatible.
        let flows = [
            flow(5, "dcu1", 20, 600, 300, false),
            flow(6, "dcu1", 20, 400, 200, true),
            flow(7, "dcu1", 40, 500, 250, true),
        ];
        let a = aggregate_all(&flows, &opts(), &mut FrameIds::default());
        assert_eq!(a.frames.len(), 1);
        let agg = &a.frames[0];
        assert_eq!(agg.members.len(), 3);
        assert_eq!(agg.non_critical_count(), 1);
        assert_eq!(agg.deadline, 400 * NS_PER_US);
    }

    #[test]
    fn oversize_is_reported_not_dropped() {
        let mut big = flow(1, "dcu1", 20, 500, 900, true);
        big.payload = 900;
        let opts = AggregationOptions {
            max_payload: 800,
            ..Default::default()
        };
        let a = aggregate_all(&[big, flow(2, "dcu1", 20, 500, 100, true)], &opts, &mut FrameIds::default());
        assert_eq!(a.oversize, vec![FlowId(1)]);
        assert_eq!(a.frames.len(), 1);
        let report = serde_json::to_value(a.report()).unwrap();
        assert_eq!(report["oversize"][0], 1);
        assert_eq!(report["clusters"][0]["members"][0], 2);
    }

    #[test]
    fn equal_periods_only_option() {
        let flows = [flow(1, "dcu1", 20, 500, 400, true), flow(2, "dcu1", 40, 300, 600, false)];
        let opts = AggregationOptions {
            equal_periods_only: true,
            ..Default::default()
        };
        assert_eq!(cluster_flows(&flows, &opts).clusters.len(), 2);
    }
}
