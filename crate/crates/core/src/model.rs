//! Topology, flow and schedule types plus the integer time arithmetic shared
//! by every other module.
//!
//! All times are integer nanoseconds. At 100 Mbit/s one byte takes exactly
//! 80 ns on the wire, so frame durations in the supported payload range are
//! exact.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer nanoseconds.
pub type Nanos = u64;

pub const NS_PER_US: Nanos = 1_000;
pub const NS_PER_MS: Nanos = 1_000_000;

/// Largest payload a single frame may carry, in bytes.
pub const MAX_PAYLOAD: u32 = 1500;
/// Per-frame on-wire overhead (header, preamble, FCS, IFG), in bytes.
pub const FRAME_OVERHEAD: u32 = 42;
/// Default link rate, 100 Mbit/s.
pub const DEFAULT_RATE_BPS: u64 = 100_000_000;
/// Queue carrying time-triggered traffic.
pub const TT_QUEUE: u8 = 7;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(pub String);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlowId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FrameId(pub u32);

macro_rules! display_inner {
    ($($t:ty),*) => {
        $(impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        })*
    };
}
display_inner!(NodeId, LinkId, FlowId, FrameId);

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_owned())
    }
}

impl From<&str> for LinkId {
    fn from(s: &str) -> Self {
        LinkId(s.to_owned())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Endpoint,
    Switch,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
}

/// A directed dataflow link. A full-duplex cable is two links.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub id: LinkId,
    pub src: NodeId,
    pub dst: NodeId,
    pub rate_bps: u64,
    #[serde(default)]
    pub prop_delay_ns: Nanos,
}

impl Link {
    pub fn new(id: &str, src: &str, dst: &str) -> Self {
        Link {
            id: id.into(),
            src: src.into(),
            dst: dst.into(),
            rate_bps: DEFAULT_RATE_BPS,
            prop_delay_ns: 0,
        }
    }

    /// Wire time of one frame carrying `payload` bytes on this link.
    pub fn duration(&self, payload: u32) -> Nanos {
        // rate_bps > 0 is a topology invariant.
        transmission_duration(payload, FRAME_OVERHEAD, self.rate_bps).expect("validated link rate")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTopology", into = "RawTopology")]
pub struct Topology {
    nodes: Vec<Node>,
    links: Vec<Link>,
    #[serde(skip)]
    link_index: HashMap<LinkId, usize>,
}

#[derive(Serialize, Deserialize)]
struct RawTopology {
    nodes: Vec<Node>,
    links: Vec<Link>,
}

impl TryFrom<RawTopology> for Topology {
    type Error = Error;

    fn try_from(raw: RawTopology) -> Result<Self> {
        Topology::new(raw.nodes, raw.links)
    }
}

impl From<Topology> for RawTopology {
    fn from(t: Topology) -> Self {
        RawTopology {
            nodes: t.nodes,
            links: t.links,
        }
    }
}

impl Topology {
    pub fn new(nodes: Vec<Node>, links: Vec<Link>) -> Result<Self> {
        let mut ids = BTreeSet::new();
        for n in &nodes {
            if !ids.insert(&n.id) {
                return Err(Error::InvalidTopology(format!("duplicate node id `{}`", n.id)));
            }
        }
        let mut link_index = HashMap::with_capacity(links.len());
        for (i, l) in links.iter().enumerate() {
            if link_index.insert(l.id.clone(), i).is_some() {
                return Err(Error::InvalidTopology(format!("duplicate link id `{}`", l.id)));
            }
            if l.rate_bps == 0 {
                return Err(Error::InvalidTopology(format!("link `{}` has zero rate", l.id)));
            }
            if l.src == l.dst {
                return Err(Error::InvalidTopology(format!("link `{}` is a self-loop", l.id)));
            }
            for end in [&l.src, &l.dst] {
                if !ids.contains(end) {
                    return Err(Error::InvalidTopology(format!(
                        "link `{}` references unknown node `{end}`",
                        l.id
                    )));
                }
            }
        }
        Ok(Topology {
            nodes,
            links,
            link_index,
        })
    }

    /// Three domain controllers around one switch, all links full duplex at
    /// 100 Mbit/s. `dcu1` is the ADAS domain, `dcu2` vehicle control and
    /// `dcu3` the cockpit domain.
    pub fn automotive_star() -> Self {
        let mut nodes = vec![Node {
            id: "sw".into(),
            kind: NodeKind::Switch,
        }];
        let mut links = Vec::new();
        for dcu in ["dcu1", "dcu2", "dcu3"] {
            nodes.push(Node {
                id: dcu.into(),
                kind: NodeKind::Endpoint,
            });
            links.push(Link::new(&format!("{dcu}-sw"), dcu, "sw"));
            links.push(Link::new(&format!("sw-{dcu}"), "sw", dcu));
        }
        Topology::new(nodes, links).expect("static topology is valid")
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.iter().find(|n| &n.id == id)
    }

    pub fn link(&self, id: &LinkId) -> Option<&Link> {
        self.link_index.get(id).map(|&i| &self.links[i])
    }

    pub fn link_position(&self, id: &LinkId) -> Option<usize> {
        self.link_index.get(id).copied()
    }

    pub fn endpoints(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Endpoint)
    }

    /// Fewest-hop route from `src` to `dst`; ties resolve to the lowest link
    /// declaration order so the result is deterministic.
    pub fn shortest_route(&self, src: &NodeId, dst: &NodeId) -> Option<Route> {
        if src == dst {
            return None;
        }
        let mut prev: BTreeMap<&NodeId, usize> = BTreeMap::new();
        let mut queue = VecDeque::from([src]);
        let mut seen = BTreeSet::from([src]);
        while let Some(at) = queue.pop_front() {
            if at == dst {
                break;
            }
            for (i, l) in self.links.iter().enumerate() {
                if &l.src == at && seen.insert(&l.dst) {
                    prev.insert(&l.dst, i);
                    queue.push_back(&l.dst);
                }
            }
        }
        let mut links = Vec::new();
        let mut at = dst;
        while at != src {
            let &i = prev.get(at)?;
            links.push(self.links[i].id.clone());
            at = &self.links[i].src;
        }
        links.reverse();
        Some(Route(links))
    }

    /// Checks that `route` chains through declared links from an endpoint
    /// `src` to an endpoint `dst`.
    pub fn validate_route(&self, route: &Route, src: &NodeId, dst: &NodeId) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidRoute(msg));
        if route.0.is_empty() {
            return bad("route is empty".into());
        }
        let mut at = src;
        for id in &route.0 {
            let Some(link) = self.link(id) else {
                return bad(format!("unknown link `{id}`"));
            };
            if &link.src != at {
                return bad(format!("link `{id}` does not start at `{at}`"));
            }
            at = &link.dst;
        }
        if at != dst {
            return bad(format!("route ends at `{at}`, expected `{dst}`"));
        }
        for end in [src, dst] {
            match self.node(end) {
                Some(n) if n.kind == NodeKind::Endpoint => {}
                _ => return bad(format!("`{end}` is not an endpoint")),
            }
        }
        Ok(())
    }
}

/// Ordered list of dataflow links from source to destination.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Route(pub Vec<LinkId>);

impl Route {
    pub fn links(&self) -> &[LinkId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criticality {
    Critical,
    NonCritical,
}

impl Criticality {
    pub fn is_critical(self) -> bool {
        self == Criticality::Critical
    }
}

/// One original single-frame flow.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flow {
    pub id: FlowId,
    pub criticality: Criticality,
    /// ns
    pub period: Nanos,
    /// ns, relative to each release
    pub deadline: Nanos,
    /// bytes
    pub payload: u32,
    pub src: NodeId,
    pub dst: NodeId,
    pub route: Route,
}

impl Flow {
    /// Intrinsic invariants; `validate_in` additionally checks the route.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, msg: String| {
            Err(Error::InvalidFlow {
                flow: self.id,
                field,
                msg,
            })
        };
        if self.period == 0 {
            return bad("period", "must be positive".into());
        }
        if self.deadline == 0 {
            return bad("deadline", "must be positive".into());
        }
        if self.deadline > self.period {
            return bad(
                "deadline",
                format!("{} ns exceeds period {} ns", self.deadline, self.period),
            );
        }
        if !(1..=MAX_PAYLOAD).contains(&self.payload) {
            return bad("payload", format!("{} B outside 1..={MAX_PAYLOAD}", self.payload));
        }
        if self.route.is_empty() {
            return bad("route", "must not be empty".into());
        }
        Ok(())
    }

    pub fn validate_in(&self, topo: &Topology) -> Result<()> {
        self.validate()?;
        topo.validate_route(&self.route, &self.src, &self.dst)
            .map_err(|e| Error::InvalidFlow {
                flow: self.id,
                field: "route",
                msg: e.to_string(),
            })
    }
}

/// A schedulable unit: one or more flows sharing a route, sent as one frame.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateFrame {
    pub id: FrameId,
    pub members: Vec<Flow>,
    pub period: Nanos,
    pub deadline: Nanos,
    pub payload: u32,
    pub src: NodeId,
    pub dst: NodeId,
    pub route: Route,
    pub contains_critical: bool,
}

impl AggregateFrame {
    /// Derives period (gcd), deadline (min) and payload (sum) from `members`.
    /// Callers are responsible for the sharing and harmonicity preconditions;
    /// see [`AggregateFrame::check`].
    pub fn from_members(id: FrameId, members: Vec<Flow>) -> Self {
        assert!(!members.is_empty(), "aggregate needs at least one member");
        let first = &members[0];
        AggregateFrame {
            id,
            period: members.iter().map(|f| f.period).reduce(|a, b| a.gcd(&b)).unwrap(),
            deadline: members.iter().map(|f| f.deadline).min().unwrap(),
            payload: members.iter().map(|f| f.payload).sum(),
            src: first.src.clone(),
            dst: first.dst.clone(),
            route: first.route.clone(),
            contains_critical: members.iter().any(|f| f.criticality.is_critical()),
            members,
        }
    }

    /// Wraps one flow unchanged.
    pub fn singleton(id: FrameId, flow: Flow) -> Self {
        Self::from_members(id, vec![flow])
    }

    pub fn member_ids(&self) -> impl Iterator<Item = FlowId> + '_ {
        self.members.iter().map(|f| f.id)
    }

    pub fn non_critical_count(&self) -> usize {
        self.members
            .iter()
            .filter(|f| !f.criticality.is_critical())
            .count()
    }

    /// Full invariant check, independent of how the frame was built.
    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidAggregate { frame: self.id, msg });
        if self.members.is_empty() {
            return bad("no members".into());
        }
        let sum: u32 = self.members.iter().map(|f| f.payload).sum();
        if sum != self.payload {
            return bad(format!("payload {} != member sum {sum}", self.payload));
        }
        if self.payload > MAX_PAYLOAD {
            return bad(format!("payload {} exceeds {MAX_PAYLOAD}", self.payload));
        }
        let periods: Vec<Nanos> = self.members.iter().map(|f| f.period).collect();
        let gcd = periods.iter().copied().reduce(|a, b| a.gcd(&b)).unwrap();
        if gcd != self.period {
            return bad(format!("period {} != gcd {gcd}", self.period));
        }
        if !is_harmonic(&periods)? {
            return bad("member periods are not harmonic".into());
        }
        let min = self.members.iter().map(|f| f.deadline).min().unwrap();
        if min != self.deadline {
            return bad(format!("deadline {} != min {min}", self.deadline));
        }
        for f in &self.members {
            if f.src != self.src || f.dst != self.dst || f.route != self.route {
                return bad(format!("member {} has a different src/dst/route", f.id));
            }
        }
        let crit = self.members.iter().any(|f| f.criticality.is_critical());
        if crit != self.contains_critical {
            return bad("contains_critical flag is stale".into());
        }
        Ok(())
    }
}

/// One occupied interval on one link for one frame instance.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TransmissionWindow {
    pub link: LinkId,
    pub frame: FrameId,
    pub instance: u64,
    pub start: Nanos,
    pub end: Nanos,
}

/// `ceil((payload + overhead) * 8e9 / rate)`.
pub fn transmission_duration(payload: u32, overhead: u32, rate_bps: u64) -> Result<Nanos> {
    if rate_bps == 0 {
        return Err(Error::InvalidParameter("link rate must be positive".into()));
    }
    let bits = (u128::from(payload) + u128::from(overhead)) * 8 * 1_000_000_000;
    Ok(bits.div_ceil(u128::from(rate_bps)) as Nanos)
}

/// True iff every pair of periods divides one way or the other.
pub fn is_harmonic(periods: &[Nanos]) -> Result<bool> {
    if periods.is_empty() {
        return Err(Error::InvalidParameter("empty period set".into()));
    }
    if periods.contains(&0) {
        return Err(Error::InvalidParameter("periods must be positive".into()));
    }
    // Harmonic iff the sorted sequence is a divisor chain.
    let mut sorted = periods.to_vec();
    sorted.sort_unstable();
    Ok(sorted.windows(2).all(|w| w[1] % w[0] == 0))
}

/// Least common multiple of the periods.
pub fn hyperperiod(periods: impl IntoIterator<Item = Nanos>) -> Result<Nanos> {
    let mut acc: Option<Nanos> = None;
    for p in periods {
        if p == 0 {
            return Err(Error::InvalidParameter("periods must be positive".into()));
        }
        acc = Some(acc.map_or(p, |a| a.lcm(&p)));
    }
    acc.ok_or_else(|| Error::InvalidParameter("empty period set".into()))
}
